#pragma once

#include "mssl/ecm.hpp"
#include "mssl/types.hpp"

namespace mssl {

enum class LadderScale { linear, log };

struct LadderSpec {
  LadderScale scale = LadderScale::linear;
  double lo = 0.0, hi = 0.0;
  int length = 1;

  std::vector<double> build() const;  // strictly increasing, throws otherwise
};

// Hyper-parameter presets 1..12. Presets 1-6 use fixed penalty ranges
// ([10, n] for the coefficient spikes, [0.1 n, n] for the precision spikes,
// xi1 = 0.01 n); presets 7-12 derive the endpoints from the data
// (max_jk |x_j' y_k| and max |Y'Y| / n). Even-numbered variants differ in
// the sparsity hyper-parameters b_theta, b_eta; presets 4-6 and 10-12 space
// the ladders on the log scale.
PenaltyConfig default_ladders(int setting, const DataSet& data);

// cond2(S) <= multiplier * n, via symmetric eigenvalues. A singular S has
// infinite condition number and is unstable.
bool check_stability(const MatrixXd& S, Index n, double multiplier);

struct ExplorerOptions {
  FitOptions fit;
  bool xi_outer = false;    // traverse the grid with the xi ladder outermost
  bool keep_states = false; // retain every cell state in the grid
};

// Dynamic posterior exploration over the full ladder grid. Each cell warm
// starts from the stable neighbor (s-1,t), (s,t-1), (s-1,t-1) with the
// largest log posterior at the cell's penalties; if none is stable the cell
// restarts cold from B = 0, Omega = I. Unstable modes are flagged and never
// propagated. The final mode is the terminal cell (L, L).
ModeGrid dpe(const DataSet& data, const PenaltyConfig& cfg, const ExplorerOptions& opts);

struct DcpeResult {
  EcmState state;
  ModeGrid grid;
  FitStatus status = FitStatus::converged;
};

// Conditional variant: (i) a (B, theta) path along the lambda ladder with
// Omega = I held fixed, (ii) an (Omega, eta) path along the xi ladder with
// B held at the stage-(i) terminal value, (iii) one full ECM fit from the
// combined warm start at the terminal penalties.
DcpeResult dcpe(const DataSet& data, const PenaltyConfig& cfg, const ExplorerOptions& opts);

struct SepResult {
  EcmState state;
  std::vector<double> column_thetas;  // per-response slab fractions from stage (i)
  ModeGrid grid;
  FitStatus status = FitStatus::converged;
};

// Column-by-column baseline: an independent univariate spike-and-slab lasso
// path over the lambda ladder for each response (Omega = [1]), then the
// (Omega, eta) path of dcpe stage (ii) holding the assembled B fixed.
SepResult sep_ssl_ssg(const DataSet& data, const PenaltyConfig& cfg, const ExplorerOptions& opts);

struct StabilizationCell {
  int s = 0, t = 0;
  double lambda0 = 0.0, xi0 = 0.0;
  Index b_nnz = 0, omega_nnz = 0;
  bool stable = true;
  bool matches_final = false;  // supports of B and Omega identical to the final mode
  double norm_ratio = 0.0;     // normalized log-posterior ratio at terminal penalties
};

struct StabilizationReport {
  std::vector<StabilizationCell> cells;
  int trailing_row_run = 0;    // trailing cells of the terminal row sharing the final support
  int trailing_col_run = 0;
  int trailing_square = 0;     // largest k with all of {s > L-k, t > L-k} matching
};

StabilizationReport stabilization_report(const ModeGrid& grid);

}  // namespace mssl
