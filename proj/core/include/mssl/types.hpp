#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mssl {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

struct mssl_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad inputs: shapes, ranges, unreadable files.
struct validation_error : mssl_error {
  using mssl_error::mssl_error;
};

// Numerical breakdown (loss of positive definiteness and the like).
// The explorer treats these as instability, not as fatal failures.
struct numeric_error : mssl_error {
  using mssl_error::mssl_error;
};

// Column transforms applied by standardize(), kept so estimates can be
// mapped back to the original scale of the inputs.
struct Standardizer {
  VectorXd x_center;  // per-column means of X
  VectorXd x_scale;   // per-column norm/sqrt(n) of centered X
  VectorXd y_center;  // per-column means of Y
  VectorXd y_scale;   // ones unless Y was rescaled
  bool y_scaled = false;

  // Coefficients estimated on the standardized scale, expressed on the
  // original scale of the inputs.
  MatrixXd coefficients_to_original(const MatrixXd& B_std) const;
  // Intercepts implied by centering, given original-scale coefficients.
  VectorXd intercepts(const MatrixXd& B_original) const;
  // Precision matrix mapped back to the original response scale.
  MatrixXd precision_to_original(const MatrixXd& Omega_std) const;
};

// Predictors with mean-zero, norm-sqrt(n) columns and centered responses.
struct DataSet {
  MatrixXd X;  // n x p
  MatrixXd Y;  // n x q
  Index n = 0, p = 0, q = 0;
  Standardizer scaling;
};

// Centers and scales raw inputs. X columns are centered and scaled to
// Euclidean norm sqrt(n); Y columns are centered, and additionally scaled
// to norm sqrt(n) when scale_y is set.
// Throws validation_error on a constant X column (named by index) or n < 2.
DataSet standardize(const MatrixXd& raw_X, const MatrixXd& raw_Y, bool scale_y = false);

// Current model state: coefficients, precision matrix, the two slab
// fractions, and cached residual quantities R = Y - X B, S = R'R / n.
struct EcmState {
  MatrixXd B;      // p x q
  double theta = 0.5;
  MatrixXd Omega;  // q x q, symmetric positive definite
  double eta = 0.5;
  MatrixXd R;      // n x q
  MatrixXd S;      // q x q

  static EcmState cold_start(const DataSet& data);
  void refresh_residuals(const DataSet& data);
};

struct PenaltyConfig {
  double lambda1 = 1.0;
  double xi1 = 1.0;
  std::vector<double> lambda_ladder;  // strictly increasing spike penalties
  std::vector<double> xi_ladder;
  double a_theta = 1.0, b_theta = 1.0;
  double a_eta = 1.0, b_eta = 1.0;

  void validate() const;  // throws validation_error
};

struct FitOptions {
  double tol = 1e-3;
  int max_iter_ecm = 500;
  int max_iter_cd = 500;
  int max_iter_newton = 50;
  double cond_cap_multiplier = 10.0;  // stability guard: cond(S) <= multiplier * n
  bool verbose = false;
};

// Number of nonzero entries of B and of the strict upper triangle of Omega.
// zero_tol = 0 counts exact nonzeros; the update rules produce exact zeros.
std::pair<Index, Index> support_counts(const EcmState& state, double zero_tol = 0.0);

// Compact bit masks of nonzero patterns, used to compare supports across
// grid cells without retaining full states.
std::vector<std::uint64_t> support_mask(const MatrixXd& M, double zero_tol = 0.0);
std::vector<std::uint64_t> support_mask_upper(const MatrixXd& M, double zero_tol = 0.0);

struct EcmIterationRecord {
  int iteration = 0;
  double objective = 0.0;       // log posterior at the current spike penalties
  double max_rel_change = 0.0;  // over all B and Omega entries
  Index b_nnz = 0;
  Index omega_nnz = 0;
  double elapsed_sec = 0.0;
};

// The objective column is nondecreasing over iterations up to roundoff.
struct EcmTrace {
  std::vector<EcmIterationRecord> records;
  bool converged = false;
  int iterations = 0;
};

enum class FitStatus { converged, max_iterations, unstable };

// One fitted mode of the penalty grid.
struct ModeCell {
  int s = 0, t = 0;  // 1-based ladder indices; 0 marks conditional path stages
  double lambda0 = 0.0, xi0 = 0.0;
  Index b_nnz = 0, omega_nnz = 0;
  std::vector<std::uint64_t> b_mask, omega_mask;
  double log_posterior_terminal = 0.0;  // at the terminal ladder penalties
  bool stable = true;
  bool converged = false;
  int warm_source = -1;  // cell index of the warm start, -1 for a cold start
  std::vector<std::pair<int, double>> warm_candidates;  // (cell, log-posterior at this cell's penalties)
  int iterations = 0;
  double wall_time_sec = 0.0;
  EcmTrace trace;  // empty for conditional-path rungs, which are not full fits
};

struct ModeGrid {
  int n_lambda = 0, n_xi = 0;
  std::vector<ModeCell> cells;
  int final_index = -1;  // exactly one final mode
  EcmState final_state;
  double reference_log_posterior = 0.0;  // cold state, terminal penalties
  bool states_kept = false;
  std::vector<EcmState> states;  // populated only when requested

  int cell_index(int s, int t) const;
  const ModeCell& final_cell() const;
};

}  // namespace mssl
