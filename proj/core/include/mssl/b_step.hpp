#pragma once

#include "mssl/spike_slab.hpp"
#include "mssl/types.hpp"

namespace mssl {

using RowMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Scratch state for the coordinate ascent over B. xr tracks X'R
// incrementally; gram is X'X, fixed per dataset.
struct BStepWorkspace {
  MatrixXd gram;        // p x p
  RowMatrixXd xr;       // p x q, equals X'R whenever exposed
  MatrixXd w;           // q x q, w.col(k) = Omega.col(k) / Omega(k,k)
  VectorXd delta_u;     // per-column hard-exclusion thresholds
  std::vector<std::vector<Index>> active_set;  // nonzero rows per column

  void init(const DataSet& data, const EcmState& state);
  void rebuild_xr(const DataSet& data, const EcmState& state);
  void prepare_omega(const MatrixXd& Omega);
  void refresh_thresholds(const MatrixXd& Omega, double theta, Index n, const BetaMixture& mix);
  void sync_active_set(const MatrixXd& B);
};

// z_jk = n beta_jk + sum_k' (omega_kk'/omega_kk) x_j' r_k'. The statistic is
// invariant in the coordinate's own value. Throws if omega_kk <= 0.
double compute_z(const EcmState& state, const BStepWorkspace& ws, Index j, Index k);

// One coordinate move: soft threshold at lambda_star(beta_old)/omega_kk,
// gated by |z| > delta_u. Updates B, R and X'R in place; returns the new
// value. A cheap objective guard rejects the rare non-ascending move and
// substitutes the one-dimensional stationary point instead.
double update_entry(const DataSet& data, EcmState& state, BStepWorkspace& ws, Index j, Index k,
                    double theta, const BetaMixture& mix);

struct SweepResult {
  double max_abs_change = 0.0;
  int updates = 0;
};

// One row-major pass over all (j, k).
SweepResult sweep_B(const DataSet& data, EcmState& state, BStepWorkspace& ws, double theta,
                    const BetaMixture& mix);

struct AscentResult {
  bool converged = false;
  int sweeps = 0;
};

// Cycles full sweeps at fixed theta until the largest absolute change in a
// sweep drops below tol * (1 + max|beta|), or max_iter_cd sweeps.
AscentResult refined_coordinate_ascent(const DataSet& data, EcmState& state, BStepWorkspace& ws,
                                       double theta, const BetaMixture& mix,
                                       const FitOptions& opts);

struct ThetaResult {
  double theta = 0.5;
  bool boundary = false;  // no interior stationary point; clamped maximizer
  double grad = 0.0;      // g'(theta) at the returned value
  int iterations = 0;
};

// Maximizes the theta terms of the posterior by safeguarded Newton. g is
// concave for a,b >= 1, so bisection on the bracket always recovers.
// Stops at |g'| < 1e-8 * (number of coefficients).
ThetaResult update_theta(const MatrixXd& B, const BetaMixture& mix, double a_theta, double b_theta,
                         double theta_init, const FitOptions& opts);

struct CmStepBResult {
  bool converged = false;
  int iterations = 0;
  bool theta_boundary = false;
};

// Conditional maximization over (B, theta) with (Omega, eta) held fixed.
// theta is refreshed before every full coordinate sweep. Leaves the state's
// residual caches current.
CmStepBResult cm_step_B(const DataSet& data, EcmState& state, BStepWorkspace& ws,
                        const PenaltyConfig& cfg, double lambda0, const FitOptions& opts);

}  // namespace mssl
