#pragma once

#include "mssl/types.hpp"

#include <cstdint>
#include <string>

namespace mssl {

struct SimScenario {
  Index n = 100, p = 50, q = 25;
  double rho = 0.9;      // residual AR(1) parameter
  double rho_x = 0.7;    // predictor AR(1) parameter
  double b_density = 0.2;
  double b_min = -2.0, b_max = 2.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// AR(1) covariance (rho^|k-k'|) and its tridiagonal inverse in closed form.
MatrixXd ar1_covariance(Index dim, double rho);
MatrixXd ar1_precision(Index dim, double rho);

struct SimulatedData {
  DataSet data;     // standardized
  MatrixXd X_raw;   // the draws before standardization
  MatrixXd Y_raw;
  MatrixXd B0;      // ground truth on the raw scale
  MatrixXd Omega0;
};

// Draws X with AR(1)-correlated rows, a coefficient matrix with
// round(p*q*b_density) uniformly placed Uniform[b_min, b_max] entries, and
// AR(1)-correlated residuals. The coefficient structure comes from a stream
// keyed only by the seed; X and E come from a per-replication stream, so
// replications share B0 and Omega0 but redraw the noise (and the design,
// unless fix_design).
SimulatedData generate(const SimScenario& scn, int replication = 0, bool fix_design = false);

struct RecoveryMetrics {
  long tp = 0, tn = 0, fp = 0, fn = 0;
  double sen = 0, spe = 0, prec = 0, acc = 0, mcc = 0;  // NaN when undefined
  double mse = 0;   // mean squared error, unscaled
  double frob = 0;  // squared Frobenius error
};

enum class SupportMode { B, OmegaUpper };

// Confusion counts of nonzero-vs-zero entries and the derived rates.
// OmegaUpper assesses the strict upper triangle only. Ratios with a zero
// denominator are NaN, as are MCC values with a zero factor.
RecoveryMetrics score_support(const MatrixXd& estimate, const MatrixXd& truth, SupportMode mode);

// (pq)^-1 sum of squared coefficient errors (tables report this x1000).
double score_estimation_mse(const MatrixXd& B_hat, const MatrixXd& B0);
// Squared Frobenius error over all q^2 entries.
double score_estimation_frob(const MatrixXd& Omega_hat, const MatrixXd& Omega0);

// Plain key = value scenario files naming the SimScenario fields.
SimScenario load_scenario(const std::string& path);
void save_scenario(const SimScenario& scn, const std::string& path);

}  // namespace mssl
