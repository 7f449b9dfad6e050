#pragma once

#include "mssl/types.hpp"

namespace mssl {

// Laplace spike/slab pair for regression coefficients: slab rate lambda1,
// spike rate lambda0 >= lambda1.
struct BetaMixture {
  double lambda1 = 1.0;
  double lambda0 = 1.0;
};

// Same thing for the off-diagonal precision entries.
struct OmegaMixture {
  double xi1 = 1.0;
  double xi0 = 1.0;
};

/// Posterior probability that x was drawn from the slab.
/// Stable for |x| up to 1e4; the dominant exponential is factored out.
/// theta must lie in (0,1) unless allow_boundary, in which case the limits
/// 0 and 1 are returned at the boundaries.
double pstar(double x, double theta, const BetaMixture& mix, bool allow_boundary = false);
double qstar(double x, double eta, const OmegaMixture& mix, bool allow_boundary = false);

/// Adaptive penalty lambda1 * pstar + lambda0 * (1 - pstar); lies in
/// [lambda1, lambda0], nonincreasing in |x|.
double lambda_star(double x, double theta, const BetaMixture& mix, bool allow_boundary = false);
double xi_star(double x, double eta, const OmegaMixture& mix, bool allow_boundary = false);

/// log of the prior density ratio pi(x|theta)/pi(0|theta). Zero at x = 0,
/// nonpositive, with d/dx pen_beta = -lambda_star(x) * sign(x) for x != 0.
double pen_beta(double x, double theta, const BetaMixture& mix);

/// Hard-exclusion threshold for one coordinate. When the spike and slab are
/// well separated, (lambda0 - lambda1) > 2 sqrt(n * omega_kk), returns
///   sqrt(-2 n log pstar(0,theta) / omega_kk) + lambda1 / omega_kk;
/// otherwise falls back to the plain soft threshold lambda_star(0) / omega_kk.
double delta_upper(double theta, double omega_kk, Index n, const BetaMixture& mix,
                   bool allow_boundary = false);

/// Companion lower bound, diagnostic only. The inflection point solves
/// pen''(x) = n * omega_kk when scaled_curvature (default), or = omega_kk
/// otherwise. Returns NaN when the bound is undefined for the parameters.
double delta_lower(double theta, double omega_kk, Index n, const BetaMixture& mix,
                   bool scaled_curvature = true);

/// Observed-data log posterior, up to an additive constant, at the given
/// spike penalties. Requires the state's residual caches to be current.
/// Throws numeric_error when Omega is not positive definite.
double log_posterior(const EcmState& state, const DataSet& data, const PenaltyConfig& cfg,
                     double lambda0, double xi0);

}  // namespace mssl
