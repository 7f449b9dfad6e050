#include "mssl/spike_slab.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>

namespace mssl {

namespace {

void check_mix(double l1, double l0) {
  if (!(l1 > 0) || !(l0 >= l1)) {
    throw validation_error("spike/slab mixture requires lambda0 >= lambda1 > 0");
  }
}

double check_fraction(double theta, bool allow_boundary, const char* name) {
  if (allow_boundary) {
    if (theta < 0.0 || theta > 1.0) {
      throw validation_error(std::string(name) + " must lie in [0,1]");
    }
  } else if (!(theta > 0.0 && theta < 1.0)) {
    throw validation_error(std::string(name) + " must lie in (0,1)");
  }
  return theta;
}

// log(theta l1 e^{-l1 |x|} + (1-theta) l0 e^{-l0 |x|}), dominant term factored out.
double log_mix(double absx, double theta, double l1, double l0) {
  const double a1 = std::log(theta * l1) - l1 * absx;
  const double a0 = std::log((1.0 - theta) * l0) - l0 * absx;
  const double m = std::max(a1, a0);
  return m + std::log(std::exp(a1 - m) + std::exp(a0 - m));
}

double pstar_impl(double x, double theta, double l1, double l0) {
  const double absx = std::abs(x);
  const double a1 = std::log(theta * l1) - l1 * absx;
  const double a0 = std::log((1.0 - theta) * l0) - l0 * absx;
  const double m = std::max(a1, a0);
  const double e1 = std::exp(a1 - m);
  const double e0 = std::exp(a0 - m);
  return e1 / (e1 + e0);
}

}  // namespace

double pstar(double x, double theta, const BetaMixture& mix, bool allow_boundary) {
  check_mix(mix.lambda1, mix.lambda0);
  check_fraction(theta, allow_boundary, "theta");
  if (theta == 0.0) return 0.0;
  if (theta == 1.0) return 1.0;
  return pstar_impl(x, theta, mix.lambda1, mix.lambda0);
}

double qstar(double x, double eta, const OmegaMixture& mix, bool allow_boundary) {
  check_mix(mix.xi1, mix.xi0);
  check_fraction(eta, allow_boundary, "eta");
  if (eta == 0.0) return 0.0;
  if (eta == 1.0) return 1.0;
  return pstar_impl(x, eta, mix.xi1, mix.xi0);
}

double lambda_star(double x, double theta, const BetaMixture& mix, bool allow_boundary) {
  const double p = pstar(x, theta, mix, allow_boundary);
  return mix.lambda1 * p + mix.lambda0 * (1.0 - p);
}

double xi_star(double x, double eta, const OmegaMixture& mix, bool allow_boundary) {
  const double p = qstar(x, eta, mix, allow_boundary);
  return mix.xi1 * p + mix.xi0 * (1.0 - p);
}

double pen_beta(double x, double theta, const BetaMixture& mix) {
  check_mix(mix.lambda1, mix.lambda0);
  check_fraction(theta, false, "theta");
  const double absx = std::abs(x);
  return log_mix(absx, theta, mix.lambda1, mix.lambda0) -
         log_mix(0.0, theta, mix.lambda1, mix.lambda0);
}

double delta_upper(double theta, double omega_kk, Index n, const BetaMixture& mix,
                   bool allow_boundary) {
  if (!(omega_kk > 0)) {
    throw validation_error("delta_upper: omega_kk must be positive");
  }
  const double nn = static_cast<double>(n);
  if (mix.lambda0 - mix.lambda1 > 2.0 * std::sqrt(nn * omega_kk)) {
    const double p0 = pstar(0.0, theta, mix, allow_boundary);
    if (p0 <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(-2.0 * nn * std::log(p0) / omega_kk) + mix.lambda1 / omega_kk;
  }
  return lambda_star(0.0, theta, mix, allow_boundary) / omega_kk;
}

double delta_lower(double theta, double omega_kk, Index n, const BetaMixture& mix,
                   bool scaled_curvature) {
  if (!(omega_kk > 0)) {
    throw validation_error("delta_lower: omega_kk must be positive");
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double l1 = mix.lambda1, l0 = mix.lambda0;
  if (l0 <= l1) return nan;
  const double nn = static_cast<double>(n);

  // Inflection point: pen''(x) = (l0-l1)^2 p(1-p) equals the quadratic
  // curvature; solve p(1-p) = c and take the root with larger |x|.
  const double curvature = scaled_curvature ? nn * omega_kk : omega_kk;
  const double c = curvature / ((l0 - l1) * (l0 - l1));
  if (c >= 0.25) return nan;
  const double p_hi = 0.5 * (1.0 + std::sqrt(1.0 - 4.0 * c));
  const double ratio = ((1.0 - theta) * l0) / (theta * l1);
  const double x_c = (std::log(ratio) + std::log(p_hi / (1.0 - p_hi))) / (l0 - l1);
  if (!(x_c > 0.0)) return nan;

  const double ls_c = lambda_star(x_c, theta, mix);
  const double p_c = pstar(x_c, theta, mix);
  const double d = -(ls_c - l1) * (ls_c - l1) - 2.0 * nn * omega_kk * std::log(p_c);
  const double p0 = pstar(0.0, theta, mix);
  const double inside = -2.0 * nn * std::log(p0) / omega_kk - d / (omega_kk * omega_kk);
  if (!(inside >= 0.0)) return nan;
  return std::sqrt(inside) + l1 / omega_kk;
}

double log_posterior(const EcmState& state, const DataSet& data, const PenaltyConfig& cfg,
                     double lambda0, double xi0) {
  const Index q = state.Omega.rows();
  Eigen::LLT<MatrixXd> llt(state.Omega);
  if (llt.info() != Eigen::Success) {
    throw numeric_error("log_posterior: Omega is not positive definite");
  }
  double logdet = 0.0;
  for (Index k = 0; k < q; ++k) {
    logdet += std::log(llt.matrixL()(k, k));
  }
  logdet *= 2.0;

  const double nn = static_cast<double>(data.n);
  double value = 0.5 * nn * logdet;
  value -= 0.5 * nn * state.S.cwiseProduct(state.Omega).sum();

  for (Index k = 0; k < state.B.cols(); ++k) {
    for (Index j = 0; j < state.B.rows(); ++j) {
      value += log_mix(std::abs(state.B(j, k)), state.theta, cfg.lambda1, lambda0);
    }
  }
  for (Index k = 0; k < q; ++k) {
    for (Index kk = 0; kk < k; ++kk) {
      value += log_mix(std::abs(state.Omega(kk, k)), state.eta, cfg.xi1, xi0);
    }
  }
  value -= cfg.xi1 * state.Omega.trace();

  value += (cfg.a_theta - 1.0) * std::log(state.theta) +
           (cfg.b_theta - 1.0) * std::log1p(-state.theta);
  value += (cfg.a_eta - 1.0) * std::log(state.eta) + (cfg.b_eta - 1.0) * std::log1p(-state.eta);
  return value;
}

}  // namespace mssl
