#include "mssl/b_step.hpp"

#include <algorithm>
#include <cmath>

namespace mssl {

namespace {

constexpr double kOmegaDiagFloor = 1e-8;
constexpr int kResidualRefreshInterval = 50;  // sweeps between full recomputations

double soft(double z, double thr) {
  const double a = std::abs(z) - thr;
  return a > 0.0 ? std::copysign(a, z) : 0.0;
}

// Largest fixed point of b -> soft(z, lambda_star(b)/omega)/n, reached by
// iterating down from the unpenalized value |z|/n. The map is monotone in
// |b|, so the iterates decrease to the top stationary point (or to zero).
double descend_to_fixed_point(double z, double omega_kk, double n, double theta,
                              const BetaMixture& mix) {
  double b = std::abs(z) / n;
  for (int i = 0; i < 200; ++i) {
    const double next = std::max(std::abs(z) - lambda_star(b, theta, mix) / omega_kk, 0.0) / n;
    if (std::abs(next - b) < 1e-15 * (1.0 + b)) {
      b = next;
      break;
    }
    b = next;
    if (b == 0.0) break;
  }
  return std::copysign(b, z);
}

// Change of the conditional objective when one coordinate moves from b_old
// to b_new; z is invariant in the coordinate's own value, so this is exact.
double coordinate_gain(double b_old, double b_new, double z, double omega_kk, double n,
                       double theta, const BetaMixture& mix) {
  const double d = b_new - b_old;
  double gain = omega_kk * (d * (z - n * b_old) - 0.5 * n * d * d);
  gain += pen_beta(b_new, theta, mix) - pen_beta(b_old, theta, mix);
  return gain;
}

}  // namespace

void BStepWorkspace::init(const DataSet& data, const EcmState& state) {
  gram = data.X.transpose() * data.X;
  rebuild_xr(data, state);
  sync_active_set(state.B);
  w.resize(0, 0);
  delta_u.resize(0);
}

void BStepWorkspace::rebuild_xr(const DataSet& data, const EcmState& state) {
  xr = data.X.transpose() * state.R;
}

void BStepWorkspace::prepare_omega(const MatrixXd& Omega) {
  const Index q = Omega.cols();
  w.resize(q, q);
  for (Index k = 0; k < q; ++k) {
    const double dk = std::max(Omega(k, k), kOmegaDiagFloor);
    w.col(k) = Omega.col(k) / dk;
  }
}

void BStepWorkspace::refresh_thresholds(const MatrixXd& Omega, double theta, Index n,
                                        const BetaMixture& mix) {
  const Index q = Omega.cols();
  delta_u.resize(q);
  for (Index k = 0; k < q; ++k) {
    delta_u(k) = delta_upper(theta, std::max(Omega(k, k), kOmegaDiagFloor), n, mix);
  }
}

void BStepWorkspace::sync_active_set(const MatrixXd& B) {
  active_set.assign(static_cast<std::size_t>(B.cols()), {});
  for (Index k = 0; k < B.cols(); ++k) {
    for (Index j = 0; j < B.rows(); ++j) {
      if (B(j, k) != 0.0) active_set[static_cast<std::size_t>(k)].push_back(j);
    }
  }
}

double compute_z(const EcmState& state, const BStepWorkspace& ws, Index j, Index k) {
  const double omega_kk = state.Omega(k, k);
  if (!(omega_kk > 0)) {
    throw validation_error("compute_z: omega_kk must be positive");
  }
  const Index q = state.Omega.cols();
  double acc = 0.0;
  for (Index kk = 0; kk < q; ++kk) {
    acc += state.Omega(k, kk) / omega_kk * ws.xr(j, kk);
  }
  const double n = static_cast<double>(state.R.rows());
  return n * state.B(j, k) + acc;
}

double update_entry(const DataSet& data, EcmState& state, BStepWorkspace& ws, Index j, Index k,
                    double theta, const BetaMixture& mix) {
  const double n = static_cast<double>(data.n);
  const double omega_kk = std::max(state.Omega(k, k), kOmegaDiagFloor);
  const double b_old = state.B(j, k);
  const double z = n * b_old + ws.xr.row(j).dot(ws.w.col(k));
  const double az = std::abs(z);
  const double du = ws.delta_u(k);

  double b_new;
  if (az <= du) {
    b_new = 0.0;
  } else {
    b_new = soft(z, lambda_star(b_old, theta, mix) / omega_kk) / n;
    if (b_new == 0.0) {
      // |z| clears the exclusion threshold but the penalty at the stale
      // value clamps the soft step; land on the self-consistent value.
      b_new = descend_to_fixed_point(z, omega_kk, n, theta, mix);
    }
  }

  if (b_new == b_old) return b_old;

  double gain = coordinate_gain(b_old, b_new, z, omega_kk, n, theta, mix);
  if (gain < -1e-10 * (1.0 + az)) {
    // Rare: the stale-penalty step overshoots. Choose the best admissible
    // candidate by direct objective comparison.
    const double fp = descend_to_fixed_point(z, omega_kk, n, theta, mix);
    double best = b_old;
    double best_gain = 0.0;
    auto consider = [&](double cand) {
      if (cand == 0.0 && az > du) return;  // zeros are admissible only below the threshold
      const double g = coordinate_gain(b_old, cand, z, omega_kk, n, theta, mix);
      if (g > best_gain) {
        best_gain = g;
        best = cand;
      }
    };
    consider(b_new);
    consider(fp);
    if (az <= du) consider(0.0);
    b_new = best;
    if (b_new == b_old) return b_old;
  }

  const double d = b_new - b_old;
  state.B(j, k) = b_new;
  state.R.col(k).noalias() -= d * data.X.col(j);
  ws.xr.col(k).noalias() -= d * ws.gram.col(j);
  return b_new;
}

SweepResult sweep_B(const DataSet& data, EcmState& state, BStepWorkspace& ws, double theta,
                    const BetaMixture& mix) {
  SweepResult r;
  for (Index j = 0; j < data.p; ++j) {
    for (Index k = 0; k < data.q; ++k) {
      const double before = state.B(j, k);
      const double after = update_entry(data, state, ws, j, k, theta, mix);
      if (after != before) {
        r.max_abs_change = std::max(r.max_abs_change, std::abs(after - before));
        ++r.updates;
      }
    }
  }
  return r;
}

AscentResult refined_coordinate_ascent(const DataSet& data, EcmState& state, BStepWorkspace& ws,
                                       double theta, const BetaMixture& mix,
                                       const FitOptions& opts) {
  ws.prepare_omega(state.Omega);
  ws.refresh_thresholds(state.Omega, theta, data.n, mix);
  AscentResult res;
  int since_refresh = 0;
  for (int sweep = 0; sweep < opts.max_iter_cd; ++sweep) {
    const SweepResult sr = sweep_B(data, state, ws, theta, mix);
    res.sweeps = sweep + 1;
    if (++since_refresh >= kResidualRefreshInterval) {
      state.refresh_residuals(data);
      ws.rebuild_xr(data, state);
      since_refresh = 0;
    }
    const double scale = 1.0 + state.B.cwiseAbs().maxCoeff();
    if (sr.max_abs_change < opts.tol * scale) {
      res.converged = true;
      break;
    }
  }
  state.refresh_residuals(data);
  ws.rebuild_xr(data, state);
  ws.sync_active_set(state.B);
  return res;
}

ThetaResult update_theta(const MatrixXd& B, const BetaMixture& mix, double a_theta, double b_theta,
                         double theta_init, const FitOptions& opts) {
  const double l1 = mix.lambda1, l0 = mix.lambda0;
  const double count = static_cast<double>(B.size());
  const double grad_tol = 1e-8 * std::max(count, 1.0);
  const double lo = 1e-12, hi = 1.0 - 1e-12;

  // Mixture densities do not depend on theta; evaluate them once. Zero
  // entries all share the pair (l1, l0).
  std::vector<std::pair<double, double>> dens;
  dens.reserve(static_cast<std::size_t>(B.size()));
  double n_zero = 0.0;
  for (Index k = 0; k < B.cols(); ++k) {
    for (Index j = 0; j < B.rows(); ++j) {
      const double ab = std::abs(B(j, k));
      if (ab == 0.0) {
        n_zero += 1.0;
      } else {
        dens.emplace_back(l1 * std::exp(-l1 * ab), l0 * std::exp(-l0 * ab));
      }
    }
  }

  auto grad = [&](double th) {
    double g = (a_theta - 1.0) / th - (b_theta - 1.0) / (1.0 - th);
    g += n_zero * (l1 - l0) / (th * l1 + (1.0 - th) * l0);
    for (const auto& [da, db] : dens) {
      g += (da - db) / (th * da + (1.0 - th) * db);
    }
    return g;
  };
  auto curvature = [&](double th) {  // g'' <= 0 for a,b >= 1
    double g = -(a_theta - 1.0) / (th * th) - (b_theta - 1.0) / ((1.0 - th) * (1.0 - th));
    double d0 = th * l1 + (1.0 - th) * l0;
    g -= n_zero * (l1 - l0) * (l1 - l0) / (d0 * d0);
    for (const auto& [da, db] : dens) {
      const double d = th * da + (1.0 - th) * db;
      g -= (da - db) * (da - db) / (d * d);
    }
    return g;
  };

  ThetaResult res;
  const double g_lo = grad(lo);
  if (g_lo <= 0.0) {  // g is concave decreasing: maximizer at the low clamp
    res.theta = lo;
    res.boundary = true;
    res.grad = g_lo;
    return res;
  }
  const double g_hi = grad(hi);
  if (g_hi >= 0.0) {
    res.theta = hi;
    res.boundary = true;
    res.grad = g_hi;
    return res;
  }

  double a = lo, b = hi;
  double th = std::clamp(theta_init, lo, hi);
  double g = grad(th);
  const int max_iter = std::max(opts.max_iter_newton, 30);
  for (int it = 0; it < max_iter; ++it) {
    res.iterations = it + 1;
    if (std::abs(g) < grad_tol) break;
    if (g > 0.0) {
      a = th;
    } else {
      b = th;
    }
    const double curv = curvature(th);
    double next = (curv < 0.0) ? th - g / curv : 0.5 * (a + b);
    if (!(next > a && next < b)) next = 0.5 * (a + b);
    th = next;
    g = grad(th);
  }
  res.theta = th;
  res.grad = g;
  return res;
}

CmStepBResult cm_step_B(const DataSet& data, EcmState& state, BStepWorkspace& ws,
                        const PenaltyConfig& cfg, double lambda0, const FitOptions& opts) {
  const BetaMixture mix{cfg.lambda1, lambda0};
  ws.prepare_omega(state.Omega);
  CmStepBResult res;
  int since_refresh = 0;
  for (int it = 0; it < opts.max_iter_cd; ++it) {
    const ThetaResult th = update_theta(state.B, mix, cfg.a_theta, cfg.b_theta, state.theta, opts);
    const double theta_change = std::abs(th.theta - state.theta) / std::max(state.theta, 1.0);
    state.theta = th.theta;
    res.theta_boundary = th.boundary;

    ws.refresh_thresholds(state.Omega, state.theta, data.n, mix);
    const SweepResult sr = sweep_B(data, state, ws, state.theta, mix);
    res.iterations = it + 1;
    if (++since_refresh >= kResidualRefreshInterval) {
      state.refresh_residuals(data);
      ws.rebuild_xr(data, state);
      since_refresh = 0;
    }
    const double scale = 1.0 + state.B.cwiseAbs().maxCoeff();
    if (std::max(sr.max_abs_change / scale, theta_change) < opts.tol) {
      res.converged = true;
      break;
    }
  }
  state.refresh_residuals(data);
  ws.rebuild_xr(data, state);
  ws.sync_active_set(state.B);
  return res;
}

}  // namespace mssl
