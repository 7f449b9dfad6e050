#include "mssl/omega_step.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>

namespace mssl {

namespace {

constexpr double kInteriorMargin = 1e-12;
constexpr double kOmegaDiagFloor = 1e-8;
constexpr double kLassoTol = 1e-11;
constexpr int kLassoMaxPasses = 500;

double soft(double z, double thr) {
  const double a = std::abs(z) - thr;
  return a > 0.0 ? std::copysign(a, z) : 0.0;
}

// Maximized objective:
//   (n/2) log|Omega| - (n/2) tr(S Omega) - sum_{k != k'} P_kk'|omega_kk'|
//   - P_kk sum_k omega_kk.
// Returns -inf when Omega is not positive definite.
double glasso_objective(const MatrixXd& Omega, const MatrixXd& S, const MatrixXd& P, double n) {
  Eigen::LLT<MatrixXd> llt(Omega);
  if (llt.info() != Eigen::Success) {
    return -std::numeric_limits<double>::infinity();
  }
  double logdet = 0.0;
  for (Index k = 0; k < Omega.rows(); ++k) logdet += std::log(llt.matrixL()(k, k));
  logdet *= 2.0;
  // off-diagonal pairs are counted on both triangles
  double offdiag = 0.0;
  for (Index k = 0; k < Omega.rows(); ++k) {
    for (Index kk = 0; kk < k; ++kk) {
      offdiag += 2.0 * P(kk, k) * std::abs(Omega(kk, k));
    }
  }
  double diag = 0.0;
  for (Index k = 0; k < Omega.rows(); ++k) diag += P(k, k) * Omega(k, k);
  return 0.5 * n * logdet - 0.5 * n * S.cwiseProduct(Omega).sum() - offdiag - diag;
}

}  // namespace

PenaltyMatrix PenaltyMatrix::from_qstar(const MatrixXd& qstar, const OmegaMixture& mix) {
  PenaltyMatrix p;
  p.values = mix.xi1 * qstar + mix.xi0 * (MatrixXd::Ones(qstar.rows(), qstar.cols()) - qstar);
  // diagonal is exactly xi1: qstar carries ones there
  for (Index k = 0; k < p.values.rows(); ++k) p.values(k, k) = mix.xi1;
  return p;
}

EStepQ e_step_q(const MatrixXd& Omega, double eta, const OmegaMixture& mix) {
  if (Omega.rows() != Omega.cols()) {
    throw validation_error("e_step_q: Omega must be square");
  }
  const Index q = Omega.rows();
  EStepQ out;
  out.qstar = MatrixXd::Ones(q, q);
  for (Index k = 0; k < q; ++k) {
    for (Index kk = 0; kk < k; ++kk) {
      const double v = qstar(Omega(kk, k), eta, mix);
      out.qstar(kk, k) = v;
      out.qstar(k, kk) = v;
    }
  }
  out.penalties = PenaltyMatrix::from_qstar(out.qstar, mix);
  return out;
}

double update_eta(const MatrixXd& qstar, double a_eta, double b_eta, Index q) {
  const double pairs = 0.5 * static_cast<double>(q) * static_cast<double>(q - 1);
  const double denom = a_eta + b_eta - 2.0 + pairs;
  if (!(denom > 0)) {
    throw validation_error("update_eta: requires a_eta + b_eta + q(q-1)/2 > 2");
  }
  double sum = 0.0;
  for (Index k = 0; k < q; ++k) {
    for (Index kk = 0; kk < k; ++kk) sum += qstar(kk, k);
  }
  return std::clamp((a_eta - 1.0 + sum) / denom, kInteriorMargin, 1.0 - kInteriorMargin);
}

GlassoResult glasso_weighted(const MatrixXd& S, const PenaltyMatrix& penalties, Index n,
                             const MatrixXd& Omega_init, const FitOptions& opts) {
  const Index q = S.rows();
  if (S.cols() != q || penalties.values.rows() != q || penalties.values.cols() != q ||
      Omega_init.rows() != q || Omega_init.cols() != q) {
    throw validation_error("glasso_weighted: dimension mismatch");
  }
  const double nn = static_cast<double>(n);
  const MatrixXd& P = penalties.values;
  // Scale so the problem reads min -log|Omega| + tr(S Omega) + sum rho |omega|
  // with the sum over all entries.
  const MatrixXd rho = (2.0 / nn) * P;

  MatrixXd Omega = 0.5 * (Omega_init + Omega_init.transpose());
  Eigen::LLT<MatrixXd> llt(Omega);
  if (llt.info() != Eigen::Success) {
    throw validation_error("glasso_weighted: Omega_init must be positive definite");
  }

  GlassoResult res;
  if (q == 1) {
    res.Omega.resize(1, 1);
    res.Omega(0, 0) = 1.0 / (S(0, 0) + rho(0, 0));
    res.converged = true;
    res.iterations = 1;
    res.objective_trace.push_back(glasso_objective(res.Omega, S, P, nn));
    return res;
  }

  MatrixXd W = llt.solve(MatrixXd::Identity(q, q));
  MatrixXd M(q - 1, q - 1);
  VectorXd u(q - 1), s_col(q - 1), r_col(q - 1), Qu(q - 1), Mu(q - 1);
  MatrixXd Omega_prev_pass = Omega;

  const double outer_tol = 1e-9;
  int pass = 0;
  for (; pass < opts.max_iter_cd; ++pass) {
    double max_change = 0.0;
    MatrixXd Omega_before = Omega;
    for (Index t = 0; t < q; ++t) {
      // Gather the column problem, skipping index t.
      Index r = 0;
      for (Index i = 0; i < q; ++i) {
        if (i == t) continue;
        u(r) = Omega(i, t);
        s_col(r) = S(i, t);
        r_col(r) = rho(i, t);
        Index c = 0;
        for (Index jj = 0; jj < q; ++jj) {
          if (jj == t) continue;
          M(r, c) = W(i, jj) - W(i, t) * W(jj, t) / W(t, t);
          ++c;
        }
        ++r;
      }

      // Lasso on the Schur complement: min 1/2 u'Qu + s'u + sum r_i |u_i|,
      // Q = (S_tt + rho_tt) * inv(Omega_11).
      const double qscale = S(t, t) + rho(t, t);
      Qu.noalias() = qscale * (M * u);
      for (int lp = 0; lp < kLassoMaxPasses; ++lp) {
        double inner_change = 0.0;
        for (Index i = 0; i < q - 1; ++i) {
          const double qii = qscale * M(i, i);
          if (!(qii > 0)) continue;
          const double g = s_col(i) + Qu(i) - qii * u(i);
          const double unew = -soft(g, r_col(i)) / qii;
          const double d = unew - u(i);
          if (d != 0.0) {
            u(i) = unew;
            Qu.noalias() += d * qscale * M.col(i);
            inner_change = std::max(inner_change, std::abs(d));
          }
        }
        if (inner_change < kLassoTol * (1.0 + u.cwiseAbs().maxCoeff())) break;
      }

      const double c_schur = 1.0 / (S(t, t) + rho(t, t));
      Mu.noalias() = M * u;
      double quad = u.dot(Mu);
      if (quad < 0.0) quad = 0.0;  // drift guard
      const double v = c_schur + quad;

      // Write the column back and refresh W from the block inverse formulas.
      r = 0;
      for (Index i = 0; i < q; ++i) {
        if (i == t) continue;
        max_change = std::max(max_change, std::abs(Omega(i, t) - u(r)));
        Omega(i, t) = u(r);
        Omega(t, i) = u(r);
        ++r;
      }
      max_change = std::max(max_change, std::abs(Omega(t, t) - v));
      Omega(t, t) = std::max(v, kOmegaDiagFloor);

      // Block inverse formulas: W_tt = 1/c, W_(.,t) = -Mu / c,
      // W_11 = M + Mu Mu' / c.
      W(t, t) = 1.0 / c_schur;
      r = 0;
      for (Index i = 0; i < q; ++i) {
        if (i == t) continue;
        W(i, t) = -Mu(r) / c_schur;
        W(t, i) = W(i, t);
        ++r;
      }
      r = 0;
      for (Index i = 0; i < q; ++i) {
        if (i == t) continue;
        Index c = 0;
        for (Index jj = 0; jj < q; ++jj) {
          if (jj == t) continue;
          W(i, jj) = M(r, c) + Mu(r) * Mu(c) / c_schur;
          ++c;
        }
        ++r;
      }
    }

    // Exact refresh at the end of the pass; halve back toward the previous
    // iterate if numerical drift broke positive definiteness.
    Eigen::LLT<MatrixXd> check(Omega);
    int halvings = 0;
    while (check.info() != Eigen::Success && halvings < 60) {
      Omega = 0.5 * (Omega + Omega_before);
      check.compute(Omega);
      ++halvings;
    }
    if (check.info() != Eigen::Success) {
      throw glasso_instability("glasso_weighted: lost positive definiteness", Omega_prev_pass);
    }
    W = check.solve(MatrixXd::Identity(q, q));
    res.objective_trace.push_back(glasso_objective(Omega, S, P, nn));
    res.iterations = pass + 1;
    if (max_change < outer_tol * (1.0 + Omega.cwiseAbs().maxCoeff())) {
      res.converged = true;
      break;
    }
    Omega_prev_pass = Omega;
  }

  res.Omega = 0.5 * (Omega + Omega.transpose());
  return res;
}

CmStepOmegaResult cm_step_Omega(const DataSet& data, EcmState& state, const PenaltyConfig& cfg,
                                double xi0, const FitOptions& opts) {
  const OmegaMixture mix{cfg.xi1, xi0};
  const EStepQ es = e_step_q(state.Omega, state.eta, mix);  // incoming Omega, eta
  // With q = 1 and a flat Beta prior there is nothing to update.
  if (cfg.a_eta + cfg.b_eta - 2.0 + 0.5 * static_cast<double>(data.q) *
                                       static_cast<double>(data.q - 1) > 0.0) {
    state.eta = update_eta(es.qstar, cfg.a_eta, cfg.b_eta, data.q);
  }
  GlassoResult gr = glasso_weighted(state.S, es.penalties, data.n, state.Omega, opts);
  state.Omega = gr.Omega;
  return {gr.converged, gr.iterations};
}

}  // namespace mssl
