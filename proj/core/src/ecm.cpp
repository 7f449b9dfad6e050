#include "mssl/ecm.hpp"

#include <algorithm>
#include <cassert>
#include <chrono>
#include <cmath>

namespace mssl {

namespace {

double max_relative_change(const MatrixXd& before, const MatrixXd& after) {
  double m = 0.0;
  for (Index k = 0; k < before.cols(); ++k) {
    for (Index j = 0; j < before.rows(); ++j) {
      const double denom = std::max(std::abs(before(j, k)), 1.0);
      m = std::max(m, std::abs(after(j, k) - before(j, k)) / denom);
    }
  }
  return m;
}

}  // namespace

EcmResult ecm_fit(const DataSet& data, EcmState init, const PenaltyConfig& cfg, double lambda0,
                  double xi0, const FitOptions& opts) {
  EcmResult res;
  res.state = std::move(init);
  res.state.refresh_residuals(data);

  BStepWorkspace ws;
  ws.init(data, res.state);

  const auto start = std::chrono::steady_clock::now();
  double prev_objective = 0.0;
  bool have_prev_objective = false;

  for (int iter = 0; iter < opts.max_iter_ecm; ++iter) {
    const MatrixXd B_before = res.state.B;
    const MatrixXd Omega_before = res.state.Omega;

    try {
      cm_step_B(data, res.state, ws, cfg, lambda0, opts);
      cm_step_Omega(data, res.state, cfg, xi0, opts);
    } catch (const numeric_error& err) {
      res.status = FitStatus::unstable;
      res.message = err.what();
      res.trace.iterations = iter;
      return res;
    }

    EcmIterationRecord rec;
    rec.iteration = iter + 1;
    rec.max_rel_change = std::max(max_relative_change(B_before, res.state.B),
                                  max_relative_change(Omega_before, res.state.Omega));
    try {
      rec.objective = log_posterior(res.state, data, cfg, lambda0, xi0);
    } catch (const numeric_error& err) {
      res.status = FitStatus::unstable;
      res.message = err.what();
      res.trace.iterations = iter;
      return res;
    }
    const auto [b_nnz, o_nnz] = support_counts(res.state);
    rec.b_nnz = b_nnz;
    rec.omega_nnz = o_nnz;
    rec.elapsed_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.trace.records.push_back(rec);
    res.trace.iterations = iter + 1;

    bool objective_settled = false;
    if (have_prev_objective) {
      assert(rec.objective >= prev_objective -
                                  1e-8 * std::max(1.0, std::abs(prev_objective)));
      const double rel =
          std::abs(rec.objective - prev_objective) / std::max(1.0, std::abs(prev_objective));
      objective_settled = rel < opts.tol;
    }
    prev_objective = rec.objective;
    have_prev_objective = true;

    if (rec.max_rel_change < opts.tol || objective_settled) {
      res.trace.converged = true;
      res.status = FitStatus::converged;
      return res;
    }
  }

  res.status = FitStatus::max_iterations;
  return res;
}

}  // namespace mssl
