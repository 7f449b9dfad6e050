#include "doctest.h"

#include "mssl/ecm.hpp"
#include "mssl/simlab.hpp"

#include "support/oracles.hpp"

#include <cmath>

using namespace mssl;

namespace {

PenaltyConfig single_rung(double lambda1, double lambda0, double xi1, double xi0) {
  PenaltyConfig cfg;
  cfg.lambda1 = lambda1;
  cfg.xi1 = xi1;
  cfg.lambda_ladder = {lambda0};
  cfg.xi_ladder = {xi0};
  cfg.a_theta = 1.0;
  cfg.b_theta = 1.0;
  cfg.a_eta = 1.0;
  cfg.b_eta = 1.0;
  return cfg;
}

}  // namespace

TEST_CASE("a zero response collapses to the empty model") {
  testing::TestRng rng(71);
  const Index n = 30, p = 5, q = 3;
  const DataSet d = standardize(rng.normal_matrix(n, p), MatrixXd::Zero(n, q));
  PenaltyConfig cfg = single_rung(1.0, 10.0, 2.0, 8.0);
  cfg.b_eta = 3.0;
  FitOptions opts;

  const EcmResult res = ecm_fit(d, EcmState::cold_start(d), cfg, 10.0, 8.0, opts);
  CHECK(res.status == FitStatus::converged);
  CHECK(res.trace.iterations <= 2);
  CHECK(res.state.B.isZero(0.0));
  // S = 0: each diagonal solves (n/2)/w = ... -> w = n / (2 xi1)
  const double expected = static_cast<double>(n) / (2.0 * cfg.xi1);
  for (Index k = 0; k < q; ++k) {
    CHECK(res.state.Omega(k, k) == doctest::Approx(expected).epsilon(1e-9));
    for (Index kk = 0; kk < k; ++kk) {
      CHECK(res.state.Omega(kk, k) == 0.0);
    }
  }
}

TEST_CASE("scalar response with identical rates matches the two-step oracle") {
  testing::TestRng rng(72);
  MatrixXd Xr = rng.normal_matrix(40, 1);
  MatrixXd Yr = 1.4 * Xr + 0.4 * rng.normal_matrix(40, 1);
  const DataSet d = standardize(Xr, Yr);
  const double lambda = 3.0, xi1 = 0.8;
  PenaltyConfig cfg = single_rung(lambda, lambda, xi1, xi1 + 1e-9);
  FitOptions opts;
  opts.tol = 1e-8;

  const EcmResult res = ecm_fit(d, EcmState::cold_start(d), cfg, lambda, cfg.xi_ladder[0], opts);
  REQUIRE(res.status == FitStatus::converged);

  // Alternate the scalar lasso and scalar precision closed forms to a fixed
  // point, independently of the library path.
  double beta = 0.0, omega = 1.0;
  const double nn = static_cast<double>(d.n);
  for (int it = 0; it < 10000; ++it) {
    const double z = nn * beta + d.X.col(0).dot((d.Y - d.X * MatrixXd::Constant(1, 1, beta)).col(0));
    const double thr = lambda / omega;
    const double bnew = std::abs(z) > thr ? std::copysign((std::abs(z) - thr) / nn, z) : 0.0;
    const double s = (d.Y.col(0) - bnew * d.X.col(0)).squaredNorm() / nn;
    const double wnew = nn / (nn * s + 2.0 * xi1);
    if (std::abs(bnew - beta) < 1e-13 && std::abs(wnew - omega) < 1e-13) {
      beta = bnew;
      omega = wnew;
      break;
    }
    beta = bnew;
    omega = wnew;
  }
  CHECK(res.state.B(0, 0) == doctest::Approx(beta).epsilon(1e-5));
  CHECK(res.state.Omega(0, 0) == doctest::Approx(omega).epsilon(1e-5));
}

TEST_CASE("the objective trace is nondecreasing") {
  testing::TestRng rng(73);
  for (int rep = 0; rep < 5; ++rep) {
    const Index n = 50, p = 8, q = 4;
    MatrixXd B_true = MatrixXd::Zero(p, q);
    for (int i = 0; i < 8; ++i) {
      B_true(static_cast<Index>(rng.uniform(0, p)), static_cast<Index>(rng.uniform(0, q))) =
          rng.uniform(-2, 2);
    }
    MatrixXd Xr = rng.normal_matrix(n, p);
    MatrixXd Yr = Xr * B_true + 0.5 * rng.normal_matrix(n, q);
    const DataSet d = standardize(Xr, Yr);
    PenaltyConfig cfg = single_rung(1.0, rng.uniform(5.0, 40.0), 0.01 * n, rng.uniform(0.2, 1.0) * n);
    cfg.b_theta = static_cast<double>(p * q);
    cfg.b_eta = static_cast<double>(q);
    FitOptions opts;

    const EcmResult res =
        ecm_fit(d, EcmState::cold_start(d), cfg, cfg.lambda_ladder[0], cfg.xi_ladder[0], opts);
    REQUIRE(res.trace.records.size() >= 1);
    for (std::size_t i = 1; i < res.trace.records.size(); ++i) {
      const double prev = res.trace.records[i - 1].objective;
      CHECK(res.trace.records[i].objective >= prev - 1e-8 * std::max(1.0, std::abs(prev)));
    }
    // Omega stays positive definite at the reported state
    Eigen::LLT<MatrixXd> llt(res.state.Omega);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("a converged fit is a fixed point of both conditional steps") {
  testing::TestRng rng(74);
  const Index n = 60, p = 6, q = 3;
  MatrixXd B_true = MatrixXd::Zero(p, q);
  B_true(0, 0) = 1.5;
  B_true(2, 1) = -1.0;
  B_true(4, 2) = 0.8;
  MatrixXd Xr = rng.normal_matrix(n, p);
  MatrixXd Yr = Xr * B_true + 0.4 * rng.normal_matrix(n, q);
  const DataSet d = standardize(Xr, Yr);
  PenaltyConfig cfg = single_rung(1.0, 20.0, 0.01 * n, 0.5 * n);
  cfg.b_theta = static_cast<double>(p * q);
  cfg.b_eta = static_cast<double>(q);
  FitOptions opts;
  opts.tol = 1e-6;

  const EcmResult res =
      ecm_fit(d, EcmState::cold_start(d), cfg, cfg.lambda_ladder[0], cfg.xi_ladder[0], opts);
  REQUIRE(res.status == FitStatus::converged);

  EcmState replay = res.state;
  BStepWorkspace ws;
  ws.init(d, replay);
  cm_step_B(d, replay, ws, cfg, cfg.lambda_ladder[0], opts);
  cm_step_Omega(d, replay, cfg, cfg.xi_ladder[0], opts);
  const double drift_b = (replay.B - res.state.B).cwiseAbs().maxCoeff();
  const double drift_o = (replay.Omega - res.state.Omega).cwiseAbs().maxCoeff();
  CHECK(drift_b < opts.tol * (1.0 + res.state.B.cwiseAbs().maxCoeff()) * 10);
  CHECK(drift_o < opts.tol * (1.0 + res.state.Omega.cwiseAbs().maxCoeff()) * 10);
}

TEST_CASE("identical inputs give identical traces") {
  SimScenario scn;
  scn.n = 40;
  scn.p = 10;
  scn.q = 4;
  scn.rho = 0.7;
  scn.seed = 5;
  const SimulatedData sim = generate(scn);
  PenaltyConfig cfg = single_rung(1.0, 15.0, 0.4, 10.0);
  FitOptions opts;

  const EcmResult a = ecm_fit(sim.data, EcmState::cold_start(sim.data), cfg, 15.0, 10.0, opts);
  const EcmResult b = ecm_fit(sim.data, EcmState::cold_start(sim.data), cfg, 15.0, 10.0, opts);
  REQUIRE(a.trace.records.size() == b.trace.records.size());
  for (std::size_t i = 0; i < a.trace.records.size(); ++i) {
    CHECK(a.trace.records[i].objective == b.trace.records[i].objective);
    CHECK(a.trace.records[i].max_rel_change == b.trace.records[i].max_rel_change);
  }
  CHECK((a.state.B - b.state.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK((a.state.Omega - b.state.Omega).cwiseAbs().maxCoeff() == 0.0);
}
