#include "doctest.h"

#include "mssl/explorer.hpp"
#include "mssl/simlab.hpp"

#include "support/oracles.hpp"

#include <algorithm>
#include <cmath>

using namespace mssl;

namespace {

SimulatedData small_sim(std::uint64_t seed, Index n = 60, Index p = 12, Index q = 4,
                        double rho = 0.7) {
  SimScenario scn;
  scn.n = n;
  scn.p = p;
  scn.q = q;
  scn.rho = rho;
  scn.seed = seed;
  return generate(scn);
}

}  // namespace

TEST_CASE("ladder construction") {
  const LadderSpec lin{LadderScale::linear, 10.0, 100.0, 10};
  const auto lv = lin.build();
  REQUIRE(lv.size() == 10);
  CHECK(lv.front() == 10.0);
  CHECK(lv.back() == 100.0);
  CHECK(lv[1] == doctest::Approx(20.0));

  const LadderSpec lg{LadderScale::log, 1.0, 100.0, 5};
  const auto gv = lg.build();
  CHECK(gv[2] == doctest::Approx(10.0));
  CHECK(std::is_sorted(gv.begin(), gv.end()));

  CHECK_THROWS_AS((LadderSpec{LadderScale::linear, 5.0, 4.0, 3}.build()), validation_error);
}

TEST_CASE("preset 1 pins the documented hyper-parameters") {
  const SimulatedData sim = small_sim(3, 100, 50, 25, 0.9);
  const PenaltyConfig cfg = default_ladders(1, sim.data);
  CHECK(cfg.lambda1 == 1.0);
  CHECK(cfg.xi1 == doctest::Approx(1.0));  // 0.01 n with n = 100
  REQUIRE(cfg.lambda_ladder.size() == 10);
  CHECK(cfg.lambda_ladder.front() == 10.0);
  CHECK(cfg.lambda_ladder.back() == 100.0);
  CHECK(cfg.lambda_ladder[1] - cfg.lambda_ladder[0] == doctest::Approx(10.0));
  CHECK(cfg.xi_ladder.front() == doctest::Approx(10.0));  // 0.1 n
  CHECK(cfg.xi_ladder.back() == doctest::Approx(100.0));
  CHECK(cfg.b_theta == 50.0 * 25.0);
  CHECK(cfg.b_eta == 25.0);
  CHECK(cfg.a_theta == 1.0);
  CHECK(cfg.a_eta == 1.0);
}

TEST_CASE("preset 3 differs from preset 1 only in the sparsity priors") {
  const SimulatedData sim = small_sim(4, 80, 20, 6);
  const PenaltyConfig c1 = default_ladders(1, sim.data);
  const PenaltyConfig c3 = default_ladders(3, sim.data);
  CHECK(c1.lambda_ladder == c3.lambda_ladder);
  CHECK(c1.xi_ladder == c3.xi_ladder);
  CHECK(c1.lambda1 == c3.lambda1);
  CHECK(c1.xi1 == c3.xi1);
  CHECK(c3.b_theta == 1.0);
  CHECK(c3.b_eta == 1.0);
}

TEST_CASE("preset 7 derives its endpoints from the data") {
  const SimulatedData sim = small_sim(5, 70, 15, 5);
  const PenaltyConfig cfg = default_ladders(7, sim.data);
  const double yty = (sim.data.Y.transpose() * sim.data.Y).cwiseAbs().maxCoeff();
  const double xty = (sim.data.X.transpose() * sim.data.Y).cwiseAbs().maxCoeff();
  CHECK(cfg.xi1 == doctest::Approx(yty / (70.0 * 1000.0)));
  CHECK(cfg.xi_ladder.front() == doctest::Approx(10.0 * cfg.xi1));
  CHECK(cfg.xi_ladder.back() == doctest::Approx(100.0 * cfg.xi1));
  CHECK(cfg.lambda_ladder.back() == doctest::Approx(xty));
  CHECK_THROWS_AS(default_ladders(0, sim.data), validation_error);
  CHECK_THROWS_AS(default_ladders(13, sim.data), validation_error);
}

TEST_CASE("stability guard") {
  CHECK(check_stability(MatrixXd::Identity(4, 4), 100, 10.0));

  MatrixXd singular = MatrixXd::Identity(3, 3);
  singular(2, 2) = 0.0;
  CHECK(!check_stability(singular, 100, 10.0));

  const Index n = 25;
  MatrixXd edge = MatrixXd::Identity(2, 2);
  edge(1, 1) = 10.0 * n + 1.0;
  CHECK(!check_stability(edge, n, 10.0));
  edge(1, 1) = 10.0 * n;  // boundary is stable
  CHECK(check_stability(edge, n, 10.0));
}

TEST_CASE("a degenerate grid is a single cold-started fit") {
  const SimulatedData sim = small_sim(6);
  PenaltyConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.xi1 = 0.6;
  cfg.lambda_ladder = {12.0};
  cfg.xi_ladder = {6.0};
  ExplorerOptions opts;

  const ModeGrid grid = dpe(sim.data, cfg, opts);
  REQUIRE(grid.cells.size() == 1);
  CHECK(grid.final_index == 0);
  CHECK(grid.cells[0].warm_source == -1);

  const EcmResult direct = ecm_fit(sim.data, EcmState::cold_start(sim.data), cfg, 12.0, 6.0,
                                   opts.fit);
  CHECK((grid.final_state.B - direct.state.B).cwiseAbs().maxCoeff() == 0.0);
  CHECK((grid.final_state.Omega - direct.state.Omega).cwiseAbs().maxCoeff() == 0.0);

  const StabilizationReport rep = stabilization_report(grid);
  REQUIRE(rep.cells.size() == 1);
  CHECK(rep.cells[0].norm_ratio == doctest::Approx(1.0));
  CHECK(rep.trailing_square == 1);
}

TEST_CASE("warm start selection follows the three-predecessor rule") {
  const SimulatedData sim = small_sim(7);
  PenaltyConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.xi1 = 0.6;
  cfg.lambda_ladder = {8.0, 20.0, 60.0};
  cfg.xi_ladder = {4.0, 12.0, 30.0};
  ExplorerOptions opts;
  opts.keep_states = true;

  const ModeGrid grid = dpe(sim.data, cfg, opts);
  REQUIRE(grid.cells.size() == 9);

  for (const ModeCell& cell : grid.cells) {
    // Exhaustive re-selection from the recorded candidates.
    if (cell.s == 1 && cell.t == 1) {
      CHECK(cell.warm_source == -1);
      continue;
    }
    REQUIRE(!cell.warm_candidates.empty());
    int best = -1;
    double best_lp = -std::numeric_limits<double>::infinity();
    for (const auto& [idx, lp] : cell.warm_candidates) {
      if (lp > best_lp) {
        best_lp = lp;
        best = idx;
      }
    }
    CHECK(cell.warm_source == best);
    // the chosen start dominates every rejected stable candidate
    for (const auto& [idx, lp] : cell.warm_candidates) {
      CHECK(best_lp >= lp);
    }
    // expected candidate set: stable predecessors among the three neighbors
    std::vector<int> expected;
    auto add = [&](int s, int t) {
      if (s < 1 || t < 1) return;
      const int idx = grid.cell_index(s, t);
      if (idx >= 0 && grid.cells[static_cast<std::size_t>(idx)].stable) expected.push_back(idx);
    };
    add(cell.s - 1, cell.t);
    add(cell.s, cell.t - 1);
    add(cell.s - 1, cell.t - 1);
    std::vector<int> got;
    for (const auto& [idx, lp] : cell.warm_candidates) got.push_back(idx);
    std::sort(expected.begin(), expected.end());
    std::sort(got.begin(), got.end());
    CHECK(got == expected);
  }

  // no unstable mode is ever used as a warm start
  for (const ModeCell& cell : grid.cells) {
    if (cell.warm_source >= 0) {
      CHECK(grid.cells[static_cast<std::size_t>(cell.warm_source)].stable);
    }
  }
}

TEST_CASE("grid traversal order is a config switch") {
  const SimulatedData sim = small_sim(8);
  PenaltyConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.xi1 = 0.6;
  cfg.lambda_ladder = {10.0, 40.0};
  cfg.xi_ladder = {5.0, 20.0};
  ExplorerOptions lambda_outer;
  ExplorerOptions xi_outer;
  xi_outer.xi_outer = true;

  const ModeGrid a = dpe(sim.data, cfg, lambda_outer);
  const ModeGrid b = dpe(sim.data, cfg, xi_outer);
  REQUIRE(a.cells.size() == 4);
  REQUIRE(b.cells.size() == 4);
  // Both orders fit the same terminal cell; supports agree on this easy
  // instance even though intermediate paths may differ.
  CHECK(a.final_cell().b_nnz == b.final_cell().b_nnz);
  CHECK(a.final_cell().omega_nnz == b.final_cell().omega_nnz);
}

TEST_CASE("dcpe stage structure and terminal refinement") {
  const SimulatedData sim = small_sim(9);
  const PenaltyConfig cfg = [&] {
    PenaltyConfig c;
    c.lambda1 = 1.0;
    c.xi1 = 0.01 * 60;
    c.lambda_ladder = LadderSpec{LadderScale::linear, 10.0, 60.0, 5}.build();
    c.xi_ladder = LadderSpec{LadderScale::linear, 6.0, 60.0, 5}.build();
    c.b_theta = 12.0 * 4.0;
    c.b_eta = 4.0;
    return c;
  }();
  ExplorerOptions opts;

  const DcpeResult res = dcpe(sim.data, cfg, opts);
  // 5 lambda rungs + 5 xi rungs + 1 refinement
  CHECK(res.grid.cells.size() == 11);
  CHECK(res.grid.final_index == 10);
  // stage (i) cells carry t = 0, stage (ii) cells s = 0
  CHECK(res.grid.cells[0].t == 0);
  CHECK(res.grid.cells[5].s == 0);
  Eigen::LLT<MatrixXd> llt(res.state.Omega);
  CHECK(llt.info() == Eigen::Success);
}

TEST_CASE("dcpe stage (i) is equivariant under response permutation") {
  const SimulatedData sim = small_sim(10);
  PenaltyConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.xi1 = 0.6;
  cfg.lambda_ladder = {10.0, 30.0, 60.0};
  cfg.xi_ladder = {6.0, 30.0};
  ExplorerOptions opts;

  const DcpeResult base = dcpe(sim.data, cfg, opts);

  // permute the response columns: 0 <- 2, 1 <- 0, 2 <- 1, 3 <- 3
  std::vector<Index> perm = {2, 0, 1, 3};
  MatrixXd Y_perm(sim.data.Y.rows(), sim.data.Y.cols());
  for (Index k = 0; k < 4; ++k) Y_perm.col(k) = sim.data.Y.col(perm[static_cast<std::size_t>(k)]);
  DataSet permuted = sim.data;
  permuted.Y = Y_perm;
  const DcpeResult shuffled = dcpe(permuted, cfg, opts);

  // Compare the stage-(i) terminal coefficients (cell index L-1): column k of
  // the permuted fit equals column perm[k] of the base fit.
  // Recover stage-(i) B by rerunning is unnecessary: equivariance must
  // already show in the final B supports column-wise.
  const ModeCell& base_stage1 = base.grid.cells[2];
  const ModeCell& perm_stage1 = shuffled.grid.cells[2];
  CHECK(base_stage1.b_nnz == perm_stage1.b_nnz);

  // stronger: rerun stage (i) by hand with one rung and compare values
  PenaltyConfig one = cfg;
  one.lambda_ladder = {30.0};
  EcmState s_base = EcmState::cold_start(sim.data);
  BStepWorkspace ws_base;
  ws_base.init(sim.data, s_base);
  cm_step_B(sim.data, s_base, ws_base, one, 30.0, opts.fit);

  EcmState s_perm = EcmState::cold_start(permuted);
  BStepWorkspace ws_perm;
  ws_perm.init(permuted, s_perm);
  cm_step_B(permuted, s_perm, ws_perm, one, 30.0, opts.fit);

  for (Index k = 0; k < 4; ++k) {
    const VectorXd base_col = s_base.B.col(perm[static_cast<std::size_t>(k)]);
    const VectorXd perm_col = s_perm.B.col(k);
    CHECK((base_col - perm_col).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("sep reduces to the conditional path for a single response") {
  const SimulatedData sim = small_sim(11, 50, 8, 1, 0.0);
  PenaltyConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.xi1 = 0.5;
  cfg.lambda_ladder = {10.0, 25.0, 50.0};
  cfg.xi_ladder = {5.0, 50.0};
  cfg.b_theta = 8.0;
  ExplorerOptions opts;

  const SepResult sep = sep_ssl_ssg(sim.data, cfg, opts);
  REQUIRE(sep.column_thetas.size() == 1);

  // Reproduce stage (i) directly.
  EcmState st = EcmState::cold_start(sim.data);
  BStepWorkspace ws;
  ws.init(sim.data, st);
  for (double l0 : cfg.lambda_ladder) cm_step_B(sim.data, st, ws, cfg, l0, opts.fit);
  CHECK((sep.state.B - st.B).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(sep.column_thetas[0] == doctest::Approx(st.theta).epsilon(1e-12));
}

TEST_CASE("sep fits one slab fraction per response") {
  testing::TestRng rng(83);
  const Index n = 80, p = 10;
  MatrixXd Xr = rng.normal_matrix(n, p);
  MatrixXd Yr(n, 2);
  // first response loads on many predictors, second is pure noise
  VectorXd beta = VectorXd::Zero(p);
  for (Index j = 0; j < p; ++j) beta(j) = (j % 2 == 0) ? 1.5 : -1.2;
  Yr.col(0) = Xr * beta + 0.2 * rng.normal_matrix(n, 1);
  Yr.col(1) = rng.normal_matrix(n, 1);
  const DataSet d = standardize(Xr, Yr);

  PenaltyConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.xi1 = 0.01 * n;
  cfg.lambda_ladder = LadderSpec{LadderScale::linear, 10.0, static_cast<double>(n), 5}.build();
  cfg.xi_ladder = LadderSpec{LadderScale::linear, 0.1 * n, static_cast<double>(n), 5}.build();
  cfg.b_theta = static_cast<double>(p);
  cfg.b_eta = 2.0;
  ExplorerOptions opts;

  const SepResult sep = sep_ssl_ssg(d, cfg, opts);
  REQUIRE(sep.column_thetas.size() == 2);
  CHECK(sep.column_thetas[0] > 5.0 * sep.column_thetas[1]);
  // the dense column keeps most of its support, the noise column stays empty
  Index nnz0 = 0, nnz1 = 0;
  for (Index j = 0; j < p; ++j) {
    nnz0 += sep.state.B(j, 0) != 0.0;
    nnz1 += sep.state.B(j, 1) != 0.0;
  }
  CHECK(nnz0 >= 8);
  CHECK(nnz1 <= 1);
}

TEST_CASE("stabilization report flags a uniformly stabilized grid") {
  const SimulatedData sim = small_sim(12, 80, 10, 3, 0.7);
  PenaltyConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.xi1 = 0.8;
  // narrow ladders late in the path: supports should be frozen across cells
  cfg.lambda_ladder = {60.0, 70.0, 80.0};
  cfg.xi_ladder = {40.0, 48.0, 56.0};
  ExplorerOptions opts;

  const ModeGrid grid = dpe(sim.data, cfg, opts);
  const StabilizationReport rep = stabilization_report(grid);
  bool all_match = true;
  for (const auto& c : rep.cells) all_match = all_match && c.matches_final;
  if (all_match) {
    CHECK(rep.trailing_square == 3);
    CHECK(rep.trailing_row_run == 3);
    CHECK(rep.trailing_col_run == 3);
  } else {
    CHECK(rep.trailing_square >= 1);  // the final cell always matches itself
  }
  // ratio at the final cell is exactly 1
  const int fi = grid.final_index;
  CHECK(rep.cells[static_cast<std::size_t>(fi)].norm_ratio == doctest::Approx(1.0));
}
