#include "mssl/explorer.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

namespace mssl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log_posterior(const EcmState& state, const DataSet& data, const PenaltyConfig& cfg,
                          double lambda0, double xi0) {
  try {
    return log_posterior(state, data, cfg, lambda0, xi0);
  } catch (const numeric_error&) {
    return kNegInf;
  }
}

ModeCell summarize_cell(int s, int t, double lambda0, double xi0, const EcmResult& fit,
                        const DataSet& data, const PenaltyConfig& cfg, double lambdaL,
                        double xiL, double cond_multiplier) {
  ModeCell cell;
  cell.s = s;
  cell.t = t;
  cell.lambda0 = lambda0;
  cell.xi0 = xi0;
  const auto [bn, on] = support_counts(fit.state);
  cell.b_nnz = bn;
  cell.omega_nnz = on;
  cell.b_mask = support_mask(fit.state.B);
  cell.omega_mask = support_mask_upper(fit.state.Omega);
  cell.converged = fit.status == FitStatus::converged;
  cell.iterations = fit.trace.iterations;
  cell.log_posterior_terminal = safe_log_posterior(fit.state, data, cfg, lambdaL, xiL);
  cell.stable = fit.status != FitStatus::unstable &&
                std::isfinite(cell.log_posterior_terminal) &&
                check_stability(fit.state.S, data.n, cond_multiplier);
  return cell;
}

}  // namespace

std::vector<double> LadderSpec::build() const {
  if (length < 1) throw validation_error("LadderSpec: length must be >= 1");
  if (length > 1 && !(hi > lo)) {
    throw validation_error("LadderSpec: endpoints must satisfy hi > lo");
  }
  std::vector<double> v(static_cast<std::size_t>(length));
  if (length == 1) {
    v[0] = lo;
    return v;
  }
  if (scale == LadderScale::linear) {
    const double step = (hi - lo) / (length - 1);
    for (int i = 0; i < length; ++i) v[static_cast<std::size_t>(i)] = lo + step * i;
  } else {
    if (!(lo > 0)) throw validation_error("LadderSpec: log scale requires lo > 0");
    const double step = (std::log(hi) - std::log(lo)) / (length - 1);
    for (int i = 0; i < length; ++i) {
      v[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * i);
    }
  }
  v.back() = hi;  // pin the endpoint against roundoff
  return v;
}

PenaltyConfig default_ladders(int setting, const DataSet& data) {
  if (setting < 1 || setting > 12) {
    throw validation_error("default_ladders: setting must lie in 1..12");
  }
  const double n = static_cast<double>(data.n);
  const double pq = static_cast<double>(data.p) * static_cast<double>(data.q);

  PenaltyConfig cfg;
  cfg.lambda1 = 1.0;
  cfg.a_theta = 1.0;
  cfg.a_eta = 1.0;

  const int group = (setting - 1) / 3;        // 0: 1-3, 1: 4-6, 2: 7-9, 3: 10-12
  const int variant = (setting - 1) % 3;      // 0: b=(pq,q), 1: (p,q), 2: (1,1)
  const LadderScale scale = (group == 1 || group == 3) ? LadderScale::log : LadderScale::linear;
  const bool data_driven = group >= 2;

  if (!data_driven) {
    cfg.xi1 = 0.01 * n;
    cfg.lambda_ladder = LadderSpec{scale, 10.0, n, 10}.build();
    cfg.xi_ladder = LadderSpec{scale, 0.1 * n, n, 10}.build();
  } else {
    const double yty_max = (data.Y.transpose() * data.Y).cwiseAbs().maxCoeff();
    const double xty_max = (data.X.transpose() * data.Y).cwiseAbs().maxCoeff();
    cfg.xi1 = yty_max / (n * 1000.0);
    cfg.lambda_ladder = LadderSpec{scale, 10.0, xty_max, 10}.build();
    cfg.xi_ladder = LadderSpec{scale, 10.0 * cfg.xi1, 100.0 * cfg.xi1, 10}.build();
  }

  switch (variant) {
    case 0:
      cfg.b_theta = pq;
      cfg.b_eta = static_cast<double>(data.q);
      break;
    case 1:
      cfg.b_theta = static_cast<double>(data.p);
      cfg.b_eta = static_cast<double>(data.q);
      break;
    default:
      cfg.b_theta = 1.0;
      cfg.b_eta = 1.0;
      break;
  }
  cfg.validate();
  return cfg;
}

bool check_stability(const MatrixXd& S, Index n, double multiplier) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  const double lmax = es.eigenvalues().maxCoeff();
  if (!(lmin > 0.0)) return false;  // singular: infinite condition number
  return lmax / lmin <= multiplier * static_cast<double>(n);
}

ModeGrid dpe(const DataSet& data, const PenaltyConfig& cfg, const ExplorerOptions& opts) {
  cfg.validate();
  const int Ls = static_cast<int>(cfg.lambda_ladder.size());
  const int Lt = static_cast<int>(cfg.xi_ladder.size());
  const double lambdaL = cfg.lambda_ladder.back();
  const double xiL = cfg.xi_ladder.back();

  ModeGrid grid;
  grid.n_lambda = Ls;
  grid.n_xi = Lt;
  grid.cells.resize(static_cast<std::size_t>(Ls) * static_cast<std::size_t>(Lt));
  grid.states_kept = opts.keep_states;
  if (opts.keep_states) grid.states.resize(grid.cells.size());

  const EcmState cold = EcmState::cold_start(data);
  grid.reference_log_posterior = safe_log_posterior(cold, data, cfg, lambdaL, xiL);

  // Frontier of fitted states: the previous outer row and the current one.
  const int outer_len = opts.xi_outer ? Lt : Ls;
  const int inner_len = opts.xi_outer ? Ls : Lt;
  std::vector<EcmState> prev_row(static_cast<std::size_t>(inner_len));
  std::vector<EcmState> cur_row(static_cast<std::size_t>(inner_len));
  std::vector<bool> prev_stable(static_cast<std::size_t>(inner_len), false);
  std::vector<bool> cur_stable(static_cast<std::size_t>(inner_len), false);

  auto linear_index = [&](int s, int t) { return (s - 1) * Lt + (t - 1); };

  for (int a = 1; a <= outer_len; ++a) {
    for (int b = 1; b <= inner_len; ++b) {
      const int s = opts.xi_outer ? b : a;
      const int t = opts.xi_outer ? a : b;
      const double lambda0 = cfg.lambda_ladder[static_cast<std::size_t>(s - 1)];
      const double xi0 = cfg.xi_ladder[static_cast<std::size_t>(t - 1)];

      // Candidate warm starts: (s-1,t), (s,t-1), (s-1,t-1), stable only.
      struct Candidate {
        int cell;
        const EcmState* state;
      };
      std::vector<Candidate> candidates;
      auto add_candidate = [&](int cs, int ct) {
        if (cs < 1 || ct < 1) return;
        const int outer_c = opts.xi_outer ? ct : cs;
        const int inner_c = opts.xi_outer ? cs : ct;
        const EcmState* st = nullptr;
        bool stable = false;
        if (outer_c == a) {
          st = &cur_row[static_cast<std::size_t>(inner_c - 1)];
          stable = cur_stable[static_cast<std::size_t>(inner_c - 1)];
        } else if (outer_c == a - 1) {
          st = &prev_row[static_cast<std::size_t>(inner_c - 1)];
          stable = prev_stable[static_cast<std::size_t>(inner_c - 1)];
        }
        if (st != nullptr && stable) {
          candidates.push_back({linear_index(cs, ct), st});
        }
      };
      add_candidate(s - 1, t);
      add_candidate(s, t - 1);
      add_candidate(s - 1, t - 1);

      int warm_source = -1;
      const EcmState* start = nullptr;
      double best_lp = kNegInf;
      std::vector<std::pair<int, double>> scored;
      scored.reserve(candidates.size());
      for (const auto& cand : candidates) {
        const double lp = safe_log_posterior(*cand.state, data, cfg, lambda0, xi0);
        scored.emplace_back(cand.cell, lp);
        if (lp > best_lp) {
          best_lp = lp;
          start = cand.state;
          warm_source = cand.cell;
        }
      }

      const auto t0 = std::chrono::steady_clock::now();
      EcmResult fit = ecm_fit(data, start != nullptr ? *start : cold, cfg, lambda0, xi0, opts.fit);
      const double wall =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      ModeCell cell = summarize_cell(s, t, lambda0, xi0, fit, data, cfg, lambdaL, xiL,
                                     opts.fit.cond_cap_multiplier);
      cell.warm_source = warm_source;
      cell.warm_candidates = std::move(scored);
      cell.wall_time_sec = wall;
      cell.trace = fit.trace;

      const std::size_t inner_idx = static_cast<std::size_t>(b - 1);
      cur_stable[inner_idx] = cell.stable;
      const std::size_t cell_idx = static_cast<std::size_t>(linear_index(s, t));
      if (s == Ls && t == Lt) {
        grid.final_index = static_cast<int>(cell_idx);
        grid.final_state = fit.state;
      }
      if (opts.keep_states) grid.states[cell_idx] = fit.state;
      cur_row[inner_idx] = std::move(fit.state);
      grid.cells[cell_idx] = std::move(cell);
    }
    std::swap(prev_row, cur_row);
    std::swap(prev_stable, cur_stable);
  }
  return grid;
}

namespace {

// Stage (ii) of the conditional path: E-step, eta, weighted glasso at fixed
// B, iterated to a conditional mode for one xi0.
FitStatus omega_path_rung(const DataSet& data, EcmState& state, const PenaltyConfig& cfg,
                          double xi0, const FitOptions& opts) {
  for (int it = 0; it < opts.max_iter_ecm; ++it) {
    const MatrixXd before = state.Omega;
    try {
      cm_step_Omega(data, state, cfg, xi0, opts);
    } catch (const numeric_error&) {
      return FitStatus::unstable;
    }
    double rel = 0.0;
    for (Index k = 0; k < before.cols(); ++k) {
      for (Index j = 0; j < before.rows(); ++j) {
        rel = std::max(rel, std::abs(state.Omega(j, k) - before(j, k)) /
                                std::max(std::abs(before(j, k)), 1.0));
      }
    }
    if (rel < opts.tol) return FitStatus::converged;
  }
  return FitStatus::max_iterations;
}

}  // namespace

DcpeResult dcpe(const DataSet& data, const PenaltyConfig& cfg, const ExplorerOptions& opts) {
  cfg.validate();
  const int L_lambda = static_cast<int>(cfg.lambda_ladder.size());
  const int L_xi = static_cast<int>(cfg.xi_ladder.size());
  const double lambdaL = cfg.lambda_ladder.back();
  const double xiL = cfg.xi_ladder.back();

  DcpeResult out;
  out.grid.n_lambda = L_lambda;
  out.grid.n_xi = L_xi;

  // Stage (i): conditional (B, theta) path with Omega = I, eta frozen.
  EcmState state = EcmState::cold_start(data);
  BStepWorkspace ws;
  ws.init(data, state);
  for (int s = 1; s <= L_lambda; ++s) {
    const double lambda0 = cfg.lambda_ladder[static_cast<std::size_t>(s - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    const CmStepBResult step = cm_step_B(data, state, ws, cfg, lambda0, opts.fit);
    ModeCell cell;
    cell.s = s;
    cell.t = 0;
    cell.lambda0 = lambda0;
    cell.xi0 = 0.0;
    const auto [bn, on] = support_counts(state);
    cell.b_nnz = bn;
    cell.omega_nnz = on;
    cell.b_mask = support_mask(state.B);
    cell.omega_mask = support_mask_upper(state.Omega);
    cell.converged = step.converged;
    cell.iterations = step.iterations;
    cell.log_posterior_terminal = safe_log_posterior(state, data, cfg, lambdaL, xiL);
    cell.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.grid.cells.push_back(std::move(cell));
  }

  // Stage (ii): conditional (Omega, eta) path holding B at its terminal value.
  state.refresh_residuals(data);
  for (int t = 1; t <= L_xi; ++t) {
    const double xi0 = cfg.xi_ladder[static_cast<std::size_t>(t - 1)];
    const auto t0 = std::chrono::steady_clock::now();
    const FitStatus status = omega_path_rung(data, state, cfg, xi0, opts.fit);
    ModeCell cell;
    cell.s = 0;
    cell.t = t;
    cell.lambda0 = 0.0;
    cell.xi0 = xi0;
    const auto [bn, on] = support_counts(state);
    cell.b_nnz = bn;
    cell.omega_nnz = on;
    cell.b_mask = support_mask(state.B);
    cell.omega_mask = support_mask_upper(state.Omega);
    cell.converged = status == FitStatus::converged;
    cell.stable = status != FitStatus::unstable;
    cell.log_posterior_terminal = safe_log_posterior(state, data, cfg, lambdaL, xiL);
    cell.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.grid.cells.push_back(std::move(cell));
    if (status == FitStatus::unstable) {
      out.status = FitStatus::unstable;
    }
  }

  // Stage (iii): one joint refinement at the terminal penalties.
  EcmResult fit = ecm_fit(data, state, cfg, lambdaL, xiL, opts.fit);
  ModeCell cell = summarize_cell(L_lambda, L_xi, lambdaL, xiL, fit, data, cfg, lambdaL, xiL,
                                 opts.fit.cond_cap_multiplier);
  cell.trace = fit.trace;
  out.grid.final_index = static_cast<int>(out.grid.cells.size());
  out.grid.cells.push_back(std::move(cell));
  out.grid.final_state = fit.state;
  out.grid.reference_log_posterior =
      safe_log_posterior(EcmState::cold_start(data), data, cfg, lambdaL, xiL);
  out.state = std::move(fit.state);
  if (out.status != FitStatus::unstable) out.status = fit.status;
  return out;
}

SepResult sep_ssl_ssg(const DataSet& data, const PenaltyConfig& cfg, const ExplorerOptions& opts) {
  cfg.validate();
  const int L_lambda = static_cast<int>(cfg.lambda_ladder.size());
  const int L_xi = static_cast<int>(cfg.xi_ladder.size());
  const double lambdaL = cfg.lambda_ladder.back();
  const double xiL = cfg.xi_ladder.back();

  SepResult out;
  out.grid.n_lambda = L_lambda;
  out.grid.n_xi = L_xi;
  out.column_thetas.resize(static_cast<std::size_t>(data.q));

  // Stage (i), column by column: a univariate spike-and-slab lasso path
  // (q = 1 machinery, Omega = [1]) with its own theta.
  MatrixXd B_hat = MatrixXd::Zero(data.p, data.q);
  for (Index k = 0; k < data.q; ++k) {
    DataSet col;
    col.X = data.X;
    col.Y = data.Y.col(k);
    col.n = data.n;
    col.p = data.p;
    col.q = 1;
    col.scaling = data.scaling;  // columns are already standardized

    EcmState st = EcmState::cold_start(col);
    BStepWorkspace ws;
    ws.init(col, st);
    for (int s = 1; s <= L_lambda; ++s) {
      const double lambda0 = cfg.lambda_ladder[static_cast<std::size_t>(s - 1)];
      cm_step_B(col, st, ws, cfg, lambda0, opts.fit);
    }
    B_hat.col(k) = st.B.col(0);
    out.column_thetas[static_cast<std::size_t>(k)] = st.theta;
  }

  // Stage (ii): the conditional (Omega, eta) path at the assembled B.
  EcmState state = EcmState::cold_start(data);
  state.B = B_hat;
  double theta_sum = 0.0;
  for (double th : out.column_thetas) theta_sum += th;
  state.theta = theta_sum / static_cast<double>(data.q);
  state.refresh_residuals(data);
  for (int t = 1; t <= L_xi; ++t) {
    const double xi0 = cfg.xi_ladder[static_cast<std::size_t>(t - 1)];
    const FitStatus status = omega_path_rung(data, state, cfg, xi0, opts.fit);
    ModeCell cell;
    cell.s = 0;
    cell.t = t;
    cell.xi0 = xi0;
    const auto [bn, on] = support_counts(state);
    cell.b_nnz = bn;
    cell.omega_nnz = on;
    cell.converged = status == FitStatus::converged;
    cell.stable = status != FitStatus::unstable;
    cell.log_posterior_terminal = safe_log_posterior(state, data, cfg, lambdaL, xiL);
    out.grid.cells.push_back(std::move(cell));
    if (status == FitStatus::unstable) out.status = FitStatus::unstable;
  }

  ModeCell final_cell;
  final_cell.s = L_lambda;
  final_cell.t = L_xi;
  final_cell.lambda0 = lambdaL;
  final_cell.xi0 = xiL;
  const auto [bn, on] = support_counts(state);
  final_cell.b_nnz = bn;
  final_cell.omega_nnz = on;
  final_cell.b_mask = support_mask(state.B);
  final_cell.omega_mask = support_mask_upper(state.Omega);
  final_cell.stable = out.status != FitStatus::unstable &&
                      check_stability(state.S, data.n, opts.fit.cond_cap_multiplier);
  final_cell.converged = out.status == FitStatus::converged;
  final_cell.log_posterior_terminal = safe_log_posterior(state, data, cfg, lambdaL, xiL);
  out.grid.final_index = static_cast<int>(out.grid.cells.size());
  out.grid.cells.push_back(std::move(final_cell));
  out.grid.final_state = state;
  out.grid.reference_log_posterior =
      safe_log_posterior(EcmState::cold_start(data), data, cfg, lambdaL, xiL);
  out.state = std::move(state);
  return out;
}

StabilizationReport stabilization_report(const ModeGrid& grid) {
  StabilizationReport rep;
  if (grid.cells.empty()) return rep;
  const ModeCell& fin = grid.final_cell();
  const double denom = fin.log_posterior_terminal - grid.reference_log_posterior;

  for (const ModeCell& c : grid.cells) {
    StabilizationCell sc;
    sc.s = c.s;
    sc.t = c.t;
    sc.lambda0 = c.lambda0;
    sc.xi0 = c.xi0;
    sc.b_nnz = c.b_nnz;
    sc.omega_nnz = c.omega_nnz;
    sc.stable = c.stable;
    sc.matches_final = (c.b_mask == fin.b_mask) && (c.omega_mask == fin.omega_mask);
    const double num = c.log_posterior_terminal - grid.reference_log_posterior;
    sc.norm_ratio = (std::abs(denom) > 0.0) ? num / denom : 1.0;
    rep.cells.push_back(sc);
  }

  const int Ls = grid.n_lambda, Lt = grid.n_xi;
  auto matches = [&](int s, int t) {
    const int idx = grid.cell_index(s, t);
    return idx >= 0 && rep.cells[static_cast<std::size_t>(idx)].matches_final;
  };
  for (int t = Lt; t >= 1 && matches(Ls, t); --t) ++rep.trailing_row_run;
  for (int s = Ls; s >= 1 && matches(s, Lt); --s) ++rep.trailing_col_run;
  const int kmax = std::min(Ls, Lt);
  for (int k = 1; k <= kmax; ++k) {
    bool all = true;
    for (int s = Ls - k + 1; s <= Ls && all; ++s) {
      for (int t = Lt - k + 1; t <= Lt && all; ++t) {
        all = matches(s, t);
      }
    }
    if (!all) break;
    rep.trailing_square = k;
  }
  return rep;
}

}  // namespace mssl
