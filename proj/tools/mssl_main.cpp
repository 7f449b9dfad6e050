// Command line frontend: simulate / fit / evaluate / replicate.
//
// Exit codes: 0 success, 2 non-convergence at the reported mode,
// 3 instability at the reported mode, 4 I/O or validation failure.

#include "mssl/csv.hpp"
#include "mssl/ecm.hpp"
#include "mssl/explorer.hpp"
#include "mssl/simlab.hpp"
#include "mssl/spike_slab.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mssl;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitNonConverged = 2;
constexpr int kExitUnstable = 3;
constexpr int kExitValidation = 4;

struct FitFlags {
  std::string method;  // dpe | dcpe | sep
  std::string x_path, y_path, out_dir;
  int setting = 0;  // 0 means "taken from --ladders or --manifest"
  std::string ladders_path;
  std::string manifest_path;
  bool standardize_y = false;
  bool xi_outer = false;
  bool header = false;
  FitOptions options;
};

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw validation_error("cannot create directory " + dir + ": " + ec.message());
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw validation_error("bad JSON in " + path + ": " + e.what());
  }
  return j;
}

json penalties_to_json(const PenaltyConfig& cfg) {
  return json{{"lambda1", cfg.lambda1},
              {"xi1", cfg.xi1},
              {"lambda_ladder", cfg.lambda_ladder},
              {"xi_ladder", cfg.xi_ladder},
              {"a_theta", cfg.a_theta},
              {"b_theta", cfg.b_theta},
              {"a_eta", cfg.a_eta},
              {"b_eta", cfg.b_eta}};
}

PenaltyConfig penalties_from_json(const json& j) {
  const json& p = j.contains("penalties") ? j.at("penalties") : j;
  PenaltyConfig cfg;
  try {
    cfg.lambda1 = p.at("lambda1").get<double>();
    cfg.xi1 = p.at("xi1").get<double>();
    cfg.lambda_ladder = p.at("lambda_ladder").get<std::vector<double>>();
    cfg.xi_ladder = p.at("xi_ladder").get<std::vector<double>>();
    cfg.a_theta = p.value("a_theta", 1.0);
    cfg.b_theta = p.value("b_theta", 1.0);
    cfg.a_eta = p.value("a_eta", 1.0);
    cfg.b_eta = p.value("b_eta", 1.0);
  } catch (const json::exception& e) {
    throw validation_error(std::string("penalty specification: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json options_to_json(const FitOptions& o) {
  return json{{"tol", o.tol},
              {"max_iter_ecm", o.max_iter_ecm},
              {"max_iter_cd", o.max_iter_cd},
              {"max_iter_newton", o.max_iter_newton},
              {"cond_cap_multiplier", o.cond_cap_multiplier}};
}

FitOptions options_from_json(const json& j, FitOptions base) {
  if (!j.contains("options")) return base;
  const json& o = j.at("options");
  base.tol = o.value("tol", base.tol);
  base.max_iter_ecm = o.value("max_iter_ecm", base.max_iter_ecm);
  base.max_iter_cd = o.value("max_iter_cd", base.max_iter_cd);
  base.max_iter_newton = o.value("max_iter_newton", base.max_iter_newton);
  base.cond_cap_multiplier = o.value("cond_cap_multiplier", base.cond_cap_multiplier);
  return base;
}

void write_table(std::ostream& out, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) {
      widths[i] = std::max(widths[i], row[i].size());
    }
  }
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      out << row[i];
      if (i + 1 < row.size()) out << std::string(widths[i] - row[i].size() + 2, ' ');
    }
    out << "\n";
  }
}

std::string fmt(double v, int prec = 2) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

// ---------------------------------------------------------------- simulate

int cmd_simulate(const std::string& scenario_path, const std::string& manifest_path,
                 const std::string& out_dir, std::optional<std::uint64_t> seed_override,
                 int replication, bool fix_design, bool header) {
  SimScenario scn;
  if (!manifest_path.empty()) {
    const json m = read_json(manifest_path);
    scn.n = m.at("scenario").at("n").get<Index>();
    scn.p = m.at("scenario").at("p").get<Index>();
    scn.q = m.at("scenario").at("q").get<Index>();
    scn.rho = m.at("scenario").at("rho").get<double>();
    scn.rho_x = m.at("scenario").at("rho_x").get<double>();
    scn.b_density = m.at("scenario").at("b_density").get<double>();
    scn.b_min = m.at("scenario").at("b_min").get<double>();
    scn.b_max = m.at("scenario").at("b_max").get<double>();
    scn.seed = m.at("scenario").at("seed").get<std::uint64_t>();
    replication = m.value("replication", replication);
    fix_design = m.value("fix_design", fix_design);
  } else {
    scn = load_scenario(scenario_path);
  }
  if (seed_override) scn.seed = *seed_override;
  scn.validate();

  const SimulatedData sim = generate(scn, replication, fix_design);
  ensure_dir(out_dir);
  const fs::path dir(out_dir);
  std::vector<std::string> xh, yh;
  if (header) {
    for (Index j = 0; j < scn.p; ++j) xh.push_back("x" + std::to_string(j + 1));
    for (Index k = 0; k < scn.q; ++k) yh.push_back("y" + std::to_string(k + 1));
  }
  write_matrix_csv((dir / "X.csv").string(), sim.X_raw, xh);
  write_matrix_csv((dir / "Y.csv").string(), sim.Y_raw, yh);
  write_matrix_csv((dir / "B0.csv").string(), sim.B0);
  write_matrix_csv((dir / "Omega0.csv").string(), sim.Omega0);
  save_scenario(scn, (dir / "scenario.txt").string());

  json manifest;
  manifest["command"] = "simulate";
  manifest["scenario"] = {{"n", scn.n},       {"p", scn.p},
                          {"q", scn.q},       {"rho", scn.rho},
                          {"rho_x", scn.rho_x}, {"b_density", scn.b_density},
                          {"b_min", scn.b_min}, {"b_max", scn.b_max},
                          {"seed", scn.seed}};
  manifest["replication"] = replication;
  manifest["fix_design"] = fix_design;
  manifest["header"] = header;
  manifest["outputs"] = {"X.csv", "Y.csv", "B0.csv", "Omega0.csv", "scenario.txt"};
  write_json((dir / "manifest.json").string(), manifest);
  return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitArtifacts {
  EcmState state;
  ModeGrid grid;
  FitStatus status = FitStatus::converged;
  std::vector<double> column_thetas;  // sep only
};

void write_trace_csv(const std::string& path, const ModeGrid& grid) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write " + path);
  out << "s,t,lambda0,xi0,iteration,objective,max_rel_change,b_nnz,omega_nnz\n";
  for (const ModeCell& cell : grid.cells) {
    for (const EcmIterationRecord& r : cell.trace.records) {
      out << cell.s << ',' << cell.t << ',' << format_double(cell.lambda0) << ','
          << format_double(cell.xi0) << ',' << r.iteration << ',' << format_double(r.objective)
          << ',' << format_double(r.max_rel_change) << ',' << r.b_nnz << ',' << r.omega_nnz
          << "\n";
    }
  }
}

void write_timings_csv(const std::string& path, const ModeGrid& grid, double total_sec) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write " + path);
  out << "s,t,wall_time_sec\n";
  for (const ModeCell& cell : grid.cells) {
    out << cell.s << ',' << cell.t << ',' << format_double(cell.wall_time_sec) << "\n";
  }
  out << "total,," << format_double(total_sec) << "\n";
}

void write_stabilization_csv(const std::string& path, const StabilizationReport& rep) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write " + path);
  out << "s,t,lambda0,xi0,b_nnz,omega_nnz,stable,matches_final,norm_ratio\n";
  for (const StabilizationCell& c : rep.cells) {
    out << c.s << ',' << c.t << ',' << format_double(c.lambda0) << ',' << format_double(c.xi0)
        << ',' << c.b_nnz << ',' << c.omega_nnz << ',' << (c.stable ? 1 : 0) << ','
        << (c.matches_final ? 1 : 0) << ',' << format_double(c.norm_ratio) << "\n";
  }
}

int run_fit(const FitFlags& flags) {
  const MatrixXd X_raw = read_matrix_csv(flags.x_path, flags.header);
  const MatrixXd Y_raw = read_matrix_csv(flags.y_path, flags.header);
  const DataSet data = standardize(X_raw, Y_raw, flags.standardize_y);

  PenaltyConfig cfg;
  FitOptions options = flags.options;
  json source;
  if (!flags.manifest_path.empty()) {
    source = read_json(flags.manifest_path);
    cfg = penalties_from_json(source);
    options = options_from_json(source, options);
  } else if (!flags.ladders_path.empty()) {
    source = read_json(flags.ladders_path);
    cfg = penalties_from_json(source);
  } else if (flags.setting >= 1) {
    cfg = default_ladders(flags.setting, data);
  } else {
    throw validation_error("fit: provide --setting, --ladders, or --manifest");
  }

  ExplorerOptions eopts;
  eopts.fit = options;
  eopts.xi_outer = flags.xi_outer;

  const auto t0 = std::chrono::steady_clock::now();
  FitArtifacts art;
  if (flags.method == "dpe") {
    art.grid = dpe(data, cfg, eopts);
    art.state = art.grid.final_state;
    art.status = art.grid.final_cell().converged ? FitStatus::converged
                                                 : FitStatus::max_iterations;
    if (!art.grid.final_cell().stable) art.status = FitStatus::unstable;
  } else if (flags.method == "dcpe") {
    DcpeResult r = dcpe(data, cfg, eopts);
    art.grid = std::move(r.grid);
    art.state = std::move(r.state);
    art.status = r.status;
  } else if (flags.method == "sep") {
    SepResult r = sep_ssl_ssg(data, cfg, eopts);
    art.grid = std::move(r.grid);
    art.state = std::move(r.state);
    art.status = r.status;
    art.column_thetas = std::move(r.column_thetas);
  } else {
    throw validation_error("fit: unknown method " + flags.method);
  }
  const double total_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  ensure_dir(flags.out_dir);
  const fs::path dir(flags.out_dir);

  const MatrixXd B_orig = data.scaling.coefficients_to_original(art.state.B);
  const MatrixXd Omega_orig = data.scaling.precision_to_original(art.state.Omega);
  write_matrix_csv((dir / "B_hat.csv").string(), B_orig);
  write_matrix_csv((dir / "Omega_hat.csv").string(), Omega_orig);
  write_matrix_csv((dir / "intercepts.csv").string(),
                   data.scaling.intercepts(B_orig).transpose());

  const auto [b_nnz, omega_nnz] = support_counts(art.state);
  const ModeCell& final_cell = art.grid.final_cell();
  {
    std::ofstream out((dir / "fit_summary.csv").string());
    out << "theta,eta,b_nnz,omega_nnz,log_posterior,converged,stable\n";
    out << format_double(art.state.theta) << ',' << format_double(art.state.eta) << ',' << b_nnz
        << ',' << omega_nnz << ',' << format_double(final_cell.log_posterior_terminal) << ','
        << (art.status == FitStatus::converged ? 1 : 0) << ',' << (final_cell.stable ? 1 : 0)
        << "\n";
  }
  write_trace_csv((dir / "trace.csv").string(), art.grid);
  write_timings_csv((dir / "timings.csv").string(), art.grid, total_sec);
  const StabilizationReport rep = stabilization_report(art.grid);
  write_stabilization_csv((dir / "stabilization.csv").string(), rep);

  json manifest;
  manifest["command"] = "fit";
  manifest["method"] = flags.method;
  manifest["x"] = flags.x_path;
  manifest["y"] = flags.y_path;
  manifest["setting"] = flags.setting;
  manifest["standardize_y"] = flags.standardize_y;
  manifest["xi_outer"] = flags.xi_outer;
  manifest["header"] = flags.header;
  manifest["options"] = options_to_json(options);
  manifest["penalties"] = penalties_to_json(cfg);
  if (!art.column_thetas.empty()) manifest["column_thetas"] = art.column_thetas;
  manifest["result"] = {{"theta", art.state.theta},
                        {"eta", art.state.eta},
                        {"b_nnz", b_nnz},
                        {"omega_nnz", omega_nnz},
                        {"log_posterior_terminal", final_cell.log_posterior_terminal},
                        {"converged", art.status == FitStatus::converged},
                        {"stable", final_cell.stable},
                        {"stabilization",
                         {{"trailing_row_run", rep.trailing_row_run},
                          {"trailing_col_run", rep.trailing_col_run},
                          {"trailing_square", rep.trailing_square}}}};
  manifest["outputs"] = {"B_hat.csv",     "Omega_hat.csv",      "intercepts.csv",
                         "fit_summary.csv", "trace.csv",        "stabilization.csv",
                         "timings.csv"};
  write_json((dir / "manifest.json").string(), manifest);

  if (art.status == FitStatus::unstable || !final_cell.stable) {
    std::cerr << "fit: reported mode is numerically unstable (condition-number guard)\n";
    return kExitUnstable;
  }
  if (art.status != FitStatus::converged) {
    std::cerr << "fit: iteration cap reached before convergence\n";
    return kExitNonConverged;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvalRow {
  RecoveryMetrics b, omega;
  double time_sec = std::numeric_limits<double>::quiet_NaN();
};

EvalRow evaluate_dirs(const std::string& est_dir, const std::string& truth_dir) {
  const fs::path est(est_dir), truth(truth_dir);
  const MatrixXd B_hat = read_matrix_csv((est / "B_hat.csv").string());
  const MatrixXd Omega_hat = read_matrix_csv((est / "Omega_hat.csv").string());
  const MatrixXd B0 = read_matrix_csv((truth / "B0.csv").string());
  const MatrixXd Omega0 = read_matrix_csv((truth / "Omega0.csv").string());

  EvalRow row;
  row.b = score_support(B_hat, B0, SupportMode::B);
  row.b.mse = score_estimation_mse(B_hat, B0);
  row.omega = score_support(Omega_hat, Omega0, SupportMode::OmegaUpper);
  row.omega.frob = score_estimation_frob(Omega_hat, Omega0);

  const fs::path timing = est / "timings.csv";
  if (fs::exists(timing)) {
    std::ifstream in(timing);
    std::string line;
    while (std::getline(in, line)) {
      if (line.rfind("total,", 0) == 0) {
        row.time_sec = std::stod(line.substr(line.rfind(',') + 1));
      }
    }
  }
  return row;
}

void write_metrics_csv(const std::string& path, const EvalRow& row) {
  std::ofstream out(path);
  if (!out) throw validation_error("cannot write " + path);
  out << "target,sen,spe,prec,acc,mcc,mse_x1000,frob,time_sec\n";
  out << "B," << format_double(row.b.sen) << ',' << format_double(row.b.spe) << ','
      << format_double(row.b.prec) << ',' << format_double(row.b.acc) << ','
      << format_double(row.b.mcc) << ',' << format_double(1000.0 * row.b.mse) << ",,"
      << format_double(row.time_sec) << "\n";
  out << "Omega," << format_double(row.omega.sen) << ',' << format_double(row.omega.spe) << ','
      << format_double(row.omega.prec) << ',' << format_double(row.omega.acc) << ','
      << format_double(row.omega.mcc) << ",," << format_double(row.omega.frob) << ','
      << format_double(row.time_sec) << "\n";
}

void print_eval_table(const EvalRow& row) {
  std::vector<std::vector<std::string>> rows;
  rows.push_back({"", "SEN/SPE", "PREC/ACC", "MCC", "MSE", "FROB", "TIME"});
  rows.push_back({"B", fmt(row.b.sen) + " / " + fmt(row.b.spe),
                  fmt(row.b.prec) + " / " + fmt(row.b.acc), fmt(row.b.mcc),
                  fmt(1000.0 * row.b.mse), "-", fmt(row.time_sec)});
  rows.push_back({"Omega", fmt(row.omega.sen) + " / " + fmt(row.omega.spe),
                  fmt(row.omega.prec) + " / " + fmt(row.omega.acc), fmt(row.omega.mcc), "-",
                  fmt(row.omega.frob), fmt(row.time_sec)});
  write_table(std::cout, rows);
}

int cmd_evaluate(const std::string& est_dir, const std::string& truth_dir,
                 const std::string& out_dir) {
  const EvalRow row = evaluate_dirs(est_dir, truth_dir);
  print_eval_table(row);
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    write_metrics_csv((fs::path(out_dir) / "metrics.csv").string(), row);
  }
  return kExitOk;
}

// --------------------------------------------------------------- replicate

int cmd_replicate(const std::string& scenario_path, const FitFlags& base_flags, int replications,
                  int jobs, bool fix_design, std::optional<std::uint64_t> seed_override) {
  SimScenario scn = load_scenario(scenario_path);
  if (seed_override) scn.seed = *seed_override;
  ensure_dir(base_flags.out_dir);

  std::vector<EvalRow> rows(static_cast<std::size_t>(replications));
  std::vector<int> codes(static_cast<std::size_t>(replications), kExitOk);
  std::atomic<int> next{0};
  std::mutex io_mutex;

  auto worker = [&]() {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= replications) return;
      char sub[32];
      std::snprintf(sub, sizeof(sub), "rep_%03d", r);
      const fs::path rep_dir = fs::path(base_flags.out_dir) / sub;
      try {
        const std::string truth_dir = (rep_dir / "truth").string();
        {
          std::lock_guard<std::mutex> lock(io_mutex);
          ensure_dir(truth_dir);
        }
        const SimulatedData sim = generate(scn, r, fix_design);
        write_matrix_csv((rep_dir / "truth" / "X.csv").string(), sim.X_raw);
        write_matrix_csv((rep_dir / "truth" / "Y.csv").string(), sim.Y_raw);
        write_matrix_csv((rep_dir / "truth" / "B0.csv").string(), sim.B0);
        write_matrix_csv((rep_dir / "truth" / "Omega0.csv").string(), sim.Omega0);

        FitFlags flags = base_flags;
        flags.x_path = (rep_dir / "truth" / "X.csv").string();
        flags.y_path = (rep_dir / "truth" / "Y.csv").string();
        flags.out_dir = (rep_dir / "fit").string();
        codes[static_cast<std::size_t>(r)] = run_fit(flags);
        rows[static_cast<std::size_t>(r)] =
            evaluate_dirs((rep_dir / "fit").string(), (rep_dir / "truth").string());
        write_metrics_csv((rep_dir / "metrics.csv").string(),
                          rows[static_cast<std::size_t>(r)]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(io_mutex);
        std::cerr << "replication " << r << " failed: " << e.what() << "\n";
        codes[static_cast<std::size_t>(r)] = kExitValidation;
      }
    }
  };

  const int n_workers = std::max(1, std::min(jobs, replications));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_workers));
  for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();

  // Aggregate, keyed by replication id; NaNs are skipped per column.
  std::ofstream agg((fs::path(base_flags.out_dir) / "aggregate.csv").string());
  agg << "rep,target,sen,spe,prec,acc,mcc,mse_x1000,frob,time_sec\n";
  auto emit = [&](int r, const char* target, const RecoveryMetrics& m, double time_sec) {
    agg << r << ',' << target << ',' << format_double(m.sen) << ',' << format_double(m.spe)
        << ',' << format_double(m.prec) << ',' << format_double(m.acc) << ','
        << format_double(m.mcc) << ',';
    if (std::string(target) == "B") {
      agg << format_double(1000.0 * m.mse) << ",,";
    } else {
      agg << ',' << format_double(m.frob) << ',';
    }
    agg << format_double(time_sec) << "\n";
  };
  auto nanmean = [&](auto get) {
    double sum = 0.0;
    int count = 0;
    for (const EvalRow& row : rows) {
      const double v = get(row);
      if (!std::isnan(v)) {
        sum += v;
        ++count;
      }
    }
    return count > 0 ? sum / count : std::numeric_limits<double>::quiet_NaN();
  };
  for (int r = 0; r < replications; ++r) {
    emit(r, "B", rows[static_cast<std::size_t>(r)].b, rows[static_cast<std::size_t>(r)].time_sec);
    emit(r, "Omega", rows[static_cast<std::size_t>(r)].omega,
         rows[static_cast<std::size_t>(r)].time_sec);
  }
  RecoveryMetrics mb, mo;
  mb.sen = nanmean([](const EvalRow& e) { return e.b.sen; });
  mb.spe = nanmean([](const EvalRow& e) { return e.b.spe; });
  mb.prec = nanmean([](const EvalRow& e) { return e.b.prec; });
  mb.acc = nanmean([](const EvalRow& e) { return e.b.acc; });
  mb.mcc = nanmean([](const EvalRow& e) { return e.b.mcc; });
  mb.mse = nanmean([](const EvalRow& e) { return e.b.mse; });
  mo.sen = nanmean([](const EvalRow& e) { return e.omega.sen; });
  mo.spe = nanmean([](const EvalRow& e) { return e.omega.spe; });
  mo.prec = nanmean([](const EvalRow& e) { return e.omega.prec; });
  mo.acc = nanmean([](const EvalRow& e) { return e.omega.acc; });
  mo.mcc = nanmean([](const EvalRow& e) { return e.omega.mcc; });
  mo.frob = nanmean([](const EvalRow& e) { return e.omega.frob; });
  const double mean_time = nanmean([](const EvalRow& e) { return e.time_sec; });
  emit(-1, "B", mb, mean_time);
  emit(-1, "Omega", mo, mean_time);

  EvalRow mean_row;
  mean_row.b = mb;
  mean_row.omega = mo;
  mean_row.time_sec = mean_time;
  std::cout << "mean over " << replications << " replications ("
            << base_flags.method << "):\n";
  print_eval_table(mean_row);

  for (int code : codes) {
    if (code != kExitOk) return code;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multivariate spike-and-slab lasso: simulation, fitting, evaluation"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "draw a synthetic dataset");
  std::string sim_scenario, sim_out, sim_manifest;
  std::optional<std::uint64_t> sim_seed;
  int sim_replication = 0;
  bool sim_fix_design = false, sim_header = false;
  sim->add_option("--scenario", sim_scenario, "scenario file (key = value)")
      ->envname("MSSL_SCENARIO");
  sim->add_option("--manifest", sim_manifest, "re-run from a simulate manifest");
  sim->add_option("--out", sim_out, "output directory")->required()->envname("MSSL_OUT");
  sim->add_option("--seed", sim_seed, "seed override")->envname("MSSL_SEED");
  sim->add_option("--replication", sim_replication, "replication index (noise stream)");
  sim->add_flag("--fix-design", sim_fix_design, "hold X fixed across replications");
  sim->add_flag("--header", sim_header, "write header rows in X.csv and Y.csv");

  // fit
  auto* fit = app.add_subcommand("fit", "fit a model: dpe, dcpe, or sep");
  fit->require_subcommand(1);
  FitFlags flags;
  std::vector<CLI::App*> methods;
  for (const char* m : {"dpe", "dcpe", "sep"}) {
    auto* sub = fit->add_subcommand(m);
    sub->add_option("--x", flags.x_path, "predictor CSV")->required()->envname("MSSL_X");
    sub->add_option("--y", flags.y_path, "response CSV")->required()->envname("MSSL_Y");
    sub->add_option("--out", flags.out_dir, "output directory")->required()->envname("MSSL_OUT");
    sub->add_option("--setting", flags.setting, "hyper-parameter preset 1..12")
        ->check(CLI::Range(1, 12))
        ->envname("MSSL_SETTING");
    sub->add_option("--ladders", flags.ladders_path, "penalty specification (JSON)");
    sub->add_option("--manifest", flags.manifest_path, "re-run from a fit manifest");
    sub->add_option("--tol", flags.options.tol, "relative convergence threshold")
        ->envname("MSSL_TOL");
    sub->add_option("--max-iter", flags.options.max_iter_ecm, "outer iteration cap")
        ->envname("MSSL_MAX_ITER");
    sub->add_option("--cond-cap", flags.options.cond_cap_multiplier,
                    "stability guard multiplier (of n)");
    sub->add_flag("--standardize-y", flags.standardize_y, "rescale Y columns to unit variance");
    sub->add_flag("--xi-outer", flags.xi_outer, "traverse the grid with the xi ladder outermost");
    sub->add_flag("--header", flags.header, "input CSVs carry a header row");
    methods.push_back(sub);
  }

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "score an estimate against the truth");
  std::string ev_est, ev_truth, ev_out;
  ev->add_option("--est", ev_est, "directory with B_hat.csv / Omega_hat.csv")->required();
  ev->add_option("--truth", ev_truth, "directory with B0.csv / Omega0.csv")->required();
  ev->add_option("--out", ev_out, "directory for metrics.csv");

  // replicate
  auto* rep = app.add_subcommand("replicate", "fan out simulate + fit + evaluate pipelines");
  std::string rep_scenario;
  FitFlags rep_flags;
  int rep_n = 10, rep_jobs = 1;
  bool rep_fix_design = false;
  std::optional<std::uint64_t> rep_seed;
  rep->add_option("--scenario", rep_scenario, "scenario file")->required();
  rep->add_option("--method", rep_flags.method, "dpe | dcpe | sep")
      ->required()
      ->check(CLI::IsMember({"dpe", "dcpe", "sep"}));
  rep->add_option("--setting", rep_flags.setting, "hyper-parameter preset 1..12")
      ->check(CLI::Range(1, 12));
  rep->add_option("--ladders", rep_flags.ladders_path, "penalty specification (JSON)");
  rep->add_option("--out", rep_flags.out_dir, "output directory")->required();
  rep->add_option("--replications", rep_n, "number of replications")->envname("MSSL_REPLICATIONS");
  rep->add_option("--jobs", rep_jobs, "worker threads")->envname("MSSL_JOBS");
  rep->add_option("--tol", rep_flags.options.tol, "relative convergence threshold");
  rep->add_option("--max-iter", rep_flags.options.max_iter_ecm, "outer iteration cap");
  rep->add_option("--seed", rep_seed, "seed override");
  rep->add_flag("--fix-design", rep_fix_design, "hold X fixed across replications");
  rep->add_flag("--standardize-y", rep_flags.standardize_y, "rescale Y columns");
  rep->add_flag("--xi-outer", rep_flags.xi_outer, "xi ladder outermost");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (sim->parsed()) {
      if (sim_scenario.empty() && sim_manifest.empty()) {
        throw validation_error("simulate: provide --scenario or --manifest");
      }
      return cmd_simulate(sim_scenario, sim_manifest, sim_out, sim_seed, sim_replication,
                          sim_fix_design, sim_header);
    }
    if (fit->parsed()) {
      for (CLI::App* sub : methods) {
        if (sub->parsed()) flags.method = sub->get_name();
      }
      return run_fit(flags);
    }
    if (ev->parsed()) {
      return cmd_evaluate(ev_est, ev_truth, ev_out);
    }
    if (rep->parsed()) {
      return cmd_replicate(rep_scenario, rep_flags, rep_n, rep_jobs, rep_fix_design, rep_seed);
    }
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const numeric_error& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitUnstable;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
  return kExitValidation;
}
