#include "mssl/simlab.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

namespace mssl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Stream tags for the seeded substreams. Structure (coefficient positions
// and values) depends only on the scenario seed; noise and, unless the
// design is fixed, the design matrix are redrawn per replication.
enum : std::uint32_t { kStructureStream = 1, kDesignStream = 2, kNoiseStream = 3 };

std::mt19937_64 make_engine(std::uint64_t seed, std::uint32_t stream, std::uint32_t replication) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), stream, replication};
  return std::mt19937_64(seq);
}

// 53-bit uniform in (0, 1]; explicit so draws do not depend on library
// distribution internals.
double uniform01(std::mt19937_64& eng) {
  return (static_cast<double>(eng() >> 11) + 1.0) * 0x1p-53;
}

double uniform_range(std::mt19937_64& eng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(eng);
}

// Box-Muller with a cached second draw; consumes exactly two uniforms per pair.
class NormalSource {
 public:
  explicit NormalSource(std::mt19937_64& eng) : eng_(eng) {}
  double operator()() {
    if (have_) {
      have_ = false;
      return cached_;
    }
    const double u1 = uniform01(eng_);
    const double u2 = uniform01(eng_);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    cached_ = r * std::sin(a);
    have_ = true;
    return r * std::cos(a);
  }

 private:
  std::mt19937_64& eng_;
  double cached_ = 0.0;
  bool have_ = false;
};

MatrixXd gaussian_rows(Index n, Index dim, const MatrixXd& covariance, std::mt19937_64& eng) {
  Eigen::LLT<MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success) {
    throw numeric_error("gaussian_rows: covariance is not positive definite");
  }
  MatrixXd Z(n, dim);
  NormalSource normal(eng);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < dim; ++j) Z(i, j) = normal();
  }
  return Z * llt.matrixU();
}

}  // namespace

void SimScenario::validate() const {
  if (n < 2 || p < 1 || q < 1) throw validation_error("SimScenario: dimensions out of range");
  if (!(rho >= 0.0 && rho < 1.0)) throw validation_error("SimScenario: rho must lie in [0,1)");
  if (!(rho_x >= 0.0 && rho_x < 1.0)) {
    throw validation_error("SimScenario: rho_x must lie in [0,1)");
  }
  if (!(b_density > 0.0 && b_density <= 1.0)) {
    throw validation_error("SimScenario: b_density must lie in (0,1]");
  }
  if (!(b_max >= b_min)) throw validation_error("SimScenario: b_max < b_min");
}

MatrixXd ar1_covariance(Index dim, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw validation_error("ar1_covariance: rho must lie in [0,1)");
  MatrixXd S(dim, dim);
  for (Index i = 0; i < dim; ++i) {
    for (Index j = 0; j < dim; ++j) {
      S(i, j) = std::pow(rho, std::abs(static_cast<double>(i - j)));
    }
  }
  return S;
}

MatrixXd ar1_precision(Index dim, double rho) {
  if (!(rho >= 0.0 && rho < 1.0)) throw validation_error("ar1_precision: rho must lie in [0,1)");
  MatrixXd P = MatrixXd::Zero(dim, dim);
  if (dim == 1) {
    P(0, 0) = 1.0;
    return P;
  }
  const double denom = 1.0 - rho * rho;
  for (Index i = 0; i < dim; ++i) {
    P(i, i) = (i == 0 || i == dim - 1) ? 1.0 / denom : (1.0 + rho * rho) / denom;
    if (i + 1 < dim) {
      P(i, i + 1) = -rho / denom;
      P(i + 1, i) = -rho / denom;
    }
  }
  return P;
}

SimulatedData generate(const SimScenario& scn, int replication, bool fix_design) {
  scn.validate();
  SimulatedData out;
  out.Omega0 = ar1_precision(scn.q, scn.rho);

  // Coefficient structure: positions by partial Fisher-Yates, values uniform.
  auto structure_eng = make_engine(scn.seed, kStructureStream, 0);
  const Index total = scn.p * scn.q;
  const Index nnz = static_cast<Index>(std::llround(static_cast<double>(total) * scn.b_density));
  std::vector<Index> idx(static_cast<std::size_t>(total));
  for (Index i = 0; i < total; ++i) idx[static_cast<std::size_t>(i)] = i;
  for (Index i = 0; i < nnz; ++i) {
    const Index rest = total - i;
    const Index pick = i + static_cast<Index>(structure_eng() % static_cast<std::uint64_t>(rest));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(pick)]);
  }
  out.B0 = MatrixXd::Zero(scn.p, scn.q);
  for (Index i = 0; i < nnz; ++i) {
    const Index flat = idx[static_cast<std::size_t>(i)];
    out.B0(flat % scn.p, flat / scn.p) = uniform_range(structure_eng, scn.b_min, scn.b_max);
  }

  auto design_eng = fix_design ? make_engine(scn.seed, kDesignStream, 0)
                               : make_engine(scn.seed, kNoiseStream, 2 * replication);
  out.X_raw = gaussian_rows(scn.n, scn.p, ar1_covariance(scn.p, scn.rho_x), design_eng);

  auto noise_eng = make_engine(scn.seed, kNoiseStream, 2 * replication + 1);
  const MatrixXd E = gaussian_rows(scn.n, scn.q, ar1_covariance(scn.q, scn.rho), noise_eng);
  out.Y_raw = out.X_raw * out.B0 + E;

  out.data = standardize(out.X_raw, out.Y_raw);
  return out;
}

RecoveryMetrics score_support(const MatrixXd& estimate, const MatrixXd& truth, SupportMode mode) {
  if (estimate.rows() != truth.rows() || estimate.cols() != truth.cols()) {
    throw validation_error("score_support: shape mismatch");
  }
  RecoveryMetrics m;
  auto tally = [&m](bool est_nz, bool true_nz) {
    if (est_nz && true_nz) ++m.tp;
    else if (est_nz && !true_nz) ++m.fp;
    else if (!est_nz && true_nz) ++m.fn;
    else ++m.tn;
  };
  if (mode == SupportMode::B) {
    for (Index k = 0; k < truth.cols(); ++k) {
      for (Index j = 0; j < truth.rows(); ++j) {
        tally(estimate(j, k) != 0.0, truth(j, k) != 0.0);
      }
    }
  } else {
    for (Index k = 0; k < truth.cols(); ++k) {
      for (Index kk = 0; kk < k; ++kk) {
        tally(estimate(kk, k) != 0.0, truth(kk, k) != 0.0);
      }
    }
  }

  const double tp = static_cast<double>(m.tp), tn = static_cast<double>(m.tn);
  const double fp = static_cast<double>(m.fp), fn = static_cast<double>(m.fn);
  m.sen = (m.tp + m.fn > 0) ? tp / (tp + fn) : kNaN;
  m.spe = (m.tn + m.fp > 0) ? tn / (tn + fp) : kNaN;
  m.prec = (m.tp + m.fp > 0) ? tp / (tp + fp) : kNaN;
  m.acc = (tp + tn + fp + fn > 0) ? (tp + tn) / (tp + tn + fp + fn) : kNaN;
  const double d1 = tp + fp, d2 = tp + fn, d3 = tn + fp, d4 = tn + fn;
  m.mcc = (d1 > 0 && d2 > 0 && d3 > 0 && d4 > 0)
              ? (tp * tn - fp * fn) / std::sqrt(d1 * d2 * d3 * d4)
              : kNaN;
  m.mse = kNaN;
  m.frob = kNaN;
  return m;
}

double score_estimation_mse(const MatrixXd& B_hat, const MatrixXd& B0) {
  if (B_hat.rows() != B0.rows() || B_hat.cols() != B0.cols()) {
    throw validation_error("score_estimation_mse: shape mismatch");
  }
  return (B_hat - B0).squaredNorm() / static_cast<double>(B0.size());
}

double score_estimation_frob(const MatrixXd& Omega_hat, const MatrixXd& Omega0) {
  if (Omega_hat.rows() != Omega0.rows() || Omega_hat.cols() != Omega0.cols()) {
    throw validation_error("score_estimation_frob: shape mismatch");
  }
  return (Omega_hat - Omega0).squaredNorm();
}

SimScenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw validation_error("load_scenario: cannot open " + path);
  SimScenario scn;
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) continue;
    try {
      if (key == "n") scn.n = std::stol(value);
      else if (key == "p") scn.p = std::stol(value);
      else if (key == "q") scn.q = std::stol(value);
      else if (key == "rho") scn.rho = std::stod(value);
      else if (key == "rho_x") scn.rho_x = std::stod(value);
      else if (key == "b_density") scn.b_density = std::stod(value);
      else if (key == "b_min") scn.b_min = std::stod(value);
      else if (key == "b_max") scn.b_max = std::stod(value);
      else if (key == "seed") scn.seed = std::stoull(value);
      else throw validation_error("load_scenario: unknown key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw validation_error("load_scenario: bad value for '" + key + "'");
    }
  }
  scn.validate();
  return scn;
}

void save_scenario(const SimScenario& scn, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw validation_error("save_scenario: cannot open " + path);
  char buf[64];
  out << "n = " << scn.n << "\n";
  out << "p = " << scn.p << "\n";
  out << "q = " << scn.q << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", scn.rho);
  out << "rho = " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", scn.rho_x);
  out << "rho_x = " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", scn.b_density);
  out << "b_density = " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", scn.b_min);
  out << "b_min = " << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", scn.b_max);
  out << "b_max = " << buf << "\n";
  out << "seed = " << scn.seed << "\n";
}

}  // namespace mssl
