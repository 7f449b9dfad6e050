#include "mssl/types.hpp"

#include <cmath>

namespace mssl {

MatrixXd Standardizer::coefficients_to_original(const MatrixXd& B_std) const {
  MatrixXd B = B_std;
  for (Index j = 0; j < B.rows(); ++j) {
    B.row(j) /= x_scale(j);
  }
  if (y_scaled) {
    for (Index k = 0; k < B.cols(); ++k) {
      B.col(k) *= y_scale(k);
    }
  }
  return B;
}

VectorXd Standardizer::intercepts(const MatrixXd& B_original) const {
  return y_center - B_original.transpose() * x_center;
}

MatrixXd Standardizer::precision_to_original(const MatrixXd& Omega_std) const {
  if (!y_scaled) return Omega_std;
  VectorXd inv = y_scale.cwiseInverse();
  return inv.asDiagonal() * Omega_std * inv.asDiagonal();
}

DataSet standardize(const MatrixXd& raw_X, const MatrixXd& raw_Y, bool scale_y) {
  const Index n = raw_X.rows();
  if (raw_Y.rows() != n) {
    throw validation_error("standardize: X and Y disagree on the number of rows");
  }
  if (n < 2) {
    throw validation_error("standardize: need at least two observations");
  }
  const Index p = raw_X.cols();
  const Index q = raw_Y.cols();
  if (p < 1 || q < 1) {
    throw validation_error("standardize: X and Y must each have at least one column");
  }

  DataSet d;
  d.n = n;
  d.p = p;
  d.q = q;
  d.X.resize(n, p);
  d.Y.resize(n, q);
  d.scaling.x_center.resize(p);
  d.scaling.x_scale.resize(p);
  d.scaling.y_center.resize(q);
  d.scaling.y_scale = VectorXd::Ones(q);
  d.scaling.y_scaled = scale_y;

  const double sqrt_n = std::sqrt(static_cast<double>(n));
  for (Index j = 0; j < p; ++j) {
    const double mean = raw_X.col(j).mean();
    VectorXd centered = raw_X.col(j).array() - mean;
    const double norm = centered.norm();
    if (norm <= 0.0) {
      throw validation_error("standardize: X column " + std::to_string(j) + " is constant");
    }
    d.scaling.x_center(j) = mean;
    d.scaling.x_scale(j) = norm / sqrt_n;
    d.X.col(j) = centered * (sqrt_n / norm);
  }
  for (Index k = 0; k < q; ++k) {
    const double mean = raw_Y.col(k).mean();
    VectorXd centered = raw_Y.col(k).array() - mean;
    d.scaling.y_center(k) = mean;
    if (scale_y) {
      const double norm = centered.norm();
      if (norm <= 0.0) {
        throw validation_error("standardize: Y column " + std::to_string(k) +
                               " is constant, cannot rescale");
      }
      d.scaling.y_scale(k) = norm / sqrt_n;
      centered *= sqrt_n / norm;
    }
    d.Y.col(k) = centered;
  }
  return d;
}

EcmState EcmState::cold_start(const DataSet& data) {
  EcmState s;
  s.B = MatrixXd::Zero(data.p, data.q);
  s.theta = 0.5;
  s.Omega = MatrixXd::Identity(data.q, data.q);
  s.eta = 0.5;
  s.refresh_residuals(data);
  return s;
}

void EcmState::refresh_residuals(const DataSet& data) {
  R = data.Y - data.X * B;
  S = (R.transpose() * R) / static_cast<double>(data.n);
  S = ((S + S.transpose()) * 0.5).eval();
}

void PenaltyConfig::validate() const {
  if (lambda1 <= 0 || xi1 <= 0) {
    throw validation_error("PenaltyConfig: slab penalties must be positive");
  }
  if (a_theta <= 0 || b_theta <= 0 || a_eta <= 0 || b_eta <= 0) {
    throw validation_error("PenaltyConfig: Beta hyper-parameters must be positive");
  }
  auto check_ladder = [](const std::vector<double>& ladder, double slab, const char* name) {
    if (ladder.empty()) {
      throw validation_error(std::string("PenaltyConfig: ") + name + " ladder is empty");
    }
    if (ladder.front() < slab) {
      throw validation_error(std::string("PenaltyConfig: ") + name +
                             " ladder must start at or above the slab penalty");
    }
    for (std::size_t i = 1; i < ladder.size(); ++i) {
      if (ladder[i] <= ladder[i - 1]) {
        throw validation_error(std::string("PenaltyConfig: ") + name +
                               " ladder must be strictly increasing");
      }
    }
  };
  check_ladder(lambda_ladder, lambda1, "lambda");
  check_ladder(xi_ladder, xi1, "xi");
}

std::pair<Index, Index> support_counts(const EcmState& state, double zero_tol) {
  Index nb = 0;
  for (Index k = 0; k < state.B.cols(); ++k) {
    for (Index j = 0; j < state.B.rows(); ++j) {
      if (std::abs(state.B(j, k)) > zero_tol) ++nb;
    }
  }
  Index no = 0;
  for (Index k = 0; k < state.Omega.cols(); ++k) {
    for (Index kk = 0; kk < k; ++kk) {
      if (std::abs(state.Omega(kk, k)) > zero_tol) ++no;
    }
  }
  return {nb, no};
}

std::vector<std::uint64_t> support_mask(const MatrixXd& M, double zero_tol) {
  const Index total = M.size();
  std::vector<std::uint64_t> bits((static_cast<std::size_t>(total) + 63) / 64, 0);
  Index idx = 0;
  for (Index k = 0; k < M.cols(); ++k) {
    for (Index j = 0; j < M.rows(); ++j, ++idx) {
      if (std::abs(M(j, k)) > zero_tol) {
        bits[idx / 64] |= (std::uint64_t{1} << (idx % 64));
      }
    }
  }
  return bits;
}

std::vector<std::uint64_t> support_mask_upper(const MatrixXd& M, double zero_tol) {
  const Index q = M.cols();
  const Index total = q * (q - 1) / 2;
  std::vector<std::uint64_t> bits((static_cast<std::size_t>(total) + 63) / 64, 0);
  if (total == 0) return bits;
  Index idx = 0;
  for (Index k = 0; k < q; ++k) {
    for (Index kk = 0; kk < k; ++kk, ++idx) {
      if (std::abs(M(kk, k)) > zero_tol) {
        bits[idx / 64] |= (std::uint64_t{1} << (idx % 64));
      }
    }
  }
  return bits;
}

int ModeGrid::cell_index(int s, int t) const {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].s == s && cells[i].t == t) return static_cast<int>(i);
  }
  return -1;
}

const ModeCell& ModeGrid::final_cell() const {
  if (final_index < 0 || final_index >= static_cast<int>(cells.size())) {
    throw validation_error("ModeGrid: no final mode recorded");
  }
  return cells[static_cast<std::size_t>(final_index)];
}

}  // namespace mssl
