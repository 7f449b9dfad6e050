#include "mssl/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace mssl {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

MatrixXd read_matrix_csv(const std::string& path, bool header) {
  std::ifstream in(path);
  if (!in) throw validation_error("read_matrix_csv: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && header) {
      first = false;
      continue;
    }
    first = false;
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      auto comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      const char* begin = line.data() + pos;
      const char* end = line.data() + comma;
      while (begin < end && (*begin == ' ' || *begin == '\t')) ++begin;
      while (end > begin && (*(end - 1) == ' ' || *(end - 1) == '\t')) --end;
      double value = 0.0;
      const auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc() || ptr != end) {
        throw validation_error("read_matrix_csv: bad number in " + path + ": '" +
                               std::string(begin, end) + "'");
      }
      row.push_back(value);
      pos = comma + 1;
      if (comma == line.size()) break;
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw validation_error("read_matrix_csv: ragged rows in " + path);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw validation_error("read_matrix_csv: " + path + " is empty");
  MatrixXd M(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      M(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return M;
}

void write_matrix_csv(const std::string& path, const MatrixXd& M,
                      const std::vector<std::string>& header) {
  std::ofstream out(path);
  if (!out) throw validation_error("write_matrix_csv: cannot open " + path);
  if (!header.empty()) {
    if (static_cast<Index>(header.size()) != M.cols()) {
      throw validation_error("write_matrix_csv: header width mismatch");
    }
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (j) out << ',';
      out << header[j];
    }
    out << '\n';
  }
  for (Index i = 0; i < M.rows(); ++i) {
    for (Index j = 0; j < M.cols(); ++j) {
      if (j) out << ',';
      out << format_double(M(i, j));
    }
    out << '\n';
  }
  if (!out) throw validation_error("write_matrix_csv: write failed for " + path);
}

}  // namespace mssl
