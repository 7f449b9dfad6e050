#pragma once

#include "mssl/types.hpp"

#include <string>
#include <vector>

namespace mssl {

// Comma-separated numeric matrices, one row per line, decimal-point reals.
// Values are written with enough digits to round-trip exactly.
MatrixXd read_matrix_csv(const std::string& path, bool header = false);
void write_matrix_csv(const std::string& path, const MatrixXd& M,
                      const std::vector<std::string>& header = {});

std::string format_double(double v);

}  // namespace mssl
