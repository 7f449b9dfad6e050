#include "doctest.h"

#include "mssl/csv.hpp"

#include "support/oracles.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace mssl;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("matrices round-trip through csv exactly") {
  testing::TestRng rng(101);
  const std::string path = temp_path("mssl_csv_roundtrip.csv");
  for (int rep = 0; rep < 5; ++rep) {
    MatrixXd M = rng.normal_matrix(7, 4);
    M(0, 0) = 1e-17;
    M(1, 1) = -12345678.912345678;
    M(2, 2) = 0.0;
    write_matrix_csv(path, M);
    const MatrixXd back = read_matrix_csv(path);
    REQUIRE(back.rows() == M.rows());
    REQUIRE(back.cols() == M.cols());
    CHECK((back - M).cwiseAbs().maxCoeff() == 0.0);
  }
  std::remove(path.c_str());
}

TEST_CASE("optional header rows") {
  const std::string path = temp_path("mssl_csv_header.csv");
  MatrixXd M(2, 2);
  M << 1, 2, 3, 4;
  write_matrix_csv(path, M, {"a", "b"});
  const MatrixXd with = read_matrix_csv(path, true);
  CHECK((with - M).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(read_matrix_csv(path, false), validation_error);
  std::remove(path.c_str());
}

TEST_CASE("malformed input is rejected") {
  const std::string path = temp_path("mssl_csv_bad.csv");
  {
    std::ofstream out(path);
    out << "1,2\n3\n";
  }
  CHECK_THROWS_AS(read_matrix_csv(path), validation_error);
  {
    std::ofstream out(path);
    out << "1,zebra\n";
  }
  CHECK_THROWS_AS(read_matrix_csv(path), validation_error);
  CHECK_THROWS_AS(read_matrix_csv(temp_path("mssl_csv_missing_file.csv")), validation_error);
  std::remove(path.c_str());
}
