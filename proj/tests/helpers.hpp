#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <string>

#include "dml/rng.hpp"

namespace testing {

inline Eigen::MatrixXd normal_matrix(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  dml::Rng rng(seed);
  Eigen::MatrixXd m(n, p);
  for (Eigen::Index j = 0; j < p; ++j)
    for (Eigen::Index i = 0; i < n; ++i) m(i, j) = rng.normal();
  return m;
}

inline Eigen::VectorXd normal_vector(Eigen::Index n, std::uint64_t seed) {
  return normal_matrix(n, 1, seed).col(0);
}

// Fresh scratch directory per test name.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dml_tests_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing
