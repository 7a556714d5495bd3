#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "ctspec/dataset.hpp"
#include "ctspec/random.hpp"
#include "ctspec/simlab.hpp"

namespace ctspec::fixtures {

/// T, X1..Xr, Y with T depending on X so that weights are non-trivial.
inline Dataset random_dataset(Eigen::Index n, Eigen::Index r, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  Eigen::VectorXd t(n);
  Eigen::MatrixXd x(n, r);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < r; ++j) {
      x(i, j) = u(rng);
      s += x(i, j);
    }
    t[i] = 0.3 * s + z(rng);
    y[i] = 1.0 + s + t[i] + z(rng);
  }
  return Dataset(t, x, y);
}

inline Dataset dgp_sample(DgpId id, Eigen::Index n, std::uint64_t seed) { return generate({id, n, 0.0, false}, seed).data; }

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ctspec_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ctspec::fixtures
