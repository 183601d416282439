#pragma once

#include "ppg2abp/core.hpp"
#include "ppg2abp/random.hpp"

#include <filesystem>
#include <string>

namespace ppg2abp::test {

inline Vector random_vector(Rng& rng, Index n, double scale = 1.0) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = scale * rng.normal();
  return v;
}

inline Tensor random_tensor(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = scale * rng.normal();
  return t;
}

/// Fresh per-test scratch directory under the system temp path.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ppg2abp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace ppg2abp::test
