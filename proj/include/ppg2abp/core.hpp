#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace ppg2abp {

using Index = Eigen::Index;

/// Channels x length, row-major so each channel is a contiguous row.
template <typename Scalar>
using TensorT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using BatchT = std::vector<TensorT<Scalar>>;

using Tensor = TensorT<double>;
using Vector = VectorT<double>;
using Batch = BatchT<double>;

inline constexpr Index kEpisodeLength = 1024;
inline constexpr double kSampleRate = 125.0;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor or sequence shapes that do not fit the operation.
struct ShapeError : Error {
  using Error::Error;
};

/// Malformed input data: files, CSV rows, out-of-domain arguments.
struct DataError : Error {
  using Error::Error;
};

/// NaN/Inf encountered during training or inference.
struct NumericalError : Error {
  using Error::Error;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& x) {
  return x.allFinite();
}

}  // namespace ppg2abp
