#pragma once

#include "ppg2abp/core.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace ppg2abp::tensorops {

/// A named learnable (or persistent non-learnable) array with its gradient
/// and Adam moment buffers. Storage is flat; `shape` is the logical layout
/// (convolution kernels are out x in x k).
struct Param {
  std::string name;
  std::vector<Index> shape;
  Eigen::ArrayXd value;
  Eigen::ArrayXd grad;
  Eigen::ArrayXd m;
  Eigen::ArrayXd v;
  bool trainable = true;

  Param() = default;
  Param(std::string name, std::vector<Index> shape, bool trainable = true);

  Index size() const { return value.size(); }

  /// Row-major (rows x cols) view of the value or gradient buffer.
  Eigen::Map<Tensor> value_matrix(Index rows, Index cols) { return {value.data(), rows, cols}; }
  Eigen::Map<const Tensor> value_matrix(Index rows, Index cols) const { return {value.data(), rows, cols}; }
  Eigen::Map<Tensor> grad_matrix(Index rows, Index cols) { return {grad.data(), rows, cols}; }

  void zero_grad() { grad.setZero(); }
};

using ParamList = std::vector<Param*>;

Index count_elements(const ParamList& params, bool trainable_only = true);

/// FNV-1a over names and value bytes; used to assert frozen parameters.
std::uint64_t digest(const ParamList& params);

/// Value copies keyed by position in a ParamList.
using ParamSnapshot = std::vector<Eigen::ArrayXd>;

ParamSnapshot snapshot(const ParamList& params);
void restore(const ParamList& params, const ParamSnapshot& snap);

}  // namespace ppg2abp::tensorops
