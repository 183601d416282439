#pragma once

#include "ppg2abp/core.hpp"

#include <string>

namespace ppg2abp::tensorops {

enum class LossKind { MAE, MSE };

inline std::string to_string(LossKind k) { return k == LossKind::MAE ? "mae" : "mse"; }

inline LossKind loss_from_string(const std::string& s) {
  if (s == "mae" || s == "MAE") return LossKind::MAE;
  if (s == "mse" || s == "MSE") return LossKind::MSE;
  throw DataError("unknown loss '" + s + "' (expected mae or mse)");
}

template <typename Scalar>
struct LossResult {
  Scalar value;
  TensorT<Scalar> grad;
};

template <typename Scalar>
void check_loss_shapes(const TensorT<Scalar>& pred, const TensorT<Scalar>& target, const char* op) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols())
    throw ShapeError(std::string(op) + ": prediction " + std::to_string(pred.rows()) + "x" +
                     std::to_string(pred.cols()) + " vs target " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()));
  if (pred.size() == 0) throw ShapeError(std::string(op) + ": empty tensors");
}

/// sum |y - yhat| / n; gradient sign(pred - target) / n, 0 at equality.
template <typename Scalar>
LossResult<Scalar> mae_loss(const TensorT<Scalar>& pred, const TensorT<Scalar>& target) {
  check_loss_shapes(pred, target, "mae_loss");
  const Scalar n = static_cast<Scalar>(pred.size());
  const auto diff = (pred - target).array();
  return {diff.abs().sum() / n, (diff.sign() / n).matrix()};
}

/// sum (y - yhat)^2 / n; gradient 2 (pred - target) / n.
template <typename Scalar>
LossResult<Scalar> mse_loss(const TensorT<Scalar>& pred, const TensorT<Scalar>& target) {
  check_loss_shapes(pred, target, "mse_loss");
  const Scalar n = static_cast<Scalar>(pred.size());
  const TensorT<Scalar> diff = pred - target;
  return {diff.squaredNorm() / n, diff * (Scalar(2) / n)};
}

template <typename Scalar>
LossResult<Scalar> loss(LossKind kind, const TensorT<Scalar>& pred, const TensorT<Scalar>& target) {
  return kind == LossKind::MAE ? mae_loss(pred, target) : mse_loss(pred, target);
}

}  // namespace ppg2abp::tensorops
