#pragma once

#include "ppg2abp/core.hpp"

#include <algorithm>

namespace ppg2abp::pipeline {

/// Systolic, diastolic and mean arterial pressure of one window (mmHg).
struct BPValues {
  double sbp = 0.0;
  double dbp = 0.0;
  double map = 0.0;
};

/// SBP = max, DBP = min, MAP = mean over the whole window.
inline BPValues extract_bp(const Eigen::Ref<const Vector>& abp) {
  if (abp.size() == 0) throw DataError("extract_bp: empty signal");
  if (!abp.allFinite()) throw DataError("extract_bp: non-finite samples");
  BPValues bp{abp.maxCoeff(), abp.minCoeff(), abp.mean()};
  // Rounding in the mean can step just outside [min, max] for near-constant input.
  bp.map = std::clamp(bp.map, bp.dbp, bp.sbp);
  return bp;
}

}  // namespace ppg2abp::pipeline
