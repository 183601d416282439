#pragma once

#include "ppg2abp/tensorops/param.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace ppg2abp::tensorops {

struct GradCheckOptions {
  double step = 1e-3;
  /// Smallest step tried when `step` crosses a ReLU or max-pool branch point.
  double min_step = 1e-6;
  /// 0 checks every element; otherwise a seeded random subset per block.
  Index max_entries_per_block = 0;
  std::uint64_t seed = 1;
};

struct GradCheckEntry {
  std::string block;
  double max_rel_error = 0.0;
  Index checked = 0;
  /// Entries checked with a reduced step (the nominal one crossed a branch point).
  Index reduced = 0;
  /// Entries with no branch-stable step down to min_step.
  Index skipped = 0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  double worst() const;
  /// Every block has at least one checked entry and all errors are below tolerance.
  bool passes(double tolerance) const;
  std::string to_text() const;
};

/// |a - n| / max(|a|, |n|, 1e-8).
double relative_error(double analytic, double numeric);

/// Central finite differences at step h and h/2, Richardson-extrapolated to
/// fourth order, against analytic gradients.
///   loss():     deterministic forward returning the scalar objective.
///   backward(): recomputes the analytic gradients of the same objective into
///               each block's `grad` (the checker zeroes them first).
/// Non-trainable blocks are skipped. When x +/- step lands on a different ReLU
/// or max-pool branch than x, the step is divided by 10 until the branches
/// agree (down to min_step); entries that never agree are excluded. With a
/// subset size, further entries are drawn until that many are usable.
GradCheckReport gradcheck(const std::function<double()>& loss, const std::function<void()>& backward,
                          const ParamList& blocks, const GradCheckOptions& options = {});

}  // namespace ppg2abp::tensorops
