#pragma once

#include "ppg2abp/core.hpp"

#include <compare>
#include <cstdint>
#include <string>
#include <vector>

namespace ppg2abp::datapipe {

inline constexpr double kAbpMin = 20.0;
inline constexpr double kAbpMax = 300.0;

/// Aligned 1024-sample PPG / ABP window (8.192 s at 125 Hz).
struct EpisodeRecord {
  Vector ppg;
  Vector abp;  // mmHg
  std::string subject_id;

  /// Throws DataError on wrong lengths, non-finite values or ABP outside
  /// [20, 300] mmHg.
  void validate() const;
  bool operator==(const EpisodeRecord& other) const;
};

struct EpisodeStore {
  static constexpr std::uint32_t kVersion = 1;

  std::vector<EpisodeRecord> records;
  double fs = kSampleRate;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  bool operator==(const EpisodeStore& other) const = default;

  EpisodeStore subset(const std::vector<std::size_t>& indices) const;
};

/// Grid cell over (SBP, DBP), 10 mmHg wide by default.
struct BinKey {
  long sbp_bin = 0;
  long dbp_bin = 0;
  auto operator<=>(const BinKey&) const = default;
};

BinKey bin_key(const EpisodeRecord& record, double bin_width = 10.0);

struct SegmentResult {
  std::vector<EpisodeRecord> episodes;
  std::size_t discarded_samples = 0;  // trailing remainder
  std::size_t dropped_windows = 0;    // ABP sanity violations
};

/// Consecutive non-overlapping 1024-sample windows of an aligned pair.
SegmentResult segment_episodes(const Eigen::Ref<const Vector>& ppg, const Eigen::Ref<const Vector>& abp,
                               const std::string& subject_id);

/// Per (SBP, DBP) bin, keeps round(fraction * n) episodes, at most `cap`,
/// drawn uniformly without replacement. Output preserves input order.
EpisodeStore bin_and_subsample(const EpisodeStore& store, double fraction = 0.25, std::size_t cap = 2500,
                               std::uint64_t seed = 0);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Uniform disjoint split of [0, n); both index lists ascending.
SplitIndices split_indices(std::size_t n, std::size_t train_count, std::uint64_t seed);

/// Episode-level split. Throws DataError if train_count exceeds the store.
std::pair<EpisodeStore, EpisodeStore> split_train_test(const EpisodeStore& store, std::size_t train_count,
                                                       std::uint64_t seed);

/// Subject-level alternative: whole subjects go to train until at least
/// train_count episodes are assigned.
std::pair<EpisodeStore, EpisodeStore> split_by_subject(const EpisodeStore& store, std::size_t train_count,
                                                       std::uint64_t seed);

struct QuantityStats {
  double min = 0.0, max = 0.0, mean = 0.0, std = 0.0;
};

struct DatasetStats {
  std::size_t episodes = 0;
  QuantityStats dbp, map, sbp;

  /// Rows DBP / MAP / SBP, columns Min Max Mean Std.
  std::string to_text() const;
};

/// Population statistics of the ground-truth SBP/DBP/MAP per episode.
DatasetStats dataset_stats(const EpisodeStore& store);

}  // namespace ppg2abp::datapipe
