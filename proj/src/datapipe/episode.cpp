#include "ppg2abp/datapipe/episode.hpp"

#include "ppg2abp/pipeline/bp_values.hpp"
#include "ppg2abp/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace ppg2abp::datapipe {

void EpisodeRecord::validate() const {
  if (ppg.size() != kEpisodeLength || abp.size() != kEpisodeLength)
    throw DataError("episode '" + subject_id + "': expected 1024 PPG and ABP samples");
  if (!ppg.allFinite() || !abp.allFinite()) throw DataError("episode '" + subject_id + "': non-finite samples");
  if (abp.minCoeff() < kAbpMin || abp.maxCoeff() > kAbpMax)
    throw DataError("episode '" + subject_id + "': ABP outside [20, 300] mmHg");
}

bool EpisodeRecord::operator==(const EpisodeRecord& other) const {
  return subject_id == other.subject_id && ppg.size() == other.ppg.size() && abp.size() == other.abp.size() &&
         ppg == other.ppg && abp == other.abp;
}

EpisodeStore EpisodeStore::subset(const std::vector<std::size_t>& indices) const {
  EpisodeStore out;
  out.fs = fs;
  out.records.reserve(indices.size());
  for (std::size_t i : indices) out.records.push_back(records.at(i));
  return out;
}

BinKey bin_key(const EpisodeRecord& record, double bin_width) {
  const auto bp = pipeline::extract_bp(record.abp);
  return {static_cast<long>(std::floor(bp.sbp / bin_width)), static_cast<long>(std::floor(bp.dbp / bin_width))};
}

SegmentResult segment_episodes(const Eigen::Ref<const Vector>& ppg, const Eigen::Ref<const Vector>& abp,
                               const std::string& subject_id) {
  if (ppg.size() != abp.size())
    throw DataError("segment_episodes: PPG has " + std::to_string(ppg.size()) + " samples, ABP has " +
                    std::to_string(abp.size()));
  SegmentResult r;
  const Index windows = ppg.size() / kEpisodeLength;
  r.discarded_samples = static_cast<std::size_t>(ppg.size() - windows * kEpisodeLength);
  for (Index w = 0; w < windows; ++w) {
    EpisodeRecord e{ppg.segment(w * kEpisodeLength, kEpisodeLength), abp.segment(w * kEpisodeLength, kEpisodeLength),
                    subject_id};
    if (!e.ppg.allFinite() || !e.abp.allFinite() || e.abp.minCoeff() < kAbpMin || e.abp.maxCoeff() > kAbpMax) {
      ++r.dropped_windows;
      continue;
    }
    r.episodes.push_back(std::move(e));
  }
  return r;
}

EpisodeStore bin_and_subsample(const EpisodeStore& store, double fraction, std::size_t cap, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw DataError("bin_and_subsample: fraction must lie in [0, 1]");
  std::map<BinKey, std::vector<std::size_t>> bins;
  for (std::size_t i = 0; i < store.size(); ++i) bins[bin_key(store.records[i])].push_back(i);

  Rng rng(seed);
  std::vector<std::size_t> keep;
  for (const auto& [key, members] : bins) {
    const auto want = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
    const std::size_t take = std::min({want, cap, members.size()});
    for (std::size_t j : rng.sample(members.size(), take)) keep.push_back(members[j]);
  }
  std::sort(keep.begin(), keep.end());
  return store.subset(keep);
}

SplitIndices split_indices(std::size_t n, std::size_t train_count, std::uint64_t seed) {
  if (train_count > n)
    throw DataError("split: train count " + std::to_string(train_count) + " exceeds " + std::to_string(n) +
                    " episodes");
  Rng rng(seed);
  auto perm = rng.permutation(n);
  SplitIndices s;
  s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(train_count));
  s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(train_count), perm.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

std::pair<EpisodeStore, EpisodeStore> split_train_test(const EpisodeStore& store, std::size_t train_count,
                                                       std::uint64_t seed) {
  const auto s = split_indices(store.size(), train_count, seed);
  return {store.subset(s.train), store.subset(s.test)};
}

std::pair<EpisodeStore, EpisodeStore> split_by_subject(const EpisodeStore& store, std::size_t train_count,
                                                       std::uint64_t seed) {
  if (train_count > store.size()) throw DataError("split: train count exceeds the store size");
  std::map<std::string, std::vector<std::size_t>> subjects;
  for (std::size_t i = 0; i < store.size(); ++i) subjects[store.records[i].subject_id].push_back(i);
  std::vector<const std::vector<std::size_t>*> order;
  for (const auto& [id, members] : subjects) order.push_back(&members);
  Rng rng(seed);
  const auto perm = rng.permutation(order.size());
  std::vector<std::size_t> train, test;
  for (std::size_t p : perm) {
    auto& dst = train.size() < train_count ? train : test;
    dst.insert(dst.end(), order[p]->begin(), order[p]->end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {store.subset(train), store.subset(test)};
}

namespace {

QuantityStats summarize(const std::vector<double>& v) {
  QuantityStats q;
  q.min = *std::min_element(v.begin(), v.end());
  q.max = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += x;
  q.mean = sum / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - q.mean) * (x - q.mean);
  q.std = std::sqrt(ss / static_cast<double>(v.size()));
  return q;
}

}  // namespace

DatasetStats dataset_stats(const EpisodeStore& store) {
  if (store.empty()) throw DataError("dataset_stats: empty store");
  std::vector<double> sbp, dbp, map;
  for (const auto& r : store.records) {
    const auto bp = pipeline::extract_bp(r.abp);
    sbp.push_back(bp.sbp);
    dbp.push_back(bp.dbp);
    map.push_back(bp.map);
  }
  DatasetStats s;
  s.episodes = store.size();
  s.dbp = summarize(dbp);
  s.map = summarize(map);
  s.sbp = summarize(sbp);
  return s;
}

std::string DatasetStats::to_text() const {
  std::ostringstream os;
  os << "episodes: " << episodes << '\n';
  os << std::left << std::setw(6) << "" << std::right << std::setw(10) << "Min" << std::setw(10) << "Max"
     << std::setw(10) << "Mean" << std::setw(10) << "Std" << '\n';
  os << std::fixed << std::setprecision(2);
  auto row = [&os](const char* label, const QuantityStats& q) {
    os << std::left << std::setw(6) << label << std::right << std::setw(10) << q.min << std::setw(10) << q.max
       << std::setw(10) << q.mean << std::setw(10) << q.std << '\n';
  };
  row("DBP", dbp);
  row("MAP", map);
  row("SBP", sbp);
  return os.str();
}

}  // namespace ppg2abp::datapipe
