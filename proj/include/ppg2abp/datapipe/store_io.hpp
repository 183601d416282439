#pragma once

#include "ppg2abp/datapipe/episode.hpp"

#include <string>
#include <string_view>

namespace ppg2abp::datapipe {

// Layout (all integers little-endian):
//   "P2ABPDATA"                       9 bytes
//   version                           u32 (= 1)
//   record count                      u64
//   sampling rate                     f64
//   per record:
//     subject id length, id           u32, UTF-8 bytes
//     ppg                             1024 x f64
//     abp                             1024 x f64
inline constexpr std::string_view kStoreMagic = "P2ABPDATA";

struct StoreFormatError : DataError {
  enum class Kind { BadMagic, BadVersion, Truncated, Invalid };

  StoreFormatError(Kind k, const std::string& what, long record = -1)
      : DataError(what), kind(k), record_index(record) {}

  Kind kind;
  long record_index;
};

std::string serialize_store(const EpisodeStore& store);
EpisodeStore parse_store(const std::string& bytes);

void write_store(const std::string& path, const EpisodeStore& store);
EpisodeStore read_store(const std::string& path);

/// CSV with header ppg,abp,subject_id and one row per sample. Consecutive rows
/// of the same subject form one recording, segmented into episodes.
struct CsvImport {
  EpisodeStore store;
  std::size_t discarded_samples = 0;
  std::size_t dropped_windows = 0;
};
CsvImport import_csv(const std::string& path);

}  // namespace ppg2abp::datapipe
