#include "ppg2abp/datapipe/store_io.hpp"

#include "ppg2abp/binary_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace ppg2abp::datapipe {

std::string serialize_store(const EpisodeStore& store) {
  ByteWriter w;
  w.bytes(kStoreMagic);
  w.u32(EpisodeStore::kVersion);
  w.u64(store.size());
  w.f64(store.fs);
  for (const auto& r : store.records) {
    if (r.ppg.size() != kEpisodeLength || r.abp.size() != kEpisodeLength)
      throw DataError("write_store: episode '" + r.subject_id + "' is not 1024 samples long");
    w.u32(static_cast<std::uint32_t>(r.subject_id.size()));
    w.bytes(r.subject_id);
    for (Index i = 0; i < kEpisodeLength; ++i) w.f64(r.ppg[i]);
    for (Index i = 0; i < kEpisodeLength; ++i) w.f64(r.abp[i]);
  }
  return w.take();
}

EpisodeStore parse_store(const std::string& bytes) {
  using Kind = StoreFormatError::Kind;
  ByteReader r(bytes);
  auto magic = r.bytes(kStoreMagic.size());
  if (!magic) throw StoreFormatError(Kind::Truncated, "store: truncated header");
  if (*magic != kStoreMagic) throw StoreFormatError(Kind::BadMagic, "store: bad magic (not a P2ABPDATA file)");
  auto version = r.u32();
  auto count = r.u64();
  auto fs = r.f64();
  if (!version || !count || !fs) throw StoreFormatError(Kind::Truncated, "store: truncated header");
  if (*version != EpisodeStore::kVersion)
    throw StoreFormatError(Kind::BadVersion, "store: unsupported version " + std::to_string(*version));
  if (!(*fs > 0.0)) throw StoreFormatError(Kind::Invalid, "store: invalid sampling rate");

  EpisodeStore store;
  store.fs = *fs;
  // Each record needs at least 4 + 2 * 8192 bytes, so absurd counts cannot over-reserve.
  const std::size_t min_record = 4 + 2 * 8 * static_cast<std::size_t>(kEpisodeLength);
  store.records.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(*count, r.remaining() / min_record)));
  for (std::uint64_t i = 0; i < *count; ++i) {
    auto truncated = [&] {
      return StoreFormatError(Kind::Truncated, "store: truncated at record " + std::to_string(i),
                              static_cast<long>(i));
    };
    auto len = r.u32();
    if (!len) throw truncated();
    auto id = r.bytes(*len);
    if (!id) throw truncated();
    if (r.remaining() < 2 * 8 * static_cast<std::size_t>(kEpisodeLength)) throw truncated();
    EpisodeRecord rec;
    rec.subject_id = std::move(*id);
    rec.ppg.resize(kEpisodeLength);
    rec.abp.resize(kEpisodeLength);
    for (Index k = 0; k < kEpisodeLength; ++k) rec.ppg[k] = *r.f64();
    for (Index k = 0; k < kEpisodeLength; ++k) rec.abp[k] = *r.f64();
    store.records.push_back(std::move(rec));
  }
  if (r.remaining() != 0) throw StoreFormatError(Kind::Invalid, "store: trailing bytes after the last record");
  return store;
}

void write_store(const std::string& path, const EpisodeStore& store) { write_file(path, serialize_store(store)); }

EpisodeStore read_store(const std::string& path) { return parse_store(read_file(path)); }

CsvImport import_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "ppg,abp,subject_id") throw DataError(path + ": expected header 'ppg,abp,subject_id'");

  CsvImport result;
  std::vector<double> ppg, abp;
  std::string current;
  auto flush = [&] {
    if (ppg.empty()) return;
    auto seg = segment_episodes(Eigen::Map<const Vector>(ppg.data(), static_cast<Index>(ppg.size())),
                                Eigen::Map<const Vector>(abp.data(), static_cast<Index>(abp.size())), current);
    result.discarded_samples += seg.discarded_samples;
    result.dropped_windows += seg.dropped_windows;
    for (auto& e : seg.episodes) result.store.records.push_back(std::move(e));
    ppg.clear();
    abp.clear();
  };
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string a, b, id;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, id))
      throw DataError(path + ": row " + std::to_string(row) + " does not have three columns");
    double pv, av;
    try {
      std::size_t used_a = 0, used_b = 0;
      pv = std::stod(a, &used_a);
      av = std::stod(b, &used_b);
      if (used_a != a.size() || used_b != b.size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw DataError(path + ": row " + std::to_string(row) + " has a non-numeric sample");
    }
    if (id != current) {
      flush();
      current = id;
    }
    ppg.push_back(pv);
    abp.push_back(av);
  }
  flush();
  return result;
}

}  // namespace ppg2abp::datapipe
