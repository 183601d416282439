#include "ppg2abp/tensorops/checkpoint.hpp"

#include "ppg2abp/binary_io.hpp"

#include <cmath>
#include <map>
#include <numeric>

namespace ppg2abp::tensorops {

std::string serialize_checkpoint(const ParamList& params) {
  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    w.u32(static_cast<std::uint32_t>(p->name.size()));
    w.bytes(p->name);
    w.u32(static_cast<std::uint32_t>(p->shape.size()));
    for (Index d : p->shape) w.u64(static_cast<std::uint64_t>(d));
    for (Index i = 0; i < p->value.size(); ++i) w.f64(p->value[i]);
  }
  return w.take();
}

void deserialize_checkpoint(const std::string& bytes, const ParamList& params) {
  ByteReader r(bytes);
  auto magic = r.bytes(kCheckpointMagic.size());
  if (!magic || *magic != kCheckpointMagic) throw CheckpointError("", "bad magic (not a P2ABPCKPT file)");
  auto version = r.u32();
  if (!version) throw CheckpointError("", "truncated header");
  if (*version != kCheckpointVersion)
    throw CheckpointError("", "unsupported version " + std::to_string(*version));
  auto count = r.u32();
  if (!count) throw CheckpointError("", "truncated header");

  std::map<std::string, Param*> by_name;
  for (Param* p : params) by_name[p->name] = p;
  if (*count != params.size())
    throw CheckpointError("", "has " + std::to_string(*count) + " entries, network expects " +
                                  std::to_string(params.size()));

  std::map<std::string, Eigen::ArrayXd> loaded;
  for (std::uint32_t e = 0; e < *count; ++e) {
    auto name_len = r.u32();
    if (!name_len) throw CheckpointError("", "truncated at entry " + std::to_string(e));
    auto name = r.bytes(*name_len);
    if (!name) throw CheckpointError("", "truncated name at entry " + std::to_string(e));
    auto it = by_name.find(*name);
    if (it == by_name.end()) throw CheckpointError(*name, "not part of this network");
    const Param& target = *it->second;
    auto rank = r.u32();
    if (!rank) throw CheckpointError(*name, "truncated shape");
    std::vector<Index> shape;
    for (std::uint32_t d = 0; d < *rank; ++d) {
      auto dim = r.u64();
      if (!dim) throw CheckpointError(*name, "truncated shape");
      shape.push_back(static_cast<Index>(*dim));
    }
    if (shape != target.shape) throw CheckpointError(*name, "shape mismatch with the network");
    const Index n = std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
    if (r.remaining() < static_cast<std::size_t>(n) * 8) throw CheckpointError(*name, "truncated payload");
    Eigen::ArrayXd values(n);
    for (Index i = 0; i < n; ++i) values[i] = *r.f64();
    if (!values.allFinite()) throw CheckpointError(*name, "corrupted payload (non-finite values)");
    if (!loaded.emplace(*name, std::move(values)).second) throw CheckpointError(*name, "duplicate entry");
  }
  if (r.remaining() != 0) throw CheckpointError("", "trailing bytes after the last entry");
  for (Param* p : params) p->value = loaded.at(p->name);
}

void save_checkpoint(const std::string& path, const ParamList& params) {
  write_file(path, serialize_checkpoint(params));
}

void load_checkpoint(const std::string& path, const ParamList& params) {
  deserialize_checkpoint(read_file(path), params);
}

}  // namespace ppg2abp::tensorops
