#include "ppg2abp/tensorops/param.hpp"

#include <cstring>
#include <numeric>

namespace ppg2abp::tensorops {

Param::Param(std::string n, std::vector<Index> s, bool is_trainable)
    : name(std::move(n)), shape(std::move(s)), trainable(is_trainable) {
  const Index count = std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
  value = Eigen::ArrayXd::Zero(count);
  grad = Eigen::ArrayXd::Zero(count);
  m = Eigen::ArrayXd::Zero(count);
  v = Eigen::ArrayXd::Zero(count);
}

Index count_elements(const ParamList& params, bool trainable_only) {
  Index n = 0;
  for (const Param* p : params)
    if (!trainable_only || p->trainable) n += p->size();
  return n;
}

std::uint64_t digest(const ParamList& params) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t bytes) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < bytes; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const Param* p : params) {
    mix(p->name.data(), p->name.size());
    mix(p->value.data(), static_cast<std::size_t>(p->value.size()) * sizeof(double));
  }
  return h;
}

ParamSnapshot snapshot(const ParamList& params) {
  ParamSnapshot snap;
  snap.reserve(params.size());
  for (const Param* p : params) snap.push_back(p->value);
  return snap;
}

void restore(const ParamList& params, const ParamSnapshot& snap) {
  if (snap.size() != params.size()) throw ShapeError("restore: snapshot does not match parameter list");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (snap[i].size() != params[i]->value.size())
      throw ShapeError("restore: size mismatch for " + params[i]->name);
    params[i]->value = snap[i];
  }
}

}  // namespace ppg2abp::tensorops
