#include "ppg2abp/models/network.hpp"

#include <iomanip>
#include <sstream>

namespace ppg2abp::models {

NetworkOutput BatchOutput::sample(std::size_t b) const {
  NetworkOutput out;
  out.final = final.at(b);
  for (const auto& aux : auxiliaries) out.auxiliaries.push_back(aux.at(b));
  return out;
}

NetworkOutput Network::forward(const Tensor& x, Mode mode) {
  return forward(Batch{x}, mode).sample(0);
}

Index Network::parameter_count() { return tensorops::count_elements(parameters(), true); }

std::string Network::summary() {
  std::ostringstream os;
  os << "# " << kind() << " input_length=" << input_length() << '\n';
  os << "# layer\tshapes\ttrainable_params\n";
  std::string layer;
  std::string shapes;
  Index count = 0;
  auto flush = [&] {
    if (!layer.empty()) os << layer << '\t' << shapes << '\t' << count << '\n';
  };
  for (const auto* p : parameters()) {
    const auto dot = p->name.rfind('.');
    const std::string prefix = p->name.substr(0, dot);
    if (prefix != layer) {
      flush();
      layer = prefix;
      shapes.clear();
      count = 0;
    }
    if (!shapes.empty()) shapes += ' ';
    shapes += p->name.substr(dot + 1) + "[";
    for (std::size_t i = 0; i < p->shape.size(); ++i) shapes += (i ? "x" : "") + std::to_string(p->shape[i]);
    shapes += "]";
    if (p->trainable) count += p->size();
  }
  flush();
  os << "total\t-\t" << parameter_count() << '\n';
  return os.str();
}

}  // namespace ppg2abp::models
