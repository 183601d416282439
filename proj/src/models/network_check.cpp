#include "ppg2abp/models/network_check.hpp"

#include "ppg2abp/random.hpp"
#include "ppg2abp/tensorops/losses.hpp"

namespace ppg2abp::models {
namespace {

Tensor random_tensor(Rng& rng, Index rows, Index cols) {
  Tensor t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = rng.normal();
  return t;
}

}  // namespace

tensorops::GradCheckReport check_network_gradients(Network& net, std::size_t batch, std::uint64_t seed,
                                                   const tensorops::GradCheckOptions& options) {
  Rng rng(seed);
  for (auto* p : net.parameters())
    if (p->trainable && p->name.ends_with(".weight") && p->size() > 0 && (p->value == 0.0).all())
      for (Index i = 0; i < p->size(); ++i) p->value[i] = 0.5 * rng.normal();
  const Index n = net.input_length();
  Batch x;
  for (std::size_t b = 0; b < batch; ++b) x.push_back(random_tensor(rng, 1, n));
  BatchOutput targets;
  for (std::size_t b = 0; b < batch; ++b) targets.final.push_back(random_tensor(rng, 1, n));
  targets.auxiliaries.resize(net.auxiliary_count());
  for (std::size_t k = 0; k < net.auxiliary_count(); ++k)
    for (std::size_t b = 0; b < batch; ++b) targets.auxiliaries[k].push_back(random_tensor(rng, 1, n >> (k + 1)));

  auto objective = [&](BatchOutput* grad) {
    const auto out = net.forward(x, Mode::Train);
    double total = 0.0;
    if (grad) {
      grad->final.clear();
      grad->auxiliaries.assign(out.auxiliaries.size(), {});
    }
    for (std::size_t b = 0; b < batch; ++b) {
      auto l = tensorops::mse_loss(out.final[b], targets.final[b]);
      total += l.value;
      if (grad) grad->final.push_back(l.grad);
      for (std::size_t k = 0; k < out.auxiliaries.size(); ++k) {
        auto a = tensorops::mse_loss(out.auxiliaries[k][b], targets.auxiliaries[k][b]);
        total += a.value;
        if (grad) grad->auxiliaries[k].push_back(a.grad);
      }
    }
    return total;
  };
  return tensorops::gradcheck([&] { return objective(nullptr); },
                              [&] {
                                BatchOutput g;
                                objective(&g);
                                net.backward(g);
                              },
                              net.parameters(), options);
}

}  // namespace ppg2abp::models
