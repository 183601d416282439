#include "layer_check.hpp"
#include "ppg2abp/models/multiresunet1d.hpp"
#include "ppg2abp/models/network_check.hpp"
#include "ppg2abp/models/unet1d.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace ppg2abp;
using namespace ppg2abp::models;
using test::check_layer;
using test::InputBlock;
using test::random_tensor;
using test::require_pass;

namespace {

UNet1DConfig small_unet(Index length = 64) {
  UNet1DConfig c;
  c.width_multiplier = 1.0 / 16;
  c.input_length = length;
  return c;
}

MultiResUNet1DConfig small_multires(Index length = 64) {
  MultiResUNet1DConfig c;
  c.width_multiplier = 1.0 / 16;
  c.input_length = length;
  return c;
}

Batch random_inputs(Rng& rng, std::size_t n, Index length) {
  Batch b;
  for (std::size_t i = 0; i < n; ++i) b.push_back(random_tensor(rng, 1, length));
  return b;
}

// Trainable element count from the layer layout: conv+BN+ReLU carries
// in*out*k weights plus gamma and beta.
Index unet_oracle_count(const std::vector<Index>& f, Index k) {
  auto cbr = [k](Index in, Index out) { return in * out * k + 2 * out; };
  const std::size_t levels = f.size() - 1;
  Index n = 0, in = 1;
  for (std::size_t l = 0; l < levels; ++l) {
    n += cbr(in, f[l]) + cbr(f[l], f[l]);
    in = f[l];
  }
  n += cbr(in, f[levels]) + cbr(f[levels], f[levels]);
  for (std::size_t l = 0; l < levels; ++l) {
    n += f[l + 1] * f[l] * 2 + f[l];              // transposed conv
    n += cbr(2 * f[l], f[l]) + cbr(f[l], f[l]);  // decoder stage
    n += f[l + 1] + 1;                           // auxiliary head
  }
  return n + f[0] + 1;  // final head
}

// Trainable element count of the refinement network from its layer layout.
Index multires_oracle_count(const std::vector<Index>& u, double alpha, const std::vector<int>& path_lengths) {
  auto block = [](Index in, Index w) {
    const Index a = w / 6, b = w / 3, c = w / 2, t = a + b + c;
    // 1-tap shortcut + BN, three 3-tap conv+BN stages, BN after concat and after the sum.
    return in * t + 2 * t + (in * a + a * b + b * c) * 3 + 2 * (a + b + c) + 2 * t + 2 * t;
  };
  auto path = [](Index in, Index f, int length) {
    Index n = 0;
    for (int i = 0; i < length; ++i, in = f) n += in * f + 2 * f + in * f * 3 + 2 * f + 2 * f;
    return n;
  };
  std::vector<Index> w;
  for (Index x : u) w.push_back(std::max<Index>(6, static_cast<Index>(std::floor(alpha * static_cast<double>(x)))));
  auto out = [](Index width) { return width / 6 + width / 3 + width / 2; };
  const std::size_t levels = u.size() - 1;
  Index n = 0, in = 1;
  for (std::size_t l = 0; l < levels; ++l) {
    n += block(in, w[l]) + path(out(w[l]), u[l], path_lengths[l]);
    in = out(w[l]);
  }
  n += block(in, w[levels]);
  Index below = out(w[levels]);
  for (std::size_t l = levels; l-- > 0;) {
    n += below * u[l] * 2 + u[l];  // transposed conv with bias
    n += block(2 * u[l], w[l]);
    below = out(w[l]);
  }
  return n + below + 1;
}

// Index interval of samples that may change when one input sample changes,
// propagated layer by layer on an unbounded line.
struct Span {
  long lo, hi;
  Span grow(long r) const { return {lo - r, hi + r}; }
  Span pool() const { return {lo >= 0 ? lo / 2 : -((1 - lo) / 2), hi >= 0 ? hi / 2 : -((1 - hi) / 2)}; }
  Span up() const { return {2 * lo, 2 * hi + 1}; }
  Span hull(const Span& o) const { return {std::min(lo, o.lo), std::max(hi, o.hi)}; }
};

// Spans of the final output and each auxiliary (deepest first), given the
// growth of one encoder/decoder block and of each skip path.
std::vector<Span> propagate(long p, int levels, long block_growth, const std::vector<long>& skip_growth) {
  Span s{p, p};
  std::vector<Span> skips;
  for (int l = 0; l < levels; ++l) {
    s = s.grow(block_growth);
    skips.push_back(s.grow(skip_growth[static_cast<std::size_t>(l)]));
    s = s.pool();
  }
  s = s.grow(block_growth);
  std::vector<Span> aux;
  for (int l = levels - 1; l >= 0; --l) {
    aux.push_back(s);
    s = s.up().hull(skips[static_cast<std::size_t>(l)]).grow(block_growth);
  }
  aux.insert(aux.begin(), s);
  return aux;
}

// Output sample j is interior when no input position outside [0, n) reaches it.
std::vector<std::vector<bool>> interior_masks(Index n, int levels, long block_growth,
                                              const std::vector<long>& skip_growth) {
  std::vector<std::vector<bool>> mask(static_cast<std::size_t>(levels + 1));
  for (int k = 0; k <= levels; ++k) mask[static_cast<std::size_t>(k)].assign(static_cast<std::size_t>(n >> k), true);
  for (long p = -static_cast<long>(n); p < 2 * static_cast<long>(n); ++p) {
    if (p >= 0 && p < n) continue;
    const auto spans = propagate(p, levels, block_growth, skip_growth);
    // spans[0] is the final output; spans[k] for k >= 1 is at resolution levels - k + 1.
    for (std::size_t i = 0; i < spans.size(); ++i) {
      const std::size_t k = i == 0 ? 0 : static_cast<std::size_t>(levels) - i + 1;
      auto& m = mask[k];
      for (long j = std::max(0L, spans[i].lo); j <= std::min<long>(static_cast<long>(m.size()) - 1, spans[i].hi); ++j)
        m[static_cast<std::size_t>(j)] = false;
    }
  }
  return mask;
}

}  // namespace

TEST_CASE("unet width scaling and output shapes") {
  UNet1D net(small_unet(128));
  CHECK(net.config().scaled_filters() == std::vector<Index>{4, 8, 16, 32, 64});
  CHECK(net.auxiliary_count() == 4);
  CHECK(net.kind() == "unet1d");
  CHECK(net.parameter_count() == unet_oracle_count({4, 8, 16, 32, 64}, 3));

  Rng rng(1);
  const auto out = net.forward(random_inputs(rng, 3, 128), Mode::Train);
  REQUIRE(out.final.size() == 3);
  CHECK(out.final[0].rows() == 1);
  CHECK(out.final[0].cols() == 128);
  REQUIRE(out.auxiliaries.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(out.auxiliaries[k].size() == 3);
    CHECK(out.auxiliaries[k][0].cols() == (128 >> (k + 1)));
  }
  CHECK_THROWS_AS(net.forward(random_tensor(rng, 1, 64)), ShapeError);
  CHECK_THROWS_AS(net.forward(random_tensor(rng, 2, 128)), ShapeError);
}

TEST_CASE("full-width unet parameter count") {
  UNet1DConfig c;
  UNet1D net(c);
  CHECK(net.parameter_count() == unet_oracle_count({64, 128, 256, 512, 1024}, 3));
  CHECK(net.summary().find("total\t-\t" + std::to_string(net.parameter_count())) != std::string::npos);
}

TEST_CASE("unet config validation") {
  auto c = small_unet();
  c.input_length = 72;
  CHECK_THROWS_AS(UNet1D{c}, ShapeError);
  c = small_unet();
  c.deep_supervision_weights = {1.0, 0.9, 0.9, 0.7, 0.6};
  CHECK_THROWS_AS(UNet1D{c}, ShapeError);
  c = small_unet();
  c.kernel_size = 4;
  CHECK_THROWS_AS(UNet1D{c}, ShapeError);
  c = small_unet();
  c.filters = {1, 2, 3};
  CHECK_THROWS_AS(UNet1D{c}, ShapeError);
}

TEST_CASE("multires block widths and channel split") {
  auto c = small_multires();
  CHECK(c.scaled_widths() == std::vector<Index>{2, 4, 8, 16, 32});
  CHECK(c.block_widths() == std::vector<Index>{6, 10, 20, 40, 80});
  MultiResUNet1DConfig full;
  CHECK(full.block_widths() == std::vector<Index>{80, 160, 320, 640, 1280});
  for (Index w : {6, 10, 20, 51, 80, 1280}) {
    const auto s = multires_split(w);
    CHECK(s.first == w / 6);
    CHECK(s.second == w / 3);
    CHECK(s.third == w / 2);
    CHECK(s.total() <= w);
  }
  CHECK_THROWS_AS(multires_split(5), ShapeError);
}

TEST_CASE("multiresunet output shape and residual identity at initialisation") {
  MultiResUNet1D net(small_multires());
  CHECK(net.auxiliary_count() == 0);
  CHECK(net.kind() == "multiresunet1d");
  Rng rng(2);
  const Tensor x = random_tensor(rng, 1, 64);
  const auto out = net.forward(x, Mode::Infer);
  CHECK(out.final.cols() == 64);
  CHECK(out.auxiliaries.empty());
  // The head starts at zero, so the residual network begins as the identity.
  CHECK(out.final == x);

  auto c = small_multires();
  c.residual_output = false;
  c.output_offset = 5.0;
  MultiResUNet1D direct(c);
  CHECK(direct.forward(x).final != x);
  for (auto* p : direct.parameters())
    if (p->name == "head.weight") p->value.setZero();
  CHECK((direct.forward(x).final.array() == 5.0).all());
  c.res_path_lengths = {4, 3};
  CHECK_THROWS_AS(MultiResUNet1D{c}, ShapeError);
}

TEST_CASE("multiresunet parameter count") {
  MultiResUNet1D small(small_multires());
  CHECK(small.parameter_count() == multires_oracle_count({2, 4, 8, 16, 32}, 2.5, {4, 3, 2, 1}));
  MultiResUNet1DConfig full;
  MultiResUNet1D net(full);
  CHECK(net.parameter_count() == multires_oracle_count({32, 64, 128, 256, 512}, 2.5, {4, 3, 2, 1}));
}

TEST_CASE("multires block maps zero to zero") {
  Rng rng(6);
  MultiResBlock block("mrb", 3, 20);
  block.initialize(rng);
  const Batch zero(2, Tensor::Zero(3, 32));
  for (Mode mode : {Mode::Train, Mode::Infer})
    for (const auto& t : block.forward(zero, mode)) {
      CHECK(t.rows() == 20 / 6 + 20 / 3 + 20 / 2);
      CHECK(t.isZero(0.0));
    }
}

TEST_CASE("a one-sample change stays inside the receptive field") {
  Rng rng(10);
  const Index n = 256;
  auto check = [&](Network& net, long block_growth, const std::vector<long>& skip_growth) {
    const Tensor x = random_tensor(rng, 1, n);
    const auto base = net.forward(x, Mode::Infer);
    for (long p : {0L, 3L, 100L, 255L}) {
      Tensor y = x;
      y(0, p) += 1.0;
      const auto moved = net.forward(y, Mode::Infer);
      const auto spans = propagate(p, 4, block_growth, skip_growth);
      std::vector<std::pair<const Tensor*, const Tensor*>> outs{{&base.final, &moved.final}};
      for (std::size_t k = 0; k < base.auxiliaries.size(); ++k)
        outs.push_back({&base.auxiliaries[k], &moved.auxiliaries[k]});
      for (std::size_t i = 0; i < outs.size(); ++i) {
        // Auxiliaries come shallowest first; spans list them deepest first.
        const Span span = i == 0 ? spans[0] : spans[spans.size() - i];
        const Tensor diff = *outs[i].second - *outs[i].first;
        bool changed = false;
        for (Index j = 0; j < diff.cols(); ++j) {
          if (diff(0, j) == 0.0) continue;
          changed = true;
          CHECK(j >= span.lo);
          CHECK(j <= span.hi);
        }
        CHECK(changed);
      }
    }
  };
  {
    UNet1D net(small_unet(n));
    check(net, 2, {0, 0, 0, 0});
  }
  {
    MultiResUNet1D net(small_multires(n));
    check(net, 3, {4, 3, 2, 1});
  }
}

TEST_CASE("networks are translation covariant in the interior") {
  Rng rng(11);
  const Index n = 1024, shift = 16;
  auto check = [&](Network& net, long block_growth, const std::vector<long>& skip_growth) {
    const auto mask = interior_masks(n, 4, block_growth, skip_growth);
    Tensor x = random_tensor(rng, 1, n);
    Tensor y(1, n);
    for (Index i = 0; i < n; ++i) y(0, (i + shift) % n) = x(0, i);
    const auto a = net.forward(x, Mode::Infer);
    const auto b = net.forward(y, Mode::Infer);
    std::vector<std::pair<const Tensor*, const Tensor*>> outs{{&a.final, &b.final}};
    for (std::size_t k = 0; k < a.auxiliaries.size(); ++k) outs.push_back({&a.auxiliaries[k], &b.auxiliaries[k]});
    Index compared = 0;
    for (std::size_t k = 0; k < outs.size(); ++k) {
      const Index s = shift >> k;
      const auto& m = mask[k];
      double worst = 0.0;
      for (Index j = s; j < outs[k].first->cols(); ++j) {
        if (!m[static_cast<std::size_t>(j)] || !m[static_cast<std::size_t>(j - s)]) continue;
        worst = std::max(worst, std::abs((*outs[k].second)(0, j) - (*outs[k].first)(0, j - s)));
        ++compared;
      }
      CHECK(worst < 1e-6);
    }
    CHECK(compared > n / 2);
  };
  {
    UNet1D net(small_unet(n));
    check(net, 2, {0, 0, 0, 0});
  }
  {
    MultiResUNet1D net(small_multires(n));
    check(net, 3, {4, 3, 2, 1});
  }
}

TEST_CASE("outputs stay finite across 1000 seeds") {
  bool finite = true;
  for (std::uint64_t seed = 1; seed <= 1000 && finite; ++seed) {
    auto uc = small_unet(kEpisodeLength);
    uc.seed = seed;
    UNet1D unet(uc);
    auto mc = small_multires(kEpisodeLength);
    mc.seed = seed;
    mc.residual_output = false;
    MultiResUNet1D multires(mc);
    Rng rng(seed);
    const Tensor x = random_tensor(rng, 1, kEpisodeLength);
    const auto out = unet.forward(x, Mode::Infer);
    finite = out.final.allFinite() && multires.forward(out.final, Mode::Infer).final.allFinite();
    for (const auto& a : out.auxiliaries) finite = finite && a.allFinite();
  }
  CHECK(finite);
}

TEST_CASE("infer mode is deterministic") {
  UNet1D net(small_unet());
  Rng rng(12);
  const Tensor x = random_tensor(rng, 1, 64);
  const auto a = net.forward(x, Mode::Infer);
  const auto b = net.forward(x, Mode::Infer);
  CHECK(a.final == b.final);
  for (std::size_t k = 0; k < a.auxiliaries.size(); ++k) CHECK(a.auxiliaries[k] == b.auxiliaries[k]);
}

TEST_CASE("initialisation is seeded") {
  UNet1D a(small_unet()), b(small_unet());
  CHECK(tensorops::digest(a.parameters()) == tensorops::digest(b.parameters()));
  auto c = small_unet();
  c.seed = 99;
  UNet1D d(c);
  CHECK(tensorops::digest(a.parameters()) != tensorops::digest(d.parameters()));
}

TEST_CASE("clone is independent") {
  UNet1D net(small_unet());
  auto copy = net.clone();
  Rng rng(3);
  const Tensor x = random_tensor(rng, 1, 64);
  CHECK(copy->forward(x).final == net.forward(x).final);
  copy->parameters().front()->value += 1.0;
  CHECK(copy->forward(x).final != net.forward(x).final);
}

TEST_CASE("train mode uses batch statistics, infer mode does not depend on the batch") {
  UNet1D net(small_unet());
  Rng rng(4);
  Batch x = random_inputs(rng, 4, 64);
  const Tensor alone = net.forward(x[0], Mode::Infer).final;
  const Tensor in_batch = net.forward(x, Mode::Infer).final[0];
  CHECK((alone - in_batch).cwiseAbs().maxCoeff() < 1e-12);
  const Tensor trained = net.forward(x, Mode::Train).final[0];
  CHECK((trained - alone).cwiseAbs().maxCoeff() > 1e-6);
}

TEST_CASE("gradient check: MultiResBlock and ResPath") {
  Rng rng(5);
  MultiResBlock block("mrb", 2, 10);
  block.initialize(rng);
  CHECK(block.out_channels() == 9);
  InputBlock input(rng, 2, 2, 16);
  ParamList params;
  block.collect(params);
  require_pass(check_layer(input, params, [&](const Batch& x) { return block.forward(x, Mode::Train); },
                           [&](const Batch& g) { return block.backward(g); }, rng),
               1e-3);

  ResPath path("rp", 3, 4, 2);
  path.initialize(rng);
  InputBlock input2(rng, 2, 3, 16);
  ParamList params2;
  path.collect(params2);
  require_pass(check_layer(input2, params2, [&](const Batch& x) { return path.forward(x, Mode::Train); },
                           [&](const Batch& g) { return path.backward(g); }, rng),
               1e-3);
}

TEST_CASE("gradient check: every entry of a 2-level unet") {
  UNet1DConfig c;
  c.depth = 2;
  c.filters = {2, 4};
  c.deep_supervision_weights = {1.0, 0.9};
  c.input_length = 32;
  UNet1D net(c);
  // Train-mode batch norm needs two samples.
  const auto report = check_network_gradients(net, 2, 9);
  INFO(report.to_text());
  CHECK(report.passes(1e-3));
}

TEST_CASE("gradient check: 1/16-width networks on a sampled subset") {
  tensorops::GradCheckOptions options;
  options.max_entries_per_block = 4;
  {
    UNet1D net(small_unet());
    const auto report = check_network_gradients(net, 2, 7, options);
    INFO(report.to_text());
    CHECK(report.passes(1e-3));
  }
  {
    MultiResUNet1D net(small_multires());
    const auto report = check_network_gradients(net, 2, 8, options);
    INFO(report.to_text());
    CHECK(report.passes(1e-3));
  }
  {
    auto c = small_multires();
    c.width_multiplier = 1.0 / 8;
    MultiResUNet1D net(c);
    const auto report = check_network_gradients(net, 2, 9, options);
    INFO(report.to_text());
    CHECK(report.passes(1e-3));
  }
}
