// Acceptance run: one PASS/FAIL line per criterion. Pass criterion numbers as
// arguments to run a subset.

#include "helpers.hpp"
#include "layer_grad.hpp"
#include "sure_oracle.hpp"
#include "ppg2abp/binary_io.hpp"
#include "ppg2abp/cli/cli.hpp"
#include "ppg2abp/datapipe/store_io.hpp"
#include "ppg2abp/datapipe/synth.hpp"
#include "ppg2abp/evalstats/report.hpp"
#include "ppg2abp/models/multiresunet1d.hpp"
#include "ppg2abp/models/network_check.hpp"
#include "ppg2abp/sigproc/denoise.hpp"
#include "ppg2abp/tensorops/checkpoint.hpp"
#include "ppg2abp/trainer/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>

using namespace ppg2abp;
using tensorops::GradCheckReport;
using tensorops::Mode;
using tensorops::ParamList;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  // Records a failed check; the first failure message is kept.
  void require(bool ok, const std::string& what) {
    if (!ok && pass) {
      pass = false;
      detail = what;
    }
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Wavelet perfect reconstruction and energy conservation.
Outcome wavelet_roundtrip() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst_rec = 0.0, worst_energy = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Vector x = test::random_vector(rng, 1024, 0.1 + 10.0 * rng.uniform());
    const auto d = sigproc::dwt_decompose(x, 10);
    const Vector y = sigproc::dwt_reconstruct(d);
    worst_rec = std::max(worst_rec, (y - x).cwiseAbs().maxCoeff() / x.cwiseAbs().maxCoeff());
    worst_energy = std::max(worst_energy, std::abs(d.energy() - x.squaredNorm()) / x.squaredNorm());
  }
  const double secs = seconds_since(t0);
  o.require(worst_rec < 1e-9, "reconstruction error " + fmt("%.3g", worst_rec));
  o.require(worst_energy < 1e-9, "energy error " + fmt("%.3g", worst_energy));
  o.require(secs < 10.0, "took " + fmt("%.1f", secs) + " s");
  if (o.pass)
    o.detail = "max rel error " + fmt("%.2g", worst_rec) + ", energy " + fmt("%.2g", worst_energy) + ", " +
               fmt("%.2f", secs) + " s";
  return o;
}

// 2. db8 filter-bank invariants and vanishing moments on polynomials.
Outcome filter_bank() {
  Outcome o;
  const auto& b = sigproc::db8();
  const int L = sigproc::kDb8Taps;
  double worst = 0.0;
  double sq = 0.0, sum = 0.0;
  for (double h : b.dec_lowpass) {
    sq += h * h;
    sum += h;
  }
  worst = std::max({worst, std::abs(sq - 1.0), std::abs(sum - std::sqrt(2.0))});
  // Orthogonality to even shifts within and across the two channels.
  for (int s = 2 - L; s < L; s += 2) {
    double lo = 0.0, hi = 0.0, cross = 0.0;
    for (int k = std::max(0, -s); k < std::min(L, L - s); ++k) {
      lo += b.dec_lowpass[k] * b.dec_lowpass[k + s];
      hi += b.dec_highpass[k] * b.dec_highpass[k + s];
      cross += b.dec_lowpass[k] * b.dec_highpass[k + s];
    }
    if (s == 0) {
      lo -= 1.0;
      hi -= 1.0;
    }
    worst = std::max({worst, std::abs(lo), std::abs(hi), std::abs(cross)});
  }
  for (int k = 0; k < L; ++k) {
    const double sign = k % 2 == 0 ? 1.0 : -1.0;
    worst = std::max(worst, std::abs(b.dec_highpass[k] - sign * b.dec_lowpass[L - 1 - k]));
    worst = std::max(worst, std::abs(b.rec_lowpass[k] - b.dec_lowpass[L - 1 - k]));
    worst = std::max(worst, std::abs(b.rec_highpass[k] - b.dec_highpass[L - 1 - k]));
  }
  o.require(worst < 1e-12, "filter invariant off by " + fmt("%.3g", worst));

  const Index n = 1024;
  double worst_detail = 0.0;
  for (int degree = 0; degree <= 7; ++degree) {
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = std::pow(static_cast<double>(i) / 512.0 - 1.0, degree);
    const auto d = sigproc::dwt_decompose(x, 10);
    for (int l = 1; l <= 10; ++l) {
      // Interior: the coefficient's support does not wrap around.
      const Index span = ((Index{1} << l) - 1) * (L - 1);
      for (Index i = 0; i < d.detail(l).size() && (i << l) + span <= n - 1; ++i)
        worst_detail = std::max(worst_detail, std::abs(d.detail(l)[i]));
    }
  }
  o.require(worst_detail < 1e-6, "polynomial detail " + fmt("%.3g", worst_detail));
  if (o.pass) o.detail = "invariants " + fmt("%.2g", worst) + ", polynomial details " + fmt("%.2g", worst_detail);
  return o;
}

// 3. SURE threshold against the exhaustive risk scan.
Outcome sure_oracle() {
  Outcome o;
  Rng rng(103);
  int mismatches = 0;
  for (int trial = 0; trial < 500; ++trial) {
    const Index n = 1 + static_cast<Index>(rng.below(64));
    const Vector v = test::random_vector(rng, n, 0.1 + 5.0 * rng.uniform());
    mismatches += sigproc::sure_threshold(v) != test::risk_scan_threshold(v);
  }
  o.require(mismatches == 0, std::to_string(mismatches) + " of 500 thresholds differ");
  if (o.pass) o.detail = "500 of 500 exact";
  return o;
}

// 4. Finite-difference gradient checks of every layer type and both networks.
Outcome gradient_checks() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(104);
  double worst_linear = 0.0, worst_nonlinear = 0.0;
  auto record = [&](const std::string& name, const GradCheckReport& r, bool linear) {
    const double tol = linear ? 1e-4 : 1e-3;
    o.require(r.passes(tol), name + " worst " + fmt("%.3g", r.worst()));
    (linear ? worst_linear : worst_nonlinear) = std::max(linear ? worst_linear : worst_nonlinear, r.worst());
  };
  auto layer = [&](const std::string& name, test::InputBlock& in, ParamList params,
                   const std::function<Batch(const Batch&)>& f, const std::function<Batch(const Batch&)>& b,
                   bool linear) { record(name, test::check_layer(in, std::move(params), f, b, rng), linear); };

  {
    tensorops::Conv1d conv("conv", 3, 4, 3, true);
    conv.initialize(rng);
    conv.bias.value.setRandom();
    test::InputBlock in(rng, 2, 3, 12);
    ParamList p;
    conv.collect(p);
    layer("Conv1d", in, p, [&](const Batch& x) { return conv.forward(x); },
          [&](const Batch& g) { return conv.backward(g); }, true);
  }
  {
    tensorops::ConvTranspose1d up("up", 3, 2, 2, 2);
    up.initialize(rng);
    up.bias.value.setRandom();
    test::InputBlock in(rng, 2, 3, 8);
    ParamList p;
    up.collect(p);
    layer("ConvTranspose1d", in, p, [&](const Batch& x) { return up.forward(x); },
          [&](const Batch& g) { return up.backward(g); }, true);
  }
  {
    tensorops::BatchNorm1d bn("bn", 3);
    bn.gamma.value.setRandom();
    bn.beta.value.setRandom();
    test::InputBlock in(rng, 3, 3, 10);
    ParamList p;
    bn.collect(p);
    layer("BatchNorm1d train", in, p, [&](const Batch& x) { return bn.forward(x, Mode::Train); },
          [&](const Batch& g) { return bn.backward(g); }, false);
    layer("BatchNorm1d infer", in, p, [&](const Batch& x) { return bn.forward(x, Mode::Infer); },
          [&](const Batch& g) { return bn.backward(g); }, true);
  }
  {
    tensorops::ConvBnRelu cbr("cbr", 2, 3, 3);
    cbr.initialize(rng);
    test::InputBlock in(rng, 2, 2, 16);
    ParamList p;
    cbr.collect(p);
    layer("ConvBnRelu", in, p, [&](const Batch& x) { return cbr.forward(x, Mode::Train); },
          [&](const Batch& g) { return cbr.backward(g); }, false);
  }
  {
    tensorops::MaxPool1d pool(2);
    tensorops::Relu relu;
    test::InputBlock in(rng, 2, 2, 16);
    layer("MaxPool1d", in, {}, [&](const Batch& x) { return pool.forward(x); },
          [&](const Batch& g) { return pool.backward(g); }, false);
    layer("Relu", in, {}, [&](const Batch& x) { return relu.forward(x); },
          [&](const Batch& g) { return relu.backward(g); }, false);
  }
  {
    tensorops::OutputScaling s("scale", 90.0, 20.0);
    test::InputBlock in(rng, 2, 1, 16);
    layer(
        "OutputScaling", in, {},
        [&](const Batch& x) {
          Batch out;
          for (const auto& t : x) out.push_back(s.forward(t));
          return out;
        },
        [&](const Batch& g) {
          Batch out;
          for (const auto& t : g) out.push_back(s.backward(t));
          return out;
        },
        true);
  }
  {
    // Skip connection: concat(x[:2], x[2:]) + x, and its split adjoint.
    test::InputBlock in(rng, 2, 5, 6);
    layer(
        "concat/split/add", in, {},
        [&](const Batch& x) {
          Batch a, b;
          for (const auto& t : x) {
            a.push_back(t.topRows(2));
            b.push_back(t.bottomRows(3));
          }
          return tensorops::add(tensorops::concat(a, b), x);
        },
        [&](const Batch& g) {
          auto [ga, gb] = tensorops::split(g, 2);
          return tensorops::add(tensorops::concat(ga, gb), g);
        },
        true);
  }
  {
    models::MultiResBlock block("mrb", 2, 10);
    block.initialize(rng);
    test::InputBlock in(rng, 2, 2, 16);
    ParamList p;
    block.collect(p);
    layer("MultiResBlock", in, p, [&](const Batch& x) { return block.forward(x, Mode::Train); },
          [&](const Batch& g) { return block.backward(g); }, false);
  }
  {
    models::ResPath path("rp", 3, 4, 2);
    path.initialize(rng);
    test::InputBlock in(rng, 2, 3, 16);
    ParamList p;
    path.collect(p);
    layer("ResPath", in, p, [&](const Batch& x) { return path.forward(x, Mode::Train); },
          [&](const Batch& g) { return path.backward(g); }, false);
  }
  {
    models::UNet1DConfig c;
    c.width_multiplier = 1.0 / 16;
    c.input_length = 64;
    models::UNet1D net(c);
    record("UNet1D", models::check_network_gradients(net, 2, 7), false);
  }
  {
    models::MultiResUNet1DConfig c;
    c.width_multiplier = 1.0 / 16;
    c.input_length = 64;
    models::MultiResUNet1D net(c);
    record("MultiResUNet1D", models::check_network_gradients(net, 2, 8), false);
  }
  const double secs = seconds_since(t0);
  o.require(secs < 300.0, "took " + fmt("%.0f", secs) + " s");
  if (o.pass)
    o.detail = "worst linear " + fmt("%.2g", worst_linear) + ", nonlinear " + fmt("%.2g", worst_nonlinear) + ", " +
               fmt("%.0f", secs) + " s";
  return o;
}

// 5. Backward passes are the adjoints of the forward convolutions.
Outcome conv_adjoints() {
  Outcome o;
  Rng rng(105);
  double worst = 0.0;
  auto rel = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(a)); };
  for (int trial = 0; trial < 200; ++trial) {
    const Index in = 1 + static_cast<Index>(rng.below(8)), out = 1 + static_cast<Index>(rng.below(8));
    const Index n = 2 + static_cast<Index>(rng.below(64));
    {
      const Index k = 1 + 2 * static_cast<Index>(rng.below(5));
      const Tensor x = test::random_tensor(rng, in, n), w = test::random_tensor(rng, out, in * k);
      const Tensor y = test::random_tensor(rng, out, n);
      const auto g = tensorops::conv1d_backward(y, x, w, k);
      const double lhs = test::dot(tensorops::conv1d_forward(x, w, Vector(), k), y);
      worst = std::max({worst, rel(lhs, test::dot(x, g.input)), rel(lhs, test::dot(w, g.weight))});
    }
    {
      const Index s = 1 + static_cast<Index>(rng.below(3));
      const Index k = s + 2 * static_cast<Index>(rng.below(3));
      const Tensor x = test::random_tensor(rng, in, n), w = test::random_tensor(rng, out, in * k);
      const Tensor y = test::random_tensor(rng, out, s * n);
      const auto g = tensorops::transposed_conv1d_backward(y, x, w, k, s);
      const double lhs = test::dot(tensorops::transposed_conv1d_forward(x, w, Vector(), k, s), y);
      worst = std::max({worst, rel(lhs, test::dot(x, g.input)), rel(lhs, test::dot(w, g.weight))});
    }
  }
  o.require(worst <= 1e-9, "adjoint mismatch " + fmt("%.3g", worst));
  if (o.pass) o.detail = "200 draws, worst " + fmt("%.2g", worst);
  return o;
}

// 6 and 7. Overfitting a small synthetic set, run twice for determinism.
struct OverfitRun {
  trainer::TrainHistory approx_history, refine_history;
  std::string approx_checkpoint, refine_checkpoint;
  double mae_ratio = 0.0;
  double mse_ratio = 0.0;
  double seconds = 0.0;
};

OverfitRun overfit_run() {
  const auto t0 = std::chrono::steady_clock::now();
  auto store = datapipe::synth_generate(16, 7);
  for (auto& r : store.records) r.ppg = sigproc::mean_normalize(sigproc::denoise(r.ppg));

  models::UNet1DConfig ac;
  ac.width_multiplier = 1.0 / 16;
  models::MultiResUNet1DConfig rc;
  rc.width_multiplier = 1.0 / 16;
  trainer::apply_target_scaling(trainer::target_scaling(store), ac, rc);

  trainer::TrainConfig cfg;
  cfg.epochs = 200;
  cfg.batch_size = 16;
  cfg.approx_loss = trainer::LossKind::MAE;
  cfg.refine_loss = trainer::LossKind::MSE;
  cfg.adam.learning_rate = 1e-3;
  cfg.deep_supervision_weights = {1.0, 0.9, 0.8, 0.7, 0.6};
  ac.deep_supervision_weights = cfg.deep_supervision_weights;

  OverfitRun run;
  models::UNet1D approx(ac);
  run.approx_history = trainer::train_approximation(approx, store, nullptr, cfg);
  run.mae_ratio = run.approx_history.epochs.back().train_mae / run.approx_history.epochs.front().train_mae;

  models::MultiResUNet1D refine(rc);
  run.refine_history = trainer::train_refinement(refine, approx, store, nullptr, cfg);
  const auto ds = trainer::refinement_dataset(approx, store);
  const auto out = trainer::predict(refine, ds.inputs);
  double mse_in = 0.0, mse_out = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    mse_in += (ds.inputs[i] - ds.targets[i]).squaredNorm();
    mse_out += (out[i] - ds.targets[i]).squaredNorm();
  }
  run.mse_ratio = mse_out / mse_in;
  run.approx_checkpoint = tensorops::serialize_checkpoint(approx.parameters());
  run.refine_checkpoint = tensorops::serialize_checkpoint(refine.parameters());
  run.seconds = seconds_since(t0);
  return run;
}

const OverfitRun& first_overfit_run() {
  static const OverfitRun run = overfit_run();
  return run;
}

Outcome overfit() {
  Outcome o;
  const auto& r = first_overfit_run();
  o.require(r.mae_ratio <= 0.15, "final/first-epoch MAE " + fmt("%.3f", r.mae_ratio));
  o.require(r.mse_ratio <= 0.8, "refinement keeps " + fmt("%.3f", r.mse_ratio) + " of the input MSE");
  o.require(r.seconds < 900.0, "took " + fmt("%.0f", r.seconds) + " s");
  if (o.pass)
    o.detail = "MAE ratio " + fmt("%.3f", r.mae_ratio) + ", refinement MSE ratio " + fmt("%.3f", r.mse_ratio) + ", " +
               fmt("%.0f", r.seconds) + " s";
  return o;
}

Outcome determinism() {
  Outcome o;
  const auto& a = first_overfit_run();
  const auto b = overfit_run();
  o.require(a.approx_history == b.approx_history, "approximation histories differ");
  o.require(a.refine_history == b.refine_history, "refinement histories differ");
  o.require(a.approx_history.to_csv() == b.approx_history.to_csv(), "approximation history CSVs differ");
  o.require(a.approx_checkpoint == b.approx_checkpoint, "approximation checkpoints differ");
  o.require(a.refine_checkpoint == b.refine_checkpoint, "refinement checkpoints differ");
  if (o.pass)
    o.detail = "histories and " + std::to_string(a.approx_checkpoint.size() + a.refine_checkpoint.size()) +
               " checkpoint bytes identical";
  return o;
}

// 8. Metric oracles on reference grades, verdicts and limits.
Outcome metric_oracles() {
  using namespace evalstats;
  Outcome o;
  o.require(grade_from_percentages(82.836, 92.157, 95.734) == Grade::A, "DBP grade");
  o.require(grade_from_percentages(87.381, 95.169, 97.733) == Grade::A, "MAP grade");
  o.require(grade_from_percentages(70.814, 85.301, 90.921) == Grade::B, "SBP grade");
  o.require(aami_pass(1.619, 6.859, 942), "DBP AAMI");
  o.require(aami_pass(0.631, 4.962, 942), "MAP AAMI");
  o.require(!aami_pass(-1.582, 10.688, 942), "SBP AAMI");

  // Paired series whose differences alternate mu -/+ sigma.
  std::vector<double> truth, pred;
  Rng rng(108);
  for (int i = 0; i < 1000; ++i) {
    const double t = 90.0 + 10.0 * rng.normal();
    truth.push_back(t);
    pred.push_back(t + 0.631 + (i % 2 ? 4.962 : -4.962));
  }
  const auto ba = bland_altman(pred, truth);
  o.require(std::abs(ba.lower + 9.095) <= 0.01 && std::abs(ba.upper - 10.357) <= 0.01,
            "limits [" + fmt("%.3f", ba.lower) + ", " + fmt("%.3f", ba.upper) + "]");
  if (o.pass)
    o.detail = "BHS A/A/B, AAMI pass/pass/fail, limits [" + fmt("%.3f", ba.lower) + ", " + fmt("%.3f", ba.upper) + "]";
  return o;
}

// 9. Hypertension class boundaries.
Outcome classification_grid() {
  using evalstats::BPClass;
  Outcome o;
  int checked = 0;
  const std::pair<double, BPClass> dbp[] = {
      {80.0, BPClass::Normotension}, {85.0, BPClass::Prehypertension}, {95.0, BPClass::Hypertension}};
  const std::pair<double, BPClass> sbp[] = {
      {120.0, BPClass::Normotension}, {130.0, BPClass::Prehypertension}, {150.0, BPClass::Hypertension}};
  for (const auto& [d, dc] : dbp)
    for (const auto& [s, sc] : sbp) {
      const auto labels = evalstats::classify_hypertension(s, d);
      o.require(labels.by_dbp == dc, "DBP " + fmt("%.0f", d));
      o.require(labels.by_sbp == sc, "SBP " + fmt("%.0f", s));
      ++checked;
    }
  if (o.pass) o.detail = std::to_string(checked) + " combinations under both rule sets";
  return o;
}

// 10. Bin subsampling, train/test split and store serialisation.
Outcome data_plumbing() {
  Outcome o;
  // Constant-shape episodes: one bin at (120, 80) mmHg, one at (150, 90).
  auto episode = [](double sbp, double dbp, std::size_t i) {
    datapipe::EpisodeRecord r;
    r.ppg = Vector::Constant(kEpisodeLength, static_cast<double>(i));
    r.abp = Vector::Constant(kEpisodeLength, dbp + 1.0);
    r.abp[0] = dbp + 1.0;
    r.abp[1] = sbp + 1.0;
    r.subject_id = "s" + std::to_string(i % 37);
    return r;
  };
  datapipe::EpisodeStore store;
  store.records.reserve(20100);
  for (std::size_t i = 0; i < 20100; ++i) store.records.push_back(i < 100 ? episode(120, 80, i) : episode(150, 90, i));
  const auto kept = datapipe::bin_and_subsample(store, 0.25, 2500, 110);
  std::size_t small = 0, large = 0;
  std::set<double> seen;
  for (const auto& r : kept.records) {
    (r.abp[1] < 140.0 ? small : large) += 1;
    seen.insert(r.ppg[0]);
  }
  o.require(small == 25, "small bin kept " + std::to_string(small));
  o.require(large == 2500, "large bin kept " + std::to_string(large));
  o.require(seen.size() == kept.size(), "duplicate episodes after subsampling");

  const auto s = datapipe::split_indices(127260, 100000, 110);
  o.require(s.train.size() == 100000 && s.test.size() == 27260, "split sizes");
  std::vector<char> hit(127260, 0);
  bool disjoint = true;
  for (auto v : {&s.train, &s.test})
    for (std::size_t i : *v) {
      disjoint = disjoint && hit[i] == 0;
      hit[i] = 1;
    }
  o.require(disjoint, "split not disjoint");
  o.require(std::all_of(hit.begin(), hit.end(), [](char c) { return c == 1; }), "split not exhaustive");

  const auto path = (std::filesystem::temp_directory_path() / "ppg2abp_acceptance_store.p2a").string();
  const auto synth = datapipe::synth_generate(50, 110);
  datapipe::write_store(path, synth);
  const std::string bytes = read_file(path);
  const auto back = datapipe::read_store(path);
  o.require(back == synth, "store roundtrip changed records");
  o.require(datapipe::serialize_store(back) == bytes, "store roundtrip changed bytes");
  o.require(datapipe::serialize_store(datapipe::parse_store(datapipe::serialize_store(kept))) ==
                datapipe::serialize_store(kept),
            "subsampled store roundtrip changed bytes");
  std::filesystem::remove(path);
  if (o.pass) o.detail = "kept 25 + 2500, split 100000/27260, store bytes identical";
  return o;
}

// 11. Command-line run from synthetic data to an evaluation report.
Outcome end_to_end() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const auto dir = std::filesystem::temp_directory_path() / "ppg2abp_acceptance_cli";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  auto p = [&](const char* name) { return (dir / name).string(); };
  const std::vector<std::vector<std::string>> steps = {
      {"synth", "--n", "64", "--out", p("all.p2a")},
      {"split", "--in", p("all.p2a"), "--train-out", p("train_raw.p2a"), "--test-out", p("test.p2a"),
       "--train-fraction", "0.75"},
      {"preprocess", "--in", p("train_raw.p2a"), "--out", p("train.p2a")},
      {"train", "--train", p("train.p2a"), "--out", p("model.bundle"), "--width", "0.0625", "--epochs", "5",
       "--batch-size", "16"},
      {"infer", "--bundle", p("model.bundle"), "--in", p("test.p2a"), "--out", p("pred.csv")},
      {"evaluate", "--pred", p("pred.csv"), "--out", p("report.json"), "--text", p("report.txt")}};
  for (const auto& args : steps) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    o.require(code == 0, args.front() + " exited " + std::to_string(code) + ": " + err.str());
    if (!o.pass) return o;
  }
  try {
    const auto report = evalstats::EvaluationReport::from_json(read_file(p("report.json")));
    o.require(report.episodes == 16, "report has " + std::to_string(report.episodes) + " episodes");
    o.require(std::isfinite(report.map.abs_error.mean), "non-finite MAP error");
    o.require(read_file(p("report.txt")) == report.to_text(), "text report differs from JSON");
  } catch (const std::exception& e) {
    o.require(false, std::string("report: ") + e.what());
  }
  const double secs = seconds_since(t0);
  o.require(secs < 1200.0, "took " + fmt("%.0f", secs) + " s");
  if (o.pass) o.detail = "all steps exit 0, report well-formed, " + fmt("%.1f", secs) + " s";
  std::filesystem::remove_all(dir);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
      {"wavelet roundtrip", wavelet_roundtrip},
      {"db8 invariants", filter_bank},
      {"SURE threshold oracle", sure_oracle},
      {"gradient checks", gradient_checks},
      {"conv adjoints", conv_adjoints},
      {"overfit", overfit},
      {"determinism", determinism},
      {"metric oracles", metric_oracles},
      {"classification grid", classification_grid},
      {"data plumbing", data_plumbing},
      {"end-to-end CLI", end_to_end}};
  std::set<std::size_t> only;
  for (int i = 1; i < argc; ++i) only.insert(std::strtoul(argv[i], nullptr, 10));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const std::size_t number = i + 1;
    if (!only.empty() && !only.count(number)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::printf("criterion %2zu %-22s %s  %s\n", number, criteria[i].first, o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
