#include "ppg2abp/trainer/trainer.hpp"

#include "ppg2abp/binary_io.hpp"
#include "ppg2abp/random.hpp"
#include "ppg2abp/tensorops/checkpoint.hpp"
#include "ppg2abp/tensorops/kernels.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <future>
#include <limits>
#include <sstream>

namespace ppg2abp::trainer {

using tensorops::Mode;
using tensorops::Param;
namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw DataError("config: '" + key + "' expects a number, got '" + v + "'");
}

std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [end, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || end != v.data() + v.size())
    throw DataError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  return out;
}

Tensor row(const Vector& v) { return Tensor(v.transpose()); }

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw DataError("train config: epochs must be at least 1");
  if (batch_size < 2) throw DataError("train config: batch_size must be at least 2 (batch norm)");
  if (deep_supervision_weights.empty() || deep_supervision_weights.front() != 1.0)
    throw DataError("train config: deep supervision weights must start with 1");
  adam.validate();
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os << "epochs = " << epochs << '\n';
  os << "batch_size = " << batch_size << '\n';
  os << "approx_loss = " << tensorops::to_string(approx_loss) << '\n';
  os << "refine_loss = " << tensorops::to_string(refine_loss) << '\n';
  os << "learning_rate = " << format_double(adam.learning_rate) << '\n';
  os << "beta1 = " << format_double(adam.beta1) << '\n';
  os << "beta2 = " << format_double(adam.beta2) << '\n';
  os << "epsilon = " << format_double(adam.epsilon) << '\n';
  os << "seed = " << seed << '\n';
  os << "recalibrate_batchnorm = " << (recalibrate_batchnorm ? 1 : 0) << '\n';
  os << "deep_supervision_weights = ";
  for (std::size_t i = 0; i < deep_supervision_weights.size(); ++i)
    os << (i ? "," : "") << format_double(deep_supervision_weights[i]);
  os << '\n';
  return os.str();
}

void TrainConfig::merge_text(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key == "epochs") {
      epochs = static_cast<int>(parse_unsigned(key, value));
    } else if (key == "batch_size") {
      batch_size = static_cast<std::size_t>(parse_unsigned(key, value));
    } else if (key == "approx_loss") {
      approx_loss = tensorops::loss_from_string(value);
    } else if (key == "refine_loss") {
      refine_loss = tensorops::loss_from_string(value);
    } else if (key == "learning_rate") {
      adam.learning_rate = parse_double(key, value);
    } else if (key == "beta1") {
      adam.beta1 = parse_double(key, value);
    } else if (key == "beta2") {
      adam.beta2 = parse_double(key, value);
    } else if (key == "epsilon") {
      adam.epsilon = parse_double(key, value);
    } else if (key == "seed") {
      seed = parse_unsigned(key, value);
    } else if (key == "recalibrate_batchnorm") {
      recalibrate_batchnorm = parse_unsigned(key, value) != 0;
    } else if (key == "deep_supervision_weights") {
      std::vector<double> w;
      std::istringstream parts(value);
      std::string part;
      while (std::getline(parts, part, ',')) w.push_back(parse_double(key, trim(part)));
      deep_supervision_weights = std::move(w);
    } else {
      throw DataError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
}

TrainConfig TrainConfig::from_file(const std::string& path) {
  TrainConfig c;
  c.merge_text(read_file(path));
  return c;
}

SupervisedLoss deep_supervised_loss(const models::NetworkOutput& out, const Tensor& target,
                                    const std::vector<double>& weights, LossKind kind) {
  if (weights.size() != 1 + out.auxiliaries.size())
    throw DataError("deep_supervised_loss: " + std::to_string(weights.size()) + " weights for " +
                    std::to_string(1 + out.auxiliaries.size()) + " outputs");
  SupervisedLoss r;
  auto main = tensorops::loss(kind, out.final, target);
  r.value = weights[0] * main.value;
  r.grad.final = main.grad * weights[0];
  r.grad.auxiliaries.resize(out.auxiliaries.size());
  for (std::size_t k = 0; k < out.auxiliaries.size(); ++k) {
    const Index factor = Index{1} << (k + 1);
    const Tensor sub = tensorops::avgpool1d(target, factor);
    auto aux = tensorops::loss(kind, out.auxiliaries[k], sub);
    r.value += weights[k + 1] * aux.value;
    r.grad.auxiliaries[k] = aux.grad * weights[k + 1];
  }
  return r;
}

std::string TrainHistory::to_csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_loss,train_mae\n";
  for (const auto& e : epochs)
    os << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << ','
       << format_double(e.train_mae) << '\n';
  return os.str();
}

Dataset approximation_dataset(const datapipe::EpisodeStore& store) {
  Dataset d;
  for (const auto& r : store.records) {
    d.inputs.push_back(row(r.ppg));
    d.targets.push_back(row(r.abp));
  }
  return d;
}

Batch predict(models::Network& net, const Batch& inputs, std::size_t chunk) {
  Batch out;
  out.reserve(inputs.size());
  chunk = std::max<std::size_t>(chunk, 1);
  for (std::size_t s = 0; s < inputs.size(); s += chunk) {
    const auto e = std::min(inputs.size(), s + chunk);
    const Batch part(inputs.begin() + static_cast<std::ptrdiff_t>(s), inputs.begin() + static_cast<std::ptrdiff_t>(e));
    for (auto& t : net.forward(part, Mode::Infer).final) out.push_back(std::move(t));
  }
  return out;
}

Dataset refinement_dataset(models::Network& approx, const datapipe::EpisodeStore& store) {
  Dataset d = approximation_dataset(store);
  d.inputs = predict(approx, d.inputs);
  return d;
}

namespace {

double validation_loss(models::Network& net, const Dataset& val, LossKind kind, std::size_t chunk) {
  const Batch pred = predict(net, val.inputs, chunk);
  double total = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) total += tensorops::loss(kind, pred[i], val.targets[i]).value;
  return total / static_cast<double>(pred.size());
}

// Batch boundaries for one epoch; a trailing singleton joins the previous batch.
std::vector<std::size_t> batch_starts(std::size_t n, std::size_t batch) {
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s < n; s += batch) starts.push_back(s);
  if (starts.size() > 1 && n - starts.back() == 1) starts.pop_back();
  starts.push_back(n);
  return starts;
}

}  // namespace

void recalibrate_batchnorm(models::Network& net, const Batch& inputs, std::size_t batch_size) {
  const auto params = net.parameters();
  bool any = false;
  for (Param* p : params) {
    if (p->name.ends_with(".updates")) {
      p->value.setZero();
      any = true;
    }
  }
  if (!any || inputs.size() < 2) return;
  const auto starts = batch_starts(inputs.size(), std::max<std::size_t>(batch_size, 2));
  for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
    const Batch part(inputs.begin() + static_cast<std::ptrdiff_t>(starts[b]),
                     inputs.begin() + static_cast<std::ptrdiff_t>(starts[b + 1]));
    net.forward(part, Mode::Train);
  }
}

TrainHistory train_network(models::Network& net, const Dataset& train, const Dataset* val, const TrainConfig& config,
                           LossKind kind) {
  config.validate();
  if (train.size() < 2) throw DataError("train: need at least 2 training episodes (batch norm)");
  if (val && val->size() == 0) val = nullptr;
  for (const Dataset* d : {&train, val}) {
    if (!d) continue;
    for (std::size_t i = 0; i < d->size(); ++i)
      if (d->inputs[i].cols() != net.input_length() || d->targets[i].cols() != net.input_length())
        throw ShapeError("train: episode " + std::to_string(i) + " has length " +
                         std::to_string(d->inputs[i].cols()) + ", network expects " +
                         std::to_string(net.input_length()));
  }

  // Networks without auxiliaries use only the leading weight.
  std::vector<double> weights = config.deep_supervision_weights;
  if (net.auxiliary_count() == 0) weights.resize(1);
  if (weights.size() != 1 + net.auxiliary_count())
    throw DataError("train: " + std::to_string(weights.size()) + " deep supervision weights for a network with " +
                    std::to_string(net.auxiliary_count()) + " auxiliary outputs");

  const auto params = net.parameters();
  tensorops::AdamConfig adam = config.adam;
  tensorops::zero_grads(params);
  Rng rng(config.seed);

  TrainHistory history;
  tensorops::ParamSnapshot best;
  double best_val = std::numeric_limits<double>::infinity();
  const auto starts = batch_starts(train.size(), config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = rng.permutation(train.size());
    double loss_sum = 0.0, mae_sum = 0.0;
    for (std::size_t b = 0; b + 1 < starts.size(); ++b) {
      Batch x, y;
      for (std::size_t i = starts[b]; i < starts[b + 1]; ++i) {
        x.push_back(train.inputs[order[i]]);
        y.push_back(train.targets[order[i]]);
      }
      const double inv = 1.0 / static_cast<double>(x.size());
      const auto out = net.forward(x, Mode::Train);
      models::BatchOutput grad;
      grad.auxiliaries.resize(out.auxiliaries.size());
      double batch_loss = 0.0;
      for (std::size_t s = 0; s < x.size(); ++s) {
        auto l = deep_supervised_loss(out.sample(s), y[s], weights, kind);
        batch_loss += l.value * inv;
        mae_sum += tensorops::mae_loss(out.final[s], y[s]).value;
        grad.final.push_back(l.grad.final * inv);
        for (std::size_t k = 0; k < out.auxiliaries.size(); ++k) grad.auxiliaries[k].push_back(l.grad.auxiliaries[k] * inv);
      }
      if (!std::isfinite(batch_loss))
        throw NumericalError("training diverged: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b + 1));
      net.backward(grad);
      tensorops::adam_step(params, adam);
      loss_sum += batch_loss * static_cast<double>(x.size());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(train.size());
    rec.train_mae = mae_sum / static_cast<double>(train.size());
    rec.val_loss = std::numeric_limits<double>::quiet_NaN();
    if (val) {
      rec.val_loss = validation_loss(net, *val, kind, config.batch_size);
      if (!std::isfinite(rec.val_loss))
        throw NumericalError("training diverged: non-finite validation loss at epoch " + std::to_string(epoch));
      if (rec.val_loss < best_val) {
        best_val = rec.val_loss;
        best = tensorops::snapshot(params);
        history.best_epoch = epoch;
      }
    } else {
      history.best_epoch = epoch;
    }
    history.epochs.push_back(rec);
  }
  if (val) tensorops::restore(params, best);
  if (config.recalibrate_batchnorm) recalibrate_batchnorm(net, train.inputs, config.batch_size);
  return history;
}

TrainHistory train_approximation(models::Network& approx, const datapipe::EpisodeStore& train,
                                 const datapipe::EpisodeStore* val, const TrainConfig& config) {
  const Dataset t = approximation_dataset(train);
  if (!val) return train_network(approx, t, nullptr, config, config.approx_loss);
  const Dataset v = approximation_dataset(*val);
  return train_network(approx, t, &v, config, config.approx_loss);
}

TrainHistory train_refinement(models::Network& refine, models::Network& approx, const datapipe::EpisodeStore& train,
                              const datapipe::EpisodeStore* val, const TrainConfig& config) {
  const auto frozen = tensorops::digest(approx.parameters());
  const Dataset t = refinement_dataset(approx, train);
  std::optional<Dataset> v;
  if (val) v = refinement_dataset(approx, *val);
  auto history = train_network(refine, t, v ? &*v : nullptr, config, config.refine_loss);
  if (tensorops::digest(approx.parameters()) != frozen)
    throw Error("train_refinement: approximation network parameters changed");
  return history;
}

TargetScaling target_scaling(const datapipe::EpisodeStore& store) {
  if (store.empty()) throw DataError("target_scaling: empty store");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : store.records) {
    sum += r.abp.sum();
    n += static_cast<std::size_t>(r.abp.size());
  }
  const double mean = sum / static_cast<double>(n);
  double ss = 0.0;
  for (const auto& r : store.records) ss += (r.abp.array() - mean).square().sum();
  const double sd = std::sqrt(ss / static_cast<double>(n));
  return {mean, sd > 0.0 ? sd : 1.0};
}

void apply_target_scaling(const TargetScaling& scaling, models::UNet1DConfig& approx,
                          models::MultiResUNet1DConfig& refine) {
  approx.output_offset = scaling.offset;
  approx.output_scale = scaling.scale;
  refine.output_offset = refine.residual_output ? 0.0 : scaling.offset;
  refine.output_scale = scaling.scale;
}

FoldPlan kfold_plan(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw DataError("kfold_plan: k must be at least 2");
  if (n < k) throw DataError("kfold_plan: " + std::to_string(n) + " episodes cannot form " + std::to_string(k) +
                             " folds");
  Rng rng(seed);
  const auto perm = rng.permutation(n);
  FoldPlan plan;
  plan.k = k;
  std::vector<std::size_t> fold_of(n);
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = n / k + (f < n % k ? 1 : 0);
    for (std::size_t j = 0; j < size; ++j) fold_of[perm[pos++]] = f;
  }
  plan.folds.resize(k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < k; ++f) (fold_of[i] == f ? plan.folds[f].test : plan.folds[f].train).push_back(i);
  return plan;
}

namespace {

struct FoldRun {
  FoldResult result;
  std::unique_ptr<models::UNet1D> approx;
  std::unique_ptr<models::MultiResUNet1D> refine;
};

FoldRun run_fold(const datapipe::EpisodeStore& store, const datapipe::SplitIndices& fold, const TrainConfig& config,
                 models::UNet1DConfig ac, models::MultiResUNet1DConfig rc) {
  const auto train = store.subset(fold.train);
  const auto val = store.subset(fold.test);
  apply_target_scaling(target_scaling(train), ac, rc);
  FoldRun run;
  run.approx = std::make_unique<models::UNet1D>(ac);
  run.refine = std::make_unique<models::MultiResUNet1D>(rc);
  run.result.approx_history = train_approximation(*run.approx, train, &val, config);
  run.result.refine_history = train_refinement(*run.refine, *run.approx, train, &val, config);
  const auto& best = run.result.refine_history.epochs.at(static_cast<std::size_t>(run.result.refine_history.best_epoch - 1));
  run.result.val_loss = best.val_loss;
  return run;
}

}  // namespace

CrossValidation cross_validate(const datapipe::EpisodeStore& store, const TrainConfig& config,
                               const models::UNet1DConfig& approx_config,
                               const models::MultiResUNet1DConfig& refine_config, std::size_t k,
                               std::size_t threads) {
  CrossValidation cv;
  cv.plan = kfold_plan(store.size(), k, config.seed);
  std::vector<FoldRun> runs(k);
  threads = std::max<std::size_t>(threads, 1);
  for (std::size_t first = 0; first < k; first += threads) {
    std::vector<std::future<FoldRun>> pending;
    for (std::size_t f = first; f < std::min(k, first + threads); ++f)
      pending.push_back(std::async(std::launch::async, run_fold, std::cref(store), std::cref(cv.plan.folds[f]),
                                   std::cref(config), approx_config, refine_config));
    for (std::size_t j = 0; j < pending.size(); ++j) runs[first + j] = pending[j].get();
  }
  for (std::size_t f = 0; f < k; ++f) {
    cv.folds.push_back(runs[f].result);
    if (cv.folds[f].val_loss < cv.folds[cv.selected].val_loss) cv.selected = f;
  }
  cv.approx = std::move(runs[cv.selected].approx);
  cv.refine = std::move(runs[cv.selected].refine);
  return cv;
}

void save_checkpoint(models::Network& net, const std::string& path) {
  tensorops::save_checkpoint(path, net.parameters());
}

void load_checkpoint(models::Network& net, const std::string& path) {
  tensorops::load_checkpoint(path, net.parameters());
}

}  // namespace ppg2abp::trainer
