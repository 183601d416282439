#pragma once

#include "ppg2abp/datapipe/episode.hpp"
#include "ppg2abp/models/multiresunet1d.hpp"
#include "ppg2abp/models/unet1d.hpp"
#include "ppg2abp/tensorops/adam.hpp"
#include "ppg2abp/tensorops/losses.hpp"

#include <bit>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ppg2abp::trainer {

using tensorops::LossKind;

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 32;
  LossKind approx_loss = LossKind::MAE;
  LossKind refine_loss = LossKind::MSE;
  tensorops::AdamConfig adam;
  std::uint64_t seed = 2020;
  std::vector<double> deep_supervision_weights = {1.0, 0.9, 0.8, 0.7, 0.6};
  /// Recompute batch-norm running statistics with the final weights.
  bool recalibrate_batchnorm = true;

  void validate() const;

  /// "key = value" lines; '#' starts a comment.
  std::string to_text() const;
  /// Overrides the fields named in `text`; unknown keys throw DataError.
  void merge_text(const std::string& text);
  static TrainConfig from_file(const std::string& path);
};

/// total = L(final, y) + sum_k w_k L(aux_k, avgpool(y, 2^k)).
struct SupervisedLoss {
  double value = 0.0;
  models::NetworkOutput grad;
};
SupervisedLoss deep_supervised_loss(const models::NetworkOutput& out, const Tensor& target,
                                    const std::vector<double>& weights, LossKind kind);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean objective over the epoch's batches
  double val_loss = 0.0;    // NaN without a validation set
  double train_mae = 0.0;   // MAE of the final output over the epoch's batches
  /// Bitwise, so NaN validation losses of runs without a validation set compare equal.
  bool operator==(const EpochRecord& o) const {
    return epoch == o.epoch && std::bit_cast<std::uint64_t>(train_loss) == std::bit_cast<std::uint64_t>(o.train_loss) &&
           std::bit_cast<std::uint64_t>(val_loss) == std::bit_cast<std::uint64_t>(o.val_loss) &&
           std::bit_cast<std::uint64_t>(train_mae) == std::bit_cast<std::uint64_t>(o.train_mae);
  }
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;

  /// Header epoch,train_loss,val_loss,train_mae; values printed round-trip exact.
  std::string to_csv() const;
  bool operator==(const TrainHistory&) const = default;
};

/// Inputs and targets as 1 x L tensors.
struct Dataset {
  Batch inputs;
  Batch targets;
  std::size_t size() const { return inputs.size(); }
};

Dataset approximation_dataset(const datapipe::EpisodeStore& store);
/// Runs the frozen approximation network (infer mode) to build refinement inputs.
Dataset refinement_dataset(models::Network& approx, const datapipe::EpisodeStore& store);

/// Infer-mode final outputs, evaluated in chunks of `chunk` samples.
Batch predict(models::Network& net, const Batch& inputs, std::size_t chunk = 32);

/// Resets every batch-norm layer's running statistics and re-estimates them as
/// the average over train-mode passes of `inputs` in chunks of `batch_size`
/// (cumulative for the first 100 chunks, exponential after that).
/// Trainable parameters are untouched.
void recalibrate_batchnorm(models::Network& net, const Batch& inputs, std::size_t batch_size);

/// Epoch loop with per-epoch shuffling and Adam. With a validation set the
/// parameters of the epoch with the lowest validation loss are restored at the
/// end; otherwise the final parameters are kept. Batch-norm statistics are then
/// recalibrated if configured. Throws NumericalError naming
/// the epoch and batch on a non-finite loss.
TrainHistory train_network(models::Network& net, const Dataset& train, const Dataset* val, const TrainConfig& config,
                           LossKind kind);

TrainHistory train_approximation(models::Network& approx, const datapipe::EpisodeStore& train,
                                 const datapipe::EpisodeStore* val, const TrainConfig& config);
/// The approximation network is left bit-identical (checked by digest).
TrainHistory train_refinement(models::Network& refine, models::Network& approx, const datapipe::EpisodeStore& train,
                              const datapipe::EpisodeStore* val, const TrainConfig& config);

/// Mean and population std of every ABP sample, used for the output heads.
struct TargetScaling {
  double offset = 0.0;
  double scale = 1.0;
};
TargetScaling target_scaling(const datapipe::EpisodeStore& store);
/// Approximation head: offset + scale * z. Refinement head: the same, or with
/// zero offset when it outputs a correction to its input.
void apply_target_scaling(const TargetScaling& scaling, models::UNet1DConfig& approx,
                          models::MultiResUNet1DConfig& refine);

struct FoldPlan {
  std::size_t k = 0;
  std::vector<datapipe::SplitIndices> folds;  // test = validation indices
};
FoldPlan kfold_plan(std::size_t n, std::size_t k, std::uint64_t seed);

struct FoldResult {
  TrainHistory approx_history;
  TrainHistory refine_history;
  double val_loss = 0.0;  // best refinement validation loss
};

struct CrossValidation {
  FoldPlan plan;
  std::vector<FoldResult> folds;
  std::size_t selected = 0;
  std::unique_ptr<models::UNet1D> approx;
  std::unique_ptr<models::MultiResUNet1D> refine;
};

/// Trains the approximation/refinement cascade once per fold and keeps the
/// fold with the lowest refinement validation loss. Folds run on up to
/// `threads` workers; results do not depend on the thread count.
CrossValidation cross_validate(const datapipe::EpisodeStore& store, const TrainConfig& config,
                               const models::UNet1DConfig& approx_config,
                               const models::MultiResUNet1DConfig& refine_config, std::size_t k,
                               std::size_t threads = 1);

void save_checkpoint(models::Network& net, const std::string& path);
void load_checkpoint(models::Network& net, const std::string& path);

}  // namespace ppg2abp::trainer
