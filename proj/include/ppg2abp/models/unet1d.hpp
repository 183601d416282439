#pragma once

#include "ppg2abp/models/network.hpp"

#include <cstdint>

namespace ppg2abp::models {

struct UNet1DConfig {
  int depth = 5;
  std::vector<Index> filters = {64, 128, 256, 512, 1024};
  /// Scales every filter count (rounded, at least 1); 1/16 for desk-scale runs.
  double width_multiplier = 1.0;
  Index kernel_size = 3;
  Index input_length = kEpisodeLength;
  std::vector<double> deep_supervision_weights = {1.0, 0.9, 0.8, 0.7, 0.6};
  /// Fixed affine map from the unit-scale head onto mmHg.
  double output_offset = 0.0;
  double output_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<Index> scaled_filters() const;
};

/// Deeply supervised 1D U-Net. Each level: two conv+BN+ReLU layers; the
/// decoder upsamples with a stride-2 transposed convolution and concatenates
/// the matching encoder output. A 1-filter 1-tap linear head reads the tensor
/// entering each transposed convolution.
class UNet1D final : public Network {
 public:
  explicit UNet1D(const UNet1DConfig& config);

  using Network::forward;
  BatchOutput forward(const Batch& x, Mode mode) override;
  Batch backward(const BatchOutput& grad) override;
  ParamList parameters() override;
  std::unique_ptr<Network> clone() const override { return std::make_unique<UNet1D>(*this); }
  Index input_length() const override { return config_.input_length; }
  std::size_t auxiliary_count() const override { return static_cast<std::size_t>(config_.depth - 1); }
  std::string kind() const override { return "unet1d"; }

  const UNet1DConfig& config() const { return config_; }

 private:
  struct Stage {
    tensorops::ConvBnRelu first;
    tensorops::ConvBnRelu second;
  };

  UNet1DConfig config_;
  std::vector<Stage> encoder_;
  std::vector<tensorops::MaxPool1d> pools_;
  Stage bottleneck_;
  std::vector<tensorops::ConvTranspose1d> up_;
  std::vector<Stage> decoder_;
  std::vector<tensorops::Conv1d> aux_heads_;
  tensorops::Conv1d head_;
  tensorops::OutputScaling scaling_;
};

UNet1D build_unet1d(const UNet1DConfig& config);

}  // namespace ppg2abp::models
