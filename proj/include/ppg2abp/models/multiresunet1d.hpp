#pragma once

#include "ppg2abp/models/network.hpp"

#include <cstdint>

namespace ppg2abp::models {

struct MultiResUNet1DConfig {
  int depth = 5;
  double alpha = 2.5;
  std::vector<Index> base_widths = {32, 64, 128, 256, 512};
  std::vector<int> res_path_lengths = {4, 3, 2, 1};
  double width_multiplier = 1.0;
  Index input_length = kEpisodeLength;
  double output_offset = 0.0;
  double output_scale = 1.0;
  /// Adds the network input to the scaled head output, so the network learns
  /// a correction; the head starts at zero, making the initial map the identity.
  bool residual_output = true;
  std::uint64_t seed = 2;

  void validate() const;
  /// Base widths after the multiplier (rounded, at least 1).
  std::vector<Index> scaled_widths() const;
  /// Per-level block width W = max(6, floor(alpha * scaled width)).
  std::vector<Index> block_widths() const;
};

/// Channel split of a MultiRes block of width W: floor(W/6), floor(W/3), floor(W/2).
struct MultiResSplit {
  Index first, second, third;
  Index total() const { return first + second + third; }
};
MultiResSplit multires_split(Index width);

/// Three serial 3-tap conv+BN+ReLU stages whose concatenation (batch
/// normalised) is added to a 1-tap conv+BN projection of the input, followed
/// by ReLU and batch norm.
class MultiResBlock {
 public:
  MultiResBlock() = default;
  MultiResBlock(const std::string& name, Index in_channels, Index width);

  void initialize(Rng& rng);
  Batch forward(const Batch& x, Mode mode);
  Batch backward(const Batch& grad_out);
  void collect(ParamList& out);
  Index out_channels() const { return split_.total(); }

 private:
  MultiResSplit split_{};
  tensorops::Conv1d shortcut_;
  tensorops::BatchNorm1d shortcut_bn_;
  tensorops::ConvBnRelu stage1_, stage2_, stage3_;
  tensorops::BatchNorm1d concat_bn_;
  tensorops::Relu relu_;
  tensorops::BatchNorm1d out_bn_;
};

/// Chain of residual units: 3-tap conv+BN+ReLU plus a parallel 1-tap conv+BN
/// shortcut, summed, then ReLU and batch norm.
class ResPath {
 public:
  ResPath() = default;
  ResPath(const std::string& name, Index in_channels, Index filters, int length);

  void initialize(Rng& rng);
  Batch forward(const Batch& x, Mode mode);
  Batch backward(const Batch& grad_out);
  void collect(ParamList& out);

 private:
  struct Unit {
    tensorops::Conv1d shortcut;
    tensorops::BatchNorm1d shortcut_bn;
    tensorops::ConvBnRelu main;
    tensorops::Relu relu;
    tensorops::BatchNorm1d out_bn;
  };
  std::vector<Unit> units_;
};

/// 1D MultiResUNet: MultiRes blocks in place of the double convolutions and
/// Res paths on the skip connections. Single output, no auxiliaries.
class MultiResUNet1D final : public Network {
 public:
  explicit MultiResUNet1D(const MultiResUNet1DConfig& config);

  using Network::forward;
  BatchOutput forward(const Batch& x, Mode mode) override;
  Batch backward(const BatchOutput& grad) override;
  ParamList parameters() override;
  std::unique_ptr<Network> clone() const override { return std::make_unique<MultiResUNet1D>(*this); }
  Index input_length() const override { return config_.input_length; }
  std::size_t auxiliary_count() const override { return 0; }
  std::string kind() const override { return "multiresunet1d"; }

  const MultiResUNet1DConfig& config() const { return config_; }

 private:
  MultiResUNet1DConfig config_;
  std::vector<MultiResBlock> encoder_;
  std::vector<ResPath> res_paths_;
  std::vector<tensorops::MaxPool1d> pools_;
  MultiResBlock bottleneck_;
  std::vector<tensorops::ConvTranspose1d> up_;
  std::vector<MultiResBlock> decoder_;
  tensorops::Conv1d head_;
  tensorops::OutputScaling scaling_;
};

MultiResUNet1D build_multiresunet1d(const MultiResUNet1DConfig& config);

}  // namespace ppg2abp::models
