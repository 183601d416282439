#pragma once

#include "ppg2abp/datapipe/episode.hpp"
#include "ppg2abp/models/multiresunet1d.hpp"
#include "ppg2abp/models/unet1d.hpp"
#include "ppg2abp/pipeline/bp_values.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace ppg2abp::pipeline {

struct PreprocessSettings {
  bool denoise = true;
  bool mean_normalize = true;
  bool operator==(const PreprocessSettings&) const = default;
};

/// Wavelet denoising followed by mean removal (each optional).
Vector preprocess_ppg(const Eigen::Ref<const Vector>& ppg, const PreprocessSettings& settings = {});
/// Applies preprocess_ppg to every episode's PPG; ABP is untouched.
datapipe::EpisodeStore preprocess_store(const datapipe::EpisodeStore& store, const PreprocessSettings& settings = {},
                                        std::size_t threads = 1);

/// Trained approximation and refinement networks plus the preprocessing they
/// expect.
struct PipelineBundle {
  static constexpr std::uint32_t kVersion = 1;

  models::UNet1DConfig approx_config;
  models::MultiResUNet1DConfig refine_config;
  PreprocessSettings preprocess;
  std::unique_ptr<models::UNet1D> approx;
  std::unique_ptr<models::MultiResUNet1D> refine;

  /// Both networks present with the same input length.
  void validate() const;
};

/// Writes `path` (a key = value manifest) plus `path`.approx.ckpt and
/// `path`.refine.ckpt next to it.
void save_bundle(const PipelineBundle& bundle, const std::string& path);
PipelineBundle load_bundle(const std::string& path);

/// Preprocess (optional), approximate, refine; all in inference mode.
Vector ppg2abp(models::Network& approx, models::Network& refine, const Eigen::Ref<const Vector>& ppg,
               const PreprocessSettings& settings, bool preprocess = true);
Vector ppg2abp(PipelineBundle& bundle, const Eigen::Ref<const Vector>& ppg, bool preprocess = true);

/// Mean |pred - truth|.
double waveform_mae(const Eigen::Ref<const Vector>& pred, const Eigen::Ref<const Vector>& truth);

struct PredictionRow {
  std::size_t index = 0;
  std::string subject_id;
  BPValues truth;
  BPValues pred;
  double waveform_mae = 0.0;
  double sqi = 0.0;  // skewness of the stored PPG
  Vector abp_pred;
};

struct PredictionFailure {
  std::size_t index = 0;
  std::string message;
};

struct BatchPrediction {
  std::vector<PredictionRow> rows;  // store order, failures omitted
  std::vector<PredictionFailure> failures;
};

/// Runs the pipeline over every episode on up to `threads` workers, each with
/// its own network copies. Episodes that throw are reported, not fatal.
BatchPrediction batch_predict(const PipelineBundle& bundle, const datapipe::EpisodeStore& store,
                              bool preprocess = true, std::size_t threads = 1);

/// Header: episode,subject_id,sbp_true,dbp_true,map_true,sbp_pred,dbp_pred,
/// map_pred,waveform_mae,sqi.
std::string predictions_csv(const std::vector<PredictionRow>& rows);
void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows);

/// One row per sample; columns ep<i>_true, ep<i>_pred for every row i.
void write_waveforms_csv(const std::string& path, const std::vector<PredictionRow>& rows,
                         const datapipe::EpisodeStore& store);

}  // namespace ppg2abp::pipeline
