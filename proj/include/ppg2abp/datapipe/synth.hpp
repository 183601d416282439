#pragma once

#include "ppg2abp/datapipe/episode.hpp"

#include <cstdint>

namespace ppg2abp::datapipe {

/// Per-episode draws of the synthetic generator.
struct SynthDraw {
  double sbp = 0.0;
  double dbp = 0.0;
  double heart_rate_bpm = 0.0;
  double phase = 0.0;
};

struct SynthResult {
  EpisodeStore store;
  std::vector<SynthDraw> draws;
};

/// Pseudo-physiological episodes: a two-lobe pulse template repeated at a
/// random heart rate in [50, 120] bpm. SBP ~ U[80, 180], DBP ~ U[50,
/// min(110, SBP - 10)); ABP is scaled so max = SBP and min = DBP. The PPG is
/// a smoother, delayed pulse whose amplitude and notch depth follow the
/// pressures, plus seeded Gaussian noise.
SynthResult synth_generate_with_draws(std::size_t n, std::uint64_t seed);
EpisodeStore synth_generate(std::size_t n, std::uint64_t seed);

}  // namespace ppg2abp::datapipe
