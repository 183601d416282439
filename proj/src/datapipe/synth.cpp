#include "ppg2abp/datapipe/synth.hpp"

#include "ppg2abp/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ppg2abp::datapipe {
namespace {

double lobe(double t, double centre, double width) {
  // Wrapped so the template is periodic in the cycle fraction t.
  double d = t - centre;
  d -= std::round(d);
  return std::exp(-0.5 * d * d / (width * width));
}

// Cycle fraction -> pressure-like shape: systolic peak plus dicrotic wave.
double abp_template(double t, double dicrotic) { return lobe(t, 0.18, 0.10) + dicrotic * lobe(t, 0.45, 0.10); }

// The PPG lags the pressure pulse and is low-pass in shape.
constexpr double kPpgDelay = 0.08;

double ppg_template(double t, double notch) {
  return lobe(t - kPpgDelay, 0.20, 0.13) + notch * lobe(t - kPpgDelay, 0.50, 0.14);
}

}  // namespace

SynthResult synth_generate_with_draws(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw DataError("synth_generate: n must be at least 1");
  Rng rng(seed);
  SynthResult out;
  out.store.fs = kSampleRate;
  out.store.records.reserve(n);
  out.draws.reserve(n);
  for (std::size_t e = 0; e < n; ++e) {
    SynthDraw d;
    d.sbp = rng.uniform(80.0, 180.0);
    d.dbp = rng.uniform(50.0, std::min(110.0, d.sbp - 10.0));
    d.heart_rate_bpm = rng.uniform(50.0, 120.0);
    d.phase = rng.uniform();

    // Higher diastolic pressure gives a more pronounced dicrotic wave.
    const double dicrotic = 0.25 + 0.35 * (d.dbp - 50.0) / 60.0;
    const double amplitude = (d.sbp - d.dbp) / 40.0;
    const double cycles_per_sample = d.heart_rate_bpm / 60.0 / kSampleRate;

    Vector shape(kEpisodeLength);
    EpisodeRecord rec;
    rec.ppg.resize(kEpisodeLength);
    for (Index i = 0; i < kEpisodeLength; ++i) {
      const double t = d.phase + cycles_per_sample * static_cast<double>(i);
      shape[i] = abp_template(t, dicrotic);
      rec.ppg[i] = amplitude * ppg_template(t, dicrotic) + 0.02 * rng.normal();
    }
    const double lo = shape.minCoeff();
    const double hi = shape.maxCoeff();
    rec.abp = ((shape.array() - lo) / (hi - lo) * (d.sbp - d.dbp) + d.dbp).matrix();
    // Pin the extremes so max = SBP and min = DBP hold bit-exactly.
    Index imax, imin;
    shape.maxCoeff(&imax);
    shape.minCoeff(&imin);
    rec.abp[imax] = d.sbp;
    rec.abp[imin] = d.dbp;
    rec.abp = rec.abp.cwiseMax(d.dbp).cwiseMin(d.sbp);

    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", e);
    rec.subject_id = id;
    out.store.records.push_back(std::move(rec));
    out.draws.push_back(d);
  }
  return out;
}

EpisodeStore synth_generate(std::size_t n, std::uint64_t seed) {
  return std::move(synth_generate_with_draws(n, seed).store);
}

}  // namespace ppg2abp::datapipe
