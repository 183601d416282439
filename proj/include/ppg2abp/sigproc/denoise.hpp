#pragma once

#include "ppg2abp/core.hpp"
#include "ppg2abp/sigproc/wavelet.hpp"

namespace ppg2abp::sigproc {

inline constexpr int kDenoiseLevels = 10;

/// Uniformly sampled real sequence.
struct Signal {
  Vector samples;
  double fs = kSampleRate;

  Signal() = default;
  explicit Signal(Vector s, double rate = kSampleRate) : samples(std::move(s)), fs(rate) {}

  Index size() const { return samples.size(); }
  /// Throws DataError on empty or non-finite samples.
  void validate() const;
};

/// sign(x) * max(|x| - t, 0). Throws DataError for negative t.
double soft_threshold(double x, double t);

/// Stein-unbiased-risk threshold (rigrsure). Squared magnitudes are sorted
/// ascending and the risk
///   r(k) = (n - 2k + sum_{i<=k} s_(i) + (n - k) s_(k)) / n
/// is minimised over k = 1..n, smallest k on ties. Returns |c|_(k*).
double sure_threshold(const Eigen::Ref<const Vector>& coeffs);

/// Robust noise scale median(|d|) / 0.6745.
double mad_sigma(const Eigen::Ref<const Vector>& detail);

/// Decompose (10 levels), estimate the noise scale sigma = mad_sigma(d1),
/// drop the extreme bands, soft-threshold each remaining detail band d with
/// sigma * sure_threshold(d / sigma), reconstruct.
Vector denoise(const Eigen::Ref<const Vector>& signal, const WaveletFilterBank& bank = db8());
Signal denoise(const Signal& signal);

/// Subtracts the mean.
Vector mean_normalize(const Eigen::Ref<const Vector>& signal);
Signal mean_normalize(const Signal& signal);

/// Sample skewness sum(((x - mean) / sd)^3) / n with the population sd.
/// Constant input returns 0. Throws DataError for fewer than 3 samples.
double skewness_sqi(const Eigen::Ref<const Vector>& signal);

}  // namespace ppg2abp::sigproc
