#include "ppg2abp/sigproc/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace ppg2abp::sigproc {

void Signal::validate() const {
  if (samples.size() == 0) throw DataError("signal is empty");
  if (!samples.allFinite()) throw DataError("signal contains non-finite samples");
  if (!(fs > 0.0)) throw DataError("signal sampling rate must be positive");
}

double soft_threshold(double x, double t) {
  if (t < 0.0) throw DataError("soft_threshold: negative threshold");
  const double mag = std::abs(x) - t;
  if (mag <= 0.0) return 0.0;
  return x < 0.0 ? -mag : mag;
}

double sure_threshold(const Eigen::Ref<const Vector>& coeffs) {
  const Index n = coeffs.size();
  if (n == 0) throw DataError("sure_threshold: empty coefficient sequence");
  if (!coeffs.allFinite()) throw DataError("sure_threshold: non-finite coefficient");
  std::vector<double> mags(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) mags[static_cast<std::size_t>(i)] = std::abs(coeffs[i]);
  std::sort(mags.begin(), mags.end());

  const double nd = static_cast<double>(n);
  double cumulative = 0.0;
  double best_risk = 0.0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < mags.size(); ++i) {
    const double s = mags[i] * mags[i];
    cumulative += s;
    const double k = static_cast<double>(i + 1);
    const double risk = (nd - 2.0 * k + cumulative + (nd - k) * s) / nd;
    if (i == 0 || risk < best_risk) {
      best_risk = risk;
      best = i;
    }
  }
  return mags[best];
}

double mad_sigma(const Eigen::Ref<const Vector>& detail) {
  if (detail.size() == 0) return 0.0;
  std::vector<double> mags(detail.size());
  for (Index i = 0; i < detail.size(); ++i) mags[static_cast<std::size_t>(i)] = std::abs(detail[i]);
  const std::size_t n = mags.size();
  const std::size_t mid = n / 2;
  std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mid), mags.end());
  double median = mags[mid];
  if (n % 2 == 0) {
    const double lower = *std::max_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return median / 0.6745;
}

Vector denoise(const Eigen::Ref<const Vector>& signal, const WaveletFilterBank& bank) {
  if (!signal.allFinite()) throw DataError("denoise: non-finite samples");
  auto full = dwt_decompose(signal, kDenoiseLevels, bank);
  // One noise scale from the finest band. Estimating it per level would treat
  // the signal-dominated coarse bands as noise and erase them.
  const double sigma = mad_sigma(full.detail(1));
  auto decomp = zero_extreme_bands(std::move(full));
  if (!(sigma > 0.0)) return dwt_reconstruct(decomp, bank);
  for (int level = 2; level <= decomp.levels(); ++level) {
    Vector& d = decomp.detail(level);
    const double t = sure_threshold(d / sigma) * sigma;
    for (Index i = 0; i < d.size(); ++i) d[i] = soft_threshold(d[i], t);
  }
  return dwt_reconstruct(decomp, bank);
}

Signal denoise(const Signal& signal) {
  signal.validate();
  if (signal.size() != kEpisodeLength)
    throw ShapeError("denoise: expected " + std::to_string(kEpisodeLength) + " samples, got " +
                     std::to_string(signal.size()));
  return Signal(denoise(signal.samples), signal.fs);
}

Vector mean_normalize(const Eigen::Ref<const Vector>& signal) {
  if (signal.size() == 0) throw DataError("mean_normalize: empty signal");
  Vector out = signal.array() - signal.mean();
  // A second pass removes the rounding residue of the first.
  out.array() -= out.mean();
  return out;
}

Signal mean_normalize(const Signal& signal) { return Signal(mean_normalize(signal.samples), signal.fs); }

double skewness_sqi(const Eigen::Ref<const Vector>& signal) {
  const Index n = signal.size();
  if (n < 3) throw DataError("skewness_sqi: need at least 3 samples");
  const double mean = signal.mean();
  const Vector centered = signal.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(n);
  const double sd = std::sqrt(var);
  const double scale = signal.cwiseAbs().maxCoeff();
  if (signal.maxCoeff() == signal.minCoeff() || sd <= 1e-14 * scale) return 0.0;
  const double third = (centered.array() / sd).cube().sum();
  return third / static_cast<double>(n);
}

}  // namespace ppg2abp::sigproc
