#pragma once

#include "ppg2abp/core.hpp"

#include <array>

namespace ppg2abp::sigproc {

inline constexpr int kDb8Taps = 16;

/// Orthogonal two-channel filter bank. Reconstruction filters are the
/// time-reverses of the decomposition filters.
struct WaveletFilterBank {
  std::array<double, kDb8Taps> dec_lowpass{};
  std::array<double, kDb8Taps> dec_highpass{};
  std::array<double, kDb8Taps> rec_lowpass{};
  std::array<double, kDb8Taps> rec_highpass{};

  /// Throws Error when orthonormality, the sqrt(2) tap sum or the
  /// quadrature-mirror relation fails at 1e-12.
  void validate() const;
};

/// Daubechies wavelet with 8 vanishing moments, validated on first use.
const WaveletFilterBank& db8();

/// Periodized pyramid. details[0] is the finest band d1.
struct WaveletDecomposition {
  Vector approx;
  std::vector<Vector> details;

  int levels() const { return static_cast<int>(details.size()); }
  Vector& detail(int level) { return details.at(static_cast<std::size_t>(level - 1)); }
  const Vector& detail(int level) const { return details.at(static_cast<std::size_t>(level - 1)); }

  double energy() const;
};

/// One analysis step on a periodic, even-length sequence:
///   approx[i] = sum_k rec_lo[k] x[(2i + k) mod n], same for detail with rec_hi.
void analysis_step(const Eigen::Ref<const Vector>& x, const WaveletFilterBank& bank,
                   Vector& approx, Vector& detail);

/// Exact adjoint (and inverse) of analysis_step.
Vector synthesis_step(const Eigen::Ref<const Vector>& approx, const Eigen::Ref<const Vector>& detail,
                      const WaveletFilterBank& bank);

WaveletDecomposition dwt_decompose(const Eigen::Ref<const Vector>& signal, int levels,
                                   const WaveletFilterBank& bank = db8());

Vector dwt_reconstruct(const WaveletDecomposition& decomp, const WaveletFilterBank& bank = db8());

/// Zeroes the coarsest approximation and the finest detail band.
WaveletDecomposition zero_extreme_bands(WaveletDecomposition decomp);

}  // namespace ppg2abp::sigproc
