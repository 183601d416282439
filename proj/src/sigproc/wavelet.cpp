#include "ppg2abp/sigproc/wavelet.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace ppg2abp::sigproc {

namespace {

// Daubechies-8 scaling filter (decomposition low-pass, 16 taps).
constexpr std::array<double, kDb8Taps> kDb8DecLow = {
    -0.00011747678412476953, 0.0006754494064505693,  -0.00039174037337694705,
    -0.004870352993451574,   0.008746094047405777,   0.013981027917398282,
    -0.044088253930794755,   -0.017369301001807547,  0.12874742662047847,
    0.0004724845739132828,   -0.2840155429615469,    -0.015829105256349306,
    0.5853546836542067,      0.6756307362972898,     0.31287159091429995,
    0.05441584224310401,
};

WaveletFilterBank make_bank(const std::array<double, kDb8Taps>& dec_low) {
  WaveletFilterBank bank;
  constexpr int n = kDb8Taps;
  bank.dec_lowpass = dec_low;
  for (int k = 0; k < n; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    bank.dec_highpass[k] = sign * dec_low[n - 1 - k];
  }
  for (int k = 0; k < n; ++k) {
    bank.rec_lowpass[k] = bank.dec_lowpass[n - 1 - k];
    bank.rec_highpass[k] = bank.dec_highpass[n - 1 - k];
  }
  return bank;
}

bool is_pow2_multiple(Index n, int levels) {
  if (levels < 0 || levels > 62) return false;
  const Index block = Index{1} << levels;
  return n > 0 && n % block == 0;
}

}  // namespace

void WaveletFilterBank::validate() const {
  constexpr double tol = 1e-12;
  constexpr int n = kDb8Taps;
  double sum = 0.0, sq = 0.0;
  for (double h : dec_lowpass) {
    sum += h;
    sq += h * h;
  }
  if (std::abs(sq - 1.0) > tol) throw Error("filter bank: low-pass is not unit-norm");
  if (std::abs(sum - std::sqrt(2.0)) > tol) throw Error("filter bank: low-pass taps do not sum to sqrt(2)");
  for (int k = 0; k < n; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    if (std::abs(dec_highpass[k] - sign * dec_lowpass[n - 1 - k]) > tol)
      throw Error("filter bank: quadrature-mirror relation violated at tap " + std::to_string(k));
    if (rec_lowpass[k] != dec_lowpass[n - 1 - k] || rec_highpass[k] != dec_highpass[n - 1 - k])
      throw Error("filter bank: reconstruction filters are not time-reversed");
  }
  // Double-shift orthogonality of the low-pass filter.
  for (int m = 1; 2 * m < n; ++m) {
    double acc = 0.0;
    for (int k = 0; k + 2 * m < n; ++k) acc += dec_lowpass[k] * dec_lowpass[k + 2 * m];
    if (std::abs(acc) > tol) throw Error("filter bank: low-pass not orthogonal to its even shifts");
  }
}

const WaveletFilterBank& db8() {
  static const WaveletFilterBank bank = [] {
    auto b = make_bank(kDb8DecLow);
    b.validate();
    return b;
  }();
  return bank;
}

double WaveletDecomposition::energy() const {
  double e = approx.squaredNorm();
  for (const auto& d : details) e += d.squaredNorm();
  return e;
}

void analysis_step(const Eigen::Ref<const Vector>& x, const WaveletFilterBank& bank,
                   Vector& approx, Vector& detail) {
  const Index n = x.size();
  if (n < 2 || n % 2 != 0) throw ShapeError("analysis_step: length must be even and >= 2");
  const Index half = n / 2;
  approx.setZero(half);
  detail.setZero(half);
  for (Index i = 0; i < half; ++i) {
    double a = 0.0, d = 0.0;
    for (int k = 0; k < kDb8Taps; ++k) {
      const double v = x[(2 * i + k) % n];
      a += bank.rec_lowpass[k] * v;
      d += bank.rec_highpass[k] * v;
    }
    approx[i] = a;
    detail[i] = d;
  }
}

Vector synthesis_step(const Eigen::Ref<const Vector>& approx, const Eigen::Ref<const Vector>& detail,
                      const WaveletFilterBank& bank) {
  if (approx.size() != detail.size() || approx.size() == 0)
    throw ShapeError("synthesis_step: approximation and detail lengths differ");
  const Index half = approx.size();
  const Index n = 2 * half;
  Vector x = Vector::Zero(n);
  for (Index i = 0; i < half; ++i) {
    for (int k = 0; k < kDb8Taps; ++k) {
      x[(2 * i + k) % n] += bank.rec_lowpass[k] * approx[i] + bank.rec_highpass[k] * detail[i];
    }
  }
  return x;
}

WaveletDecomposition dwt_decompose(const Eigen::Ref<const Vector>& signal, int levels,
                                   const WaveletFilterBank& bank) {
  const Index n = signal.size();
  if (levels < 1) throw ShapeError("dwt_decompose: levels must be >= 1");
  if (n == 0 || (Index{1} << std::min(levels, 62)) > n)
    throw ShapeError("dwt_decompose: " + std::to_string(levels) + " levels exceed log2 of length " +
                     std::to_string(n));
  if (!is_pow2_multiple(n, levels))
    throw ShapeError("dwt_decompose: length " + std::to_string(n) + " is not divisible by 2^" +
                     std::to_string(levels));
  WaveletDecomposition out;
  out.details.resize(static_cast<std::size_t>(levels));
  Vector current = signal;
  for (int l = 0; l < levels; ++l) {
    Vector a, d;
    analysis_step(current, bank, a, d);
    out.details[static_cast<std::size_t>(l)] = std::move(d);
    current = std::move(a);
  }
  out.approx = std::move(current);
  return out;
}

Vector dwt_reconstruct(const WaveletDecomposition& decomp, const WaveletFilterBank& bank) {
  if (decomp.details.empty()) throw ShapeError("dwt_reconstruct: no detail bands");
  Vector current = decomp.approx;
  for (int l = decomp.levels(); l >= 1; --l) {
    const Vector& d = decomp.detail(l);
    if (d.size() != current.size())
      throw ShapeError("dwt_reconstruct: band d" + std::to_string(l) + " has length " +
                       std::to_string(d.size()) + ", expected " + std::to_string(current.size()));
    current = synthesis_step(current, d, bank);
  }
  return current;
}

WaveletDecomposition zero_extreme_bands(WaveletDecomposition decomp) {
  decomp.approx.setZero();
  if (!decomp.details.empty()) decomp.details.front().setZero();
  return decomp;
}

}  // namespace ppg2abp::sigproc
