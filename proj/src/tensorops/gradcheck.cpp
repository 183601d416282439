#include "ppg2abp/tensorops/gradcheck.hpp"

#include "ppg2abp/random.hpp"
#include "ppg2abp/tensorops/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace ppg2abp::tensorops {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

double GradCheckReport::worst() const {
  double w = 0.0;
  for (const auto& e : entries) w = std::max(w, e.max_rel_error);
  return w;
}

bool GradCheckReport::passes(double tolerance) const {
  for (const auto& e : entries)
    if (e.checked == 0) return false;
  return worst() < tolerance;
}

std::string GradCheckReport::to_text() const {
  std::ostringstream os;
  os << std::left << std::setw(40) << "block" << std::right << std::setw(10) << "checked" << std::setw(10) << "reduced" << std::setw(10) << "skipped"
     << std::setw(16) << "max_rel_err" << '\n';
  for (const auto& e : entries)
    os << std::left << std::setw(40) << e.block << std::right << std::setw(10) << e.checked << std::setw(10) << e.reduced << std::setw(10) << e.skipped
       << std::setw(16)
       << std::scientific << std::setprecision(3) << e.max_rel_error << std::defaultfloat << '\n';
  return os.str();
}

GradCheckReport gradcheck(const std::function<double()>& loss, const std::function<void()>& backward,
                          const ParamList& blocks, const GradCheckOptions& options) {
  auto probed = [&loss](std::uint64_t& pattern) {
    BranchProbe probe;
    const double v = loss();
    pattern = probe.value();
    return v;
  };

  GradCheckReport report;
  for (Param* p : blocks) p->grad.setZero();
  std::uint64_t base_pattern = 0;
  probed(base_pattern);
  backward();
  std::vector<Eigen::ArrayXd> analytic;
  analytic.reserve(blocks.size());
  for (Param* p : blocks) analytic.push_back(p->grad);

  Rng rng(options.seed);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    Param* p = blocks[b];
    if (!p->trainable || p->size() == 0) continue;
    const auto n = static_cast<std::size_t>(p->size());
    std::size_t wanted = n;
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    if (options.max_entries_per_block > 0 && static_cast<std::size_t>(options.max_entries_per_block) < n) {
      order = rng.permutation(n);
      wanted = static_cast<std::size_t>(options.max_entries_per_block);
    }
    GradCheckEntry entry{p->name, 0.0, 0, 0, 0};
    for (std::size_t i : order) {
      if (static_cast<std::size_t>(entry.checked) == wanted) break;
      const auto idx = static_cast<Index>(i);
      const double original = p->value[idx];
      bool stable = false;
      double numeric = 0.0;
      for (double h = options.step; h >= options.min_step * (1.0 - 1e-12); h /= 10.0) {
        // Richardson extrapolation of the central differences at h and h/2.
        const double steps[2] = {h, h / 2.0};
        double central[2];
        bool same_branches = true;
        for (int j = 0; j < 2 && same_branches; ++j) {
          std::uint64_t up_pattern = 0, down_pattern = 0;
          p->value[idx] = original + steps[j];
          const double up = probed(up_pattern);
          p->value[idx] = original - steps[j];
          const double down = probed(down_pattern);
          p->value[idx] = original;
          same_branches = up_pattern == base_pattern && down_pattern == base_pattern;
          central[j] = (up - down) / (2.0 * steps[j]);
        }
        if (same_branches) {
          stable = true;
          numeric = (4.0 * central[1] - central[0]) / 3.0;
          if (h < options.step) ++entry.reduced;
          break;
        }
      }
      if (!stable) {
        ++entry.skipped;
        continue;
      }
      entry.max_rel_error = std::max(entry.max_rel_error, relative_error(analytic[b][idx], numeric));
      ++entry.checked;
    }
    report.entries.push_back(std::move(entry));
  }
  return report;
}

}  // namespace ppg2abp::tensorops
