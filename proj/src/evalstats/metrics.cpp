#include "ppg2abp/evalstats/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace ppg2abp::evalstats {
namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double population_std(const std::vector<double>& v, double mean) {
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / static_cast<double>(v.size()));
}

void require_finite(const std::vector<double>& v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw DataError(std::string(what) + ": non-finite value");
}

double percent(std::size_t count, std::size_t n) {
  return 100.0 * static_cast<double>(count) / static_cast<double>(n);
}

}  // namespace

std::string to_string(Grade g) {
  switch (g) {
    case Grade::A: return "A";
    case Grade::B: return "B";
    case Grade::C: return "C";
    case Grade::D: return "D";
  }
  return "?";
}

Grade grade_from_percentages(double within5, double within10, double within15) {
  struct Row {
    Grade grade;
    double p5, p10, p15;
  };
  static constexpr Row kTable[] = {{Grade::A, 60, 85, 95}, {Grade::B, 50, 75, 90}, {Grade::C, 40, 65, 85}};
  for (const auto& row : kTable)
    if (within5 >= row.p5 && within10 >= row.p10 && within15 >= row.p15) return row.grade;
  return Grade::D;
}

BHSQuantity bhs_grade(const std::vector<double>& abs_errors) {
  if (abs_errors.empty()) throw DataError("bhs_grade: empty error list");
  require_finite(abs_errors, "bhs_grade");
  std::size_t c5 = 0, c10 = 0, c15 = 0;
  for (double e : abs_errors) {
    const double a = std::abs(e);
    c5 += a <= 5.0;
    c10 += a <= 10.0;
    c15 += a <= 15.0;
  }
  const std::size_t n = abs_errors.size();
  BHSQuantity q{percent(c5, n), percent(c10, n), percent(c15, n), Grade::D};
  q.grade = grade_from_percentages(q.within5, q.within10, q.within15);
  return q;
}

void ErrorSeries::validate() const {
  if (dbp.empty()) throw DataError("ErrorSeries: empty");
  if (map.size() != dbp.size() || sbp.size() != dbp.size())
    throw DataError("ErrorSeries: DBP/MAP/SBP lengths differ");
  require_finite(dbp, "ErrorSeries");
  require_finite(map, "ErrorSeries");
  require_finite(sbp, "ErrorSeries");
}

bool aami_pass(double mean_error, double std, std::size_t subjects) {
  return std::abs(mean_error) <= 5.0 && std <= 8.0 && subjects >= 85;
}

AAMIQuantity aami_quantity(const std::vector<double>& errors, std::size_t subjects) {
  if (errors.empty()) throw DataError("aami_quantity: empty error list");
  require_finite(errors, "aami_quantity");
  AAMIQuantity q;
  q.mean_error = mean_of(errors);
  q.std = population_std(errors, q.mean_error);
  q.subjects = subjects;
  q.pass = aami_pass(q.mean_error, q.std, subjects);
  return q;
}

AAMIResult aami_check(const ErrorSeries& errors) {
  errors.validate();
  return {aami_quantity(errors.dbp, errors.subjects), aami_quantity(errors.map, errors.subjects),
          aami_quantity(errors.sbp, errors.subjects)};
}

AgreementResult agreement_limits(double mean, double std) {
  return {mean, std, mean - 1.96 * std, mean + 1.96 * std};
}

AgreementResult bland_altman(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.empty()) throw DataError("bland_altman: empty input");
  if (pred.size() != truth.size()) throw DataError("bland_altman: length mismatch");
  std::vector<double> diff(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) diff[i] = pred[i] - truth[i];
  require_finite(diff, "bland_altman");
  const double mu = mean_of(diff);
  return agreement_limits(mu, population_std(diff, mu));
}

PearsonResult pearson(const std::vector<double>& pred, const std::vector<double>& truth) {
  if (pred.size() != truth.size()) throw DataError("pearson: length mismatch");
  if (pred.size() < 2) throw DataError("pearson: need at least 2 samples");
  require_finite(pred, "pearson");
  require_finite(truth, "pearson");
  const double mx = mean_of(pred);
  const double my = mean_of(truth);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double dx = pred[i] - mx;
    const double dy = truth[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: constant input");
  PearsonResult res;
  res.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);

  const double dof = static_cast<double>(pred.size()) - 2.0;
  if (dof <= 0.0) {
    // Two points always lie on a line; the test has no degrees of freedom.
    res.p_value = 1.0;
  } else if (std::abs(res.r) >= 1.0) {
    res.p_value = 0.0;
  } else {
    const double t = res.r * std::sqrt(dof / (1.0 - res.r * res.r));
    const boost::math::students_t dist(dof);
    res.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  if (res.p_value < 1e-6) {
    res.p_text = "< 1e-6";
  } else {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", res.p_value);
    res.p_text = buf;
  }
  return res;
}

std::string to_string(BPClass c) {
  switch (c) {
    case BPClass::Normotension: return "Normotension";
    case BPClass::Prehypertension: return "Prehypertension";
    case BPClass::Hypertension: return "Hypertension";
  }
  return "?";
}

BPClass classify_by_dbp(double dbp) {
  if (dbp <= 80.0) return BPClass::Normotension;
  if (dbp <= 90.0) return BPClass::Prehypertension;
  return BPClass::Hypertension;
}

BPClass classify_by_sbp(double sbp) {
  if (sbp <= 120.0) return BPClass::Normotension;
  if (sbp <= 140.0) return BPClass::Prehypertension;
  return BPClass::Hypertension;
}

HypertensionLabels classify_hypertension(double sbp, double dbp) { return {classify_by_dbp(dbp), classify_by_sbp(sbp)}; }

ConfusionReport confusion_report(const std::vector<BPClass>& truth, const std::vector<BPClass>& pred) {
  if (truth.size() != pred.size()) throw DataError("confusion_report: length mismatch");
  ConfusionReport rep;
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++rep.matrix[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];

  std::size_t correct = 0;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    std::size_t row = 0, col = 0;
    for (std::size_t k = 0; k < kClassCount; ++k) {
      row += rep.matrix[c][k];
      col += rep.matrix[k][c];
    }
    const std::size_t tp = rep.matrix[c][c];
    correct += tp;
    auto& m = rep.classes[c];
    m.support = row;
    m.precision_undefined = col == 0;
    m.recall_undefined = row == 0;
    m.precision = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    m.recall = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  }
  rep.accuracy = truth.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(truth.size());
  return rep;
}

ClassificationReport classification_report(const std::vector<BPValues>& truth, const std::vector<BPValues>& pred) {
  if (truth.size() != pred.size()) throw DataError("classification_report: length mismatch");
  std::vector<BPClass> td, pd, ts, ps;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    td.push_back(classify_by_dbp(truth[i].dbp));
    pd.push_back(classify_by_dbp(pred[i].dbp));
    ts.push_back(classify_by_sbp(truth[i].sbp));
    ps.push_back(classify_by_sbp(pred[i].sbp));
  }
  return {confusion_report(td, pd), confusion_report(ts, ps)};
}

std::vector<SqiBin> sqi_error_analysis(const std::vector<PredictionRecord>& records, std::size_t bins) {
  if (bins == 0) throw DataError("sqi_error_analysis: bins must be at least 1");
  if (records.empty()) return {};
  double lo = records.front().sqi, hi = lo;
  for (const auto& r : records) {
    if (!std::isfinite(r.sqi)) throw DataError("sqi_error_analysis: non-finite SQI");
    lo = std::min(lo, r.sqi);
    hi = std::max(hi, r.sqi);
  }
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<SqiBin> acc(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    acc[b].lower = lo + width * static_cast<double>(b);
    acc[b].upper = b + 1 == bins ? hi : lo + width * static_cast<double>(b + 1);
  }
  for (const auto& r : records) {
    std::size_t b = 0;
    if (width > 0.0)
      b = std::min(bins - 1, static_cast<std::size_t>(std::floor((r.sqi - lo) / width)));
    auto& bin = acc[b];
    ++bin.count;
    bin.mae_dbp += std::abs(r.pred.dbp - r.truth.dbp);
    bin.mae_map += std::abs(r.pred.map - r.truth.map);
    bin.mae_sbp += std::abs(r.pred.sbp - r.truth.sbp);
  }
  std::vector<SqiBin> out;
  for (auto& bin : acc) {
    if (bin.count == 0) continue;
    const double n = static_cast<double>(bin.count);
    bin.mae_dbp /= n;
    bin.mae_map /= n;
    bin.mae_sbp /= n;
    out.push_back(bin);
  }
  return out;
}

}  // namespace ppg2abp::evalstats
