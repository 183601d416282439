#pragma once

#include "ppg2abp/pipeline/bp_values.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace ppg2abp::evalstats {

using pipeline::BPValues;

// ---------------------------------------------------------------------------
// British Hypertension Society grading

enum class Grade { A, B, C, D };
std::string to_string(Grade g);

struct BHSQuantity {
  double within5 = 0.0;  // percent of |error| <= 5 mmHg
  double within10 = 0.0;
  double within15 = 0.0;
  Grade grade = Grade::D;
};

/// Best grade whose three cumulative thresholds are all met:
/// A 60/85/95, B 50/75/90, C 40/65/85, otherwise D.
Grade grade_from_percentages(double within5, double within10, double within15);
BHSQuantity bhs_grade(const std::vector<double>& abs_errors);

struct BHSResult {
  BHSQuantity dbp, map, sbp;
};

// ---------------------------------------------------------------------------
// AAMI criterion

/// Signed errors (pred - truth) per quantity, equal lengths.
struct ErrorSeries {
  std::vector<double> dbp, map, sbp;
  std::size_t subjects = 0;

  void validate() const;
};

struct AAMIQuantity {
  double mean_error = 0.0;
  double std = 0.0;  // population (n divisor)
  std::size_t subjects = 0;
  bool pass = false;
};

/// pass <=> |ME| <= 5 and STD <= 8 and subjects >= 85.
bool aami_pass(double mean_error, double std, std::size_t subjects);
AAMIQuantity aami_quantity(const std::vector<double>& errors, std::size_t subjects);

struct AAMIResult {
  AAMIQuantity dbp, map, sbp;
};
AAMIResult aami_check(const ErrorSeries& errors);

// ---------------------------------------------------------------------------
// Agreement

struct AgreementResult {
  double mean = 0.0;  // mean of pred - truth
  double std = 0.0;   // population
  double lower = 0.0;
  double upper = 0.0;
};

/// Limits mean -/+ 1.96 std.
AgreementResult agreement_limits(double mean, double std);
AgreementResult bland_altman(const std::vector<double>& pred, const std::vector<double>& truth);

struct PearsonResult {
  double r = 0.0;
  double p_value = 0.0;  // two-sided, t distribution with n - 2 degrees of freedom
  /// "< 1e-6" below that bound, otherwise the value with three significant digits.
  std::string p_text;
};

/// Throws DataError for fewer than 2 samples or constant input.
PearsonResult pearson(const std::vector<double>& pred, const std::vector<double>& truth);

// ---------------------------------------------------------------------------
// Hypertension classification

enum class BPClass { Normotension, Prehypertension, Hypertension };
inline constexpr std::size_t kClassCount = 3;
std::string to_string(BPClass c);

/// DBP <= 80 / 80 < DBP <= 90 / DBP > 90.
BPClass classify_by_dbp(double dbp);
/// SBP <= 120 / 120 < SBP <= 140 / SBP > 140.
BPClass classify_by_sbp(double sbp);

struct HypertensionLabels {
  BPClass by_dbp;
  BPClass by_sbp;
};
HypertensionLabels classify_hypertension(double sbp, double dbp);

struct ClassMetrics {
  double precision = 0.0;  // fractions in [0, 1]
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
  /// Set when the denominator was zero and the value was reported as 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
};

struct ConfusionReport {
  /// matrix[true][predicted].
  std::array<std::array<std::size_t, kClassCount>, kClassCount> matrix{};
  std::array<ClassMetrics, kClassCount> classes{};
  double accuracy = 0.0;
};

struct ClassificationReport {
  ConfusionReport by_dbp;
  ConfusionReport by_sbp;
};

ConfusionReport confusion_report(const std::vector<BPClass>& truth, const std::vector<BPClass>& pred);
ClassificationReport classification_report(const std::vector<BPValues>& truth, const std::vector<BPValues>& pred);

// ---------------------------------------------------------------------------
// Per-episode prediction records and SQI-stratified errors

struct PredictionRecord {
  std::size_t episode = 0;
  std::string subject_id;
  BPValues truth;
  BPValues pred;
  double waveform_mae = 0.0;
  double sqi = 0.0;
};

struct SqiBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  double mae_dbp = 0.0;
  double mae_map = 0.0;
  double mae_sbp = 0.0;
};

/// Episodes bucketed into `bins` equal-width SQI intervals over the observed
/// range (the last interval is closed). Empty buckets are omitted.
std::vector<SqiBin> sqi_error_analysis(const std::vector<PredictionRecord>& records, std::size_t bins = 10);

}  // namespace ppg2abp::evalstats
