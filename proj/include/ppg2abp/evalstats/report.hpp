#pragma once

#include "ppg2abp/evalstats/metrics.hpp"

#include <string>
#include <vector>

namespace ppg2abp::evalstats {

/// Parses the predictions CSV written by the inference step. Malformed rows
/// throw DataError naming the 1-based line.
std::vector<PredictionRecord> parse_predictions_csv(const std::string& text);
std::vector<PredictionRecord> read_predictions_csv(const std::string& path);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // population
  bool operator==(const MeanStd&) const = default;
};

struct QuantityReport {
  MeanStd abs_error;  // MAE +/- STD
  AgreementResult agreement;
  /// Absent when either series is constant.
  std::optional<PearsonResult> correlation;
};

struct EvaluationReport {
  std::size_t episodes = 0;
  std::size_t subjects = 0;
  QuantityReport dbp, map, sbp;
  MeanStd waveform_mae;
  BHSResult bhs;
  AAMIResult aami;
  ClassificationReport classification;
  std::vector<SqiBin> sqi;

  std::string to_json() const;
  static EvaluationReport from_json(const std::string& text);
  std::string to_text() const;
};

/// Throws DataError on an empty record list.
EvaluationReport evaluation_report(const std::vector<PredictionRecord>& records);

/// Writes error_histogram.csv (1 mmHg bins), bland_altman.csv and
/// regression.csv into `directory`.
void write_figure_data(const std::string& directory, const std::vector<PredictionRecord>& records);

}  // namespace ppg2abp::evalstats
