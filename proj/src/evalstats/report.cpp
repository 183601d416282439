#include "ppg2abp/evalstats/report.hpp"

#include "ppg2abp/binary_io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

namespace ppg2abp::evalstats {
namespace {

using nlohmann::json;

constexpr const char* kHeader =
    "episode,subject_id,sbp_true,dbp_true,map_true,sbp_pred,dbp_pred,map_pred,waveform_mae,sqi";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line, const char* column) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
    throw DataError("predictions CSV line " + std::to_string(line) + ": bad " + column + " '" + s + "'");
  return v;
}

std::size_t parse_index(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
    throw DataError("predictions CSV line " + std::to_string(line) + ": bad episode '" + s + "'");
  return v;
}

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  for (double x : v) m.mean += x;
  m.mean /= static_cast<double>(v.size());
  for (double x : v) m.std += (x - m.mean) * (x - m.mean);
  m.std = std::sqrt(m.std / static_cast<double>(v.size()));
  return m;
}

QuantityReport quantity_report(const std::vector<double>& pred, const std::vector<double>& truth) {
  QuantityReport q;
  std::vector<double> abs_err(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) abs_err[i] = std::abs(pred[i] - truth[i]);
  q.abs_error = mean_std(abs_err);
  q.agreement = bland_altman(pred, truth);
  try {
    q.correlation = pearson(pred, truth);
  } catch (const DataError&) {
    // Constant series (or a single episode): correlation is undefined.
  }
  return q;
}

Grade grade_from_string(const std::string& s) {
  for (Grade g : {Grade::A, Grade::B, Grade::C, Grade::D})
    if (to_string(g) == s) return g;
  throw DataError("report JSON: unknown grade '" + s + "'");
}

json to_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }
MeanStd mean_std_from(const json& j) { return {j.at("mean").get<double>(), j.at("std").get<double>()}; }

json to_json(const QuantityReport& q) {
  json j = {{"abs_error", to_json(q.abs_error)},
            {"agreement",
             {{"mean", q.agreement.mean}, {"std", q.agreement.std}, {"lower", q.agreement.lower},
              {"upper", q.agreement.upper}}},
            {"correlation", nullptr}};
  if (q.correlation)
    j["correlation"] = {{"r", q.correlation->r}, {"p_value", q.correlation->p_value}, {"p_text", q.correlation->p_text}};
  return j;
}

QuantityReport quantity_from(const json& j) {
  QuantityReport q;
  q.abs_error = mean_std_from(j.at("abs_error"));
  const auto& a = j.at("agreement");
  q.agreement = {a.at("mean").get<double>(), a.at("std").get<double>(), a.at("lower").get<double>(),
                 a.at("upper").get<double>()};
  const auto& c = j.at("correlation");
  if (!c.is_null())
    q.correlation = PearsonResult{c.at("r").get<double>(), c.at("p_value").get<double>(),
                                  c.at("p_text").get<std::string>()};
  return q;
}

json to_json(const BHSQuantity& b) {
  return {{"within5", b.within5}, {"within10", b.within10}, {"within15", b.within15}, {"grade", to_string(b.grade)}};
}

BHSQuantity bhs_from(const json& j) {
  return {j.at("within5").get<double>(), j.at("within10").get<double>(), j.at("within15").get<double>(),
          grade_from_string(j.at("grade").get<std::string>())};
}

json to_json(const AAMIQuantity& a) {
  return {{"mean_error", a.mean_error}, {"std", a.std}, {"subjects", a.subjects}, {"pass", a.pass}};
}

AAMIQuantity aami_from(const json& j) {
  return {j.at("mean_error").get<double>(), j.at("std").get<double>(), j.at("subjects").get<std::size_t>(),
          j.at("pass").get<bool>()};
}

json to_json(const ConfusionReport& c) {
  json classes = json::array();
  for (std::size_t k = 0; k < kClassCount; ++k) {
    const auto& m = c.classes[k];
    classes.push_back({{"name", to_string(static_cast<BPClass>(k))},
                       {"precision", m.precision},
                       {"recall", m.recall},
                       {"f1", m.f1},
                       {"support", m.support},
                       {"precision_undefined", m.precision_undefined},
                       {"recall_undefined", m.recall_undefined}});
  }
  return {{"matrix", c.matrix}, {"classes", classes}, {"accuracy", c.accuracy}};
}

ConfusionReport confusion_from(const json& j) {
  ConfusionReport c;
  c.matrix = j.at("matrix").get<decltype(c.matrix)>();
  const auto& classes = j.at("classes");
  if (classes.size() != kClassCount) throw DataError("report JSON: expected 3 classes");
  for (std::size_t k = 0; k < kClassCount; ++k) {
    const auto& m = classes[k];
    c.classes[k] = {m.at("precision").get<double>(),         m.at("recall").get<double>(),
                    m.at("f1").get<double>(),                m.at("support").get<std::size_t>(),
                    m.at("precision_undefined").get<bool>(), m.at("recall_undefined").get<bool>()};
  }
  c.accuracy = j.at("accuracy").get<double>();
  return c;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_confusion(std::ostringstream& os, const char* title, const ConfusionReport& c) {
  char buf[160];
  os << title << " (rows true, columns predicted)\n";
  std::snprintf(buf, sizeof buf, "  %-16s %8s %8s %8s   %9s %9s %9s %8s\n", "", "Normo", "Prehyp", "Hyper",
                "precision", "recall", "F1", "support");
  os << buf;
  for (std::size_t k = 0; k < kClassCount; ++k) {
    const auto& m = c.classes[k];
    std::snprintf(buf, sizeof buf, "  %-16s %8zu %8zu %8zu   %8.2f%s %8.2f%s %9.2f %8zu\n",
                  to_string(static_cast<BPClass>(k)).c_str(), c.matrix[k][0], c.matrix[k][1], c.matrix[k][2],
                  100.0 * m.precision, m.precision_undefined ? "*" : " ", 100.0 * m.recall,
                  m.recall_undefined ? "*" : " ", 100.0 * m.f1, m.support);
    os << buf;
  }
  os << "  accuracy " << fixed(100.0 * c.accuracy, 2) << "%\n";
}

void write_csv(const std::filesystem::path& path, const std::string& text) { write_file(path.string(), text); }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<PredictionRecord> parse_predictions_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(is, line)) throw DataError("predictions CSV: empty input");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kHeader) throw DataError("predictions CSV line 1: unexpected header '" + line + "'");

  std::vector<PredictionRecord> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != 10)
      throw DataError("predictions CSV line " + std::to_string(line_no) + ": expected 10 fields, got " +
                      std::to_string(f.size()));
    PredictionRecord r;
    r.episode = parse_index(f[0], line_no);
    r.subject_id = f[1];
    r.truth = {parse_double(f[2], line_no, "sbp_true"), parse_double(f[3], line_no, "dbp_true"),
               parse_double(f[4], line_no, "map_true")};
    r.pred = {parse_double(f[5], line_no, "sbp_pred"), parse_double(f[6], line_no, "dbp_pred"),
              parse_double(f[7], line_no, "map_pred")};
    r.waveform_mae = parse_double(f[8], line_no, "waveform_mae");
    r.sqi = parse_double(f[9], line_no, "sqi");
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PredictionRecord> read_predictions_csv(const std::string& path) {
  return parse_predictions_csv(read_file(path));
}

EvaluationReport evaluation_report(const std::vector<PredictionRecord>& records) {
  if (records.empty()) throw DataError("evaluation_report: no predictions");
  const std::size_t n = records.size();
  std::vector<double> td(n), tm(n), ts(n), pd(n), pm(n), ps(n), wave(n);
  std::vector<BPValues> truth(n), pred(n);
  std::set<std::string> subjects;
  ErrorSeries errors;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = records[i];
    td[i] = r.truth.dbp;
    tm[i] = r.truth.map;
    ts[i] = r.truth.sbp;
    pd[i] = r.pred.dbp;
    pm[i] = r.pred.map;
    ps[i] = r.pred.sbp;
    wave[i] = r.waveform_mae;
    truth[i] = r.truth;
    pred[i] = r.pred;
    subjects.insert(r.subject_id);
    errors.dbp.push_back(pd[i] - td[i]);
    errors.map.push_back(pm[i] - tm[i]);
    errors.sbp.push_back(ps[i] - ts[i]);
  }
  errors.subjects = subjects.size();

  EvaluationReport rep;
  rep.episodes = n;
  rep.subjects = subjects.size();
  rep.dbp = quantity_report(pd, td);
  rep.map = quantity_report(pm, tm);
  rep.sbp = quantity_report(ps, ts);
  rep.waveform_mae = mean_std(wave);
  rep.bhs = {bhs_grade(errors.dbp), bhs_grade(errors.map), bhs_grade(errors.sbp)};
  rep.aami = aami_check(errors);
  rep.classification = classification_report(truth, pred);
  rep.sqi = sqi_error_analysis(records);
  return rep;
}

std::string EvaluationReport::to_json() const {
  json sqi_bins = json::array();
  for (const auto& b : sqi)
    sqi_bins.push_back({{"lower", b.lower},
                        {"upper", b.upper},
                        {"count", b.count},
                        {"mae_dbp", b.mae_dbp},
                        {"mae_map", b.mae_map},
                        {"mae_sbp", b.mae_sbp}});
  const json j = {
      {"episodes", episodes},
      {"subjects", subjects},
      {"dbp", evalstats::to_json(dbp)},
      {"map", evalstats::to_json(map)},
      {"sbp", evalstats::to_json(sbp)},
      {"waveform_mae", evalstats::to_json(waveform_mae)},
      {"bhs", {{"dbp", evalstats::to_json(bhs.dbp)}, {"map", evalstats::to_json(bhs.map)}, {"sbp", evalstats::to_json(bhs.sbp)}}},
      {"aami",
       {{"dbp", evalstats::to_json(aami.dbp)}, {"map", evalstats::to_json(aami.map)}, {"sbp", evalstats::to_json(aami.sbp)}}},
      {"classification",
       {{"by_dbp", evalstats::to_json(classification.by_dbp)}, {"by_sbp", evalstats::to_json(classification.by_sbp)}}},
      {"sqi", sqi_bins}};
  return j.dump(2) + "\n";
}

EvaluationReport EvaluationReport::from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    EvaluationReport r;
    r.episodes = j.at("episodes").get<std::size_t>();
    r.subjects = j.at("subjects").get<std::size_t>();
    r.dbp = quantity_from(j.at("dbp"));
    r.map = quantity_from(j.at("map"));
    r.sbp = quantity_from(j.at("sbp"));
    r.waveform_mae = mean_std_from(j.at("waveform_mae"));
    const auto& b = j.at("bhs");
    r.bhs = {bhs_from(b.at("dbp")), bhs_from(b.at("map")), bhs_from(b.at("sbp"))};
    const auto& a = j.at("aami");
    r.aami = {aami_from(a.at("dbp")), aami_from(a.at("map")), aami_from(a.at("sbp"))};
    const auto& c = j.at("classification");
    r.classification = {confusion_from(c.at("by_dbp")), confusion_from(c.at("by_sbp"))};
    for (const auto& s : j.at("sqi"))
      r.sqi.push_back({s.at("lower").get<double>(), s.at("upper").get<double>(), s.at("count").get<std::size_t>(),
                       s.at("mae_dbp").get<double>(), s.at("mae_map").get<double>(), s.at("mae_sbp").get<double>()});
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("report JSON: ") + e.what());
  }
}

std::string EvaluationReport::to_text() const {
  std::ostringstream os;
  char buf[200];
  os << "Episodes " << episodes << ", subjects " << subjects << "\n\n";
  std::snprintf(buf, sizeof buf, "%-5s %18s %10s %10s %22s %9s %8s\n", "", "MAE +/- STD", "ME", "STD",
                "95% limits", "r", "p");
  os << buf;
  const std::pair<const char*, const QuantityReport*> rows[] = {{"DBP", &dbp}, {"MAP", &map}, {"SBP", &sbp}};
  for (const auto& [name, q] : rows) {
    const std::string mae = fixed(q->abs_error.mean) + " +/- " + fixed(q->abs_error.std);
    const std::string lim = "[" + fixed(q->agreement.lower) + ", " + fixed(q->agreement.upper) + "]";
    const std::string r = q->correlation ? fixed(q->correlation->r, 4) : "n/a";
    const std::string p = q->correlation ? q->correlation->p_text : "n/a";
    std::snprintf(buf, sizeof buf, "%-5s %18s %10s %10s %22s %9s %8s\n", name, mae.c_str(),
                  fixed(q->agreement.mean).c_str(), fixed(q->agreement.std).c_str(), lim.c_str(), r.c_str(), p.c_str());
    os << buf;
  }
  os << "Waveform MAE " << fixed(waveform_mae.mean) << " +/- " << fixed(waveform_mae.std) << " mmHg\n\n";

  os << "BHS cumulative error percentage\n";
  std::snprintf(buf, sizeof buf, "  %-5s %9s %9s %9s %6s\n", "", "<=5", "<=10", "<=15", "grade");
  os << buf;
  const std::pair<const char*, const BHSQuantity*> bhs_rows[] = {{"DBP", &bhs.dbp}, {"MAP", &bhs.map}, {"SBP", &bhs.sbp}};
  for (const auto& [name, b] : bhs_rows) {
    std::snprintf(buf, sizeof buf, "  %-5s %8.3f%% %8.3f%% %8.3f%% %6s\n", name, b->within5, b->within10, b->within15,
                  to_string(b->grade).c_str());
    os << buf;
  }
  os << "\nAAMI (|ME| <= 5, STD <= 8, subjects >= 85)\n";
  const std::pair<const char*, const AAMIQuantity*> aami_rows[] = {{"DBP", &aami.dbp}, {"MAP", &aami.map}, {"SBP", &aami.sbp}};
  for (const auto& [name, a] : aami_rows) {
    std::snprintf(buf, sizeof buf, "  %-5s ME %8.3f  STD %8.3f  subjects %6zu  %s\n", name, a->mean_error, a->std,
                  a->subjects, a->pass ? "pass" : "fail");
    os << buf;
  }
  os << '\n';
  write_confusion(os, "Hypertension classification by DBP", classification.by_dbp);
  write_confusion(os, "Hypertension classification by SBP", classification.by_sbp);
  os << "  * denominator was zero, reported as 0\n\n";

  os << "MAE by SQI (skewness) bin\n";
  std::snprintf(buf, sizeof buf, "  %10s %10s %7s %9s %9s %9s\n", "lower", "upper", "count", "DBP", "MAP", "SBP");
  os << buf;
  for (const auto& b : sqi) {
    std::snprintf(buf, sizeof buf, "  %10.4f %10.4f %7zu %9.3f %9.3f %9.3f\n", b.lower, b.upper, b.count, b.mae_dbp,
                  b.mae_map, b.mae_sbp);
    os << buf;
  }
  return os.str();
}

void write_figure_data(const std::string& directory, const std::vector<PredictionRecord>& records) {
  namespace fs = std::filesystem;
  const fs::path dir(directory);
  fs::create_directories(dir);

  // Signed error counts in [k, k + 1) mmHg bins.
  std::map<long, std::array<std::size_t, 3>> hist;
  for (const auto& r : records) {
    const double e[3] = {r.pred.dbp - r.truth.dbp, r.pred.map - r.truth.map, r.pred.sbp - r.truth.sbp};
    for (int q = 0; q < 3; ++q) ++hist[static_cast<long>(std::floor(e[q]))][q];
  }
  std::ostringstream h;
  h << "bin_lower,bin_upper,dbp,map,sbp\n";
  if (!hist.empty())
    for (long k = hist.begin()->first; k <= hist.rbegin()->first; ++k) {
      const auto it = hist.find(k);
      const std::array<std::size_t, 3> c = it == hist.end() ? std::array<std::size_t, 3>{} : it->second;
      h << k << ',' << k + 1 << ',' << c[0] << ',' << c[1] << ',' << c[2] << '\n';
    }
  write_csv(dir / "error_histogram.csv", h.str());

  std::ostringstream ba, rg;
  ba << "episode,dbp_mean,dbp_diff,map_mean,map_diff,sbp_mean,sbp_diff\n";
  rg << "episode,dbp_true,dbp_pred,map_true,map_pred,sbp_true,sbp_pred\n";
  for (const auto& r : records) {
    ba << r.episode << ',' << num(0.5 * (r.pred.dbp + r.truth.dbp)) << ',' << num(r.pred.dbp - r.truth.dbp) << ','
       << num(0.5 * (r.pred.map + r.truth.map)) << ',' << num(r.pred.map - r.truth.map) << ','
       << num(0.5 * (r.pred.sbp + r.truth.sbp)) << ',' << num(r.pred.sbp - r.truth.sbp) << '\n';
    rg << r.episode << ',' << num(r.truth.dbp) << ',' << num(r.pred.dbp) << ',' << num(r.truth.map) << ','
       << num(r.pred.map) << ',' << num(r.truth.sbp) << ',' << num(r.pred.sbp) << '\n';
  }
  write_csv(dir / "bland_altman.csv", ba.str());
  write_csv(dir / "regression.csv", rg.str());
}

}  // namespace ppg2abp::evalstats
