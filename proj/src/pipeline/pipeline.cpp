#include "ppg2abp/pipeline/pipeline.hpp"

#include "ppg2abp/binary_io.hpp"
#include "ppg2abp/sigproc/denoise.hpp"
#include "ppg2abp/tensorops/checkpoint.hpp"

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <mutex>
#include <sstream>
#include <thread>

namespace ppg2abp::pipeline {

using tensorops::Mode;
namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    if constexpr (std::is_floating_point_v<T>)
      os << fmt(v[i]);
    else
      os << v[i];
  }
  return os.str();
}

using Manifest = std::map<std::string, std::string>;

Manifest parse_manifest(const std::string& text, const std::string& path) {
  Manifest m;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos)
      throw DataError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    m[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return m;
}

const std::string& need(const Manifest& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw DataError("bundle manifest: missing key '" + key + "'");
  return it->second;
}

double num(const Manifest& m, const std::string& key) {
  const auto& v = need(m, key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  throw DataError("bundle manifest: '" + key + "' is not a number");
}

template <typename T>
std::vector<T> list(const Manifest& m, const std::string& key) {
  std::vector<T> out;
  std::istringstream in(need(m, key));
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      if constexpr (std::is_floating_point_v<T>)
        out.push_back(static_cast<T>(std::stod(part)));
      else
        out.push_back(static_cast<T>(std::stoll(part)));
    } catch (const std::exception&) {
      throw DataError("bundle manifest: '" + key + "' has a malformed entry '" + part + "'");
    }
  }
  return out;
}

}  // namespace

Vector preprocess_ppg(const Eigen::Ref<const Vector>& ppg, const PreprocessSettings& settings) {
  if (!ppg.allFinite()) throw DataError("preprocess: non-finite PPG samples");
  Vector out = ppg;
  if (settings.denoise) out = sigproc::denoise(out);
  if (settings.mean_normalize) out = sigproc::mean_normalize(out);
  return out;
}

datapipe::EpisodeStore preprocess_store(const datapipe::EpisodeStore& store, const PreprocessSettings& settings,
                                        std::size_t threads) {
  datapipe::EpisodeStore out = store;
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < out.size(); i = next++) {
      try {
        out.records[i].ppg = preprocess_ppg(store.records[i].ppg, settings);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, store.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  return out;
}

void PipelineBundle::validate() const {
  if (!approx || !refine) throw DataError("bundle: missing network");
  if (approx->input_length() != refine->input_length())
    throw DataError("bundle: approximation input length " + std::to_string(approx->input_length()) +
                    " differs from refinement input length " + std::to_string(refine->input_length()));
}

void save_bundle(const PipelineBundle& bundle, const std::string& path) {
  bundle.validate();
  const auto& a = bundle.approx_config;
  const auto& r = bundle.refine_config;
  const std::string name = std::filesystem::path(path).filename().string();
  std::ostringstream os;
  os << "format = p2abp-bundle\n";
  os << "version = " << PipelineBundle::kVersion << '\n';
  os << "approx.checkpoint = " << name << ".approx.ckpt\n";
  os << "approx.depth = " << a.depth << '\n';
  os << "approx.filters = " << join(a.filters) << '\n';
  os << "approx.width_multiplier = " << fmt(a.width_multiplier) << '\n';
  os << "approx.kernel_size = " << a.kernel_size << '\n';
  os << "approx.input_length = " << a.input_length << '\n';
  os << "approx.deep_supervision_weights = " << join(a.deep_supervision_weights) << '\n';
  os << "approx.output_offset = " << fmt(a.output_offset) << '\n';
  os << "approx.output_scale = " << fmt(a.output_scale) << '\n';
  os << "approx.seed = " << a.seed << '\n';
  os << "refine.checkpoint = " << name << ".refine.ckpt\n";
  os << "refine.depth = " << r.depth << '\n';
  os << "refine.alpha = " << fmt(r.alpha) << '\n';
  os << "refine.base_widths = " << join(r.base_widths) << '\n';
  os << "refine.res_path_lengths = " << join(r.res_path_lengths) << '\n';
  os << "refine.width_multiplier = " << fmt(r.width_multiplier) << '\n';
  os << "refine.input_length = " << r.input_length << '\n';
  os << "refine.output_offset = " << fmt(r.output_offset) << '\n';
  os << "refine.output_scale = " << fmt(r.output_scale) << '\n';
  os << "refine.residual_output = " << (r.residual_output ? 1 : 0) << '\n';
  os << "refine.seed = " << r.seed << '\n';
  os << "preprocess.denoise = " << (bundle.preprocess.denoise ? 1 : 0) << '\n';
  os << "preprocess.mean_normalize = " << (bundle.preprocess.mean_normalize ? 1 : 0) << '\n';
  write_file(path, os.str());
  tensorops::save_checkpoint(path + ".approx.ckpt", bundle.approx->parameters());
  tensorops::save_checkpoint(path + ".refine.ckpt", bundle.refine->parameters());
}

PipelineBundle load_bundle(const std::string& path) {
  const Manifest m = parse_manifest(read_file(path), path);
  if (need(m, "format") != "p2abp-bundle") throw DataError(path + ": not a pipeline bundle manifest");
  if (need(m, "version") != std::to_string(PipelineBundle::kVersion))
    throw DataError(path + ": unsupported bundle version " + need(m, "version"));

  PipelineBundle b;
  auto& a = b.approx_config;
  a.depth = static_cast<int>(num(m, "approx.depth"));
  a.filters = list<Index>(m, "approx.filters");
  a.width_multiplier = num(m, "approx.width_multiplier");
  a.kernel_size = static_cast<Index>(num(m, "approx.kernel_size"));
  a.input_length = static_cast<Index>(num(m, "approx.input_length"));
  a.deep_supervision_weights = list<double>(m, "approx.deep_supervision_weights");
  a.output_offset = num(m, "approx.output_offset");
  a.output_scale = num(m, "approx.output_scale");
  a.seed = static_cast<std::uint64_t>(num(m, "approx.seed"));
  auto& r = b.refine_config;
  r.depth = static_cast<int>(num(m, "refine.depth"));
  r.alpha = num(m, "refine.alpha");
  r.base_widths = list<Index>(m, "refine.base_widths");
  r.res_path_lengths = list<int>(m, "refine.res_path_lengths");
  r.width_multiplier = num(m, "refine.width_multiplier");
  r.input_length = static_cast<Index>(num(m, "refine.input_length"));
  r.output_offset = num(m, "refine.output_offset");
  r.output_scale = num(m, "refine.output_scale");
  r.residual_output = num(m, "refine.residual_output") != 0.0;
  r.seed = static_cast<std::uint64_t>(num(m, "refine.seed"));
  b.preprocess.denoise = num(m, "preprocess.denoise") != 0.0;
  b.preprocess.mean_normalize = num(m, "preprocess.mean_normalize") != 0.0;

  try {
    b.approx = std::make_unique<models::UNet1D>(a);
    b.refine = std::make_unique<models::MultiResUNet1D>(r);
  } catch (const ShapeError& e) {
    throw DataError(path + ": invalid architecture: " + e.what());
  }
  const auto dir = std::filesystem::path(path).parent_path();
  tensorops::load_checkpoint((dir / need(m, "approx.checkpoint")).string(), b.approx->parameters());
  tensorops::load_checkpoint((dir / need(m, "refine.checkpoint")).string(), b.refine->parameters());
  b.validate();
  return b;
}

Vector ppg2abp(models::Network& approx, models::Network& refine, const Eigen::Ref<const Vector>& ppg,
               const PreprocessSettings& settings, bool preprocess) {
  if (ppg.size() != approx.input_length())
    throw DataError("ppg2abp: expected " + std::to_string(approx.input_length()) + " PPG samples, got " +
                    std::to_string(ppg.size()));
  if (!ppg.allFinite()) throw DataError("ppg2abp: non-finite PPG samples");
  const Vector x = preprocess ? preprocess_ppg(ppg, settings) : Vector(ppg);
  const Tensor approx_out = approx.forward(Tensor(x.transpose()), Mode::Infer).final;
  const Tensor abp = refine.forward(approx_out, Mode::Infer).final;
  Vector out = abp.row(0).transpose();
  if (!out.allFinite()) throw NumericalError("ppg2abp: non-finite prediction");
  return out;
}

Vector ppg2abp(PipelineBundle& bundle, const Eigen::Ref<const Vector>& ppg, bool preprocess) {
  bundle.validate();
  return ppg2abp(*bundle.approx, *bundle.refine, ppg, bundle.preprocess, preprocess);
}

double waveform_mae(const Eigen::Ref<const Vector>& pred, const Eigen::Ref<const Vector>& truth) {
  if (pred.size() != truth.size())
    throw DataError("waveform_mae: lengths " + std::to_string(pred.size()) + " and " + std::to_string(truth.size()));
  if (pred.size() == 0) throw DataError("waveform_mae: empty signals");
  return (pred - truth).cwiseAbs().mean();
}

BatchPrediction batch_predict(const PipelineBundle& bundle, const datapipe::EpisodeStore& store, bool preprocess,
                              std::size_t threads) {
  bundle.validate();
  const std::size_t n = store.size();
  std::vector<std::optional<PredictionRow>> rows(n);
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    auto approx = bundle.approx->clone();
    auto refine = bundle.refine->clone();
    for (std::size_t i = next++; i < n; i = next++) {
      const auto& rec = store.records[i];
      try {
        PredictionRow row;
        row.index = i;
        row.subject_id = rec.subject_id;
        row.abp_pred = ppg2abp(*approx, *refine, rec.ppg, bundle.preprocess, preprocess);
        row.truth = extract_bp(rec.abp);
        row.pred = extract_bp(row.abp_pred);
        row.waveform_mae = waveform_mae(row.abp_pred, rec.abp);
        row.sqi = sigproc::skewness_sqi(rec.ppg);
        rows[i] = std::move(row);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };
  threads = std::max<std::size_t>(1, std::min(threads, n));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
  if (n > 0) worker();
  for (auto& t : pool) t.join();

  BatchPrediction out;
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i])
      out.rows.push_back(std::move(*rows[i]));
    else
      out.failures.push_back({i, errors[i]});
  }
  return out;
}

std::string predictions_csv(const std::vector<PredictionRow>& rows) {
  std::ostringstream os;
  os << "episode,subject_id,sbp_true,dbp_true,map_true,sbp_pred,dbp_pred,map_pred,waveform_mae,sqi\n";
  for (const auto& r : rows) {
    if (r.subject_id.find_first_of(",\r\n") != std::string::npos)
      throw DataError("predictions CSV: subject id '" + r.subject_id + "' contains a separator");
    os << r.index << ',' << r.subject_id << ',' << fmt(r.truth.sbp) << ',' << fmt(r.truth.dbp) << ','
       << fmt(r.truth.map) << ',' << fmt(r.pred.sbp) << ',' << fmt(r.pred.dbp) << ',' << fmt(r.pred.map) << ','
       << fmt(r.waveform_mae) << ',' << fmt(r.sqi) << '\n';
  }
  return os.str();
}

void write_predictions_csv(const std::string& path, const std::vector<PredictionRow>& rows) {
  write_file(path, predictions_csv(rows));
}

void write_waveforms_csv(const std::string& path, const std::vector<PredictionRow>& rows,
                         const datapipe::EpisodeStore& store) {
  std::ostringstream os;
  for (std::size_t j = 0; j < rows.size(); ++j)
    os << (j ? "," : "") << "ep" << rows[j].index << "_true,ep" << rows[j].index << "_pred";
  os << '\n';
  const Index len = rows.empty() ? 0 : rows.front().abp_pred.size();
  for (Index s = 0; s < len; ++s) {
    for (std::size_t j = 0; j < rows.size(); ++j)
      os << (j ? "," : "") << fmt(store.records.at(rows[j].index).abp[s]) << ',' << fmt(rows[j].abp_pred[s]);
    os << '\n';
  }
  write_file(path, os.str());
}

}  // namespace ppg2abp::pipeline
