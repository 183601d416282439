#include "ppg2abp/cli/cli.hpp"

#include "ppg2abp/binary_io.hpp"
#include "ppg2abp/datapipe/store_io.hpp"
#include "ppg2abp/datapipe/synth.hpp"
#include "ppg2abp/evalstats/report.hpp"
#include "ppg2abp/models/network_check.hpp"
#include "ppg2abp/pipeline/pipeline.hpp"
#include "ppg2abp/trainer/trainer.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <functional>
#include <iostream>
#include <optional>

namespace ppg2abp::cli {
namespace {

constexpr const char* kStoreFormat =
    "Episode store (.p2a): binary, little-endian. Magic \"P2ABPDATA\", u32 version 1, u64 record count,\n"
    "f64 sampling rate, then per record: u32 subject-id length, id bytes, 1024 f64 PPG, 1024 f64 ABP.";
constexpr const char* kPredictionsFormat =
    "Predictions CSV header: episode,subject_id,sbp_true,dbp_true,map_true,sbp_pred,dbp_pred,map_pred,"
    "waveform_mae,sqi (mmHg; sqi is the skewness of the stored PPG).";
constexpr const char* kBundleFormat =
    "Bundle: a key = value manifest at the given path plus <path>.approx.ckpt and <path>.refine.ckpt\n"
    "(binary checkpoints, magic \"P2ABPCKPT\").";
constexpr const char* kConfigFormat =
    "Training config (--config): key = value lines, '#' comments. Keys: epochs, batch_size, approx_loss,\n"
    "refine_loss (mae|mse), learning_rate, beta1, beta2, epsilon, seed, deep_supervision_weights,\n"
    "recalibrate_batchnorm. Command-line flags override the file.";

// Shared training flags; unset optionals leave the config file (or defaults) alone.
struct TrainFlags {
  std::string config_path;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> learning_rate;
  double width = 1.0;

  void add(CLI::App* sub) {
    sub->add_option("--config", config_path, "Training config file (key = value)")->check(CLI::ExistingFile);
    sub->add_option("--epochs", epochs, "Epochs per network");
    sub->add_option("--batch-size", batch_size, "Mini-batch size");
    sub->add_option("--lr", learning_rate, "Adam learning rate");
    sub->add_option("--width", width, "Filter width multiplier (1 = full size, 0.0625 for desk runs)")
        ->check(CLI::PositiveNumber);
  }

  trainer::TrainConfig config(std::uint64_t seed, bool seed_given) const {
    trainer::TrainConfig c = config_path.empty() ? trainer::TrainConfig{} : trainer::TrainConfig::from_file(config_path);
    if (seed_given || config_path.empty()) c.seed = seed;
    if (epochs) c.epochs = *epochs;
    if (batch_size) c.batch_size = *batch_size;
    if (learning_rate) c.adam.learning_rate = *learning_rate;
    c.validate();
    return c;
  }

  std::pair<models::UNet1DConfig, models::MultiResUNet1DConfig> networks(const trainer::TrainConfig& c) const {
    models::UNet1DConfig a;
    a.width_multiplier = width;
    a.deep_supervision_weights = c.deep_supervision_weights;
    a.seed = c.seed;
    models::MultiResUNet1DConfig r;
    r.width_multiplier = width;
    r.seed = c.seed + 1;
    return {a, r};
  }
};

std::string history_path(const std::string& base, const std::string& what) { return base + "." + what + ".csv"; }

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"PPG to arterial blood pressure waveform estimation", "ppg2abp"};
  app.require_subcommand(1);
  app.footer(std::string(kStoreFormat) + "\n" + kPredictionsFormat + "\n" + kBundleFormat);

  std::uint64_t seed = kDefaultSeed;
  std::size_t threads = 1;
  std::function<int()> action;

  auto add_seed = [&](CLI::App* sub) { return sub->add_option("--seed", seed, "Random seed (default 2020)"); };
  auto add_threads = [&](CLI::App* sub) {
    sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  // synth
  std::size_t synth_n = 0;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate synthetic paired PPG/ABP episodes");
  synth->add_option("--n", synth_n, "Number of episodes")->required()->check(CLI::PositiveNumber);
  synth->add_option("--out", synth_out, "Output episode store")->required();
  add_seed(synth);
  synth->footer(kStoreFormat);
  synth->callback([&] {
    action = [&] {
      const auto store = datapipe::synth_generate(synth_n, seed);
      datapipe::write_store(synth_out, store);
      out << "wrote " << store.size() << " episodes to " << synth_out << '\n';
      return int{kExitOk};
    };
  });

  // preprocess
  std::string pre_in, pre_csv, pre_out;
  bool no_denoise = false, no_normalize = false;
  auto* pre = app.add_subcommand("preprocess", "Denoise and mean-normalize the PPG of every episode");
  auto* pre_in_opt = pre->add_option("--in", pre_in, "Input episode store");
  auto* pre_csv_opt =
      pre->add_option("--from-csv", pre_csv, "Import a CSV with header ppg,abp,subject_id (one row per sample)");
  pre_in_opt->excludes(pre_csv_opt);
  pre->add_option("--out", pre_out, "Output episode store")->required();
  pre->add_flag("--no-denoise", no_denoise, "Skip wavelet denoising");
  pre->add_flag("--no-normalize", no_normalize, "Skip mean removal");
  add_threads(pre);
  pre->footer(kStoreFormat);
  pre->callback([&] {
    action = [&] {
      if (pre_in.empty() && pre_csv.empty()) throw CLI::RequiredError("--in or --from-csv");
      datapipe::EpisodeStore store;
      if (!pre_csv.empty()) {
        auto imported = datapipe::import_csv(pre_csv);
        err << "imported " << imported.store.size() << " episodes; discarded " << imported.discarded_samples
            << " trailing samples; dropped " << imported.dropped_windows << " windows\n";
        store = std::move(imported.store);
      } else {
        store = datapipe::read_store(pre_in);
      }
      const pipeline::PreprocessSettings settings{!no_denoise, !no_normalize};
      const auto done = pipeline::preprocess_store(store, settings, threads);
      datapipe::write_store(pre_out, done);
      out << "wrote " << done.size() << " episodes to " << pre_out << '\n';
      return int{kExitOk};
    };
  });

  // split
  std::string split_in, split_train, split_test;
  std::optional<std::size_t> train_count;
  std::optional<double> train_fraction;
  bool by_subject = false, subsample = false;
  double sub_fraction = 0.25;
  std::size_t sub_cap = 2500;
  auto* split = app.add_subcommand("split", "Optionally bin-subsample, then split into train and test stores");
  split->add_option("--in", split_in, "Input episode store")->required();
  split->add_option("--train-out", split_train, "Train store")->required();
  split->add_option("--test-out", split_test, "Test store")->required();
  auto* count_opt = split->add_option("--train-count", train_count, "Episodes in the train split");
  auto* frac_opt = split->add_option("--train-fraction", train_fraction, "Train fraction (rounded)")
                       ->check(CLI::Range(0.0, 1.0));
  count_opt->excludes(frac_opt);
  split->add_flag("--by-subject", by_subject, "Keep each subject's episodes on one side");
  split->add_flag("--subsample", subsample, "Subsample each 10 mmHg (SBP, DBP) bin first");
  split->add_option("--fraction", sub_fraction, "Subsampling fraction per bin")->check(CLI::Range(0.0, 1.0));
  split->add_option("--cap", sub_cap, "Subsampling cap per bin");
  add_seed(split);
  split->callback([&] {
    action = [&] {
      if (!train_count && !train_fraction) throw CLI::RequiredError("--train-count or --train-fraction");
      auto store = datapipe::read_store(split_in);
      if (subsample) {
        const std::size_t before = store.size();
        store = datapipe::bin_and_subsample(store, sub_fraction, sub_cap, seed);
        err << "subsampled " << before << " -> " << store.size() << " episodes\n";
      }
      const std::size_t n_train =
          train_count ? *train_count
                      : static_cast<std::size_t>(std::llround(*train_fraction * static_cast<double>(store.size())));
      auto [train, test] = by_subject ? datapipe::split_by_subject(store, n_train, seed)
                                      : datapipe::split_train_test(store, n_train, seed);
      datapipe::write_store(split_train, train);
      datapipe::write_store(split_test, test);
      out << "train " << train.size() << ", test " << test.size() << '\n';
      return int{kExitOk};
    };
  });

  // train
  TrainFlags train_flags;
  std::string train_in, val_in, train_out;
  auto* train = app.add_subcommand("train", "Train the approximation and refinement networks");
  train->add_option("--train", train_in, "Preprocessed training store")->required();
  train->add_option("--val", val_in, "Preprocessed validation store (best epoch is kept)");
  train->add_option("--out", train_out, "Output bundle manifest")->required();
  train_flags.add(train);
  auto* train_seed = add_seed(train);
  train->footer(std::string(kConfigFormat) + "\n" + kBundleFormat +
                "\nHistories: <out>.approx_history.csv and <out>.refine_history.csv "
                "(epoch,train_loss,val_loss,train_mae).");
  train->callback([&] {
    action = [&] {
      const auto config = train_flags.config(seed, train_seed->count() > 0);
      const auto store = datapipe::read_store(train_in);
      std::optional<datapipe::EpisodeStore> val;
      if (!val_in.empty()) val = datapipe::read_store(val_in);
      auto [ac, rc] = train_flags.networks(config);
      trainer::apply_target_scaling(trainer::target_scaling(store), ac, rc);

      pipeline::PipelineBundle bundle;
      bundle.approx_config = ac;
      bundle.refine_config = rc;
      bundle.approx = std::make_unique<models::UNet1D>(ac);
      bundle.refine = std::make_unique<models::MultiResUNet1D>(rc);
      const auto* v = val ? &*val : nullptr;
      const auto ha = trainer::train_approximation(*bundle.approx, store, v, config);
      const auto hr = trainer::train_refinement(*bundle.refine, *bundle.approx, store, v, config);
      pipeline::save_bundle(bundle, train_out);
      write_file(history_path(train_out, "approx_history"), ha.to_csv());
      write_file(history_path(train_out, "refine_history"), hr.to_csv());
      out << "approximation: final train MAE " << ha.epochs.back().train_mae << " mmHg\n"
          << "refinement: final train loss " << hr.epochs.back().train_loss << '\n'
          << "wrote " << train_out << '\n';
      return int{kExitOk};
    };
  });

  // cv
  TrainFlags cv_flags;
  std::string cv_in, cv_out;
  std::size_t cv_k = 10;
  auto* cv = app.add_subcommand("cv", "k-fold cross-validation; keeps the fold with the lowest validation loss");
  cv->add_option("--in", cv_in, "Preprocessed training store")->required();
  cv->add_option("--out", cv_out, "Output bundle manifest for the selected fold")->required();
  cv->add_option("--k", cv_k, "Number of folds")->check(CLI::Range(2, 1000));
  cv_flags.add(cv);
  auto* cv_seed = add_seed(cv);
  add_threads(cv);
  cv->footer(std::string(kConfigFormat) + "\n" + kBundleFormat +
             "\nHistories: <out>.fold<i>.approx_history.csv and <out>.fold<i>.refine_history.csv.");
  cv->callback([&] {
    action = [&] {
      const auto config = cv_flags.config(seed, cv_seed->count() > 0);
      const auto store = datapipe::read_store(cv_in);
      const auto [ac, rc] = cv_flags.networks(config);
      auto result = trainer::cross_validate(store, config, ac, rc, cv_k, threads);
      for (std::size_t i = 0; i < result.folds.size(); ++i) {
        const std::string fold = "fold" + std::to_string(i);
        write_file(history_path(cv_out, fold + ".approx_history"), result.folds[i].approx_history.to_csv());
        write_file(history_path(cv_out, fold + ".refine_history"), result.folds[i].refine_history.to_csv());
        out << "fold " << i << " validation loss " << result.folds[i].val_loss
            << (i == result.selected ? "  (selected)" : "") << '\n';
      }
      pipeline::PipelineBundle bundle;
      bundle.approx_config = result.approx->config();
      bundle.refine_config = result.refine->config();
      bundle.approx = std::move(result.approx);
      bundle.refine = std::move(result.refine);
      pipeline::save_bundle(bundle, cv_out);
      out << "wrote " << cv_out << '\n';
      return int{kExitOk};
    };
  });

  // infer
  std::string infer_bundle, infer_in, infer_out, infer_waves;
  bool preprocessed = false;
  auto* infer = app.add_subcommand("infer", "Predict ABP waveforms and BP values for every episode");
  infer->add_option("--bundle", infer_bundle, "Bundle manifest")->required()->check(CLI::ExistingFile);
  infer->add_option("--in", infer_in, "Episode store")->required();
  infer->add_option("--out", infer_out, "Predictions CSV")->required();
  infer->add_option("--waveforms", infer_waves, "Also write paired true/predicted waveforms as CSV");
  infer->add_flag("--preprocessed", preprocessed, "Input PPG is already preprocessed");
  add_threads(infer);
  infer->footer(std::string(kStoreFormat) + "\n" + kBundleFormat + "\n" + kPredictionsFormat + "\nWaveform CSV: one row per sample, columns ep<i>_true,ep<i>_pred.");
  infer->callback([&] {
    action = [&] {
      const auto bundle = pipeline::load_bundle(infer_bundle);
      const auto store = datapipe::read_store(infer_in);
      const auto result = pipeline::batch_predict(bundle, store, !preprocessed, threads);
      for (const auto& f : result.failures) err << "episode " << f.index << " failed: " << f.message << '\n';
      if (result.rows.empty()) throw DataError("infer: no episode could be processed");
      pipeline::write_predictions_csv(infer_out, result.rows);
      if (!infer_waves.empty()) pipeline::write_waveforms_csv(infer_waves, result.rows, store);
      out << "predicted " << result.rows.size() << " episodes (" << result.failures.size() << " failed)\n";
      return int{kExitOk};
    };
  });

  // evaluate
  std::string eval_pred, eval_out, eval_text, eval_figs;
  auto* evaluate = app.add_subcommand("evaluate", "BHS, AAMI, agreement, correlation, classification and SQI report");
  evaluate->add_option("--pred", eval_pred, "Predictions CSV")->required();
  evaluate->add_option("--out", eval_out, "Report JSON");
  evaluate->add_option("--text", eval_text, "Plain-text report file (it is always printed)");
  evaluate->add_option("--figures", eval_figs,
                       "Directory for error_histogram.csv, bland_altman.csv and regression.csv");
  evaluate->footer(kPredictionsFormat);
  evaluate->callback([&] {
    action = [&] {
      const auto records = evalstats::read_predictions_csv(eval_pred);
      const auto report = evalstats::evaluation_report(records);
      if (!eval_out.empty()) write_file(eval_out, report.to_json());
      if (!eval_text.empty()) write_file(eval_text, report.to_text());
      if (!eval_figs.empty()) evalstats::write_figure_data(eval_figs, records);
      out << report.to_text();
      return int{kExitOk};
    };
  });

  // gradcheck
  double gc_width = 0.0625, gc_tolerance = 1e-3, gc_step = 1e-3;
  Index gc_length = 64;
  std::size_t gc_batch = 2;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check of both networks");
  gradcheck->add_option("--width", gc_width, "Filter width multiplier")->check(CLI::PositiveNumber);
  gradcheck->add_option("--length", gc_length, "Input length (multiple of 16)")->check(CLI::PositiveNumber);
  gradcheck->add_option("--batch", gc_batch, "Batch size")->check(CLI::PositiveNumber);
  gradcheck->add_option("--tolerance", gc_tolerance, "Relative error tolerance");
  gradcheck->add_option("--step", gc_step, "Finite-difference step");
  add_seed(gradcheck);
  gradcheck->callback([&] {
    action = [&] {
      tensorops::GradCheckOptions options;
      options.step = gc_step;
      options.seed = seed;
      models::UNet1DConfig ac;
      ac.width_multiplier = gc_width;
      ac.input_length = gc_length;
      ac.seed = seed;
      models::MultiResUNet1DConfig rc;
      rc.width_multiplier = gc_width;
      rc.input_length = gc_length;
      rc.seed = seed + 1;
      models::UNet1D approx(ac);
      models::MultiResUNet1D refine(rc);
      const auto ra = models::check_network_gradients(approx, gc_batch, seed, options);
      const auto rr = models::check_network_gradients(refine, gc_batch, seed, options);
      out << "approximation network\n" << ra.to_text() << "\nrefinement network\n" << rr.to_text();
      const bool ok = ra.passes(gc_tolerance) && rr.passes(gc_tolerance);
      out << (ok ? "PASS" : "FAIL") << " (worst " << std::max(ra.worst(), rr.worst()) << ", tolerance "
          << gc_tolerance << ")\n";
      return ok ? int{kExitOk} : int{kExitNumerical};
    };
  });

  // stats
  std::string stats_in;
  auto* stats = app.add_subcommand("stats", "Dataset statistics of SBP, DBP and MAP");
  stats->add_option("store", stats_in, "Episode store")->required();
  stats->footer(kStoreFormat);
  stats->callback([&] {
    action = [&] {
      out << datapipe::dataset_stats(datapipe::read_store(stats_in)).to_text();
      return int{kExitOk};
    };
  });

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? int{kExitOk} : int{kExitUsage};
  }

  try {
    return action();
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace ppg2abp::cli
