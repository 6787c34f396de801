// ssrp: feature extraction, PCA, training runs, sweeps and reports.
//
// Exit codes: 0 ok, 1 usage, 2 data/schema, 3 divergence or other runtime failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ssrp/ssrp.hpp"

namespace fs = std::filesystem;
using namespace ssrp;
using nlohmann::json;

namespace {

struct DataOptions {
  std::string audio_dir, manifest, cache_dir, synth_spec;
};

void add_data_options(CLI::App* app, DataOptions& d) {
  auto* audio = app->add_option("--audio-dir", d.audio_dir, "directory holding the manifest's WAV files");
  app->add_option("--manifest", d.manifest, "manifest CSV (filename,fold,target,category)")->needs(audio);
  app->add_option("--cache-dir", d.cache_dir, "spectrogram cache directory");
  app->add_option("--synth", d.synth_spec, "synthetic dataset spec (JSON) instead of audio files")
      ->excludes(audio);
}

json read_json(const std::string& path) {
  try {
    return json::parse(io::read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kSchema, path + ": " + e.what());
  }
}

experiment::Dataset load_dataset(const DataOptions& d, const experiment::RunConfig& cfg) {
  if (!d.synth_spec.empty()) {
    experiment::SyntheticSpec spec;
    try {
      spec = read_json(d.synth_spec).get<experiment::SyntheticSpec>();
    } catch (const json::exception& e) {
      fail(ErrorKind::kSchema, d.synth_spec + ": " + e.what());
    }
    auto syn = experiment::synthesize_dataset(spec);
    return experiment::dataset_from_clips(syn.clips, syn.manifest, cfg.features, cfg.clip_seconds);
  }
  if (d.audio_dir.empty() || d.manifest.empty())
    fail(ErrorKind::kInvalidArgument, "need --audio-dir and --manifest, or --synth");
  std::size_t hits = 0;
  auto data = experiment::extract_features(d.audio_dir, experiment::load_manifest(d.manifest), d.cache_dir,
                                           cfg.features, cfg.clip_seconds, &hits);
  std::cerr << "loaded " << data.size() << " clips (" << hits << " from cache)\n";
  return data;
}

experiment::RunConfig load_config(const std::string& path, bool desk) {
  experiment::RunConfig cfg = desk ? experiment::desk_scale_config(experiment::Pipeline::kSsrpT) : experiment::RunConfig{};
  if (path.empty()) return cfg;
  try {
    experiment::from_json(read_json(path), cfg);
  } catch (const json::exception& e) {
    fail(ErrorKind::kSchema, path + ": " + e.what());
  }
  return cfg;
}

json default_document() {
  experiment::RunConfig run;
  json j = run;
  j.erase("K");
  return {{"run", j},
          {"hyperparameter_defaults", {{"W", run.window}, {"K", run.top_k}, {"variance", run.variance}}},
          {"synthetic", experiment::SyntheticSpec{}},
          {"note", "the run section is the config-file key set; W, K or variance may be added for the matching pipeline"}};
}

int run_cli(int argc, char** argv) {
  CLI::App app{"Log-mel features, PCA and sparse salient region pooling CNN experiments"};
  app.require_subcommand(0, 1);
  bool print_defaults = false;
  app.add_flag("--print-config", print_defaults, "print every default setting as JSON and exit");

  // features extract
  auto* features = app.add_subcommand("features", "log-mel feature extraction");
  features->require_subcommand(1);
  auto* fx = features->add_subcommand("extract", "extract and cache log-mel spectrograms");
  std::string fx_audio, fx_manifest, fx_cache, fx_config;
  fx->add_option("audio-dir", fx_audio)->required();
  fx->add_option("manifest", fx_manifest)->required();
  fx->add_option("cache-dir", fx_cache)->required();
  fx->add_option("--config", fx_config, "run config (only the feature settings are used)");

  // pca fit | curve
  auto* pca_cmd = app.add_subcommand("pca", "PCA on flattened spectrograms");
  pca_cmd->require_subcommand(1);
  DataOptions pca_data;
  std::string pca_config, pca_out;
  double pca_variance = 0.95;
  int pca_exclude = 0;
  auto* pfit = pca_cmd->add_subcommand("fit", "fit standardizer + PCA and save the model");
  auto* pcurve = pca_cmd->add_subcommand("curve", "write the cumulative explained-variance curve");
  for (auto* sub : {pfit, pcurve}) {
    add_data_options(sub, pca_data);
    sub->add_option("--config", pca_config);
    sub->add_option("--exclude-fold", pca_exclude, "leave this fold out of the fit")->check(CLI::Range(1, 5));
    sub->add_option("--out", pca_out)->required();
  }
  pfit->add_option("--variance", pca_variance, "retained-variance threshold")->check(CLI::Range(0.0, 1.0));

  // run
  auto* run = app.add_subcommand("run", "cross-validated training run");
  DataOptions run_data;
  std::string run_pipeline_name, run_config, run_out, run_curves, run_svg, run_folds;
  std::optional<std::size_t> run_w, run_k, run_epochs;
  std::optional<double> run_variance;
  std::optional<std::uint64_t> run_seed;
  bool run_desk = false, run_print = false, run_quiet = false;
  add_data_options(run, run_data);
  run->add_option("--pipeline", run_pipeline_name, "baseline | ssrp-b | ssrp-t | pca")
      ->check(CLI::IsMember({"baseline", "ssrp-b", "ssrp-t", "pca", "baseline_gap", "ssrp_b", "ssrp_t", "pca_cnn"}));
  auto* ow = run->add_option("--W", run_w, "SSRP-B window")->check(CLI::PositiveNumber);
  auto* ok = run->add_option("--K", run_k, "SSRP-T top-K")->check(CLI::PositiveNumber);
  auto* ov = run->add_option("--variance", run_variance, "PCA retained variance")->check(CLI::Range(0.0, 1.0));
  ow->excludes(ok)->excludes(ov);
  ok->excludes(ov);
  run->add_option("--folds", run_folds, "folds to run, e.g. 1..5 or 1,3");
  run->add_option("--seed", run_seed);
  run->add_option("--epochs", run_epochs);
  run->add_option("--config", run_config, "run config file (JSON)");
  run->add_flag("--desk", run_desk, "start from the small desk-scale defaults");
  run->add_option("--out", run_out, "result JSON");
  run->add_option("--curves", run_curves, "accuracy-curve CSV");
  run->add_option("--svg", run_svg, "accuracy-curve SVG");
  run->add_flag("--print-config", run_print, "print the effective config and exit");
  run->add_flag("--quiet", run_quiet);

  // sweep
  auto* sw = app.add_subcommand("sweep", "run a list of configs");
  DataOptions sw_data;
  std::string sw_grid, sw_out, sw_results_dir;
  add_data_options(sw, sw_data);
  sw->add_option("--grid", sw_grid, "grid file: {\"base\": {...}, \"runs\": [...]} or {\"base\": {...}, \"hyperparameter_grid\": true}")
      ->required();
  sw->add_option("--out", sw_out, "sweep CSV")->required();
  sw->add_option("--results-dir", sw_results_dir, "also write one result JSON per row");

  // report
  auto* rep = app.add_subcommand("report", "comparison table from result files");
  std::vector<std::string> rep_inputs;
  std::string rep_out;
  bool rep_reference = false;
  rep->add_option("results", rep_inputs)->required();
  rep->add_option("--out", rep_out, "output stem; writes <stem>.csv and <stem>.txt")->required();
  rep->add_flag("--compare-reference", rep_reference, "list runs more than 3 points from the reference accuracies");

  // synth
  auto* syn = app.add_subcommand("synth", "write a synthetic dataset as WAV files + manifest");
  std::string syn_spec, syn_out;
  syn->add_option("--spec", syn_spec, "synthetic spec (JSON); defaults when omitted");
  syn->add_option("--out", syn_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  if (print_defaults) {
    std::cout << default_document().dump(2) << "\n";
    return 0;
  }

  if (*fx) {
    const auto cfg = load_config(fx_config, false);
    std::size_t hits = 0;
    auto data = experiment::extract_features(fx_audio, experiment::load_manifest(fx_manifest), fx_cache, cfg.features,
                                             cfg.clip_seconds, &hits);
    std::cout << data.size() << " clips, " << hits << " cache hits, " << data.size() - hits << " extracted\n";
    return 0;
  }

  if (*pfit || *pcurve) {
    auto cfg = load_config(pca_config, false);
    auto data = load_dataset(pca_data, cfg);
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < data.size(); ++i)
      if (data.manifest.entries[i].fold != pca_exclude) rows.push_back(i);
    const Matrix x = experiment::flattened_rows(data, rows, cfg.target_frames_pca);
    if (*pcurve) {
      const auto spec = pca::covariance_spectrum(pca::fit_standardizer(x).apply(x));
      pca::emit_variance_curve(spec.values, pca_out);
      std::cout << "wrote " << spec.values.size() << " components to " << pca_out << "\n";
      return 0;
    }
    const auto model = pca::fit_pca(x, pca_variance);
    pca::save_pca(model, pca_out, pca_out + ".json");
    std::cout << pca::summary_json(model).dump(2) << "\n";
    return 0;
  }

  if (*run) {
    auto cfg = load_config(run_config, run_desk);
    if (!run_pipeline_name.empty()) cfg.pipeline = experiment::parse_pipeline(run_pipeline_name);
    using experiment::Pipeline;
    if (run_w) {
      if (cfg.pipeline != Pipeline::kSsrpB) fail(ErrorKind::kInvalidArgument, "--W applies to ssrp-b only");
      cfg.window = *run_w;
    }
    if (run_k) {
      if (cfg.pipeline != Pipeline::kSsrpT) fail(ErrorKind::kInvalidArgument, "--K applies to ssrp-t only");
      cfg.top_k = *run_k;
    }
    if (run_variance) {
      if (cfg.pipeline != Pipeline::kPcaCnn) fail(ErrorKind::kInvalidArgument, "--variance applies to pca only");
      cfg.variance = *run_variance;
    }
    if (!run_folds.empty()) cfg.folds = experiment::parse_folds(run_folds);
    if (run_seed) cfg.seed = *run_seed;
    if (run_epochs) cfg.training.epochs = *run_epochs;
    cfg.validate();
    if (run_print) {
      std::cout << json(cfg).dump(2) << "\n";
      return 0;
    }
    auto data = load_dataset(run_data, cfg);
    cfg.network.n_classes = std::max(cfg.network.n_classes, data.n_classes());
    auto result = experiment::run_pipeline(cfg, data, [&](int fold, const nn::TrainHistory& h) {
      if (run_quiet) return;
      const std::size_t e = h.epochs_run;
      if (e % 10 == 0 || e == cfg.training.epochs)
        std::cerr << "fold " << fold << " epoch " << e << " loss " << h.loss.back() << " val_acc "
                  << (h.validation_accuracy.empty() ? 0.0 : h.validation_accuracy.back()) << "\n";
    });
    for (const auto& f : result.folds) std::cout << "fold " << f.fold << ": " << f.accuracy << "\n";
    std::cout << experiment::model_name(result.pipeline) << " " << result.hyper << " mean accuracy "
              << result.mean_accuracy << " (" << result.param_count << " parameters)\n";
    if (!run_out.empty()) experiment::save_result(result, run_out);
    if (!run_curves.empty() || !run_svg.empty()) {
      if (!run_curves.empty()) io::write_text(run_curves, experiment::accuracy_curves_csv(result));
      if (!run_svg.empty()) io::write_text(run_svg, experiment::accuracy_curves_svg(result));
    }
    return 0;
  }

  if (*sw) {
    const json grid = read_json(sw_grid);
    experiment::RunConfig base;
    std::vector<experiment::RunConfig> cfgs;
    try {
      if (grid.contains("base")) experiment::from_json(grid.at("base"), base);
      if (grid.value("hyperparameter_grid", false)) cfgs = experiment::hyperparameter_grid(base);
      for (const auto& r : grid.value("runs", json::array())) {
        experiment::RunConfig c = base;
        json merged = json(base);
        merged.erase("W");
        merged.erase("K");
        merged.erase("variance");
        merged.merge_patch(r);
        experiment::from_json(merged, c);
        cfgs.push_back(c);
      }
    } catch (const json::exception& e) {
      fail(ErrorKind::kSchema, sw_grid + ": " + e.what());
    }
    require(!cfgs.empty(), ErrorKind::kSchema, sw_grid + ": no runs in grid");
    auto data = load_dataset(sw_data, base);
    for (auto& c : cfgs) c.network.n_classes = std::max(c.network.n_classes, data.n_classes());
    if (!sw_results_dir.empty()) fs::create_directories(sw_results_dir);
    std::size_t idx = 0;
    auto rows = experiment::sweep(cfgs, data, [&](const experiment::SweepRow& row) {
      ++idx;
      std::cerr << "[" << idx << "/" << cfgs.size() << "] " << experiment::model_name(row.config.pipeline) << " "
                << row.config.hyper_label() << ": "
                << (row.result ? io::format_double(row.result->mean_accuracy) : "failed: " + row.error) << "\n";
      if (row.result && !sw_results_dir.empty())
        experiment::save_result(*row.result, (fs::path(sw_results_dir) / ("run_" + std::to_string(idx) + ".json")).string());
    });
    io::write_text(sw_out, experiment::sweep_csv(rows));
    std::size_t failed = 0;
    for (const auto& r : rows) failed += !r.result;
    std::cout << rows.size() << " rows written to " << sw_out << (failed ? ", " + std::to_string(failed) + " failed" : "")
              << "\n";
    return 0;
  }

  if (*rep) {
    std::vector<experiment::RunResult> results;
    for (const auto& p : rep_inputs) results.push_back(experiment::load_result(p));
    experiment::report_comparison(results, rep_out);
    std::cout << io::read_text(rep_out + ".txt");
    if (rep_reference) {
      const auto dev = experiment::reference_deviations(results);
      std::cout << "\n" << (dev.empty() ? "all runs within 3 points of the reference accuracies\n" : "");
      for (const auto& d : dev) std::cout << "deviation: " << d << "\n";
    }
    return 0;
  }

  if (*syn) {
    experiment::SyntheticSpec spec;
    if (!syn_spec.empty()) {
      try {
        spec = read_json(syn_spec).get<experiment::SyntheticSpec>();
      } catch (const json::exception& e) {
        fail(ErrorKind::kSchema, syn_spec + ": " + e.what());
      }
    }
    auto data = experiment::synthesize_dataset(spec);
    fs::create_directories(syn_out);
    for (std::size_t i = 0; i < data.clips.size(); ++i)
      audio::save_wav(data.clips[i], (fs::path(syn_out) / data.manifest.entries[i].filename).string());
    io::write_text((fs::path(syn_out) / "manifest.csv").string(), experiment::manifest_csv(data.manifest));
    std::cout << data.clips.size() << " clips written to " << syn_out << "\n";
    return 0;
  }

  std::cout << app.help();
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const DivergenceError& e) {
    std::cerr << "error: diverged at epoch " << e.epoch() << ": " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
