#pragma once

// Cross-validated training runs for the four pipelines: CNN with GAP,
// SSRP-B or SSRP-T global pooling on log-mel input, and CNN on PCA-reduced
// log-mel vectors.

#include <chrono>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssrp/audio/features.hpp"
#include "ssrp/error.hpp"
#include "ssrp/experiment/dataset.hpp"
#include "ssrp/matrix.hpp"
#include "ssrp/nn/train.hpp"
#include "ssrp/pca/pca.hpp"

namespace ssrp::experiment {

enum class Pipeline { kBaselineGap, kSsrpB, kSsrpT, kPcaCnn };

inline std::string pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::kBaselineGap: return "baseline_gap";
    case Pipeline::kSsrpB: return "ssrp_b";
    case Pipeline::kSsrpT: return "ssrp_t";
    case Pipeline::kPcaCnn: return "pca_cnn";
  }
  return "?";
}

inline Pipeline parse_pipeline(const std::string& s) {
  if (s == "baseline" || s == "baseline_gap" || s == "baseline-gap") return Pipeline::kBaselineGap;
  if (s == "ssrp-b" || s == "ssrp_b") return Pipeline::kSsrpB;
  if (s == "ssrp-t" || s == "ssrp_t") return Pipeline::kSsrpT;
  if (s == "pca" || s == "pca_cnn" || s == "pca-cnn") return Pipeline::kPcaCnn;
  fail(ErrorKind::kInvalidArgument, "unknown pipeline '" + s + "'");
}

/// Display name used in result tables.
inline std::string model_name(Pipeline p) {
  switch (p) {
    case Pipeline::kBaselineGap: return "CNN (baseline, GAP)";
    case Pipeline::kSsrpB: return "CNN + SSRP-B";
    case Pipeline::kSsrpT: return "CNN + SSRP-T";
    case Pipeline::kPcaCnn: return "PCA + CNN";
  }
  return "?";
}

/// "1..5", "2..3", "1,3,4" or a single fold id.
inline std::vector<int> parse_folds(const std::string& text) {
  std::vector<int> out;
  try {
    if (const auto dots = text.find(".."); dots != std::string::npos) {
      const int lo = static_cast<int>(io::parse_int(text.substr(0, dots)));
      const int hi = static_cast<int>(io::parse_int(text.substr(dots + 2)));
      for (int f = lo; f <= hi; ++f) out.push_back(f);
    } else {
      for (const auto& cell : io::split_csv_line(text)) out.push_back(static_cast<int>(io::parse_int(cell)));
    }
  } catch (const Error&) {
    fail(ErrorKind::kInvalidArgument, "bad fold list '" + text + "'");
  }
  require(!out.empty(), ErrorKind::kInvalidArgument, "bad fold list '" + text + "'");
  for (int f : out)
    require(f >= 1 && f <= kFolds, ErrorKind::kInvalidArgument, "fold " + std::to_string(f) + " outside 1-5");
  return out;
}

struct RunConfig {
  Pipeline pipeline = Pipeline::kSsrpT;
  std::size_t window = 4;   // SSRP-B W
  std::size_t top_k = 12;   // SSRP-T K
  double variance = 0.95;   // PCA retained-variance threshold
  nn::TrainOptions training;
  std::uint64_t seed = 0;
  std::vector<int> folds{1, 2, 3, 4, 5};
  /// Backbone template; input extent and pooling are set per pipeline.
  nn::NetworkConfig network;
  std::size_t target_frames_cnn = 431;
  std::size_t target_frames_pca = 428;
  bool pca_fit_all = false;  // fit standardizer + PCA on every clip instead of the training fold
  audio::FeatureConfig features;
  double clip_seconds = 5.0;

  std::string hyper_label() const {
    switch (pipeline) {
      case Pipeline::kSsrpB: return "W=" + std::to_string(window);
      case Pipeline::kSsrpT: return "K=" + std::to_string(top_k);
      case Pipeline::kPcaCnn: return "variance=" + io::format_double(variance);
      case Pipeline::kBaselineGap: break;
    }
    return "-";
  }

  pooling::PoolingSpec pooling_spec() const {
    switch (pipeline) {
      case Pipeline::kSsrpB: return pooling::PoolingSpec::ssrp_b(window);
      case Pipeline::kSsrpT: return pooling::PoolingSpec::ssrp_t(top_k);
      default: return pooling::PoolingSpec::gap();
    }
  }

  void validate() const {
    if (pipeline == Pipeline::kSsrpB) require(window >= 1, ErrorKind::kInvalidArgument, "W must be >= 1");
    if (pipeline == Pipeline::kSsrpT) require(top_k >= 1, ErrorKind::kInvalidArgument, "K must be >= 1");
    if (pipeline == Pipeline::kPcaCnn)
      require(variance > 0.0 && variance <= 1.0, ErrorKind::kInvalidArgument, "variance must lie in (0, 1]");
    require(!folds.empty(), ErrorKind::kInvalidArgument, "no folds requested");
    for (int f : folds)
      require(f >= 1 && f <= kFolds, ErrorKind::kInvalidArgument, "fold " + std::to_string(f) + " outside 1-5");
    require(target_frames_cnn > 0 && target_frames_pca > 0, ErrorKind::kInvalidArgument,
            "target frame counts must be positive");
    require(training.batch_size >= 2, ErrorKind::kInvalidArgument, "batch size must be >= 2");
  }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
  j = {{"pipeline", pipeline_name(c.pipeline)},
       {"seed", c.seed},
       {"folds", c.folds},
       {"epochs", c.training.epochs},
       {"batch_size", c.training.batch_size},
       {"learning_rate", c.training.learning_rate},
       {"momentum", c.training.momentum},
       {"mixup_alpha", c.training.mixup_alpha},
       {"track_train_accuracy", c.training.track_train_accuracy},
       {"target_frames_cnn", c.target_frames_cnn},
       {"target_frames_pca", c.target_frames_pca},
       {"pca_fit_all", c.pca_fit_all},
       {"clip_seconds", c.clip_seconds},
       {"features",
        {{"sample_rate", c.features.sample_rate},
         {"n_fft", c.features.n_fft},
         {"win_length", c.features.win_length},
         {"hop_length", c.features.hop_length},
         {"n_mels", c.features.n_mels},
         {"f_min", c.features.f_min},
         {"f_max", c.features.f_max},
         {"power_floor", c.features.power_floor}}},
       {"network",
        {{"conv_filters", c.network.conv_filters},
         {"pooled_blocks", c.network.pooled_blocks},
         {"dense_units", c.network.dense_units},
         {"dropout_rate", c.network.dropout_rate},
         {"n_classes", c.network.n_classes},
         {"bn_epsilon", c.network.bn_epsilon},
         {"bn_momentum", c.network.bn_momentum}}}};
  switch (c.pipeline) {
    case Pipeline::kSsrpB: j["W"] = c.window; break;
    case Pipeline::kSsrpT: j["K"] = c.top_k; break;
    case Pipeline::kPcaCnn: j["variance"] = c.variance; break;
    case Pipeline::kBaselineGap: break;
  }
}

/// Missing keys keep their defaults. A hyperparameter key belonging to a
/// different pipeline is rejected.
inline void from_json(const nlohmann::json& j, RunConfig& c) {
  if (j.contains("pipeline")) c.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
  const bool has_w = j.contains("W"), has_k = j.contains("K"), has_v = j.contains("variance");
  if ((has_w && c.pipeline != Pipeline::kSsrpB) || (has_k && c.pipeline != Pipeline::kSsrpT) ||
      (has_v && c.pipeline != Pipeline::kPcaCnn))
    fail(ErrorKind::kValidation, "hyperparameter does not match pipeline " + pipeline_name(c.pipeline));
  c.window = j.value("W", c.window);
  c.top_k = j.value("K", c.top_k);
  c.variance = j.value("variance", c.variance);
  c.seed = j.value("seed", c.seed);
  c.folds = j.value("folds", c.folds);
  c.training.epochs = j.value("epochs", c.training.epochs);
  c.training.batch_size = j.value("batch_size", c.training.batch_size);
  c.training.learning_rate = j.value("learning_rate", c.training.learning_rate);
  c.training.momentum = j.value("momentum", c.training.momentum);
  c.training.mixup_alpha = j.value("mixup_alpha", c.training.mixup_alpha);
  c.training.track_train_accuracy = j.value("track_train_accuracy", c.training.track_train_accuracy);
  c.target_frames_cnn = j.value("target_frames_cnn", c.target_frames_cnn);
  c.target_frames_pca = j.value("target_frames_pca", c.target_frames_pca);
  c.pca_fit_all = j.value("pca_fit_all", c.pca_fit_all);
  c.clip_seconds = j.value("clip_seconds", c.clip_seconds);
  if (j.contains("features")) {
    const auto& f = j.at("features");
    c.features.sample_rate = f.value("sample_rate", c.features.sample_rate);
    c.features.n_fft = f.value("n_fft", c.features.n_fft);
    c.features.win_length = f.value("win_length", c.features.win_length);
    c.features.hop_length = f.value("hop_length", c.features.hop_length);
    c.features.n_mels = f.value("n_mels", c.features.n_mels);
    c.features.f_min = f.value("f_min", c.features.f_min);
    c.features.f_max = f.value("f_max", c.features.f_max);
    c.features.power_floor = f.value("power_floor", c.features.power_floor);
  }
  if (j.contains("network")) {
    const auto& n = j.at("network");
    c.network.conv_filters = n.value("conv_filters", c.network.conv_filters);
    c.network.pooled_blocks = n.value("pooled_blocks", c.network.pooled_blocks);
    c.network.dense_units = n.value("dense_units", c.network.dense_units);
    c.network.dropout_rate = n.value("dropout_rate", c.network.dropout_rate);
    c.network.n_classes = n.value("n_classes", c.network.n_classes);
    c.network.bn_epsilon = n.value("bn_epsilon", c.network.bn_epsilon);
    c.network.bn_momentum = n.value("bn_momentum", c.network.bn_momentum);
  }
}

/// Small network and short clips so a full 5-fold run finishes in seconds.
inline RunConfig desk_scale_config(Pipeline p, std::size_t n_classes = 4) {
  RunConfig c;
  c.pipeline = p;
  c.window = 2;
  c.top_k = 2;
  c.clip_seconds = 1.0;
  c.target_frames_cnn = audio::frame_count(44100, c.features);
  c.target_frames_pca = c.target_frames_cnn;
  c.network.conv_filters = {4, 8, 8};
  c.network.dense_units = 16;
  c.network.n_classes = n_classes;
  c.training.epochs = 60;
  c.training.batch_size = 64;
  return c;
}

struct FoldResult {
  int fold = 0;
  double accuracy = 0.0;                   // final validation accuracy
  std::vector<double> trajectory;          // validation accuracy per epoch
  std::vector<double> train_trajectory;    // when tracked
  std::vector<double> loss;                // mean training loss per epoch
  std::size_t param_count = 0;
  std::size_t components = 0;              // PCA components, pca_cnn only
  std::size_t epochs_run = 0;
};

struct RunResult {
  Pipeline pipeline = Pipeline::kBaselineGap;
  std::string hyper;
  std::vector<FoldResult> folds;
  double mean_accuracy = 0.0;
  std::size_t param_count = 0;
  double wall_seconds = 0.0;
  nlohmann::json config;
  std::vector<std::string> notes;
};

/// Shaped, z-scored single-channel network input.
inline FeatureMap<double> to_cnn_input(const audio::LogMelSpectrogram& spec, std::size_t frames, double pad_db) {
  const auto shaped = audio::shape_to_input(spec, frames, pad_db);
  FeatureMap<double> m(1, shaped.n_frames, shaped.n_mels);
  std::copy(shaped.values.begin(), shaped.values.end(), m.data().begin());
  return m;
}

/// Flattened shaped spectrograms for the given dataset rows.
inline Matrix flattened_rows(const Dataset& data, std::span<const std::size_t> rows, std::size_t frames) {
  require(!rows.empty(), ErrorKind::kInsufficientData, "no rows selected");
  const std::size_t d = frames * data.spectrograms[rows[0]].n_mels;
  Matrix m(rows.size(), d);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto shaped = audio::shape_to_input(data.spectrograms[rows[i]], frames, data.pad_db);
    require(shaped.values.size() == d, ErrorKind::kShape, "inconsistent mel count across clips");
    std::copy(shaped.values.begin(), shaped.values.end(), m.row(i).begin());
  }
  return m;
}

/// Network inputs and labels for one cross-validation fold.
struct FoldData {
  std::vector<FeatureMap<double>> train_x, val_x;
  std::vector<int> train_y, val_y;
  nn::NetworkConfig network;
  std::optional<pca::PcaModel> pca;
};

inline std::vector<int> targets_of(const Dataset& data, std::span<const std::size_t> rows) {
  std::vector<int> y;
  for (std::size_t r : rows) y.push_back(data.manifest.entries[r].target);
  return y;
}

/// Standardizer + PCA fitted on the training rows only (or on every row when
/// `cfg.pca_fit_all`), applied to both splits and reshaped to k x 1 maps.
inline FoldData prepare_fold(const RunConfig& cfg, const Dataset& data, const FoldSplit& split) {
  FoldData fd;
  fd.train_y = targets_of(data, split.train);
  fd.val_y = targets_of(data, split.validation);
  fd.network = cfg.network;
  fd.network.pooling = cfg.pooling_spec();

  if (cfg.pipeline != Pipeline::kPcaCnn) {
    for (std::size_t r : split.train)
      fd.train_x.push_back(to_cnn_input(data.spectrograms[r], cfg.target_frames_cnn, data.pad_db));
    for (std::size_t r : split.validation)
      fd.val_x.push_back(to_cnn_input(data.spectrograms[r], cfg.target_frames_cnn, data.pad_db));
    fd.network.input_time = cfg.target_frames_cnn;
    fd.network.input_freq = data.spectrograms.front().n_mels;
    fd.network.validate();
    return fd;
  }

  const Matrix train_rows = flattened_rows(data, split.train, cfg.target_frames_pca);
  const Matrix val_rows = flattened_rows(data, split.validation, cfg.target_frames_pca);
  if (cfg.pca_fit_all) {
    Matrix all(train_rows.rows() + val_rows.rows(), train_rows.cols());
    for (std::size_t r = 0; r < train_rows.rows(); ++r)
      std::copy(train_rows.row(r).begin(), train_rows.row(r).end(), all.row(r).begin());
    for (std::size_t r = 0; r < val_rows.rows(); ++r)
      std::copy(val_rows.row(r).begin(), val_rows.row(r).end(), all.row(train_rows.rows() + r).begin());
    fd.pca = pca::fit_pca(all, cfg.variance);
  } else {
    fd.pca = pca::fit_pca(train_rows, cfg.variance);
  }
  const auto& model = *fd.pca;
  const Matrix zt = pca::project(model, model.standardizer.apply(train_rows));
  const Matrix zv = pca::project(model, model.standardizer.apply(val_rows));
  for (std::size_t r = 0; r < zt.rows(); ++r) fd.train_x.push_back(pca::reshape_for_cnn(zt.row(r)));
  for (std::size_t r = 0; r < zv.rows(); ++r) fd.val_x.push_back(pca::reshape_for_cnn(zv.row(r)));
  fd.network.input_time = model.components();
  fd.network.input_freq = 1;
  fd.network.validate();
  return fd;
}

/// Trains and evaluates every requested fold. Fold f uses seed + f for both
/// initialization and training randomness.
inline RunResult run_pipeline(const RunConfig& cfg, const Dataset& data,
                              const std::function<void(int fold, const nn::TrainHistory&)>& on_epoch = {}) {
  cfg.validate();
  require(data.size() == data.manifest.entries.size() && data.size() > 0, ErrorKind::kInsufficientData,
          "dataset is empty or inconsistent");
  const auto started = std::chrono::steady_clock::now();
  RunResult res;
  res.pipeline = cfg.pipeline;
  res.hyper = cfg.hyper_label();
  res.config = cfg;
  if (cfg.pipeline == Pipeline::kBaselineGap)
    res.notes.push_back("baseline pooling is assumed to be global average pooling");
  if (cfg.pipeline == Pipeline::kPcaCnn && cfg.pca_fit_all)
    res.notes.push_back("PCA fitted on all clips, validation folds included");

  for (int fold : cfg.folds) {
    const auto split = make_folds(data.manifest, fold);
    FoldData fd = prepare_fold(cfg, data, split);
    const std::uint64_t fold_seed = cfg.seed + static_cast<std::uint64_t>(fold);
    nn::Network<double> net(fd.network, fold_seed);
    nn::TrainOptions opt = cfg.training;
    opt.seed = fold_seed ^ 0x9e3779b97f4a7c15ULL;

    FoldResult fr;
    fr.fold = fold;
    fr.param_count = nn::count_params(fd.network).total;
    fr.components = fd.pca ? fd.pca->components() : 0;
    nn::TrainHistory hist;
    try {
      hist = nn::train<double>(net, fd.train_x, fd.train_y, fd.val_x, fd.val_y, opt,
                               [&](const nn::TrainHistory& h) {
                                 if (on_epoch) on_epoch(fold, h);
                               });
    } catch (const DivergenceError& e) {
      throw DivergenceError(e.epoch(), "fold " + std::to_string(fold) + ": " + e.what());
    }
    fr.trajectory = hist.validation_accuracy;
    fr.train_trajectory = hist.train_accuracy;
    fr.loss = hist.loss;
    fr.epochs_run = hist.epochs_run;
    fr.accuracy = fr.trajectory.empty() ? nn::accuracy<double>(net, fd.val_x, fd.val_y) : fr.trajectory.back();
    res.folds.push_back(std::move(fr));
  }
  double sum = 0.0;
  for (const auto& f : res.folds) sum += f.accuracy;
  res.mean_accuracy = sum / static_cast<double>(res.folds.size());
  res.param_count = res.folds.front().param_count;
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return res;
}

struct SweepRow {
  RunConfig config;
  std::optional<RunResult> result;
  std::string error;  // empty on success
};

/// Runs every config in order; a failing run is recorded and the sweep moves on.
inline std::vector<SweepRow> sweep(const std::vector<RunConfig>& cfgs, const Dataset& data,
                                   const std::function<void(const SweepRow&)>& on_row = {}) {
  require(!cfgs.empty(), ErrorKind::kInvalidArgument, "empty sweep");
  std::vector<SweepRow> rows;
  for (const auto& cfg : cfgs) {
    SweepRow row{cfg, std::nullopt, {}};
    try {
      row.result = run_pipeline(cfg, data);
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    if (on_row) on_row(row);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// SSRP-B over W in {2, 4, 6, 8} and SSRP-T over K in {4, 8, 10, 12, 14, 16}.
inline std::vector<RunConfig> hyperparameter_grid(const RunConfig& base) {
  std::vector<RunConfig> out;
  for (std::size_t w : {2, 4, 6, 8}) {
    RunConfig c = base;
    c.pipeline = Pipeline::kSsrpB;
    c.window = w;
    out.push_back(c);
  }
  for (std::size_t k : {4, 8, 10, 12, 14, 16}) {
    RunConfig c = base;
    c.pipeline = Pipeline::kSsrpT;
    c.top_k = k;
    out.push_back(c);
  }
  return out;
}

}  // namespace ssrp::experiment
