#pragma once

// Result serialization, accuracy curves, sweep tables and the cross-pipeline
// comparison table.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssrp/binary_io.hpp"
#include "ssrp/experiment/pipeline.hpp"

namespace ssrp::experiment {

inline void to_json(nlohmann::json& j, const FoldResult& f) {
  j = {{"fold", f.fold},
       {"accuracy", f.accuracy},
       {"trajectory", f.trajectory},
       {"train_trajectory", f.train_trajectory},
       {"loss", f.loss},
       {"param_count", f.param_count},
       {"components", f.components},
       {"epochs_run", f.epochs_run}};
}

inline void from_json(const nlohmann::json& j, FoldResult& f) {
  f.fold = j.at("fold").get<int>();
  f.accuracy = j.at("accuracy").get<double>();
  f.trajectory = j.value("trajectory", std::vector<double>{});
  f.train_trajectory = j.value("train_trajectory", std::vector<double>{});
  f.loss = j.value("loss", std::vector<double>{});
  f.param_count = j.value("param_count", std::size_t{0});
  f.components = j.value("components", std::size_t{0});
  f.epochs_run = j.value("epochs_run", std::size_t{0});
}

inline void to_json(nlohmann::json& j, const RunResult& r) {
  j = {{"pipeline", pipeline_name(r.pipeline)},
       {"hyper", r.hyper},
       {"folds", r.folds},
       {"mean_accuracy", r.mean_accuracy},
       {"param_count", r.param_count},
       {"wall_seconds", r.wall_seconds},
       {"config", r.config},
       {"notes", r.notes}};
}

inline void from_json(const nlohmann::json& j, RunResult& r) {
  r.pipeline = parse_pipeline(j.at("pipeline").get<std::string>());
  r.hyper = j.value("hyper", std::string("-"));
  r.folds = j.at("folds").get<std::vector<FoldResult>>();
  r.mean_accuracy = j.at("mean_accuracy").get<double>();
  r.param_count = j.value("param_count", std::size_t{0});
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.config = j.value("config", nlohmann::json::object());
  r.notes = j.value("notes", std::vector<std::string>{});
}

inline void save_result(const RunResult& r, const std::string& path) {
  io::write_text(path, nlohmann::json(r).dump(2) + "\n");
}

inline RunResult load_result(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_text(path));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kSchema, path + ": " + e.what());
  }
  try {
    return j.get<RunResult>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kSchema, path + ": " + e.what());
  }
}

// ---- accuracy curves ----

inline std::string accuracy_curves_csv(const RunResult& r) {
  std::string out = "epoch,fold,validation_accuracy\n";
  for (const auto& f : r.folds)
    for (std::size_t e = 0; e < f.trajectory.size(); ++e)
      out += std::to_string(e + 1) + "," + std::to_string(f.fold) + "," + io::format_double(f.trajectory[e]) + "\n";
  return out;
}

/// fold -> per-epoch accuracies, epochs in file order.
inline std::map<int, std::vector<double>> parse_accuracy_curves(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "epoch,fold,validation_accuracy", ErrorKind::kSchema,
          "unexpected accuracy-curve header");
  std::map<int, std::vector<double>> curves;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = io::split_csv_line(line);
    require(cells.size() == 3, ErrorKind::kSchema, "accuracy-curve row needs 3 cells: " + line);
    auto& c = curves[static_cast<int>(io::parse_int(cells[1]))];
    require(static_cast<std::size_t>(io::parse_int(cells[0])) == c.size() + 1, ErrorKind::kSchema,
            "epochs out of order in accuracy curve");
    c.push_back(io::parse_double(cells[2]));
  }
  return curves;
}

/// Simple line plot, one polyline per fold.
inline std::string accuracy_curves_svg(const RunResult& r) {
  const double w = 640, h = 360, pad = 40;
  std::size_t max_epochs = 1;
  for (const auto& f : r.folds) max_epochs = std::max(max_epochs, f.trajectory.size());
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"};
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
  os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << w - 2 * pad << "\" height=\"" << h - 2 * pad
     << "\" fill=\"none\" stroke=\"#888\"/>\n";
  os << "<text x=\"" << pad << "\" y=\"" << pad - 10 << "\" font-size=\"12\">" << model_name(r.pipeline) << " "
     << r.hyper << ": validation accuracy per epoch</text>\n";
  std::size_t idx = 0;
  for (const auto& f : r.folds) {
    os << "<polyline fill=\"none\" stroke=\"" << colors[idx++ % 5] << "\" points=\"";
    for (std::size_t e = 0; e < f.trajectory.size(); ++e) {
      const double x = pad + (w - 2 * pad) * (max_epochs > 1 ? double(e) / double(max_epochs - 1) : 0.0);
      const double y = h - pad - (h - 2 * pad) * f.trajectory[e];
      os << x << "," << y << " ";
    }
    os << "\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void emit_accuracy_curves(const RunResult& r, const std::string& csv_path, const std::string& svg_path = {}) {
  io::write_text(csv_path, accuracy_curves_csv(r));
  if (!svg_path.empty()) io::write_text(svg_path, accuracy_curves_svg(r));
}

// ---- sweep table ----

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "model,hyper,mean_accuracy,params,status\n";
  for (const auto& row : rows) {
    out += io::csv_field(model_name(row.config.pipeline)) + "," + io::csv_field(row.config.hyper_label()) + ",";
    if (row.result)
      out += io::format_double(row.result->mean_accuracy) + "," + std::to_string(row.result->param_count) + ",ok\n";
    else
      out += ",,failed\n";
  }
  return out;
}

// ---- comparison ----

struct ComparisonRow {
  std::string pooling;
  std::string layers;
  std::string hyper;
  double accuracy = 0.0;
  std::size_t params = 0;
};

/// Parameter counts quoted for the reference implementation, used only to
/// flag differences. 0 means no reference figure.
inline std::size_t reference_param_count(Pipeline p) {
  switch (p) {
    case Pipeline::kSsrpB:
    case Pipeline::kSsrpT: return 527000;
    case Pipeline::kBaselineGap: return 245000;
    case Pipeline::kPcaCnn: return 0;
  }
  return 0;
}

inline std::string pooling_label(Pipeline p) {
  switch (p) {
    case Pipeline::kSsrpB: return "SSRP-B";
    case Pipeline::kSsrpT: return "SSRP-T";
    case Pipeline::kPcaCnn: return "PCA + GAP";
    case Pipeline::kBaselineGap: return "GAP";
  }
  return "?";
}

inline std::string layers_label(const nlohmann::json& config) {
  std::size_t blocks = 3;
  bool dense = true;
  if (config.contains("network")) {
    const auto& n = config.at("network");
    if (n.contains("conv_filters")) blocks = n.at("conv_filters").size();
    if (n.contains("dense_units")) dense = n.at("dense_units").get<std::size_t>() > 0;
  }
  return std::to_string(blocks) + " conv" + (dense ? " + 2 dense" : " + 1 dense");
}

/// Sorted by accuracy, highest first; ties keep input order.
inline std::vector<ComparisonRow> comparison_rows(const std::vector<RunResult>& results) {
  std::vector<ComparisonRow> rows;
  for (const auto& r : results)
    rows.push_back({pooling_label(r.pipeline), layers_label(r.config), r.hyper, r.mean_accuracy, r.param_count});
  std::stable_sort(rows.begin(), rows.end(),
                   [](const ComparisonRow& a, const ComparisonRow& b) { return a.accuracy > b.accuracy; });
  return rows;
}

inline std::vector<std::string> comparison_notes(const std::vector<RunResult>& results) {
  std::vector<std::string> notes;
  bool baseline_seen = false;
  for (const auto& r : results) {
    const std::size_t ref = reference_param_count(r.pipeline);
    if (ref != 0 && r.param_count != 0) {
      const double rel = std::abs(double(r.param_count) - double(ref)) / double(ref);
      if (rel > 0.05)
        notes.push_back(pooling_label(r.pipeline) + " " + r.hyper + ": " + std::to_string(r.param_count) +
                        " parameters, reference figure ~" + std::to_string(ref / 1000) + "K");
    }
    if (r.pipeline == Pipeline::kBaselineGap && !baseline_seen) {
      notes.push_back("baseline pooling assumed to be global average pooling");
      baseline_seen = true;
    }
    for (const auto& n : r.notes)
      if (std::find(notes.begin(), notes.end(), n) == notes.end() && n.find("baseline pooling") == std::string::npos)
        notes.push_back(n);
  }
  return notes;
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::string out = "pooling,layers,hyper,accuracy,params\n";
  for (const auto& r : rows)
    out += io::csv_field(r.pooling) + "," + io::csv_field(r.layers) + "," + io::csv_field(r.hyper) + "," + io::format_double(r.accuracy) + "," +
           std::to_string(r.params) + "\n";
  return out;
}

inline std::vector<ComparisonRow> parse_comparison_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == "pooling,layers,hyper,accuracy,params",
          ErrorKind::kSchema, "unexpected comparison header");
  std::vector<ComparisonRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = io::split_csv_line(line);
    require(c.size() == 5, ErrorKind::kSchema, "comparison row needs 5 cells: " + line);
    rows.push_back({c[0], c[1], c[2], io::parse_double(c[3]), static_cast<std::size_t>(io::parse_int(c[4]))});
  }
  return rows;
}

inline std::string comparison_text(const std::vector<ComparisonRow>& rows, const std::vector<std::string>& notes) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %-18s %-14s %9s %10s\n", "pooling", "layers", "hyper", "accuracy", "params");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-10s %-18s %-14s %8.2f%% %10zu\n", r.pooling.c_str(), r.layers.c_str(),
                  r.hyper.c_str(), 100.0 * r.accuracy, r.params);
    os << buf;
  }
  if (!notes.empty()) {
    os << "\nnotes:\n";
    for (const auto& n : notes) os << "  - " << n << "\n";
  }
  return os.str();
}

/// Writes `<stem>.csv` and `<stem>.txt`; returns the sorted rows.
inline std::vector<ComparisonRow> report_comparison(const std::vector<RunResult>& results, const std::string& stem) {
  require(!results.empty(), ErrorKind::kInvalidArgument, "no results to compare");
  auto rows = comparison_rows(results);
  io::write_text(stem + ".csv", comparison_csv(rows));
  io::write_text(stem + ".txt", comparison_text(rows, comparison_notes(results)));
  return rows;
}

// ---- reference accuracies ----

/// Mean 5-fold accuracy quoted for the full-size reference setup, used to
/// flag runs that deviate by more than `tolerance` (absolute, fraction).
inline std::optional<double> reference_accuracy(Pipeline p, std::size_t hyper) {
  switch (p) {
    case Pipeline::kBaselineGap: return 0.6675;
    case Pipeline::kPcaCnn: return 0.3760;
    case Pipeline::kSsrpB: {
      static const std::map<std::size_t, double> m{{2, 0.7115}, {4, 0.7285}, {6, 0.6505}, {8, 0.6609}};
      if (auto it = m.find(hyper); it != m.end()) return it->second;
      return std::nullopt;
    }
    case Pipeline::kSsrpT: {
      static const std::map<std::size_t, double> m{{4, 0.7520},  {8, 0.7760},  {10, 0.8060},
                                                   {12, 0.8069}, {14, 0.7865}, {16, 0.7059}};
      if (auto it = m.find(hyper); it != m.end()) return it->second;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

inline std::vector<std::string> reference_deviations(const std::vector<RunResult>& results, double tolerance = 0.03) {
  std::vector<std::string> out;
  for (const auto& r : results) {
    RunConfig c = r.config.get<RunConfig>();
    const std::size_t h = c.pipeline == Pipeline::kSsrpB ? c.window : c.top_k;
    const auto ref = reference_accuracy(r.pipeline, h);
    if (!ref) continue;
    if (std::abs(r.mean_accuracy - *ref) > tolerance) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "%s %s: %.2f%% vs reference %.2f%%", model_name(r.pipeline).c_str(),
                    r.hyper.c_str(), 100.0 * r.mean_accuracy, 100.0 * *ref);
      out.emplace_back(buf);
    }
  }
  return out;
}

}  // namespace ssrp::experiment
