#pragma once

// Dataset manifests, cross-validation folds, and cached feature extraction.

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ssrp/audio/features.hpp"
#include "ssrp/audio/wav.hpp"
#include "ssrp/binary_io.hpp"
#include "ssrp/error.hpp"

namespace ssrp::experiment {

inline constexpr int kFolds = 5;
inline constexpr int kMaxClasses = 50;

struct ManifestEntry {
  std::string filename;
  int fold = 0;    // 1..5
  int target = 0;  // 0..49
  std::string category;

  bool operator==(const ManifestEntry&) const = default;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::size_t n_classes() const {
    int hi = -1;
    for (const auto& e : entries) hi = std::max(hi, e.target);
    return static_cast<std::size_t>(hi + 1);
  }
};

/// Checks fold range, filename uniqueness, five non-empty folds, and that
/// every class occurs in every fold.
inline void validate_manifest(const DatasetManifest& m) {
  if (m.entries.empty()) fail(ErrorKind::kValidation, "manifest has no entries");
  std::set<std::string> names;
  std::map<int, std::set<int>> classes_per_fold;
  std::set<int> classes;
  for (const auto& e : m.entries) {
    if (e.fold < 1 || e.fold > kFolds)
      fail(ErrorKind::kValidation, e.filename + ": fold " + std::to_string(e.fold) + " outside 1-5");
    if (e.target < 0 || e.target >= kMaxClasses)
      fail(ErrorKind::kValidation, e.filename + ": target " + std::to_string(e.target) + " outside 0-49");
    if (!names.insert(e.filename).second) fail(ErrorKind::kValidation, "duplicate filename " + e.filename);
    classes_per_fold[e.fold].insert(e.target);
    classes.insert(e.target);
  }
  for (int f = 1; f <= kFolds; ++f) {
    if (!classes_per_fold.count(f)) fail(ErrorKind::kValidation, "fold " + std::to_string(f) + " is empty");
    if (classes_per_fold[f] != classes)
      fail(ErrorKind::kValidation, "fold " + std::to_string(f) + " is missing some classes (not stratified)");
  }
}

inline DatasetManifest parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.find_first_not_of(" \t\r") == std::string::npos)
    fail(ErrorKind::kSchema, "manifest is empty");
  const auto header = io::split_csv_line(line);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorKind::kSchema, "manifest lacks column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_file = column("filename"), c_fold = column("fold"), c_target = column("target"),
                    c_cat = column("category");
  DatasetManifest m;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = io::split_csv_line(line);
    if (cells.size() != header.size())
      fail(ErrorKind::kSchema, "manifest line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                                   " cells, header has " + std::to_string(header.size()));
    ManifestEntry e;
    e.filename = cells[c_file];
    e.category = cells[c_cat];
    try {
      e.fold = static_cast<int>(io::parse_int(cells[c_fold]));
      e.target = static_cast<int>(io::parse_int(cells[c_target]));
    } catch (const Error&) {
      fail(ErrorKind::kValidation, "manifest line " + std::to_string(lineno) + ": non-integer fold or target");
    }
    m.entries.push_back(std::move(e));
  }
  validate_manifest(m);
  return m;
}

inline DatasetManifest load_manifest(const std::string& path) { return parse_manifest(io::read_text(path)); }

inline std::string manifest_csv(const DatasetManifest& m) {
  std::string s = "filename,fold,target,category\n";
  for (const auto& e : m.entries)
    s += e.filename + "," + std::to_string(e.fold) + "," + std::to_string(e.target) + "," + e.category + "\n";
  return s;
}

struct FoldSplit {
  std::vector<std::size_t> train;       // manifest indices
  std::vector<std::size_t> validation;  // manifest indices, fold == held_out
};

inline FoldSplit make_folds(const DatasetManifest& m, int held_out) {
  if (held_out < 1 || held_out > kFolds)
    fail(ErrorKind::kInvalidArgument, "held-out fold " + std::to_string(held_out) + " outside 1-5");
  FoldSplit s;
  for (std::size_t i = 0; i < m.entries.size(); ++i)
    (m.entries[i].fold == held_out ? s.validation : s.train).push_back(i);
  return s;
}

/// Raw (unshaped) log-mel spectrograms aligned with a manifest.
struct Dataset {
  DatasetManifest manifest;
  std::vector<audio::LogMelSpectrogram> spectrograms;
  double pad_db = -100.0;  // dB floor used when padding the time axis

  std::size_t size() const { return spectrograms.size(); }
  std::size_t n_classes() const { return manifest.n_classes(); }
};

/// fix_duration + log_mel for one clip.
inline audio::LogMelSpectrogram extract(const audio::AudioClip& clip, const audio::FeatureConfig& cfg,
                                        const audio::MelFilterbank& fb, double seconds) {
  return audio::log_mel(audio::fix_duration(clip, seconds), cfg, fb);
}

inline Dataset dataset_from_clips(const std::vector<audio::AudioClip>& clips, DatasetManifest manifest,
                                  const audio::FeatureConfig& cfg, double seconds) {
  require(clips.size() == manifest.entries.size(), ErrorKind::kShape, "clip count differs from manifest");
  const auto fb = audio::make_mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.f_min, cfg.f_max);
  Dataset d;
  d.manifest = std::move(manifest);
  d.pad_db = cfg.db_floor();
  d.spectrograms.reserve(clips.size());
  for (const auto& c : clips) d.spectrograms.push_back(extract(c, cfg, fb, seconds));
  return d;
}

/// Cache file name for a clip: digest of its bytes plus digest of the
/// extraction settings.
inline std::string cache_key(std::span<const char> wav_bytes, const audio::FeatureConfig& cfg, double seconds) {
  const auto settings = cfg.digest_text() + ";seconds=" + io::format_double(seconds);
  return io::hex64(io::fnv1a(wav_bytes)) + "_" + io::hex64(io::fnv1a_text(settings)) + ".lmsp";
}

/// Loads every manifest clip from `audio_dir`, reusing cached spectrograms
/// under `cache_dir` when present and writing them otherwise. An empty
/// `cache_dir` disables caching.
inline Dataset extract_features(const std::string& audio_dir, DatasetManifest manifest, const std::string& cache_dir,
                                const audio::FeatureConfig& cfg, double seconds, std::size_t* cache_hits = nullptr) {
  namespace fs = std::filesystem;
  if (!cache_dir.empty()) fs::create_directories(cache_dir);
  const auto fb = audio::make_mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.f_min, cfg.f_max);
  Dataset d;
  d.pad_db = cfg.db_floor();
  std::size_t hits = 0;
  for (const auto& e : manifest.entries) {
    const std::string path = (fs::path(audio_dir) / e.filename).string();
    const auto bytes = io::read_file(path);
    fs::path cached;
    if (!cache_dir.empty()) {
      cached = fs::path(cache_dir) / cache_key(bytes, cfg, seconds);
      if (fs::exists(cached)) {
        d.spectrograms.push_back(audio::load_lmsp(cached.string()));
        ++hits;
        continue;
      }
    }
    audio::AudioClip clip;
    try {
      clip = audio::decode_wav(bytes);
    } catch (const Error& err) {
      throw Error(err.kind(), path + ": " + err.what());
    }
    d.spectrograms.push_back(extract(clip, cfg, fb, seconds));
    // Round through float32 so fresh and cached runs see identical values.
    for (double& v : d.spectrograms.back().values) v = static_cast<float>(v);
    if (!cached.empty()) audio::save_lmsp(d.spectrograms.back(), cached.string());
  }
  d.manifest = std::move(manifest);
  if (cache_hits) *cache_hits = hits;
  return d;
}

}  // namespace ssrp::experiment
