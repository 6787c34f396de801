#pragma once

// Deterministic synthetic audio classes for desk-scale experiments. Classes
// differ mainly in temporal structure: sustained tones and chirps versus
// sparse click trains and amplitude-modulated noise.

#include <cmath>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssrp/audio/wav.hpp"
#include "ssrp/error.hpp"
#include "ssrp/experiment/dataset.hpp"

namespace ssrp::experiment {

enum class SignalKind { kTone, kClickTrain, kAmNoise, kChirp };

inline std::string to_string(SignalKind k) {
  switch (k) {
    case SignalKind::kTone: return "tone";
    case SignalKind::kClickTrain: return "click_train";
    case SignalKind::kAmNoise: return "am_noise";
    case SignalKind::kChirp: return "chirp";
  }
  return "?";
}

inline SignalKind parse_signal_kind(const std::string& s) {
  if (s == "tone") return SignalKind::kTone;
  if (s == "click_train") return SignalKind::kClickTrain;
  if (s == "am_noise") return SignalKind::kAmNoise;
  if (s == "chirp") return SignalKind::kChirp;
  fail(ErrorKind::kValidation, "unknown signal kind '" + s + "'");
}

/// One class: tone frequency / chirp range in [f_lo, f_hi] Hz, click or
/// modulation rate drawn from [rate_lo, rate_hi] Hz.
struct ClassGenerator {
  std::string name;
  SignalKind kind = SignalKind::kTone;
  double f_lo = 1000.0, f_hi = 1200.0;
  double rate_lo = 4.0, rate_hi = 6.0;
  double amplitude = 0.5;
};

struct SyntheticSpec {
  std::size_t n_classes = 4;
  std::size_t clips_per_class = 8;
  double duration = 1.0;  // seconds
  int sample_rate = 44100;
  double noise_floor = 0.01;
  std::uint64_t seed = 0;
  std::vector<ClassGenerator> classes;  // empty: default_generators(n_classes)
};

/// Cycles tone, click train, AM noise, chirp; later cycles move to higher bands.
inline std::vector<ClassGenerator> default_generators(std::size_t n_classes) {
  std::vector<ClassGenerator> g;
  for (std::size_t c = 0; c < n_classes; ++c) {
    const double shift = 1.0 + 0.6 * static_cast<double>(c / 4);
    ClassGenerator cg;
    switch (c % 4) {
      case 0:
        cg = {"tone", SignalKind::kTone, 900.0 * shift, 1100.0 * shift, 0.0, 0.0, 0.5};
        break;
      case 1:
        cg = {"click_train", SignalKind::kClickTrain, 0.0, 0.0, 3.0 * shift, 5.0 * shift, 0.8};
        break;
      case 2:
        cg = {"am_noise", SignalKind::kAmNoise, 0.0, 0.0, 1.5 * shift, 2.5 * shift, 0.3};
        break;
      default:
        cg = {"chirp", SignalKind::kChirp, 400.0 * shift, 4000.0 * shift, 0.0, 0.0, 0.5};
        break;
    }
    cg.name += "_" + std::to_string(c);
    g.push_back(cg);
  }
  return g;
}

inline void to_json(nlohmann::json& j, const ClassGenerator& g) {
  j = {{"name", g.name},       {"kind", to_string(g.kind)}, {"f_lo", g.f_lo},          {"f_hi", g.f_hi},
       {"rate_lo", g.rate_lo}, {"rate_hi", g.rate_hi},      {"amplitude", g.amplitude}};
}

inline void from_json(const nlohmann::json& j, ClassGenerator& g) {
  g.name = j.value("name", g.name);
  if (j.contains("kind")) g.kind = parse_signal_kind(j.at("kind").get<std::string>());
  g.f_lo = j.value("f_lo", g.f_lo);
  g.f_hi = j.value("f_hi", g.f_hi);
  g.rate_lo = j.value("rate_lo", g.rate_lo);
  g.rate_hi = j.value("rate_hi", g.rate_hi);
  g.amplitude = j.value("amplitude", g.amplitude);
}

inline void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = {{"n_classes", s.n_classes},     {"clips_per_class", s.clips_per_class}, {"duration", s.duration},
       {"sample_rate", s.sample_rate}, {"noise_floor", s.noise_floor},         {"seed", s.seed},
       {"classes", s.classes}};
}

inline void from_json(const nlohmann::json& j, SyntheticSpec& s) {
  s.n_classes = j.value("n_classes", s.n_classes);
  s.clips_per_class = j.value("clips_per_class", s.clips_per_class);
  s.duration = j.value("duration", s.duration);
  s.sample_rate = j.value("sample_rate", s.sample_rate);
  s.noise_floor = j.value("noise_floor", s.noise_floor);
  s.seed = j.value("seed", s.seed);
  s.classes = j.value("classes", s.classes);
}

struct SyntheticData {
  std::vector<audio::AudioClip> clips;
  DatasetManifest manifest;
};

namespace detail {

inline audio::AudioClip render(const ClassGenerator& g, const SyntheticSpec& spec, std::mt19937_64& rng) {
  const std::size_t n = static_cast<std::size_t>(std::llround(spec.duration * spec.sample_rate));
  const double sr = spec.sample_rate;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  std::vector<double> x(n, 0.0);
  switch (g.kind) {
    case SignalKind::kTone: {
      const double f = uniform(g.f_lo, g.f_hi), phase = uniform(0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i) x[i] = g.amplitude * std::sin(kTwoPi * f * i / sr + phase);
      break;
    }
    case SignalKind::kClickTrain: {
      // Short exponentially decaying noise bursts at a random rate and offset.
      const double rate = uniform(g.rate_lo, g.rate_hi);
      const double period = sr / rate;
      const std::size_t burst = static_cast<std::size_t>(0.005 * sr);
      for (double start = uniform(0.0, period); start < static_cast<double>(n); start += period) {
        const auto s0 = static_cast<std::size_t>(start);
        for (std::size_t k = 0; k < burst && s0 + k < n; ++k)
          x[s0 + k] += g.amplitude * std::exp(-static_cast<double>(k) / (0.2 * burst)) * noise(rng);
      }
      break;
    }
    case SignalKind::kAmNoise: {
      const double rate = uniform(g.rate_lo, g.rate_hi), phase = uniform(0.0, kTwoPi);
      for (std::size_t i = 0; i < n; ++i)
        x[i] = g.amplitude * (0.5 + 0.5 * std::sin(kTwoPi * rate * i / sr + phase)) * noise(rng);
      break;
    }
    case SignalKind::kChirp: {
      // Linear sweep f_lo -> f_hi across the clip, start frequency jittered.
      const double jitter = uniform(0.9, 1.1);
      const double f0 = g.f_lo * jitter, f1 = g.f_hi * jitter;
      const double dur = static_cast<double>(n) / sr;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = i / sr;
        x[i] = g.amplitude * std::sin(kTwoPi * (f0 * t + 0.5 * (f1 - f0) / dur * t * t));
      }
      break;
    }
  }
  audio::AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    clip.samples[i] = static_cast<float>(std::clamp(x[i] + spec.noise_floor * noise(rng), -1.0, 1.0));
  return clip;
}

}  // namespace detail

/// Renders `clips_per_class` clips per class. Clip i of every class goes to
/// fold (i mod 5) + 1, so folds stay stratified whenever clips_per_class >= 5.
inline SyntheticData synthesize_dataset(const SyntheticSpec& spec) {
  require(spec.n_classes >= 1 && spec.n_classes <= static_cast<std::size_t>(kMaxClasses),
          ErrorKind::kInvalidArgument, "n_classes must lie in 1-50");
  require(spec.clips_per_class >= static_cast<std::size_t>(kFolds), ErrorKind::kInvalidArgument,
          "clips_per_class must be >= 5 so every class reaches every fold");
  require(spec.duration > 0.0 && spec.sample_rate > 0, ErrorKind::kInvalidArgument,
          "duration and sample rate must be positive");
  const auto gens = spec.classes.empty() ? default_generators(spec.n_classes) : spec.classes;
  require(gens.size() == spec.n_classes, ErrorKind::kValidation, "class generator count differs from n_classes");

  SyntheticData out;
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    for (std::size_t i = 0; i < spec.clips_per_class; ++i) {
      std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                        static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(i)};
      std::mt19937_64 rng(seq);
      out.clips.push_back(detail::render(gens[c], spec, rng));
      out.manifest.entries.push_back({"synth_c" + std::to_string(c) + "_" + std::to_string(i) + ".wav",
                                      static_cast<int>(i % kFolds) + 1, static_cast<int>(c), gens[c].name});
    }
  }
  validate_manifest(out.manifest);
  return out;
}

}  // namespace ssrp::experiment
