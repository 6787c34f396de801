#pragma once

// Log-mel spectrogram extraction: framed Hann-windowed FFT power spectrum,
// HTK-scale triangular mel filterbank, and power-to-dB conversion with a floor.

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "ssrp/audio/wav.hpp"
#include "ssrp/binary_io.hpp"
#include "ssrp/error.hpp"

namespace ssrp::audio {

struct FeatureConfig {
  int sample_rate = 44100;
  std::size_t n_fft = 1024;
  std::size_t win_length = 1024;
  std::size_t hop_length = 512;
  std::size_t n_mels = 40;
  double f_min = 0.0;
  double f_max = 22050.0;
  double power_floor = 1e-10;
  bool center = true;  // reflect-pad n_fft/2 on both sides

  double db_floor() const { return 10.0 * std::log10(power_floor); }

  /// Stable text form, used for cache keys.
  std::string digest_text() const {
    std::ostringstream os;
    os << "sr=" << sample_rate << ";n_fft=" << n_fft << ";win=" << win_length
       << ";hop=" << hop_length << ";mels=" << n_mels << ";fmin=" << io::format_double(f_min)
       << ";fmax=" << io::format_double(f_max) << ";floor=" << io::format_double(power_floor)
       << ";center=" << center << ";mel=htk;window=hann";
    return os.str();
  }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// In-place iterative radix-2 FFT. Size must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  require(n > 0 && (n & (n - 1)) == 0, ErrorKind::kInvalidArgument,
          "FFT size must be a power of two");
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> step(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        auto u = a[i + k];
        auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= step;
      }
    }
  }
}

/// Periodic Hann window of `win_length`, centred inside `n_fft` zeros.
inline std::vector<double> hann_window(std::size_t win_length, std::size_t n_fft) {
  std::vector<double> w(n_fft, 0.0);
  const std::size_t offset = (n_fft - win_length) / 2;
  for (std::size_t i = 0; i < win_length; ++i)
    w[offset + i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                         static_cast<double>(win_length));
  return w;
}

struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  double f_min = 0.0;
  double f_max = 0.0;
  std::vector<double> weights;     // n_mels x n_bins, row-major
  std::vector<double> centers_hz;  // peak frequency of each filter

  double weight(std::size_t m, std::size_t k) const { return weights[m * n_bins + k]; }
};

/// Triangular filters with unit peak, edges equally spaced on the HTK mel scale.
inline MelFilterbank make_mel_filterbank(std::size_t n_mels, std::size_t n_fft, int sample_rate,
                                         double f_min, double f_max) {
  require(n_mels > 0, ErrorKind::kInvalidArgument, "n_mels must be positive");
  require(f_min >= 0.0 && f_max > f_min && f_max <= sample_rate / 2.0,
          ErrorKind::kInvalidArgument, "mel range must satisfy 0 <= f_min < f_max <= sr/2");
  MelFilterbank fb;
  fb.n_mels = n_mels;
  fb.n_bins = n_fft / 2 + 1;
  fb.f_min = f_min;
  fb.f_max = f_max;
  fb.weights.assign(n_mels * fb.n_bins, 0.0);

  const double mel_lo = hz_to_mel(f_min);
  const double mel_hi = hz_to_mel(f_max);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(n_mels + 1));

  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(n_fft);
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    fb.centers_hz.push_back(mid);
    bool any = false;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = bin_hz * static_cast<double>(k);
      const double w = std::max(0.0, std::min((f - lo) / (mid - lo), (hi - f) / (hi - mid)));
      fb.weights[m * fb.n_bins + k] = w;
      any = any || w > 0.0;
    }
    require(any, ErrorKind::kInvalidArgument,
            "mel filter " + std::to_string(m) + " covers no FFT bin; use fewer mels or a larger FFT");
  }
  return fb;
}

/// Time-major log-mel matrix: `n_frames` rows of `n_mels` dB values.
struct LogMelSpectrogram {
  std::size_t n_frames = 0;
  std::size_t n_mels = 0;
  std::vector<double> values;

  double& at(std::size_t t, std::size_t f) { return values[t * n_mels + f]; }
  double at(std::size_t t, std::size_t f) const { return values[t * n_mels + f]; }
};

/// Frame count produced by `log_mel` for a clip of `n_samples`.
inline std::size_t frame_count(std::size_t n_samples, const FeatureConfig& cfg) {
  if (cfg.center) return 1 + n_samples / cfg.hop_length;
  return n_samples < cfg.n_fft ? 0 : 1 + (n_samples - cfg.n_fft) / cfg.hop_length;
}

inline LogMelSpectrogram log_mel(const AudioClip& clip, const FeatureConfig& cfg,
                                 const MelFilterbank& fb) {
  validate(clip);
  if (clip.sample_rate != cfg.sample_rate)
    fail(ErrorKind::kUnsupportedFormat,
         "expected " + std::to_string(cfg.sample_rate) + " Hz audio, got " +
             std::to_string(clip.sample_rate) + " Hz (resampling is not supported)");
  require(cfg.win_length <= cfg.n_fft && cfg.hop_length > 0, ErrorKind::kInvalidArgument,
          "window must fit the FFT and hop must be positive");
  require(fb.n_bins == cfg.n_fft / 2 + 1 && fb.n_mels == cfg.n_mels, ErrorKind::kShape,
          "filterbank does not match the feature configuration");
  if (clip.samples.size() < cfg.win_length)
    fail(ErrorKind::kInsufficientData, "clip shorter than one analysis window");

  std::vector<double> signal;
  const std::size_t n = clip.samples.size();
  if (cfg.center) {
    const std::size_t pad = cfg.n_fft / 2;
    require(n > pad, ErrorKind::kInsufficientData, "clip too short for reflect padding");
    signal.resize(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) {
      signal[i] = clip.samples[pad - i];
      signal[pad + n + i] = clip.samples[n - 2 - i];
    }
    for (std::size_t i = 0; i < n; ++i) signal[pad + i] = clip.samples[i];
  } else {
    signal.assign(clip.samples.begin(), clip.samples.end());
  }

  const std::size_t frames = frame_count(n, cfg);
  const auto window = hann_window(cfg.win_length, cfg.n_fft);
  LogMelSpectrogram out;
  out.n_frames = frames;
  out.n_mels = cfg.n_mels;
  out.values.resize(frames * cfg.n_mels);

  std::vector<std::complex<double>> buf(cfg.n_fft);
  std::vector<double> power(fb.n_bins);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * cfg.hop_length;
    for (std::size_t i = 0; i < cfg.n_fft; ++i) buf[i] = {signal[start + i] * window[i], 0.0};
    fft_inplace(buf);
    for (std::size_t k = 0; k < fb.n_bins; ++k) power[k] = std::norm(buf[k]);
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      double e = 0.0;
      const double* row = &fb.weights[m * fb.n_bins];
      for (std::size_t k = 0; k < fb.n_bins; ++k) e += row[k] * power[k];
      out.at(t, m) = 10.0 * std::log10(std::max(e, cfg.power_floor));
    }
  }
  return out;
}

inline LogMelSpectrogram log_mel(const AudioClip& clip, const FeatureConfig& cfg) {
  return log_mel(clip, cfg,
                 make_mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.sample_rate, cfg.f_min, cfg.f_max));
}

/// Pads (with `pad_db`) or truncates the time axis to `target_frames`, then
/// z-scores all entries with the population standard deviation. A spectrogram
/// whose std falls below 1e-8 maps to all zeros.
inline LogMelSpectrogram shape_to_input(const LogMelSpectrogram& spec, std::size_t target_frames,
                                        double pad_db) {
  require(target_frames > 0, ErrorKind::kInvalidArgument, "target_frames must be positive");
  LogMelSpectrogram out;
  out.n_frames = target_frames;
  out.n_mels = spec.n_mels;
  out.values.assign(target_frames * spec.n_mels, pad_db);
  const std::size_t keep = std::min(target_frames, spec.n_frames) * spec.n_mels;
  std::copy_n(spec.values.begin(), keep, out.values.begin());

  const double count = static_cast<double>(out.values.size());
  double mean = 0.0;
  for (double v : out.values) mean += v;
  mean /= count;
  double var = 0.0;
  for (double v : out.values) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / count);
  if (sd < 1e-8) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
  }
  for (double& v : out.values) v = (v - mean) / sd;
  return out;
}

// ---- serialization -------------------------------------------------------

/// "LMSP", u32 frames, u32 mels, then frames*mels float32, frame-major.
inline std::vector<char> encode_lmsp(const LogMelSpectrogram& spec) {
  io::BinaryWriter w;
  w.bytes("LMSP");
  w.u32(static_cast<std::uint32_t>(spec.n_frames));
  w.u32(static_cast<std::uint32_t>(spec.n_mels));
  for (double v : spec.values) w.f32(static_cast<float>(v));
  return w.buffer();
}

inline LogMelSpectrogram decode_lmsp(std::span<const char> bytes) {
  io::BinaryReader rd(bytes);
  if (rd.remaining() < 12 || rd.bytes(4) != "LMSP") fail(ErrorKind::kDecode, "not an LMSP file");
  LogMelSpectrogram spec;
  spec.n_frames = rd.u32();
  spec.n_mels = rd.u32();
  const std::size_t count = spec.n_frames * spec.n_mels;
  if (rd.remaining() != count * sizeof(float))
    fail(ErrorKind::kDecode, "LMSP payload size does not match header");
  spec.values.resize(count);
  for (double& v : spec.values) v = rd.f32();
  return spec;
}

inline void save_lmsp(const LogMelSpectrogram& spec, const std::string& path) {
  auto bytes = encode_lmsp(spec);
  io::write_text(path, std::string_view(bytes.data(), bytes.size()));
}

inline LogMelSpectrogram load_lmsp(const std::string& path) {
  return decode_lmsp(io::read_file(path));
}

/// One frame per line, mel bins comma-separated.
inline std::string to_csv(const LogMelSpectrogram& spec) {
  std::string s;
  for (std::size_t t = 0; t < spec.n_frames; ++t) {
    for (std::size_t f = 0; f < spec.n_mels; ++f) {
      if (f) s += ',';
      s += io::format_double(spec.at(t, f));
    }
    s += '\n';
  }
  return s;
}

}  // namespace ssrp::audio
