#pragma once

// RIFF/WAVE decoding (PCM16, float32; any channel count, downmixed to mono)
// and PCM16 encoding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "ssrp/binary_io.hpp"
#include "ssrp/error.hpp"

namespace ssrp::audio {

struct AudioClip {
  std::vector<float> samples;  // amplitudes in [-1, 1]
  int sample_rate = 0;         // Hz

  double duration() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

inline void validate(const AudioClip& clip) {
  require(clip.sample_rate > 0, ErrorKind::kInvalidArgument, "sample rate must be positive");
  require(!clip.samples.empty(), ErrorKind::kInsufficientData, "audio clip is empty");
  require(std::all_of(clip.samples.begin(), clip.samples.end(),
                      [](float s) { return std::isfinite(s); }),
          ErrorKind::kDecode, "audio clip contains non-finite samples");
}

namespace detail {

inline constexpr std::uint16_t kFormatPcm = 1;
inline constexpr std::uint16_t kFormatFloat = 3;
inline constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct WavFormat {
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
};

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

inline WavFormat parse_fmt(std::span<const char> chunk) {
  if (chunk.size() < 16) fail(ErrorKind::kDecode, "fmt chunk too short");
  WavFormat f;
  f.format = load_le<std::uint16_t>(chunk.data());
  f.channels = load_le<std::uint16_t>(chunk.data() + 2);
  f.sample_rate = load_le<std::uint32_t>(chunk.data() + 4);
  f.bits = load_le<std::uint16_t>(chunk.data() + 14);
  if (f.format == kFormatExtensible) {
    // cbSize(2) validBits(2) channelMask(4) then the 16-byte subformat GUID,
    // whose first two bytes carry the actual format tag.
    if (chunk.size() < 26) fail(ErrorKind::kDecode, "extensible fmt chunk too short");
    f.format = load_le<std::uint16_t>(chunk.data() + 24);
  }
  return f;
}

}  // namespace detail

/// Decodes an in-memory RIFF/WAVE image.
inline AudioClip decode_wav(std::span<const char> bytes) {
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    fail(ErrorKind::kDecode, "not a RIFF/WAVE file");

  detail::WavFormat fmt;
  bool have_fmt = false;
  std::span<const char> data;
  bool have_data = false;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::string id(bytes.data() + pos, 4);
    auto size = detail::load_le<std::uint32_t>(bytes.data() + pos + 4);
    pos += 8;
    if (size > bytes.size() - pos) {
      // Some writers leave a bogus data size on streamed output; clamp it.
      if (id != "data") fail(ErrorKind::kDecode, "chunk '" + id + "' overruns file");
      size = static_cast<std::uint32_t>(bytes.size() - pos);
    }
    auto payload = bytes.subspan(pos, size);
    if (id == "fmt ") {
      fmt = detail::parse_fmt(payload);
      have_fmt = true;
    } else if (id == "data") {
      data = payload;
      have_data = true;
    }
    pos += size + (size & 1u);
  }
  if (!have_fmt) fail(ErrorKind::kDecode, "missing fmt chunk");
  if (!have_data) fail(ErrorKind::kDecode, "missing data chunk");
  if (fmt.channels == 0) fail(ErrorKind::kDecode, "zero channels");
  if (fmt.sample_rate == 0) fail(ErrorKind::kDecode, "zero sample rate");

  const bool pcm16 = fmt.format == detail::kFormatPcm && fmt.bits == 16;
  const bool f32 = fmt.format == detail::kFormatFloat && fmt.bits == 32;
  if (!pcm16 && !f32)
    fail(ErrorKind::kUnsupportedFormat,
         "unsupported WAV encoding (format " + std::to_string(fmt.format) + ", " +
             std::to_string(fmt.bits) + " bits)");

  const std::size_t sample_bytes = fmt.bits / 8;
  const std::size_t frame_bytes = sample_bytes * fmt.channels;
  const std::size_t n_frames = data.size() / frame_bytes;
  if (n_frames == 0) fail(ErrorKind::kDecode, "data chunk holds no complete frame");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt.sample_rate);
  clip.samples.resize(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const char* frame = data.data() + i * frame_bytes;
    double acc = 0.0;
    for (std::size_t ch = 0; ch < fmt.channels; ++ch) {
      const char* p = frame + ch * sample_bytes;
      acc += pcm16 ? detail::load_le<std::int16_t>(p) / 32768.0
                   : static_cast<double>(detail::load_le<float>(p));
    }
    clip.samples[i] = static_cast<float>(acc / fmt.channels);
  }
  validate(clip);
  return clip;
}

inline AudioClip load_wav(const std::string& path) {
  auto bytes = io::read_file(path);
  try {
    return decode_wav(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

/// Encodes a mono clip as 16-bit PCM. Samples are clipped to [-1, 1) and
/// rounded to the nearest code.
inline std::vector<char> encode_wav_pcm16(const AudioClip& clip) {
  validate(clip);
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  io::BinaryWriter w;
  w.bytes("RIFF");
  w.u32(36 + 2 * n);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.scalar<std::uint16_t>(detail::kFormatPcm);
  w.scalar<std::uint16_t>(1);
  w.u32(static_cast<std::uint32_t>(clip.sample_rate));
  w.u32(static_cast<std::uint32_t>(clip.sample_rate) * 2);
  w.scalar<std::uint16_t>(2);
  w.scalar<std::uint16_t>(16);
  w.bytes("data");
  w.u32(2 * n);
  for (float s : clip.samples) {
    double code = std::round(static_cast<double>(s) * 32768.0);
    code = std::clamp(code, -32768.0, 32767.0);
    w.scalar<std::int16_t>(static_cast<std::int16_t>(code));
  }
  return w.buffer();
}

inline void save_wav(const AudioClip& clip, const std::string& path) {
  auto bytes = encode_wav_pcm16(clip);
  io::write_text(path, std::string_view(bytes.data(), bytes.size()));
}

/// Truncates or zero-pads (at the end) to round(seconds * sample_rate) samples.
inline AudioClip fix_duration(const AudioClip& clip, double seconds) {
  require(seconds > 0.0, ErrorKind::kInvalidArgument, "duration must be positive");
  require(clip.sample_rate > 0, ErrorKind::kInvalidArgument, "sample rate must be positive");
  const auto target = static_cast<std::size_t>(std::llround(seconds * clip.sample_rate));
  AudioClip out = clip;
  out.samples.resize(target, 0.0f);
  return out;
}

}  // namespace ssrp::audio
