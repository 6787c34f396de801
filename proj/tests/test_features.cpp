#include <gtest/gtest.h>

#include <complex>
#include <numbers>
#include <random>

#include "ssrp/audio/features.hpp"

using namespace ssrp;
using namespace ssrp::audio;

namespace {

AudioClip sine(double hz, double seconds, double amp = 0.5, int sr = 44100) {
  AudioClip c{std::vector<float>(static_cast<std::size_t>(seconds * sr)), sr};
  for (std::size_t i = 0; i < c.samples.size(); ++i)
    c.samples[i] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * hz * double(i) / sr));
  return c;
}

AudioClip noise(std::size_t n, std::uint64_t seed, double amp = 0.25) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  AudioClip c{std::vector<float>(n), 44100};
  for (float& s : c.samples) s = static_cast<float>(u(rng));
  return c;
}

// Direct O(N^2) DFT, periodic Hann, reflect padding and HTK triangles, written
// out independently of the library.
std::vector<double> reference_log_mel(const AudioClip& clip, std::size_t frames_wanted) {
  const std::size_t n_fft = 1024, hop = 512, n_mels = 40, bins = 513;
  const std::size_t n = clip.samples.size(), pad = 512;
  std::vector<double> sig(n + 2 * pad);
  for (std::size_t i = 0; i < sig.size(); ++i) {
    long j = static_cast<long>(i) - static_cast<long>(pad);
    if (j < 0) j = -j;
    if (j >= static_cast<long>(n)) j = 2 * (static_cast<long>(n) - 1) - j;
    sig[i] = clip.samples[static_cast<std::size_t>(j)];
  }
  auto mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  std::vector<double> pts(n_mels + 2);
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = hz(mel(22050.0) * double(i) / double(n_mels + 1));

  std::vector<double> out;
  for (std::size_t t = 0; t < frames_wanted; ++t) {
    std::vector<double> power(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      std::complex<double> acc = 0.0;
      for (std::size_t i = 0; i < n_fft; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) / double(n_fft));
        acc += sig[t * hop + i] * w * std::polar(1.0, -2.0 * std::numbers::pi * double(k * i % n_fft) / double(n_fft));
      }
      power[k] = std::norm(acc);
    }
    for (std::size_t m = 0; m < n_mels; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < bins; ++k) {
        const double f = 44100.0 * double(k) / double(n_fft);
        double w = 0.0;
        if (f > pts[m] && f <= pts[m + 1]) w = (f - pts[m]) / (pts[m + 1] - pts[m]);
        else if (f > pts[m + 1] && f < pts[m + 2]) w = (pts[m + 2] - f) / (pts[m + 2] - pts[m + 1]);
        e += w * power[k];
      }
      out.push_back(10.0 * std::log10(std::max(e, 1e-10)));
    }
  }
  return out;
}

}  // namespace

TEST(MelScale, HtkFormula) {
  EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-9);
  EXPECT_EQ(hz_to_mel(0.0), 0.0);
  for (double f : {10.0, 440.0, 8000.0, 22050.0}) EXPECT_NEAR(mel_to_hz(hz_to_mel(f)), f, 1e-9);
}

TEST(MelFilterbank, ShapeAndInvariants) {
  auto fb = make_mel_filterbank(40, 1024, 44100, 0.0, 22050.0);
  EXPECT_EQ(fb.n_mels, 40u);
  EXPECT_EQ(fb.n_bins, 513u);
  for (std::size_t m = 0; m < 40; ++m) {
    double peak = 0.0;
    for (std::size_t k = 0; k < 513; ++k) {
      const double w = fb.weight(m, k);
      ASSERT_TRUE(std::isfinite(w));
      ASSERT_GE(w, 0.0);
      peak = std::max(peak, w);
    }
    EXPECT_GT(peak, 0.0);
    EXPECT_LE(peak, 1.0);
  }
  for (std::size_t m = 1; m < 40; ++m) EXPECT_GT(fb.centers_hz[m], fb.centers_hz[m - 1]);
}

TEST(MelFilterbank, RejectsEmptyFilters) {
  EXPECT_THROW(make_mel_filterbank(200, 64, 44100, 0.0, 22050.0), Error);
  EXPECT_THROW(make_mel_filterbank(40, 1024, 44100, 0.0, 30000.0), Error);
}

TEST(Fft, MatchesDirectDft) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> nd;
  std::vector<std::complex<double>> a(64);
  for (auto& v : a) v = {nd(rng), nd(rng)};
  auto b = a;
  fft_inplace(b);
  for (std::size_t k = 0; k < 64; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < 64; ++i) acc += a[i] * std::polar(1.0, -2.0 * std::numbers::pi * double(k * i) / 64.0);
    EXPECT_NEAR(std::abs(acc - b[k]), 0.0, 1e-10);
  }
}

TEST(HannWindow, PeriodicForm) {
  auto w = hann_window(1024, 1024);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[512], 1.0, 1e-15);
  EXPECT_NEAR(w[256], 0.5, 1e-15);
  EXPECT_NEAR(w[1], w[1023], 1e-15);
}

TEST(LogMel, FrameCountForFiveSeconds) {
  FeatureConfig cfg;
  EXPECT_EQ(frame_count(220500, cfg), 431u);
  auto spec = log_mel(AudioClip{std::vector<float>(220500, 0.0f), 44100}, cfg);
  EXPECT_EQ(spec.n_frames, 431u);
  EXPECT_EQ(spec.n_mels, 40u);
}

TEST(LogMel, MatchesDirectReference) {
  auto clip = noise(4096, 2);
  for (std::size_t i = 0; i < clip.samples.size(); ++i)
    clip.samples[i] += static_cast<float>(0.3 * std::sin(0.05 * double(i)));
  auto spec = log_mel(clip, FeatureConfig{});
  ASSERT_EQ(spec.n_frames, 9u);
  const auto ref = reference_log_mel(clip, 9);
  for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(spec.values[i], ref[i], 1e-7) << i;
}

std::size_t nearest_filter(const MelFilterbank& fb, double hz) {
  std::size_t best = 0;
  for (std::size_t m = 1; m < fb.n_mels; ++m)
    if (std::abs(fb.centers_hz[m] - hz) < std::abs(fb.centers_hz[best] - hz)) best = m;
  return best;
}

std::size_t loudest_bin(const LogMelSpectrogram& s, std::size_t t) {
  std::size_t arg = 0;
  for (std::size_t m = 1; m < s.n_mels; ++m)
    if (s.at(t, m) > s.at(t, arg)) arg = m;
  return arg;
}

TEST(LogMel, PureToneLandsInNearestBin) {
  FeatureConfig cfg;
  auto fb = make_mel_filterbank(40, 1024, 44100, 0.0, 22050.0);
  const std::size_t nearest = nearest_filter(fb, 440.0);
  // A cosine spanning exactly 440 periods is symmetric about both ends, so
  // the reflect padding continues it seamlessly and every frame sees a tone.
  AudioClip tone{std::vector<float>(44101), 44100};
  for (std::size_t i = 0; i < tone.samples.size(); ++i)
    tone.samples[i] = static_cast<float>(0.5 * std::cos(2.0 * std::numbers::pi * 440.0 * double(i) / 44100.0));
  auto spec = log_mel(tone, cfg, fb);
  for (std::size_t t = 0; t < spec.n_frames; ++t) EXPECT_EQ(loudest_bin(spec, t), nearest) << "frame " << t;

  // A sine's mirror image has a kink at the clip edges; only frames whose
  // window lies inside the clip are clean.
  auto s = log_mel(sine(440.0, 1.0), cfg, fb);
  for (std::size_t t = 1; t + 1 < s.n_frames; ++t) EXPECT_EQ(loudest_bin(s, t), nearest) << "frame " << t;
  for (double hz : {1000.0, 3000.0, 9000.0}) {
    auto h = log_mel(sine(hz, 0.5), cfg, fb);
    for (std::size_t t = 1; t + 1 < h.n_frames; ++t) EXPECT_EQ(loudest_bin(h, t), nearest_filter(fb, hz));
  }
}

TEST(LogMel, SilenceSitsAtFloor) {
  FeatureConfig cfg;
  auto spec = log_mel(AudioClip{std::vector<float>(44100, 0.0f), 44100}, cfg);
  for (double v : spec.values) EXPECT_EQ(v, -100.0);
  EXPECT_EQ(cfg.db_floor(), -100.0);
}

TEST(LogMel, DoublingAmplitudeAddsSixDb) {
  auto a = noise(44100, 3);
  auto b = a;
  for (float& s : b.samples) s *= 2.0f;
  auto sa = log_mel(a, FeatureConfig{}), sb = log_mel(b, FeatureConfig{});
  for (std::size_t i = 0; i < sa.values.size(); ++i)
    ASSERT_NEAR(sb.values[i] - sa.values[i], 10.0 * std::log10(4.0), 1e-9);
}

TEST(LogMel, ScalingNeverDecreasesEntries) {
  for (float c : {1.01f, 1.5f, 3.0f}) {
    auto a = noise(20000, 4, 0.2);
    a.samples.resize(40000, 0.0f);  // includes floored silent frames
    auto b = a;
    for (float& s : b.samples) s *= c;
    auto sa = log_mel(a, FeatureConfig{}), sb = log_mel(b, FeatureConfig{});
    for (std::size_t i = 0; i < sa.values.size(); ++i) ASSERT_GE(sb.values[i], sa.values[i]);
  }
}

TEST(LogMel, SilenceBeyondDurationIsIgnored) {
  auto clip = noise(44100, 5);
  auto longer = clip;
  longer.samples.resize(44100 + 22050, 0.0f);
  FeatureConfig cfg;
  EXPECT_EQ(log_mel(fix_duration(clip, 1.0), cfg).values, log_mel(fix_duration(longer, 1.0), cfg).values);
  auto short_clip = noise(30000, 6);
  auto short_padded = short_clip;
  short_padded.samples.resize(40000, 0.0f);
  EXPECT_EQ(log_mel(fix_duration(short_clip, 1.0), cfg).values, log_mel(fix_duration(short_padded, 1.0), cfg).values);
}

TEST(LogMel, Errors) {
  FeatureConfig cfg;
  try {
    log_mel(AudioClip{std::vector<float>(1000, 0.1f), 44100}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInsufficientData);
  }
  try {
    log_mel(AudioClip{std::vector<float>(48000, 0.1f), 48000}, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kUnsupportedFormat);
  }
}

TEST(ShapeToInput, IdentityTruncatePadDegenerate) {
  auto raw = log_mel(noise(220500, 7), FeatureConfig{});
  ASSERT_EQ(raw.n_frames, 431u);
  auto same = shape_to_input(raw, 431, -100.0);
  EXPECT_EQ(same.n_frames, 431u);

  LogMelSpectrogram big{500, 40, std::vector<double>(500 * 40)};
  std::mt19937_64 rng(8);
  std::normal_distribution<double> nd(-40.0, 10.0);
  for (double& v : big.values) v = nd(rng);
  auto cut = shape_to_input(big, 431, -100.0);
  LogMelSpectrogram first{431, 40, std::vector<double>(big.values.begin(), big.values.begin() + 431 * 40)};
  EXPECT_EQ(cut.values, shape_to_input(first, 431, -100.0).values);

  LogMelSpectrogram tiny{3, 2, {1, 2, 3, 4, 5, 6}};
  auto padded = shape_to_input(tiny, 4, -100.0);
  // Oracle: pad by hand, then population z-score.
  std::vector<double> v{1, 2, 3, 4, 5, 6, -100, -100};
  double mean = 0.0, var = 0.0;
  for (double x : v) mean += x;
  mean /= 8.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = std::sqrt(var / 8.0);
  for (std::size_t i = 0; i < 8; ++i) EXPECT_NEAR(padded.values[i], (v[i] - mean) / sd, 1e-12);

  LogMelSpectrogram flat{10, 40, std::vector<double>(400, -37.0)};
  for (double x : shape_to_input(flat, 431, -37.0).values) EXPECT_EQ(x, 0.0);
}

TEST(ShapeToInput, AlwaysStandardized) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<std::size_t> len(1, 600);
  std::normal_distribution<double> nd(-30.0, 15.0);
  for (int trial = 0; trial < 30; ++trial) {
    LogMelSpectrogram s{len(rng), 40, {}};
    s.values.resize(s.n_frames * 40);
    for (double& v : s.values) v = nd(rng);
    auto out = shape_to_input(s, 431, -100.0);
    ASSERT_EQ(out.n_frames, 431u);
    ASSERT_EQ(out.n_mels, 40u);
    double mean = 0.0, var = 0.0;
    for (double v : out.values) mean += v;
    mean /= double(out.values.size());
    for (double v : out.values) var += (v - mean) * (v - mean);
    EXPECT_NEAR(mean, 0.0, 1e-6);
    EXPECT_NEAR(std::sqrt(var / double(out.values.size())), 1.0, 1e-6);
  }
}

TEST(Lmsp, RoundTripAndCorruption) {
  LogMelSpectrogram s{2, 3, {-100, -12.5, 0.25, 3, 4, 5}};
  auto bytes = encode_lmsp(s);
  EXPECT_EQ(std::string(bytes.data(), 4), "LMSP");
  EXPECT_EQ(bytes.size(), 12u + 6 * 4);
  auto back = decode_lmsp(bytes);
  EXPECT_EQ(back.n_frames, 2u);
  EXPECT_EQ(back.values, s.values);
  bytes.pop_back();
  EXPECT_THROW(decode_lmsp(bytes), Error);
  bytes[0] = 'X';
  EXPECT_THROW(decode_lmsp(bytes), Error);
}

TEST(Lmsp, CsvHasOneFramePerLine) {
  LogMelSpectrogram s{2, 2, {1.5, -2, 3, 0.1}};
  EXPECT_EQ(to_csv(s), "1.5,-2\n3,0.1\n");
}

TEST(FeatureConfig, DigestChangesWithSettings) {
  FeatureConfig a, b;
  b.hop_length = 256;
  EXPECT_NE(a.digest_text(), b.digest_text());
  EXPECT_EQ(a.digest_text(), FeatureConfig{}.digest_text());
}
