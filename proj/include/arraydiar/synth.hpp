#pragma once

// Synthetic far-field scenes: each source is a plane wave from a fixed
// azimuth, fractionally delayed per microphone with a 32-tap windowed sinc,
// gated by its talk schedule, summed, and mixed with white sensor noise.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "arraydiar/audio.hpp"
#include "arraydiar/common.hpp"
#include "arraydiar/config.hpp"
#include "arraydiar/embeddings.hpp"
#include "arraydiar/geometry.hpp"
#include "arraydiar/rttm.hpp"

namespace arraydiar {

enum class SourceSignal { kSpeechNoise, kWhiteNoise, kToneComplex, kFile };

struct SceneSource {
  double azimuth = 0.0;
  std::vector<std::pair<double, double>> schedule;  // [start, end) seconds
  SourceSignal signal = SourceSignal::kSpeechNoise;
  std::string file;   // for kFile
  std::string label;  // defaults to src<i>
};

struct SceneSpec {
  MicArrayGeometry geometry;
  std::vector<SceneSource> sources;
  double snr_db = std::numeric_limits<double>::infinity();  // per-channel, vs. one unit-power source
  double duration = 10.0;
  std::uint64_t seed = 0;
  double gain = 0.05;  // output scale applied to the unit-power mix
  std::string recording_id = "scene";

  void validate() const {
    if (!(duration > 0.0)) throw Error("scene: duration must be > 0");
    if (!(gain > 0.0)) throw Error("scene: gain must be > 0");
    for (const auto& s : sources) {
      if (!(s.azimuth >= 0.0 && s.azimuth < 360.0)) throw Error("scene: source azimuth must lie in [0, 360)");
      for (const auto& [a, b] : s.schedule)
        if (a < 0.0 || b <= a || b > duration + 1e-9) throw Error("scene: schedule intervals must lie within the duration");
    }
  }

  static SceneSpec from_config(const KeyValueConfig& cfg) {
    SceneSpec spec{MicArrayGeometry::from_config(cfg), {}};
    spec.duration = cfg.number("duration", spec.duration);
    spec.snr_db = cfg.number("snr_db", spec.snr_db);
    spec.seed = static_cast<std::uint64_t>(cfg.number("seed", 0.0));
    spec.gain = cfg.number("gain", spec.gain);
    spec.recording_id = cfg.string("recording_id", spec.recording_id);
    for (const auto& j : cfg.all("source")) {
      SceneSource src;
      src.azimuth = j.at("azimuth").get<double>();
      for (const auto& iv : j.at("schedule")) src.schedule.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
      const std::string kind = j.value("signal", std::string("speech"));
      if (kind == "speech") src.signal = SourceSignal::kSpeechNoise;
      else if (kind == "white") src.signal = SourceSignal::kWhiteNoise;
      else if (kind == "tones") src.signal = SourceSignal::kToneComplex;
      else if (kind == "file") src.signal = SourceSignal::kFile;
      else throw Error("scene: unknown signal kind " + kind);
      src.file = j.value("file", std::string());
      src.label = j.value("label", std::string());
      spec.sources.push_back(std::move(src));
    }
    spec.validate();
    return spec;
  }

  static SceneSpec load(const std::string& path) { return from_config(KeyValueConfig::load(path)); }
};

struct RenderedScene {
  MultichannelClip clip;
  SegmentList reference;
  SegmentList vad;
};

namespace detail {

inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(kPi * x) / (kPi * x); }

/// Linear-phase band-pass FIR (windowed sinc, Blackman), edges in Hz.
inline std::vector<double> bandpass_fir(double low_hz, double high_hz, double rate, int taps = 257) {
  high_hz = std::min(high_hz, 0.45 * rate);
  const double f1 = low_hz / rate, f2 = high_hz / rate;
  const int m = (taps - 1) / 2;
  std::vector<double> h(static_cast<std::size_t>(taps));
  for (int n = 0; n < taps; ++n) {
    const double x = n - m;
    const double w = 0.42 - 0.5 * std::cos(2 * kPi * n / (taps - 1)) + 0.08 * std::cos(4 * kPi * n / (taps - 1));
    h[static_cast<std::size_t>(n)] = w * (2 * f2 * sinc(2 * f2 * x) - 2 * f1 * sinc(2 * f1 * x));
  }
  return h;
}

inline void normalize_power(std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p += v * v;
  p /= static_cast<double>(std::max<std::size_t>(1, x.size()));
  if (p > 0.0)
    for (double& v : x) v /= std::sqrt(p);
}

inline std::vector<double> speech_like_noise(std::size_t n, double rate, std::mt19937_64& rng) {
  const auto h = bandpass_fir(300.0, 3400.0, rate);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> white(n + h.size() - 1);
  for (double& v : white) v = g(rng);
  // Linear convolution through the FFT; keeps the fully overlapped part.
  std::size_t nfft = 1;
  while (nfft < white.size() + h.size() - 1) nfft <<= 1;
  Eigen::FFT<double> fft;
  std::vector<double> a(nfft, 0.0), b(nfft, 0.0);
  std::copy(white.begin(), white.end(), a.begin());
  std::copy(h.begin(), h.end(), b.begin());
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, a);
  fft.fwd(fb, b);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> conv;
  fft.inv(conv, fa);
  std::vector<double> out(conv.begin() + static_cast<std::ptrdiff_t>(h.size() - 1),
                          conv.begin() + static_cast<std::ptrdiff_t>(h.size() - 1 + n));
  normalize_power(out);
  return out;
}

inline std::vector<double> white_noise(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = g(rng);
  normalize_power(out);
  return out;
}

inline std::vector<double> tone_complex(std::size_t n, double rate, std::size_t index, std::mt19937_64& rng) {
  const double f0 = 140.0 + 35.0 * static_cast<double>(index % 8);
  std::uniform_real_distribution<double> phase(0.0, 2 * kPi);
  std::vector<double> out(n, 0.0);
  for (int h = 1; h <= 12 && h * f0 < 0.45 * rate; ++h) {
    const double ph = phase(rng);
    for (std::size_t i = 0; i < n; ++i) out[i] += std::sin(2 * kPi * h * f0 * static_cast<double>(i) / rate + ph);
  }
  normalize_power(out);
  return out;
}

inline std::vector<double> file_signal(const std::string& path, std::size_t n, double rate) {
  const auto clip = load_wav(path);
  if (std::abs(clip.sample_rate() - rate) > 1e-6) throw Error("scene: source file sample rate differs from the scene");
  const auto ch = clip.channel(0);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = ch[i % ch.size()];
  normalize_power(out);
  return out;
}

inline constexpr int kInterpHalfTaps = 16;  // 32 taps total

/// Weights for reading x(n + advance) at integer n: taps k in [-15, 16]
/// around floor(n + advance).
inline std::vector<double> fractional_taps(double frac) {
  std::vector<double> w(2 * kInterpHalfTaps);
  for (int k = -kInterpHalfTaps + 1; k <= kInterpHalfTaps; ++k) {
    const double x = k - frac;
    const double win = 0.42 + 0.5 * std::cos(kPi * x / kInterpHalfTaps) + 0.08 * std::cos(2 * kPi * x / kInterpHalfTaps);
    w[static_cast<std::size_t>(k + kInterpHalfTaps - 1)] = sinc(x) * win;
  }
  return w;
}

}  // namespace detail

/// Renders the scene. Fully determined by the spec, including its seed.
inline RenderedScene render(const SceneSpec& spec) {
  spec.validate();
  const double rate = spec.geometry.sample_rate();
  const auto n = static_cast<std::size_t>(std::llround(spec.duration * rate));
  const std::size_t mics = spec.geometry.mic_count();
  std::mt19937_64 rng(spec.seed);

  std::vector<std::vector<double>> mix(mics, std::vector<double>(n, 0.0));
  RenderedScene out;
  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    const auto& src = spec.sources[s];
    std::mt19937_64 src_rng(rng());
    std::vector<double> dry;
    switch (src.signal) {
      case SourceSignal::kSpeechNoise: dry = detail::speech_like_noise(n, rate, src_rng); break;
      case SourceSignal::kWhiteNoise: dry = detail::white_noise(n, src_rng); break;
      case SourceSignal::kToneComplex: dry = detail::tone_complex(n, rate, s, src_rng); break;
      case SourceSignal::kFile: dry = detail::file_signal(src.file, n, rate); break;
    }
    std::vector<double> gated(n, 0.0);
    for (const auto& [a, b] : src.schedule) {
      const auto i0 = static_cast<std::size_t>(std::llround(a * rate));
      const auto i1 = std::min(n, static_cast<std::size_t>(std::llround(b * rate)));
      for (std::size_t i = i0; i < i1; ++i) gated[i] = dry[i];
    }
    const Vec3 u = azimuth_unit(src.azimuth);
    for (std::size_t m = 0; m < mics; ++m) {
      // Mic m hears the wavefront (p . u) / c seconds before the origin.
      const double advance = dot(spec.geometry.mics()[m], u) / spec.geometry.speed_of_sound() * rate;
      const double base = std::floor(advance);
      const auto taps = detail::fractional_taps(advance - base);
      const auto shift = static_cast<long long>(base);
      auto& ch = mix[m];
      for (const auto& [a, b] : src.schedule) {
        // Output samples that can see the gated interval through the taps.
        const long long lo = std::max(0LL, std::llround(a * rate) - shift - detail::kInterpHalfTaps);
        const long long hi = std::min(static_cast<long long>(n), std::llround(b * rate) - shift + detail::kInterpHalfTaps);
        for (long long i = lo; i < hi; ++i) {
          double acc = 0.0;
          const long long center = i + shift;
          for (int k = -detail::kInterpHalfTaps + 1; k <= detail::kInterpHalfTaps; ++k) {
            const long long j = center + k;
            if (j < 0 || j >= static_cast<long long>(n)) continue;
            acc += gated[static_cast<std::size_t>(j)] * taps[static_cast<std::size_t>(k + detail::kInterpHalfTaps - 1)];
          }
          ch[static_cast<std::size_t>(i)] += acc;
        }
      }
    }
    const std::string label = src.label.empty() ? "src" + std::to_string(s) : src.label;
    for (const auto& [a, b] : src.schedule) out.reference.push_back({spec.recording_id, a, b - a, label});
  }
  if (std::isfinite(spec.snr_db)) {
    const double sigma = std::pow(10.0, -spec.snr_db / 20.0);
    std::normal_distribution<double> g(0.0, sigma);
    std::mt19937_64 noise_rng(rng());
    for (auto& ch : mix)
      for (double& v : ch) v += g(noise_rng);
  }
  std::vector<std::vector<float>> channels(mics, std::vector<float>(n));
  for (std::size_t m = 0; m < mics; ++m)
    for (std::size_t i = 0; i < n; ++i) channels[m][i] = static_cast<float>(spec.gain * mix[m][i]);
  out.clip = MultichannelClip(std::move(channels), rate);

  normalize(out.reference);
  SegmentList speech;
  for (const auto& seg : out.reference) speech.push_back({seg.recording_id, seg.start, seg.duration, "speech"});
  out.vad = merge_same_speaker(speech);
  return out;
}

struct EmbeddingSynthOptions {
  double window = 1.44;
  double shift = 0.6;
  std::size_t dim = 32;
  double noise = 0.35;  // per-vector noise norm relative to a unit centroid
  std::uint64_t seed = 0;
};

/// Stand-in for an embedding extractor: slices each VAD region into
/// windows, gives each window the vector of its majority reference speaker
/// (a random unit centroid per speaker) plus isotropic noise.
inline EmbeddingSet synthesize_embeddings(const SegmentList& reference, const SegmentList& vad,
                                          const EmbeddingSynthOptions& opt = {}) {
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> g(0.0, 1.0);
  const auto names = speakers(reference);
  std::vector<std::vector<double>> centroids;
  for (std::size_t s = 0; s < names.size(); ++s) {
    std::vector<double> c(opt.dim);
    double norm = 0.0;
    for (double& v : c) {
      v = g(rng);
      norm += v * v;
    }
    for (double& v : c) v /= std::sqrt(norm);
    centroids.push_back(std::move(c));
  }
  EmbeddingSet set;
  set.dim = opt.dim;
  const double per_component = opt.noise / std::sqrt(static_cast<double>(opt.dim));
  for (const auto& region : vad) {
    for (double t = region.start;; t += opt.shift) {
      const double end = std::min(t + opt.window, region.end());
      std::size_t best = 0;
      double best_ov = -1.0;
      for (std::size_t s = 0; s < names.size(); ++s) {
        double ov = 0.0;
        for (const auto& seg : reference)
          if (seg.speaker == names[s]) ov += std::max(0.0, std::min(end, seg.end()) - std::max(t, seg.start));
        if (ov > best_ov) {
          best_ov = ov;
          best = s;
        }
      }
      EmbeddingSegment seg{quantize_ms(t), quantize_ms(end), std::vector<double>(opt.dim)};
      for (std::size_t d = 0; d < opt.dim; ++d)
        seg.vector[d] = (names.empty() ? 0.0 : centroids[best][d]) + per_component * g(rng);
      if (seg.end > seg.start) set.segments.push_back(std::move(seg));
      if (end >= region.end()) break;
    }
  }
  return set;
}

}  // namespace arraydiar
