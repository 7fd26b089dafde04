#pragma once

// Far-field SRP-PHAT localization on an azimuth ring.
//
// Steering model: a plane wave arriving from azimuth theta reaches mic p
// (p . u(theta)) / c seconds before the array origin, so channel j lags
// channel i by tau_ij(theta) = ((p_i - p_j) . u(theta)) / c. GCC-PHAT uses the
// matching lag convention: a positive lag means the second signal lags the
// first.

#include <algorithm>
#include <complex>
#include <cstdio>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "arraydiar/audio.hpp"
#include "arraydiar/common.hpp"
#include "arraydiar/geometry.hpp"
#include "arraydiar/rttm.hpp"

namespace arraydiar {

inline constexpr std::size_t kDefaultGridSize = 256;

/// Candidate azimuths plus, per direction and mic pair, the steering delay in
/// seconds and the nearest integer-sample lag.
class SteeringGrid {
 public:
  std::size_t size() const { return directions_.size(); }
  double step_deg() const { return 360.0 / static_cast<double>(directions_.size()); }
  const std::vector<double>& directions() const { return directions_; }
  const std::vector<MicPair>& pairs() const { return pairs_; }
  std::size_t mic_count() const { return mic_count_; }
  double sample_rate() const { return sample_rate_; }

  double delay(std::size_t direction, std::size_t pair) const { return delays_[direction * pairs_.size() + pair]; }
  int lag(std::size_t direction, std::size_t pair) const { return lags_[direction * pairs_.size() + pair]; }

  /// Largest |lag| over the grid, in samples.
  int max_lag() const {
    int m = 0;
    for (int l : lags_) m = std::max(m, std::abs(l));
    return m;
  }

  friend SteeringGrid build_grid(const MicArrayGeometry&, std::size_t);

 private:
  std::vector<double> directions_;
  std::vector<MicPair> pairs_;
  std::vector<double> delays_;
  std::vector<int> lags_;
  std::size_t mic_count_ = 0;
  double sample_rate_ = 0.0;
};

/// Uniform grid of `n_directions` azimuths starting at 0 deg (+x axis).
inline SteeringGrid build_grid(const MicArrayGeometry& geometry, std::size_t n_directions = kDefaultGridSize) {
  if (n_directions < 8) throw Error("grid: at least 8 directions required");
  const auto& mics = geometry.mics();
  bool planar_spread = false;
  for (const auto& m : mics)
    if (m[0] != mics.front()[0] || m[1] != mics.front()[1]) planar_spread = true;
  if (!planar_spread) throw Error("grid: all microphones lie on one vertical line; azimuth is unobservable");

  SteeringGrid grid;
  grid.pairs_ = geometry.pairs();
  grid.mic_count_ = geometry.mic_count();
  grid.sample_rate_ = geometry.sample_rate();
  grid.directions_.resize(n_directions);
  grid.delays_.resize(n_directions * grid.pairs_.size());
  grid.lags_.resize(grid.delays_.size());
  for (std::size_t d = 0; d < n_directions; ++d) {
    const double deg = 360.0 * static_cast<double>(d) / static_cast<double>(n_directions);
    grid.directions_[d] = deg;
    const Vec3 u = azimuth_unit(deg);
    for (std::size_t p = 0; p < grid.pairs_.size(); ++p) {
      const auto [i, j] = grid.pairs_[p];
      const double tau = dot(mics[i] - mics[j], u) / geometry.speed_of_sound();
      grid.delays_[d * grid.pairs_.size() + p] = tau;
      grid.lags_[d * grid.pairs_.size() + p] = static_cast<int>(std::lround(tau * geometry.sample_rate()));
    }
  }
  return grid;
}

/// PHAT-weighted cross-correlation over integer lags |lag| <= max_lag, where
/// max_lag = min(L - 1, nfft/2 - 1) so that every lag is a distinct circular index.
struct CrossCorrelation {
  std::vector<double> values;
  int max_lag = 0;
  bool silent = false;

  double at(int lag) const { return values.at(static_cast<std::size_t>(lag + max_lag)); }

  int peak_lag() const {
    auto it = std::max_element(values.begin(), values.end());
    return static_cast<int>(it - values.begin()) - max_lag;
  }
};

namespace detail {

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

using Spectrum = std::vector<std::complex<double>>;

/// Half spectrum of `x` zero-padded to `nfft`.
inline Spectrum half_spectrum(Eigen::FFT<double>& fft, std::span<const float> x, std::size_t nfft) {
  std::vector<double> buf(nfft, 0.0);
  std::copy(x.begin(), x.end(), buf.begin());
  Spectrum out;
  fft.fwd(out, buf);
  return out;
}

/// Circular PHAT correlation r[m], m in [0, nfft): r[tau mod nfft] is the
/// correlation at lag tau (second signal lagging the first). Empty when the
/// cross-spectrum vanishes.
inline std::vector<double> phat_circular(Eigen::FFT<double>& fft, const Spectrum& x, const Spectrum& y,
                                         std::size_t nfft) {
  Spectrum cross(x.size());
  double peak = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    cross[k] = std::conj(x[k]) * y[k];
    peak = std::max(peak, std::abs(cross[k]));
  }
  if (peak == 0.0) return {};
  const double floor = 1e-12 * peak;
  for (auto& c : cross) c /= std::max(std::abs(c), floor);
  std::vector<double> r;
  fft.inv(r, cross, static_cast<Eigen::Index>(nfft));
  return r;
}

inline Eigen::FFT<double> make_fft() {
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  return fft;
}

}  // namespace detail

/// GCC-PHAT of two equal-length frames. The DFT length is the frame length
/// rounded up to a power of two. All-zero input gives an all-zero result
/// flagged `silent`.
inline CrossCorrelation gcc_phat(std::span<const float> x, std::span<const float> y) {
  if (x.size() != y.size()) throw Error("gcc_phat: frames differ in length");
  if (x.size() < 2) throw Error("gcc_phat: frames need at least 2 samples");
  const std::size_t len = x.size();
  const std::size_t nfft = detail::next_pow2(len);
  auto fft = detail::make_fft();
  const auto r = detail::phat_circular(fft, detail::half_spectrum(fft, x, nfft),
                                       detail::half_spectrum(fft, y, nfft), nfft);
  CrossCorrelation out;
  out.max_lag = static_cast<int>(std::min(len - 1, nfft / 2 - 1));
  out.values.assign(2 * static_cast<std::size_t>(out.max_lag) + 1, 0.0);
  out.silent = r.empty();
  if (out.silent) return out;
  const auto n = static_cast<long long>(nfft);
  for (int lag = -out.max_lag; lag <= out.max_lag; ++lag) {
    out.values[static_cast<std::size_t>(lag + out.max_lag)] = r[static_cast<std::size_t>(((lag % n) + n) % n)];
  }
  return out;
}

struct SrpFrame {
  double frame_start = 0.0;
  std::vector<double> powers;  // per grid direction; empty when read back from CSV
  double argmax_azimuth = 0.0;
  double argmax_power = 0.0;
  bool confident = false;
};

/// Frames whose peak power falls below this fraction of the pair count are
/// flagged low-confidence.
inline constexpr double kLowConfidenceRatio = 0.1;

/// Steered response power for one multichannel frame: for every grid
/// direction, the sum over all mic pairs i<j of GCC-PHAT at the rounded
/// steering lag. Ties on the maximum resolve to the smallest azimuth.
inline SrpFrame srp_phat_frame(std::span<const std::span<const float>> channels, const SteeringGrid& grid,
                               double frame_start = 0.0) {
  if (channels.size() != grid.mic_count())
    throw Error("srp_phat: frame has " + std::to_string(channels.size()) + " channels, geometry has " +
                std::to_string(grid.mic_count()) + " microphones");
  const std::size_t len = channels.front().size();
  for (const auto& ch : channels)
    if (ch.size() != len) throw Error("srp_phat: channels differ in length");
  if (len < 2) throw Error("srp_phat: frame needs at least 2 samples");

  const std::size_t nfft = detail::next_pow2(len);
  auto fft = detail::make_fft();
  std::vector<detail::Spectrum> spectra;
  spectra.reserve(channels.size());
  for (const auto& ch : channels) spectra.push_back(detail::half_spectrum(fft, ch, nfft));

  SrpFrame frame;
  frame.frame_start = frame_start;
  frame.powers.assign(grid.size(), 0.0);
  const auto n = static_cast<long long>(nfft);
  const auto& pairs = grid.pairs();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto r = detail::phat_circular(fft, spectra[pairs[p].first], spectra[pairs[p].second], nfft);
    if (r.empty()) continue;
    for (std::size_t d = 0; d < grid.size(); ++d) {
      const long long lag = grid.lag(d, p);
      frame.powers[d] += r[static_cast<std::size_t>(((lag % n) + n) % n)];
    }
  }
  std::size_t best = 0;
  for (std::size_t d = 1; d < grid.size(); ++d)
    if (frame.powers[d] > frame.powers[best]) best = d;
  frame.argmax_azimuth = grid.directions()[best];
  frame.argmax_power = frame.powers[best];
  frame.confident = frame.argmax_power >= kLowConfidenceRatio * static_cast<double>(pairs.size());
  return frame;
}

struct DoaTrack {
  FramePlan plan;
  double grid_step_deg = 360.0 / kDefaultGridSize;
  std::vector<SrpFrame> frames;

  std::size_t size() const { return frames.size(); }
  bool empty() const { return frames.empty(); }
};

/// True when `t` lies inside any segment (closed interval).
inline bool covered_by(const SegmentList& regions, double t) {
  return std::any_of(regions.begin(), regions.end(),
                     [t](const Segment& s) { return s.start <= t && t <= s.end(); });
}

/// Runs SRP-PHAT on every frame whose center lies inside a VAD speech region.
/// Frames are evaluated on `threads` workers and assembled in time order.
inline DoaTrack localize(const MultichannelClip& clip, const FramePlan& plan, const SteeringGrid& grid,
                         const SegmentList& vad, unsigned threads = 0) {
  if (clip.channel_count() != grid.mic_count())
    throw Error("localize: clip has " + std::to_string(clip.channel_count()) + " channels, geometry has " +
                std::to_string(grid.mic_count()) + " microphones");
  if (std::abs(clip.sample_rate() - grid.sample_rate()) > 1e-6)
    throw Error("localize: clip sample rate differs from geometry sample rate");
  DoaTrack track;
  track.plan = plan;
  track.grid_step_deg = grid.step_deg();
  if (vad.empty()) {
    log::warn("localize: empty VAD, no frames localized");
    return track;
  }
  std::vector<FrameRef> selected;
  for (const auto& f : frame_clip(clip, plan)) {
    if (covered_by(vad, f.start_time + plan.frame_length / 2.0)) selected.push_back(f);
  }
  track.frames.resize(selected.size());
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(1, selected.size())));

  auto work = [&](std::size_t worker) {
    std::vector<std::span<const float>> chans(clip.channel_count());
    for (std::size_t i = worker; i < selected.size(); i += threads) {
      const auto& f = selected[i];
      for (std::size_t c = 0; c < chans.size(); ++c) chans[c] = clip.channel(c, f.start_sample, f.length);
      track.frames[i] = srp_phat_frame(chans, grid, f.start_time);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) pool.emplace_back(work, w);
  }
  return track;
}

inline std::string format_track_csv(const DoaTrack& track) {
  std::string out = "frame_start,azimuth_deg,power,confident\n";
  char buf[128];
  for (const auto& f : track.frames) {
    std::snprintf(buf, sizeof buf, "%.3f,%.6f,%.6f,%d\n", f.frame_start, f.argmax_azimuth, f.argmax_power,
                  f.confident ? 1 : 0);
    out += buf;
  }
  return out;
}

inline void write_track_csv(const DoaTrack& track, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("track: cannot write " + path);
  out << format_track_csv(track);
}

inline DoaTrack parse_track_csv(std::istream& in, const FramePlan& plan = {}, const std::string& origin = "<track>") {
  DoaTrack track;
  track.plan = plan;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    if (line_no == 1 && line.starts_with("frame_start")) continue;
    SrpFrame f;
    int confident = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf,%d", &f.frame_start, &f.argmax_azimuth, &f.argmax_power,
                    &confident) != 4)
      throw Error(origin + ":" + std::to_string(line_no) + ": malformed track row");
    f.confident = confident != 0;
    track.frames.push_back(std::move(f));
  }
  return track;
}

inline DoaTrack read_track_csv(const std::string& path, const FramePlan& plan = {}) {
  std::ifstream in(path);
  if (!in) throw Error("track: cannot open " + path);
  return parse_track_csv(in, plan, path);
}

}  // namespace arraydiar
