#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "arraydiar/common.hpp"
#include "arraydiar/config.hpp"

namespace arraydiar {

using Vec3 = std::array<double, 3>;

inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }

/// Horizontal unit vector pointing towards azimuth `deg`, 0 deg on +x, 90 deg on +y.
inline Vec3 azimuth_unit(double deg) {
  const double rad = deg * kPi / 180.0;
  return {std::cos(rad), std::sin(rad), 0.0};
}

struct MicPair {
  std::size_t first;
  std::size_t second;
};

/// Microphone positions (meters) plus the sampling and propagation constants
/// needed to turn directions into inter-mic delays.
class MicArrayGeometry {
 public:
  static constexpr double kDefaultSpeedOfSound = 343.0;

  MicArrayGeometry(std::vector<Vec3> mics, double sample_rate,
                   double speed_of_sound = kDefaultSpeedOfSound)
      : mics_(std::move(mics)), sample_rate_(sample_rate), speed_of_sound_(speed_of_sound) {
    validate();
  }

  /// Parses `speed_of_sound`, `sample_rate`, `mics = [[x,y,z], ...]`.
  static MicArrayGeometry from_config(const KeyValueConfig& cfg) {
    std::vector<Vec3> mics;
    const auto& arr = cfg.at("mics");
    if (!arr.is_array()) throw Error("geometry: `mics` must be an array of [x,y,z]");
    for (const auto& m : arr) {
      if (!m.is_array() || m.size() != 3) throw Error("geometry: each mic must be [x,y,z]");
      mics.push_back({m[0].get<double>(), m[1].get<double>(), m[2].get<double>()});
    }
    return MicArrayGeometry(std::move(mics), cfg.number("sample_rate"),
                            cfg.number("speed_of_sound", kDefaultSpeedOfSound));
  }

  static MicArrayGeometry load(const std::string& path) {
    return from_config(KeyValueConfig::load(path));
  }

  /// `count` mics evenly spaced on a horizontal circle, first mic at `offset_deg`.
  static MicArrayGeometry circular(std::size_t count, double radius, double sample_rate,
                                   double offset_deg = 0.0,
                                   double speed_of_sound = kDefaultSpeedOfSound) {
    std::vector<Vec3> mics;
    for (std::size_t i = 0; i < count; ++i) {
      auto u = azimuth_unit(offset_deg + 360.0 * static_cast<double>(i) / static_cast<double>(count));
      mics.push_back({radius * u[0], radius * u[1], 0.0});
    }
    return MicArrayGeometry(std::move(mics), sample_rate, speed_of_sound);
  }

  std::string to_config_text() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& m : mics_) arr.push_back({m[0], m[1], m[2]});
    return "sample_rate = " + nlohmann::json(sample_rate_).dump() + "\n" +
           "speed_of_sound = " + nlohmann::json(speed_of_sound_).dump() + "\n" +
           "mics = " + arr.dump() + "\n";
  }

  const std::vector<Vec3>& mics() const { return mics_; }
  std::size_t mic_count() const { return mics_.size(); }
  double sample_rate() const { return sample_rate_; }
  double speed_of_sound() const { return speed_of_sound_; }

  /// All unordered pairs (i < j), M(M-1)/2 of them, in lexicographic order.
  std::vector<MicPair> pairs() const {
    std::vector<MicPair> out;
    for (std::size_t i = 0; i < mics_.size(); ++i)
      for (std::size_t j = i + 1; j < mics_.size(); ++j) out.push_back({i, j});
    return out;
  }

  double aperture() const {
    double best = 0.0;
    for (auto [i, j] : pairs()) {
      auto d = mics_[i] - mics_[j];
      best = std::max(best, std::sqrt(dot(d, d)));
    }
    return best;
  }

  /// Rotation about the z axis by `deg`.
  MicArrayGeometry rotated(double deg) const {
    const double c = std::cos(deg * kPi / 180.0), s = std::sin(deg * kPi / 180.0);
    std::vector<Vec3> out;
    for (const auto& m : mics_) out.push_back({c * m[0] - s * m[1], s * m[0] + c * m[1], m[2]});
    return MicArrayGeometry(std::move(out), sample_rate_, speed_of_sound_);
  }

 private:
  void validate() const {
    if (mics_.size() < 2) throw Error("geometry: at least 2 microphones required");
    for (const auto& m : mics_)
      for (double v : m)
        if (!std::isfinite(v)) throw Error("geometry: non-finite microphone coordinate");
    for (auto [i, j] : pairs()) {
      if (mics_[i] == mics_[j])
        throw Error("geometry: microphones " + std::to_string(i) + " and " + std::to_string(j) +
                    " share a position");
    }
    if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_))
      throw Error("geometry: sample_rate must be > 0");
    if (!(speed_of_sound_ > 0.0) || !std::isfinite(speed_of_sound_))
      throw Error("geometry: speed_of_sound must be > 0");
  }

  std::vector<Vec3> mics_;
  double sample_rate_;
  double speed_of_sound_;
};

}  // namespace arraydiar
