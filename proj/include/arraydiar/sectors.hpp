#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "arraydiar/census.hpp"
#include "arraydiar/common.hpp"
#include "arraydiar/doa.hpp"
#include "arraydiar/rttm.hpp"

namespace arraydiar {

struct Sector {
  std::string label;
  double lower = 0.0;  // inclusive, degrees in [0, 360)
  double upper = 0.0;  // exclusive; equal to lower only for the full circle
  double peak_azimuth = 0.0;

  double width() const {
    const double w = wrap_degrees(upper - lower);
    return w == 0.0 ? 360.0 : w;
  }

  /// Half-open membership going counter-clockwise (increasing azimuth) from lower.
  bool contains(double azimuth) const { return wrap_degrees(azimuth - lower) < width(); }
};

/// Sectors in ascending peak-azimuth order, labeled spk0..spk{K-1}.
struct SectorMap {
  std::vector<Sector> sectors;

  std::size_t index_of(double azimuth) const {
    for (std::size_t i = 0; i < sectors.size(); ++i)
      if (sectors[i].contains(azimuth)) return i;
    // Unreachable for a valid partition; guards float edge cases at 360.
    return sectors.size() - 1;
  }

  const std::string& label_of(double azimuth) const { return sectors[index_of(azimuth)].label; }
};

/// Circular midpoint going from `a` to `b` in increasing azimuth.
inline double circular_midpoint(double a, double b) { return wrap_degrees(a + wrap_degrees(b - a) / 2.0); }

inline SectorMap build_sectors(std::vector<double> peaks) {
  if (peaks.empty()) throw Error("sectors: at least one peak required");
  for (auto& p : peaks) p = wrap_degrees(p);
  std::sort(peaks.begin(), peaks.end());
  for (std::size_t i = 1; i < peaks.size(); ++i)
    if (peaks[i] == peaks[i - 1]) throw Error("sectors: duplicate peak azimuths cannot be bisected");
  SectorMap map;
  const std::size_t k = peaks.size();
  if (k == 1) {
    map.sectors.push_back({"spk0", 0.0, 0.0, peaks[0]});
    return map;
  }
  for (std::size_t i = 0; i < k; ++i) {
    const double prev = peaks[(i + k - 1) % k];
    const double next = peaks[(i + 1) % k];
    map.sectors.push_back(
        {"spk" + std::to_string(i), circular_midpoint(prev, peaks[i]), circular_midpoint(peaks[i], next), peaks[i]});
  }
  return map;
}

inline SectorMap build_sectors(const SpeakerCensus& census) {
  if (census.count < 1) throw Error("sectors: census count must be >= 1");
  return build_sectors(std::vector<double>(census.peak_azimuths.begin(), census.peak_azimuths.begin() + census.count));
}

struct FrameLabel {
  double frame_start = 0.0;
  std::size_t sector = 0;
  std::string label;

  bool operator==(const FrameLabel&) const = default;
};

/// Labels each frame by the sector of its azimuth. With `carry_forward`,
/// low-confidence frames take the previous confident frame's label and are
/// dropped when no confident frame precedes them.
inline std::vector<FrameLabel> assign_frames(const DoaTrack& track, const SectorMap& map, bool carry_forward = true) {
  std::vector<FrameLabel> out;
  std::optional<std::size_t> last;
  for (const auto& f : track.frames) {
    if (carry_forward && !f.confident) {
      if (last) out.push_back({f.frame_start, *last, map.sectors[*last].label});
      continue;
    }
    const std::size_t s = map.index_of(f.argmax_azimuth);
    last = s;
    out.push_back({f.frame_start, s, map.sectors[s].label});
  }
  return out;
}

/// Merges runs of identical labels on consecutive frames into segments
/// [first_start, last_start + frame_length]. A gap (missing frame) breaks a run.
inline SegmentList frames_to_rttm(const std::vector<FrameLabel>& labels, const FramePlan& plan,
                                  const std::string& recording_id) {
  SegmentList out;
  const double gap_tolerance = plan.frame_shift * 1e-6 + 1e-9;
  std::size_t i = 0;
  while (i < labels.size()) {
    std::size_t j = i;
    while (j + 1 < labels.size() && labels[j + 1].label == labels[i].label &&
           std::abs(labels[j + 1].frame_start - labels[j].frame_start - plan.frame_shift) <= gap_tolerance)
      ++j;
    const double start = labels[i].frame_start;
    const double end = labels[j].frame_start + plan.frame_length;
    out.push_back({recording_id, start, end - start, labels[i].label});
    i = j + 1;
  }
  return out;
}

/// Circular median over a sliding window of `width` frames (odd). The median
/// is the window azimuth with the least summed angular distance to the
/// others; ties go to the earliest frame in the window.
inline DoaTrack smooth_track(const DoaTrack& track, std::size_t width) {
  if (width <= 1) return track;
  if (width % 2 == 0) throw Error("smooth: window length must be odd");
  const std::size_t half = width / 2;
  DoaTrack out = track;
  const auto& fr = track.frames;
  auto dist = [](double a, double b) {
    const double d = wrap_degrees(a - b);
    return std::min(d, 360.0 - d);
  };
  for (std::size_t i = 0; i < fr.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(fr.size() - 1, i + half);
    double best_cost = 0.0;
    std::size_t best = lo;
    for (std::size_t a = lo; a <= hi; ++a) {
      double cost = 0.0;
      for (std::size_t b = lo; b <= hi; ++b) cost += dist(fr[a].argmax_azimuth, fr[b].argmax_azimuth);
      if (a == lo || cost < best_cost) {
        best_cost = cost;
        best = a;
      }
    }
    out.frames[i].argmax_azimuth = fr[best].argmax_azimuth;
  }
  return out;
}

}  // namespace arraydiar
