#pragma once

// Speaker counting from a 10-degree DOA histogram: local maxima on the
// circle, ranked by count; the top two are speakers, and the third and fourth
// count only if they exceed a quarter of the second.

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arraydiar/common.hpp"
#include "arraydiar/doa.hpp"

namespace arraydiar {

inline constexpr std::size_t kHistogramBins = 36;
inline constexpr double kBinWidthDeg = 10.0;
inline constexpr std::size_t kMaxSpeakers = 4;

struct AngularHistogram {
  std::array<long, kHistogramBins> bins{};

  static std::size_t bin_of(double azimuth_deg) {
    auto k = static_cast<std::size_t>(wrap_degrees(azimuth_deg) / kBinWidthDeg);
    return std::min(k, kHistogramBins - 1);
  }

  static double bin_center(std::size_t k) { return kBinWidthDeg * static_cast<double>(k) + kBinWidthDeg / 2.0; }

  long total() const {
    long sum = 0;
    for (long b : bins) sum += b;
    return sum;
  }

  /// Rotated by `shift` bins (bin k moves to k + shift).
  AngularHistogram rotated(long shift) const {
    AngularHistogram out;
    const long n = static_cast<long>(kHistogramBins);
    for (long k = 0; k < n; ++k) out.bins[static_cast<std::size_t>(((k + shift) % n + n) % n)] = bins[static_cast<std::size_t>(k)];
    return out;
  }

  bool operator==(const AngularHistogram&) const = default;
};

inline AngularHistogram build_histogram(const DoaTrack& track, bool include_low_confidence = false) {
  if (track.empty()) throw Error("census: no localized frames");
  AngularHistogram hist;
  for (const auto& f : track.frames) {
    if (!f.confident && !include_low_confidence) continue;
    ++hist.bins[AngularHistogram::bin_of(f.argmax_azimuth)];
  }
  return hist;
}

struct HistogramPeak {
  std::size_t bin;
  double azimuth;  // bin center, degrees
  long count;

  bool operator==(const HistogramPeak&) const = default;
};

/// Circular peak picking. Runs of equal counts are treated as one plateau; a
/// plateau is a peak when the bins just outside it on both sides are strictly
/// lower. A plateau is reported at its first bin going clockwise (increasing
/// index). Zero bins are never peaks; a uniform nonzero circle is one peak at
/// bin 0. Result is ordered by bin.
inline std::vector<HistogramPeak> find_local_maxima(const AngularHistogram& hist) {
  constexpr std::size_t n = kHistogramBins;
  const auto& c = hist.bins;
  std::vector<HistogramPeak> peaks;
  // Pick a start bin whose predecessor differs, so no plateau is split.
  std::size_t origin = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (c[k] != c[(k + n - 1) % n]) {
      origin = k;
      break;
    }
  }
  if (origin == n) {
    if (c[0] > 0) peaks.push_back({0, AngularHistogram::bin_center(0), c[0]});
    return peaks;
  }
  std::size_t i = 0;
  while (i < n) {
    const std::size_t first = (origin + i) % n;
    std::size_t len = 1;
    while (len < n && c[(first + len) % n] == c[first]) ++len;
    const long before = c[(first + n - 1) % n];
    const long after = c[(first + len) % n];
    if (c[first] > 0 && before < c[first] && after < c[first])
      peaks.push_back({first, AngularHistogram::bin_center(first), c[first]});
    i += len;
  }
  std::sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) { return a.bin < b.bin; });
  return peaks;
}

struct SpeakerCensus {
  std::size_t count = 0;
  std::vector<double> peak_azimuths;  // descending by count
  std::vector<long> peak_counts;
  AngularHistogram histogram;

  bool operator==(const SpeakerCensus&) const = default;
};

/// Peaks by descending count; equal counts order by bin index.
inline std::vector<HistogramPeak> rank_peaks(std::vector<HistogramPeak> peaks) {
  std::stable_sort(peaks.begin(), peaks.end(), [](const auto& a, const auto& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.bin < b.bin;
  });
  return peaks;
}

inline SpeakerCensus count_speakers(const AngularHistogram& hist) {
  const auto ranked = rank_peaks(find_local_maxima(hist));
  if (ranked.empty()) throw Error("census: histogram has no peaks");
  SpeakerCensus census;
  census.histogram = hist;
  for (std::size_t r = 0; r < ranked.size() && r < kMaxSpeakers; ++r) {
    // Strict: a third or fourth speaker needs more than a quarter of the
    // second-ranked peak. 4 * count avoids fractional comparison.
    if (r >= 2 && !(4 * ranked[r].count > ranked[1].count)) continue;
    census.peak_azimuths.push_back(ranked[r].azimuth);
    census.peak_counts.push_back(ranked[r].count);
  }
  census.count = census.peak_azimuths.size();
  return census;
}

inline nlohmann::json census_to_json(const SpeakerCensus& census) {
  return {{"count", census.count},
          {"peak_azimuths", census.peak_azimuths},
          {"peak_counts", census.peak_counts},
          {"histogram", census.histogram.bins}};
}

inline SpeakerCensus census_from_json(const nlohmann::json& j) {
  SpeakerCensus census;
  census.count = j.at("count").get<std::size_t>();
  census.peak_azimuths = j.at("peak_azimuths").get<std::vector<double>>();
  census.peak_counts = j.at("peak_counts").get<std::vector<long>>();
  if (j.contains("histogram")) {
    auto bins = j.at("histogram").get<std::vector<long>>();
    if (bins.size() != kHistogramBins) throw Error("census: histogram must have 36 bins");
    std::copy(bins.begin(), bins.end(), census.histogram.bins.begin());
  }
  if (census.count < 1 || census.count > kMaxSpeakers || census.peak_azimuths.size() != census.count)
    throw Error("census: inconsistent speaker count");
  return census;
}

inline void write_census(const SpeakerCensus& census, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("census: cannot write " + path);
  out << census_to_json(census).dump(2) << "\n";
}

inline SpeakerCensus read_census(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("census: cannot open " + path);
  return census_from_json(nlohmann::json::parse(in));
}

inline std::string format_histogram_csv(const AngularHistogram& hist) {
  std::string out = "bin,lower_deg,upper_deg,count\n";
  char buf[96];
  for (std::size_t k = 0; k < kHistogramBins; ++k) {
    std::snprintf(buf, sizeof buf, "%zu,%.0f,%.0f,%ld\n", k, kBinWidthDeg * static_cast<double>(k),
                  kBinWidthDeg * static_cast<double>(k + 1), hist.bins[k]);
    out += buf;
  }
  return out;
}

inline void write_histogram_csv(const AngularHistogram& hist, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("histogram: cannot write " + path);
  out << format_histogram_csv(hist);
}

}  // namespace arraydiar
