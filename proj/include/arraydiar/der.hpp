#pragma once

// Diarization error rate on a millisecond event timeline. Reference segment
// boundaries get a +/- collar that is excluded from scoring; hypothesis
// boundaries do not. With ignore_overlap, regions where two or more reference
// speakers talk at once are excluded too.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "arraydiar/common.hpp"
#include "arraydiar/hungarian.hpp"
#include "arraydiar/rttm.hpp"

namespace arraydiar {

inline constexpr double kDefaultCollar = 0.25;

struct ScoreOptions {
  double collar = kDefaultCollar;
  bool ignore_overlap = false;
};

struct DerReport {
  double scored_time = 0.0;  // seconds of scored reference speech
  double missed_speech = 0.0;
  double false_alarm = 0.0;
  double speaker_error = 0.0;
  std::map<std::string, std::string> mapping;  // reference -> hypothesis

  static double percent(double part, double whole) { return whole > 0.0 ? 100.0 * part / whole : 0.0; }
  double missed_pct() const { return percent(missed_speech, scored_time); }
  double false_alarm_pct() const { return percent(false_alarm, scored_time); }
  double speaker_error_pct() const { return percent(speaker_error, scored_time); }
  double der() const { return percent(missed_speech + false_alarm + speaker_error, scored_time); }
};

namespace detail {

struct MsSpan {
  long long start;
  long long end;
  std::size_t speaker;
};

struct ScoredRegion {
  long long duration;
  std::vector<std::size_t> ref;
  std::vector<std::size_t> hyp;
};

struct Timeline {
  std::vector<std::string> ref_speakers;
  std::vector<std::string> hyp_speakers;
  std::vector<ScoredRegion> regions;
};

inline std::vector<MsSpan> to_spans(const SegmentList& list, std::vector<std::string>& names) {
  names = speakers(list);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < names.size(); ++i) index[names[i]] = i;
  std::vector<MsSpan> out;
  for (const auto& s : list) {
    const long long a = to_ms(s.start), b = to_ms(s.end());
    if (b > a) out.push_back({a, b, index.at(s.speaker)});
  }
  return out;
}

inline std::vector<std::size_t> active(const std::vector<MsSpan>& spans, long long a, long long b) {
  std::set<std::size_t> set;
  for (const auto& s : spans)
    if (s.start <= a && b <= s.end) set.insert(s.speaker);
  return {set.begin(), set.end()};
}

inline Timeline build_timeline(const SegmentList& ref, const SegmentList& hyp, const ScoreOptions& opt) {
  Timeline tl;
  const auto r = to_spans(ref, tl.ref_speakers);
  const auto h = to_spans(hyp, tl.hyp_speakers);
  const long long collar = to_ms(opt.collar);
  std::vector<std::pair<long long, long long>> mask;
  std::vector<long long> cuts;
  for (const auto& s : r) {
    cuts.push_back(s.start);
    cuts.push_back(s.end);
    if (collar > 0) {
      mask.push_back({s.start - collar, s.start + collar});
      mask.push_back({s.end - collar, s.end + collar});
      cuts.insert(cuts.end(), {s.start - collar, s.start + collar, s.end - collar, s.end + collar});
    }
  }
  for (const auto& s : h) {
    cuts.push_back(s.start);
    cuts.push_back(s.end);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    const long long a = cuts[i], b = cuts[i + 1];
    const bool masked = std::any_of(mask.begin(), mask.end(), [&](const auto& m) { return m.first <= a && b <= m.second; });
    if (masked) continue;
    ScoredRegion region{b - a, active(r, a, b), active(h, a, b)};
    if (opt.ignore_overlap && region.ref.size() >= 2) continue;
    if (region.ref.empty() && region.hyp.empty()) continue;
    tl.regions.push_back(std::move(region));
  }
  return tl;
}

}  // namespace detail

/// Scores one recording. Throws when no reference speech survives masking.
inline DerReport score(const SegmentList& ref, const SegmentList& hyp, const ScoreOptions& opt = {}) {
  if (opt.collar < 0.0) throw Error("score: collar must be >= 0");
  const auto tl = detail::build_timeline(ref, hyp, opt);

  std::vector<std::vector<double>> overlap(tl.ref_speakers.size(), std::vector<double>(tl.hyp_speakers.size(), 0.0));
  long long scored = 0;
  for (const auto& reg : tl.regions) {
    scored += reg.duration * static_cast<long long>(reg.ref.size());
    for (auto a : reg.ref)
      for (auto b : reg.hyp) overlap[a][b] += static_cast<double>(reg.duration);
  }
  if (scored == 0) throw Error("score: no scored time");

  std::vector<int> map(tl.ref_speakers.size(), -1);
  if (!tl.ref_speakers.empty() && !tl.hyp_speakers.empty()) map = max_weight_assignment(overlap);

  long long missed = 0, fa = 0, se = 0;
  for (const auto& reg : tl.regions) {
    const long long nr = static_cast<long long>(reg.ref.size());
    const long long nh = static_cast<long long>(reg.hyp.size());
    long long correct = 0;
    for (auto a : reg.ref) {
      const int m = map[a];
      if (m >= 0 && std::binary_search(reg.hyp.begin(), reg.hyp.end(), static_cast<std::size_t>(m))) ++correct;
    }
    missed += reg.duration * std::max(0LL, nr - nh);
    fa += reg.duration * std::max(0LL, nh - nr);
    se += reg.duration * (std::min(nr, nh) - correct);
  }
  DerReport rep;
  rep.scored_time = static_cast<double>(scored) / 1000.0;
  rep.missed_speech = static_cast<double>(missed) / 1000.0;
  rep.false_alarm = static_cast<double>(fa) / 1000.0;
  rep.speaker_error = static_cast<double>(se) / 1000.0;
  for (std::size_t a = 0; a < map.size(); ++a)
    if (map[a] >= 0 && overlap[a][static_cast<std::size_t>(map[a])] > 0.0)
      rep.mapping[tl.ref_speakers[a]] = tl.hyp_speakers[static_cast<std::size_t>(map[a])];
  return rep;
}

/// Scores every recording in the reference and sums the components, which
/// weights each recording by its scored time.
inline DerReport score_all(const SegmentList& ref, const SegmentList& hyp, const ScoreOptions& opt = {}) {
  DerReport total;
  for (const auto& rec : recordings(hyp))
    if (filter_recording(ref, rec).empty()) log::warn("score: hypothesis recording " + rec + " has no reference; ignored");
  for (const auto& rec : recordings(ref)) {
    DerReport r;
    try {
      r = score(filter_recording(ref, rec), filter_recording(hyp, rec), opt);
    } catch (const Error&) {
      log::warn("score: recording " + rec + " has no scored time");
      continue;
    }
    total.scored_time += r.scored_time;
    total.missed_speech += r.missed_speech;
    total.false_alarm += r.false_alarm;
    total.speaker_error += r.speaker_error;
    for (const auto& [a, b] : r.mapping) total.mapping[rec + "/" + a] = b;
  }
  if (total.scored_time <= 0.0) throw Error("score: no scored time");
  return total;
}

inline nlohmann::json report_to_json(const DerReport& r) {
  return {{"scored_time", r.scored_time},
          {"missed_speech", r.missed_speech},
          {"missed_speech_pct", r.missed_pct()},
          {"false_alarm", r.false_alarm},
          {"false_alarm_pct", r.false_alarm_pct()},
          {"speaker_error", r.speaker_error},
          {"speaker_error_pct", r.speaker_error_pct()},
          {"der", r.der()},
          {"mapping", r.mapping}};
}

inline std::string format_report_table(const DerReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-16s %10s %8s\n"
                "%-16s %10.3f %8s\n"
                "%-16s %10.3f %7.2f%%\n"
                "%-16s %10.3f %7.2f%%\n"
                "%-16s %10.3f %7.2f%%\n"
                "%-16s %10.3f %7.2f%%\n",
                "component", "seconds", "percent", "scored speech", r.scored_time, "", "missed (MS)", r.missed_speech,
                r.missed_pct(), "false alarm (FA)", r.false_alarm, r.false_alarm_pct(), "speaker (SER)",
                r.speaker_error, r.speaker_error_pct(), "DER", r.missed_speech + r.false_alarm + r.speaker_error,
                r.der());
  return buf;
}

inline void write_report(const DerReport& r, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("score: cannot write " + path);
  out << report_to_json(r).dump(2) << "\n";
}

}  // namespace arraydiar
