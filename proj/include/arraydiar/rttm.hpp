#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "arraydiar/common.hpp"

namespace arraydiar {

struct Segment {
  std::string recording_id;
  double start = 0.0;
  double duration = 0.0;
  std::string speaker;

  double end() const { return start + duration; }

  bool operator==(const Segment&) const = default;
};

using SegmentList = std::vector<Segment>;

/// Sorts by (recording, start, speaker).
inline void normalize(SegmentList& list) {
  std::stable_sort(list.begin(), list.end(), [](const Segment& a, const Segment& b) {
    if (a.recording_id != b.recording_id) return a.recording_id < b.recording_id;
    if (a.start != b.start) return a.start < b.start;
    return a.speaker < b.speaker;
  });
}

inline SegmentList normalized(SegmentList list) {
  normalize(list);
  return list;
}

inline double total_duration(const SegmentList& list) {
  double sum = 0.0;
  for (const auto& s : list) sum += s.duration;
  return sum;
}

inline std::vector<std::string> speakers(const SegmentList& list) {
  std::set<std::string> set;
  for (const auto& s : list) set.insert(s.speaker);
  return {set.begin(), set.end()};
}

inline std::vector<std::string> recordings(const SegmentList& list) {
  std::set<std::string> set;
  for (const auto& s : list) set.insert(s.recording_id);
  return {set.begin(), set.end()};
}

inline SegmentList filter_recording(const SegmentList& list, const std::string& rec) {
  SegmentList out;
  std::copy_if(list.begin(), list.end(), std::back_inserter(out),
               [&](const Segment& s) { return s.recording_id == rec; });
  return out;
}

/// Merges overlapping or touching segments of the same (recording, speaker).
inline SegmentList merge_same_speaker(const SegmentList& list) {
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> groups;
  for (const auto& s : list) groups[{s.recording_id, s.speaker}].push_back({s.start, s.end()});
  SegmentList out;
  for (auto& [key, spans] : groups) {
    std::sort(spans.begin(), spans.end());
    double cs = spans.front().first, ce = spans.front().second;
    for (std::size_t i = 1; i < spans.size(); ++i) {
      if (spans[i].first <= ce + 1e-9) {
        ce = std::max(ce, spans[i].second);
      } else {
        out.push_back({key.first, cs, ce - cs, key.second});
        cs = spans[i].first;
        ce = spans[i].second;
      }
    }
    out.push_back({key.first, cs, ce - cs, key.second});
  }
  normalize(out);
  return out;
}

inline std::string format_rttm_line(const Segment& s) {
  char buf[64];
  std::string line = "SPEAKER " + s.recording_id + " 1 ";
  std::snprintf(buf, sizeof buf, "%.3f %.3f", quantize_ms(s.start) + 0.0, quantize_ms(s.duration) + 0.0);
  line += buf;
  line += " <NA> <NA> " + s.speaker + " <NA> <NA>";
  return line;
}

inline std::string format_rttm(const SegmentList& list) {
  std::string out;
  for (const auto& s : list) out += format_rttm_line(s) + "\n";
  return out;
}

inline SegmentList parse_rttm(std::istream& in, const std::string& origin = "<rttm>") {
  SegmentList out;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw Error(origin + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::vector<std::string> fields{std::istream_iterator<std::string>(ls), std::istream_iterator<std::string>()};
    if (fields.empty() || fields.front().starts_with("#")) continue;
    if (fields.front() != "SPEAKER") {
      log::warn(origin + ":" + std::to_string(line_no) + ": skipping " + fields.front() + " line");
      continue;
    }
    if (fields.size() != 10) fail("expected 10 fields, found " + std::to_string(fields.size()));
    Segment seg;
    seg.recording_id = fields[1];
    seg.speaker = fields[7];
    try {
      std::size_t used = 0;
      seg.start = std::stod(fields[3], &used);
      if (used != fields[3].size()) fail("non-numeric start time");
      seg.duration = std::stod(fields[4], &used);
      if (used != fields[4].size()) fail("non-numeric duration");
    } catch (const std::logic_error&) {
      fail("non-numeric time field");
    }
    if (!(seg.start >= 0.0)) fail("negative start time");
    if (!(seg.duration > 0.0)) fail("duration must be > 0");
    out.push_back(std::move(seg));
  }
  normalize(out);
  return out;
}

inline SegmentList read_rttm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("rttm: cannot open " + path);
  return parse_rttm(in, path);
}

inline void write_rttm(const SegmentList& list, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("rttm: cannot write " + path);
  out << format_rttm(list);
}

}  // namespace arraydiar
