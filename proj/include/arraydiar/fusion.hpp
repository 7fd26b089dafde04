#pragma once

// Hypothesis fusion: align every hypothesis's speaker labels onto an anchor
// hypothesis, then vote per elementary time region with per-system weights.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "arraydiar/common.hpp"
#include "arraydiar/hungarian.hpp"
#include "arraydiar/rttm.hpp"

namespace arraydiar {

struct WeightedHypothesis {
  SegmentList segments;
  double weight = 1.0;
};

/// Seconds during which speaker `a` in `x` and speaker `b` in `y` are both active.
inline std::vector<std::vector<double>> label_overlap_matrix(const SegmentList& x, const std::vector<std::string>& x_labels,
                                                             const SegmentList& y, const std::vector<std::string>& y_labels) {
  std::map<std::string, std::size_t> xi, yi;
  for (std::size_t i = 0; i < x_labels.size(); ++i) xi[x_labels[i]] = i;
  for (std::size_t j = 0; j < y_labels.size(); ++j) yi[y_labels[j]] = j;
  std::vector<std::vector<double>> m(x_labels.size(), std::vector<double>(y_labels.size(), 0.0));
  for (const auto& a : x) {
    for (const auto& b : y) {
      const double ov = std::min(a.end(), b.end()) - std::max(a.start, b.start);
      if (ov > 0.0) m[xi.at(a.speaker)][yi.at(b.speaker)] += ov;
    }
  }
  return m;
}

struct LabelAlignment {
  std::size_t anchor = 0;
  std::vector<SegmentList> relabeled;
  std::vector<std::map<std::string, std::string>> mappings;  // original -> global, per hypothesis
};

/// Maps each hypothesis's labels onto the anchor's (the hypothesis with the
/// most total speech) by maximum total overlap, solved with the Hungarian
/// method. Labels left unmatched, or matched with zero overlap, get fresh
/// global names. Empty hypotheses stay empty.
inline LabelAlignment align_labels(const std::vector<SegmentList>& hyps) {
  if (hyps.size() < 2) throw Error("align: at least 2 hypotheses required");
  LabelAlignment out;
  double most = -1.0;
  for (std::size_t h = 0; h < hyps.size(); ++h) {
    if (hyps[h].empty()) log::warn("align: hypothesis " + std::to_string(h) + " is empty and is excluded");
    const double total = total_duration(hyps[h]);
    if (total > most) {
      most = total;
      out.anchor = h;
    }
  }
  const auto& anchor = hyps[out.anchor];
  const auto anchor_labels = speakers(anchor);
  std::set<std::string> taken(anchor_labels.begin(), anchor_labels.end());

  out.relabeled.resize(hyps.size());
  out.mappings.resize(hyps.size());
  for (std::size_t h = 0; h < hyps.size(); ++h) {
    auto& mapping = out.mappings[h];
    const auto labels = speakers(hyps[h]);
    if (h == out.anchor) {
      for (const auto& l : labels) mapping[l] = l;
    } else if (!labels.empty()) {
      const auto overlap = label_overlap_matrix(hyps[h], labels, anchor, anchor_labels);
      const auto assign = anchor_labels.empty() ? std::vector<int>(labels.size(), -1) : max_weight_assignment(overlap);
      for (std::size_t i = 0; i < labels.size(); ++i) {
        const int j = assign[i];
        if (j >= 0 && overlap[i][static_cast<std::size_t>(j)] > 0.0) {
          mapping[labels[i]] = anchor_labels[static_cast<std::size_t>(j)];
        } else {
          std::string fresh = "h" + std::to_string(h) + "_" + labels[i];
          while (taken.count(fresh)) fresh += "_";
          taken.insert(fresh);
          mapping[labels[i]] = fresh;
        }
      }
    }
    for (auto seg : hyps[h]) {
      seg.speaker = mapping.at(seg.speaker);
      out.relabeled[h].push_back(std::move(seg));
    }
  }
  return out;
}

struct VoteOptions {
  bool single_label = false;
  double min_region = 0.010;  // seconds; shorter slivers take a neighbor's labels
};

namespace detail {

inline constexpr double kVoteTolerance = 1e-9;

struct RegionVote {
  std::string label;
  double votes = 0.0;
  double top_weight = 0.0;  // largest weight among systems asserting the label
};

/// Orders candidates: more votes, then asserted by a heavier system, then
/// lexicographic label.
inline void rank_votes(std::vector<RegionVote>& votes, double total) {
  const double tol = kVoteTolerance * std::max(1.0, total);
  std::sort(votes.begin(), votes.end(), [tol](const RegionVote& a, const RegionVote& b) {
    if (std::abs(a.votes - b.votes) > tol) return a.votes > b.votes;
    if (std::abs(a.top_weight - b.top_weight) > tol) return a.top_weight > b.top_weight;
    return a.label < b.label;
  });
}

}  // namespace detail

/// Labels kept for one region: every label whose summed weight exceeds half
/// the weight of the systems asserting speech there (`mass`), in rank order;
/// the top-ranked label is kept when none does. With `single_label` only the
/// top-ranked label.
inline std::vector<std::string> region_winners(const std::map<std::string, std::pair<double, double>>& tally,
                                               bool single_label, double mass) {
  std::vector<detail::RegionVote> votes;
  for (const auto& [label, vw] : tally) votes.push_back({label, vw.first, vw.second});
  if (votes.empty()) return {};
  detail::rank_votes(votes, mass);
  if (single_label) return {votes.front().label};
  const double tol = detail::kVoteTolerance * std::max(1.0, mass);
  std::vector<std::string> kept;
  for (const auto& v : votes)
    if (v.votes > mass / 2.0 + tol) kept.push_back(v.label);
  if (kept.empty()) kept.push_back(votes.front().label);
  return kept;
}

/// Weighted voting over aligned hypotheses. The timeline is cut at every
/// segment boundary; in each region every system adds its normalized weight
/// to each label it asserts.
inline SegmentList vote(const std::vector<SegmentList>& aligned, std::vector<double> weights, const VoteOptions& opt = {}) {
  if (aligned.size() != weights.size()) throw Error("vote: weight count differs from hypothesis count");
  double wsum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw Error("vote: weights must be positive");
    wsum += w;
  }
  for (double& w : weights) w /= wsum;

  std::string recording;
  std::vector<double> cuts;
  for (const auto& hyp : aligned) {
    for (const auto& s : hyp) {
      if (recording.empty()) recording = s.recording_id;
      cuts.push_back(s.start);
      cuts.push_back(s.end());
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }), cuts.end());
  if (cuts.size() < 2) return {};

  const std::size_t regions = cuts.size() - 1;
  std::vector<std::vector<std::string>> kept(regions);
  for (std::size_t r = 0; r < regions; ++r) {
    const double mid = (cuts[r] + cuts[r + 1]) / 2.0;
    std::map<std::string, std::pair<double, double>> tally;
    double mass = 0.0;
    for (std::size_t h = 0; h < aligned.size(); ++h) {
      std::set<std::string> asserted;
      for (const auto& s : aligned[h])
        if (s.start < mid && mid < s.end()) asserted.insert(s.speaker);
      if (!asserted.empty()) mass += weights[h];
      for (const auto& l : asserted) {
        auto& [votes, top] = tally[l];
        votes += weights[h];
        top = std::max(top, weights[h]);
      }
    }
    kept[r] = region_winners(tally, opt.single_label, mass);
  }
  for (std::size_t r = 0; r < regions; ++r) {
    const double len = cuts[r + 1] - cuts[r];
    if (len >= opt.min_region - 1e-12) continue;
    const double prev = r > 0 ? cuts[r] - cuts[r - 1] : -1.0;
    const double next = r + 1 < regions ? cuts[r + 2] - cuts[r + 1] : -1.0;
    if (prev < 0.0 && next < 0.0) continue;
    kept[r] = prev >= next ? kept[r - 1] : kept[r + 1];
  }
  SegmentList out;
  for (std::size_t r = 0; r < regions; ++r)
    for (const auto& l : kept[r]) out.push_back({recording, cuts[r], cuts[r + 1] - cuts[r], l});
  return merge_same_speaker(out);
}

inline SegmentList vote(const std::vector<WeightedHypothesis>& hyps, const VoteOptions& opt = {}) {
  std::vector<SegmentList> lists;
  std::vector<double> weights;
  for (const auto& h : hyps) {
    lists.push_back(h.segments);
    weights.push_back(h.weight);
  }
  return vote(lists, weights, opt);
}

/// Alignment followed by voting.
inline SegmentList fuse(const std::vector<WeightedHypothesis>& hyps, const VoteOptions& opt = {}) {
  std::vector<SegmentList> lists;
  std::vector<double> weights;
  for (const auto& h : hyps) {
    lists.push_back(h.segments);
    weights.push_back(h.weight);
  }
  if (lists.size() == 1) return vote(lists, weights, opt);
  return vote(align_labels(lists).relabeled, weights, opt);
}

}  // namespace arraydiar
