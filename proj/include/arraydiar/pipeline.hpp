#pragma once

// End-to-end run over one recording: VAD-gated SRP-PHAT localization,
// speaker census, sector diarization, optional fixed-k re-clustering of
// embeddings, weighted fusion and DER scoring. Every intermediate artifact
// is written under out_dir.

#include <chrono>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "arraydiar/audio.hpp"
#include "arraydiar/census.hpp"
#include "arraydiar/cluster.hpp"
#include "arraydiar/config.hpp"
#include "arraydiar/der.hpp"
#include "arraydiar/doa.hpp"
#include "arraydiar/embeddings.hpp"
#include "arraydiar/fusion.hpp"
#include "arraydiar/geometry.hpp"
#include "arraydiar/rttm.hpp"
#include "arraydiar/sectors.hpp"

namespace arraydiar {

inline const std::vector<std::string>& pipeline_stage_names() {
  static const std::vector<std::string> kStages = {"doa", "count", "diarize", "recluster", "fuse", "score"};
  return kStages;
}

struct FusionInput {
  std::string source;  // "spatial", "recluster", or an RTTM path
  double weight = 1.0;
};

/// Splits "path:weight" at the last colon.
inline FusionInput parse_fusion_input(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
    throw Error("fusion input `" + text + "` must look like <rttm>:<weight>");
  FusionInput in{text.substr(0, colon), 0.0};
  try {
    std::size_t used = 0;
    in.weight = std::stod(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::logic_error&) {
    throw Error("fusion input `" + text + "` has a non-numeric weight");
  }
  if (!(in.weight > 0.0)) throw Error("fusion input `" + text + "` needs a positive weight");
  return in;
}

struct PipelineConfig {
  std::string audio;
  std::string geometry;
  std::string vad;
  std::string embeddings;
  std::string reference;
  std::string track;   // pre-computed track CSV, used when `doa` is not run
  std::string census;  // pre-computed census JSON, used when `count` is not run
  std::string out_dir = "out";
  std::string recording_id;
  std::vector<std::string> stages;  // empty: every stage whose inputs are configured

  std::size_t grid = kDefaultGridSize;
  FramePlan plan{0.5, 0.5};
  std::size_t smooth = 1;
  bool include_low_confidence = false;
  bool carry_forward = true;

  int max_speakers = kDefaultMaxSpeakers;
  std::uint64_t seed = 0;

  std::vector<FusionInput> fusion;
  bool single_label = false;

  double collar = kDefaultCollar;
  bool ignore_overlap = false;
  unsigned threads = 0;

  static PipelineConfig from_config(const KeyValueConfig& cfg) {
    PipelineConfig c;
    c.audio = cfg.string("audio");
    c.geometry = cfg.string("geometry");
    c.vad = cfg.string("vad");
    c.embeddings = cfg.string("embeddings");
    c.reference = cfg.string("reference");
    c.track = cfg.string("track");
    c.census = cfg.string("census");
    c.out_dir = cfg.string("out_dir", c.out_dir);
    c.recording_id = cfg.string("recording_id");
    if (cfg.has("stages")) c.stages = split_stages(cfg.string("stages"));
    c.grid = static_cast<std::size_t>(cfg.number("grid", static_cast<double>(c.grid)));
    c.plan.frame_length = cfg.number("frame", c.plan.frame_length);
    c.plan.frame_shift = cfg.number("shift", c.plan.frame_shift);
    c.smooth = static_cast<std::size_t>(cfg.number("smooth", 1.0));
    c.include_low_confidence = cfg.boolean("include_low_confidence", c.include_low_confidence);
    c.carry_forward = cfg.boolean("carry_forward", c.carry_forward);
    c.max_speakers = static_cast<int>(cfg.number("max_speakers", c.max_speakers));
    c.seed = static_cast<std::uint64_t>(cfg.number("seed", 0.0));
    for (const auto& f : cfg.all("fuse")) {
      if (f.is_array()) {
        for (const auto& e : f) c.fusion.push_back(parse_fusion_input(e.get<std::string>()));
      } else {
        c.fusion.push_back(parse_fusion_input(f.is_string() ? f.get<std::string>() : f.dump()));
      }
    }
    c.single_label = cfg.boolean("single_label", c.single_label);
    c.collar = cfg.number("collar", c.collar);
    c.ignore_overlap = cfg.boolean("ignore_overlap", c.ignore_overlap);
    c.threads = static_cast<unsigned>(cfg.number("threads", 0.0));
    return c;
  }

  static PipelineConfig load(const std::string& path) { return from_config(KeyValueConfig::load(path)); }

  static std::vector<std::string> split_stages(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (!item.empty()) out.push_back(item);
    }
    return out;
  }

  std::vector<std::string> resolved_stages() const {
    if (!stages.empty()) return stages;
    std::vector<std::string> out;
    if (!audio.empty()) out.push_back("doa");
    if (!audio.empty() || !track.empty()) {
      out.push_back("count");
      out.push_back("diarize");
    }
    if (!embeddings.empty()) out.push_back("recluster");
    if (!fusion.empty()) out.push_back("fuse");
    if (!reference.empty()) out.push_back("score");
    return out;
  }

  std::string resolved_recording_id() const {
    if (!recording_id.empty()) return recording_id;
    if (!audio.empty()) return std::filesystem::path(audio).stem().string();
    return "rec";
  }

  /// Checks that every selected stage has its inputs, before any work runs.
  void validate() const {
    const auto st = resolved_stages();
    const std::set<std::string> sel(st.begin(), st.end());
    for (const auto& s : st) {
      const auto& known = pipeline_stage_names();
      if (std::find(known.begin(), known.end(), s) == known.end()) throw Error("pipeline: unknown stage `" + s + "`");
    }
    auto need = [](bool ok, const std::string& what) {
      if (!ok) throw Error("pipeline: " + what);
    };
    const bool have_track = sel.count("doa") || !track.empty();
    const bool have_census = sel.count("count") || !census.empty();
    if (sel.count("doa")) {
      need(!audio.empty(), "stage doa needs `audio`");
      need(!geometry.empty(), "stage doa needs `geometry`");
      need(!vad.empty(), "stage doa needs `vad`");
    }
    if (sel.count("count")) need(have_track, "stage count needs stage doa or a `track` file");
    if (sel.count("diarize")) {
      need(have_track, "stage diarize needs stage doa or a `track` file");
      need(have_census, "stage diarize needs stage count or a `census` file");
    }
    if (sel.count("recluster")) {
      need(!embeddings.empty(), "stage recluster needs `embeddings`");
      need(have_census, "stage recluster needs stage count or a `census` file");
    }
    if (sel.count("fuse")) {
      need(fusion.size() >= 2, "stage fuse needs at least two `fuse` inputs");
      for (const auto& f : fusion) {
        if (f.source == "spatial") need(sel.count("diarize") > 0, "fuse input `spatial` needs stage diarize");
        else if (f.source == "recluster") need(sel.count("recluster") > 0, "fuse input `recluster` needs stage recluster");
      }
    }
    if (sel.count("score")) {
      need(!reference.empty(), "stage score needs `reference`");
      need(sel.count("diarize") || sel.count("recluster") || sel.count("fuse"),
           "stage score needs one of diarize, recluster, fuse");
    }
    plan.validate();
  }
};

struct PipelineResult {
  std::map<std::string, std::filesystem::path> artifacts;
  std::optional<SpeakerCensus> census;
  std::map<std::string, SegmentList> hypotheses;  // spatial / recluster / fused
  std::map<std::string, DerReport> scores;
};

namespace detail {

class StageTimer {
 public:
  StageTimer(std::string recording, std::string stage)
      : recording_(std::move(recording)), stage_(std::move(stage)), start_(std::chrono::steady_clock::now()) {}

  ~StageTimer() {
    const auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
    std::ostringstream os;
    os << "recording=" << recording_ << " stage=" << stage_ << " elapsed_ms=" << ms;
    log::info(os.str());
  }

 private:
  std::string recording_;
  std::string stage_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  const auto stages = cfg.resolved_stages();
  const std::set<std::string> sel(stages.begin(), stages.end());
  const std::string rec = cfg.resolved_recording_id();
  const std::filesystem::path out_dir(cfg.out_dir);
  std::filesystem::create_directories(out_dir);

  PipelineResult result;
  std::optional<DoaTrack> track;
  if (!cfg.track.empty() && !sel.count("doa")) track = read_track_csv(cfg.track, cfg.plan);
  if (!cfg.census.empty() && !sel.count("count")) result.census = read_census(cfg.census);

  if (sel.count("doa")) {
    detail::StageTimer t(rec, "doa");
    const auto geometry = MicArrayGeometry::load(cfg.geometry);
    const auto clip = load_wav(cfg.audio);
    const auto vad = read_rttm(cfg.vad);
    track = localize(clip, cfg.plan, build_grid(geometry, cfg.grid), vad, cfg.threads);
    result.artifacts["track"] = out_dir / "track.csv";
    write_track_csv(*track, result.artifacts["track"].string());
  }
  if (sel.count("count")) {
    detail::StageTimer t(rec, "count");
    result.census = count_speakers(build_histogram(*track, cfg.include_low_confidence));
    result.artifacts["census"] = out_dir / "census.json";
    result.artifacts["histogram"] = out_dir / "histogram.csv";
    write_census(*result.census, result.artifacts["census"].string());
    write_histogram_csv(result.census->histogram, result.artifacts["histogram"].string());
  }
  if (sel.count("diarize")) {
    detail::StageTimer t(rec, "diarize");
    const auto smoothed = smooth_track(*track, cfg.smooth);
    const auto labels = assign_frames(smoothed, build_sectors(*result.census), cfg.carry_forward);
    auto hyp = frames_to_rttm(labels, cfg.plan, rec);
    result.artifacts["spatial"] = out_dir / "spatial.rttm";
    write_rttm(hyp, result.artifacts["spatial"].string());
    result.hypotheses["spatial"] = std::move(hyp);
  }
  if (sel.count("recluster")) {
    detail::StageTimer t(rec, "recluster");
    const auto set = read_embeddings(cfg.embeddings);
    SpectralOptions opt;
    opt.max_speakers = cfg.max_speakers;
    opt.seed = cfg.seed;
    const auto k = std::min<int>(static_cast<int>(result.census->count), static_cast<int>(set.size()));
    const auto assign = sc_fixed_k(cosine_affinity(set), k, opt);
    auto hyp = assignment_to_rttm(assign, set, rec);
    result.artifacts["recluster"] = out_dir / "recluster.rttm";
    write_rttm(hyp, result.artifacts["recluster"].string());
    result.hypotheses["recluster"] = std::move(hyp);
  }
  if (sel.count("fuse")) {
    detail::StageTimer t(rec, "fuse");
    std::vector<WeightedHypothesis> inputs;
    for (const auto& f : cfg.fusion) {
      auto it = result.hypotheses.find(f.source);
      inputs.push_back({it != result.hypotheses.end() ? it->second : read_rttm(f.source), f.weight});
    }
    auto hyp = fuse(inputs, VoteOptions{cfg.single_label});
    for (auto& s : hyp) s.recording_id = rec;
    result.artifacts["fused"] = out_dir / "fused.rttm";
    write_rttm(hyp, result.artifacts["fused"].string());
    result.hypotheses["fused"] = std::move(hyp);
  }
  if (sel.count("score")) {
    detail::StageTimer t(rec, "score");
    const auto ref = read_rttm(cfg.reference);
    nlohmann::json report = nlohmann::json::object();
    for (const auto& [name, hyp] : result.hypotheses) {
      // Score by time alone: the recording id of the run may differ from the reference's.
      SegmentList relabeled = hyp;
      const auto ref_rec = ref.empty() ? rec : ref.front().recording_id;
      for (auto& s : relabeled) s.recording_id = ref_rec;
      const auto r = score(filter_recording(ref, ref_rec), relabeled, ScoreOptions{cfg.collar, cfg.ignore_overlap});
      report[name] = report_to_json(r);
      result.scores[name] = r;
    }
    result.artifacts["report"] = out_dir / "report.json";
    std::ofstream out(result.artifacts["report"]);
    if (!out) throw Error("pipeline: cannot write report");
    out << report.dump(2) << "\n";
  }
  return result;
}

/// Runs independent recordings concurrently; results keep manifest order.
inline std::vector<PipelineResult> run_manifest(const std::vector<PipelineConfig>& configs) {
  for (const auto& c : configs) c.validate();
  std::vector<std::future<PipelineResult>> jobs;
  for (const auto& c : configs) jobs.push_back(std::async(std::launch::async, [&c] { return run_pipeline(c); }));
  std::vector<PipelineResult> out;
  for (auto& j : jobs) out.push_back(j.get());
  return out;
}

}  // namespace arraydiar
