// arraydiar command line front-end.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "arraydiar/arraydiar.hpp"

namespace ad = arraydiar;

namespace {

struct Verbosity {
  int level = 0;
  void apply() const {
    if (level >= 2) ad::log::set_level(ad::log::Level::kDebug);
    else if (level == 1) ad::log::set_level(ad::log::Level::kInfo);
  }
};

void add_verbosity(CLI::App* app, Verbosity& v) {
  app->add_flag("-v,--verbose", v.level, "More log output (repeat for debug)");
}

ad::FramePlan plan_of(double frame, double shift) {
  ad::FramePlan plan{frame, shift};
  plan.validate();
  return plan;
}

std::vector<std::string> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ad::Error("cannot open manifest: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos || line[b] == '#') continue;
    auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  if (out.empty()) throw ad::Error("manifest lists no configs: " + path);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Array-based speaker diarization: SRP-PHAT census, clustering, fusion, DER"};
  app.require_subcommand(1);
  Verbosity verbosity;
  add_verbosity(&app, verbosity);

  // doa
  struct {
    std::string audio, geometry, vad, out;
    std::size_t grid = ad::kDefaultGridSize;
    double frame = 0.5, shift = 0.5;
    unsigned threads = 0;
  } doa;
  auto* doa_cmd = app.add_subcommand("doa", "SRP-PHAT azimuth track over VAD frames");
  doa_cmd->add_option("--audio", doa.audio, "Multichannel WAV")->required();
  doa_cmd->add_option("--geometry", doa.geometry, "Array geometry config")->required();
  doa_cmd->add_option("--vad", doa.vad, "Speech regions (RTTM)")->required();
  doa_cmd->add_option("--grid", doa.grid, "Number of azimuth directions")->capture_default_str();
  doa_cmd->add_option("--frame", doa.frame, "Frame length in seconds")->capture_default_str();
  doa_cmd->add_option("--shift", doa.shift, "Frame shift in seconds")->capture_default_str();
  doa_cmd->add_option("--threads", doa.threads, "Worker threads (0: hardware)");
  doa_cmd->add_option("--out", doa.out, "Track CSV")->required();
  doa_cmd->callback([&] {
    const auto geometry = ad::MicArrayGeometry::load(doa.geometry);
    const auto clip = ad::load_wav(doa.audio);
    const auto track = ad::localize(clip, plan_of(doa.frame, doa.shift), ad::build_grid(geometry, doa.grid),
                                    ad::read_rttm(doa.vad), doa.threads);
    ad::write_track_csv(track, doa.out);
  });

  // count
  struct {
    std::string track, out, hist_csv;
    double frame = 0.5, shift = 0.5;
    bool include_low = false;
  } count;
  auto* count_cmd = app.add_subcommand("count", "Speaker census from an azimuth track");
  count_cmd->add_option("--track", count.track, "Track CSV")->required();
  count_cmd->add_option("--out", count.out, "Census JSON")->required();
  count_cmd->add_option("--hist-csv", count.hist_csv, "Write the 36-bin histogram as CSV");
  count_cmd->add_flag("--include-low-confidence", count.include_low, "Count low-confidence frames too");
  count_cmd->callback([&] {
    const auto track = ad::read_track_csv(count.track);
    const auto census = ad::count_speakers(ad::build_histogram(track, count.include_low));
    ad::write_census(census, count.out);
    if (!count.hist_csv.empty()) ad::write_histogram_csv(census.histogram, count.hist_csv);
    std::cout << "speakers: " << census.count << "\n";
  });

  // diarize
  struct {
    std::string audio, geometry, vad, out, hist_csv, recording_id;
    std::size_t grid = ad::kDefaultGridSize, smooth = 1;
    double frame = 0.5, shift = 0.5;
    bool include_low = false, no_carry = false;
    unsigned threads = 0;
  } dia;
  auto* dia_cmd = app.add_subcommand("diarize", "Spatial diarization: doa, census, sectors, RTTM");
  dia_cmd->add_option("--audio", dia.audio, "Multichannel WAV")->required();
  dia_cmd->add_option("--geometry", dia.geometry, "Array geometry config")->required();
  dia_cmd->add_option("--vad", dia.vad, "Speech regions (RTTM)")->required();
  dia_cmd->add_option("--out", dia.out, "Hypothesis RTTM")->required();
  dia_cmd->add_option("--hist-csv", dia.hist_csv, "Write the 36-bin histogram as CSV");
  dia_cmd->add_option("--smooth", dia.smooth, "Odd circular median width over the track (1: off)");
  dia_cmd->add_option("--grid", dia.grid, "Number of azimuth directions")->capture_default_str();
  dia_cmd->add_option("--frame", dia.frame, "Frame length in seconds")->capture_default_str();
  dia_cmd->add_option("--shift", dia.shift, "Frame shift in seconds")->capture_default_str();
  dia_cmd->add_option("--recording-id", dia.recording_id, "RTTM recording id (default: audio file stem)");
  dia_cmd->add_flag("--include-low-confidence", dia.include_low, "Count low-confidence frames in the census");
  dia_cmd->add_flag("--no-carry-forward", dia.no_carry, "Label low-confidence frames by their own azimuth");
  dia_cmd->add_option("--threads", dia.threads, "Worker threads (0: hardware)");
  dia_cmd->callback([&] {
    const auto plan = plan_of(dia.frame, dia.shift);
    const auto geometry = ad::MicArrayGeometry::load(dia.geometry);
    const auto clip = ad::load_wav(dia.audio);
    const auto track = ad::localize(clip, plan, ad::build_grid(geometry, dia.grid), ad::read_rttm(dia.vad), dia.threads);
    const auto census = ad::count_speakers(ad::build_histogram(track, dia.include_low));
    if (!dia.hist_csv.empty()) ad::write_histogram_csv(census.histogram, dia.hist_csv);
    const auto labels = ad::assign_frames(ad::smooth_track(track, dia.smooth), ad::build_sectors(census), !dia.no_carry);
    const std::string rec =
        dia.recording_id.empty() ? std::filesystem::path(dia.audio).stem().string() : dia.recording_id;
    ad::write_rttm(ad::frames_to_rttm(labels, plan, rec), dia.out);
  });

  // cluster
  struct {
    std::string embeddings, method = "nme-sc", out, recording_id = "rec";
    double threshold = ad::kDefaultAhcThreshold;
    int max_speakers = ad::kDefaultMaxSpeakers, k = 0;
    std::uint64_t seed = 0;
  } cl;
  auto* cl_cmd = app.add_subcommand("cluster", "Cluster segment embeddings into speakers");
  cl_cmd->add_option("--embeddings", cl.embeddings, "Embedding text file")->required();
  cl_cmd->add_option("--method", cl.method, "ahc or nme-sc")
      ->check(CLI::IsMember({"ahc", "nme-sc"}))
      ->capture_default_str();
  auto* thr_opt = cl_cmd->add_option("--threshold", cl.threshold, "AHC stopping similarity")->capture_default_str();
  cl_cmd->add_option("--max-speakers", cl.max_speakers, "Upper bound on k for NME-SC")->capture_default_str();
  cl_cmd->add_option("--k", cl.k, "Fixed number of speakers (spectral, skips the eigengap estimate)");
  cl_cmd->add_option("--seed", cl.seed, "k-means seed")->capture_default_str();
  cl_cmd->add_option("--recording-id", cl.recording_id, "RTTM recording id")->capture_default_str();
  cl_cmd->add_option("--out", cl.out, "Hypothesis RTTM")->required();
  cl_cmd->callback([&] {
    const auto set = ad::read_embeddings(cl.embeddings);
    const auto aff = ad::cosine_affinity(set);
    ad::ClusterAssignment assign;
    if (cl.method == "ahc") {
      if (thr_opt->count() == 0) {
        ad::log::warn("cluster: default AHC threshold -0.015 was tuned for PLDA-like scores; it may not transfer to cosine");
      }
      assign = ad::ahc(aff, cl.threshold);
    } else {
      ad::SpectralOptions opt;
      opt.max_speakers = cl.max_speakers;
      opt.seed = cl.seed;
      assign = cl.k > 0 ? ad::sc_fixed_k(aff, cl.k, opt) : ad::nme_sc(aff, opt);
    }
    ad::write_rttm(ad::assignment_to_rttm(assign, set, cl.recording_id), cl.out);
    std::cout << "speakers: " << assign.k << "\n";
  });

  // recluster
  struct {
    std::string embeddings, census, out, recording_id = "rec";
    std::uint64_t seed = 0;
  } rc;
  auto* rc_cmd = app.add_subcommand("recluster", "Spectral clustering with k taken from a census");
  rc_cmd->add_option("--embeddings", rc.embeddings, "Embedding text file")->required();
  rc_cmd->add_option("--census", rc.census, "Census JSON")->required();
  rc_cmd->add_option("--seed", rc.seed, "k-means seed")->capture_default_str();
  rc_cmd->add_option("--recording-id", rc.recording_id, "RTTM recording id")->capture_default_str();
  rc_cmd->add_option("--out", rc.out, "Hypothesis RTTM")->required();
  rc_cmd->callback([&] {
    const auto set = ad::read_embeddings(rc.embeddings);
    const auto census = ad::read_census(rc.census);
    ad::SpectralOptions opt;
    opt.seed = rc.seed;
    const int k = std::min<int>(static_cast<int>(census.count), static_cast<int>(set.size()));
    ad::write_rttm(ad::assignment_to_rttm(ad::sc_fixed_k(ad::cosine_affinity(set), k, opt), set, rc.recording_id),
                   rc.out);
  });

  // fuse
  struct {
    std::vector<std::string> hyps;
    std::string out;
    bool single_label = false;
  } fu;
  auto* fu_cmd = app.add_subcommand("fuse", "Weighted majority vote over diarization hypotheses");
  fu_cmd->add_option("--hyp", fu.hyps, "Hypothesis as file.rttm:weight (repeat)")->required();
  fu_cmd->add_option("--out", fu.out, "Fused RTTM")->required();
  fu_cmd->add_flag("--single-label", fu.single_label, "Keep only the top label per region");
  fu_cmd->callback([&] {
    std::vector<ad::WeightedHypothesis> inputs;
    for (const auto& h : fu.hyps) {
      const auto in = ad::parse_fusion_input(h);
      inputs.push_back({ad::read_rttm(in.source), in.weight});
    }
    ad::write_rttm(ad::fuse(inputs, ad::VoteOptions{fu.single_label}), fu.out);
  });

  // score
  struct {
    std::string ref, hyp, out;
    double collar = ad::kDefaultCollar;
    bool ignore_overlap = false;
  } sc;
  auto* sc_cmd = app.add_subcommand("score", "Diarization error rate");
  sc_cmd->add_option("--ref", sc.ref, "Reference RTTM")->required();
  sc_cmd->add_option("--hyp", sc.hyp, "Hypothesis RTTM")->required();
  sc_cmd->add_option("--collar", sc.collar, "No-score collar around reference boundaries (s)")->capture_default_str();
  sc_cmd->add_flag("--ignore-overlap", sc.ignore_overlap, "Exclude regions with two or more reference speakers");
  sc_cmd->add_option("--out", sc.out, "Report JSON");
  sc_cmd->callback([&] {
    const auto report =
        ad::score_all(ad::read_rttm(sc.ref), ad::read_rttm(sc.hyp), ad::ScoreOptions{sc.collar, sc.ignore_overlap});
    std::cout << ad::format_report_table(report);
    if (!sc.out.empty()) ad::write_report(report, sc.out);
  });

  // synth
  struct {
    std::string spec, audio, ref, vad, geometry, embeddings;
    bool pcm16 = false;
    std::uint64_t embed_seed = 0;
  } sy;
  auto* sy_cmd = app.add_subcommand("synth", "Render a far-field synthetic scene");
  sy_cmd->add_option("--spec", sy.spec, "Scene config")->required();
  sy_cmd->add_option("--out-audio", sy.audio, "Multichannel WAV")->required();
  sy_cmd->add_option("--out-ref", sy.ref, "Reference RTTM")->required();
  sy_cmd->add_option("--out-vad", sy.vad, "Oracle VAD RTTM")->required();
  sy_cmd->add_option("--out-geometry", sy.geometry, "Write the array geometry config");
  sy_cmd->add_option("--out-embeddings", sy.embeddings, "Write synthetic segment embeddings");
  sy_cmd->add_option("--embed-seed", sy.embed_seed, "Seed for synthetic embeddings")->capture_default_str();
  sy_cmd->add_flag("--pcm16", sy.pcm16, "Store 16-bit PCM instead of float32");
  sy_cmd->callback([&] {
    const auto spec = ad::SceneSpec::load(sy.spec);
    const auto scene = ad::render(spec);
    ad::write_wav(scene.clip, sy.audio, sy.pcm16 ? ad::WavEncoding::kPcm16 : ad::WavEncoding::kFloat32);
    ad::write_rttm(scene.reference, sy.ref);
    ad::write_rttm(scene.vad, sy.vad);
    if (!sy.geometry.empty()) {
      std::ofstream out(sy.geometry);
      if (!out) throw ad::Error("cannot write " + sy.geometry);
      out << spec.geometry.to_config_text();
    }
    if (!sy.embeddings.empty()) {
      ad::EmbeddingSynthOptions opt;
      opt.seed = sy.embed_seed;
      ad::write_embeddings(ad::synthesize_embeddings(scene.reference, scene.vad, opt), sy.embeddings);
    }
  });

  // pipeline
  struct {
    std::string config, manifest, stages, out_dir, audio, geometry, vad, embeddings, reference, track, census;
    std::vector<std::string> fuse, set;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    bool single_label = false, ignore_overlap = false;
  } pl;
  auto* pl_cmd = app.add_subcommand("pipeline", "Run the staged pipeline from a config or a manifest of configs");
  auto* cfg_opt = pl_cmd->add_option("--config", pl.config, "Pipeline config");
  auto* man_opt = pl_cmd->add_option("--manifest", pl.manifest, "File listing one pipeline config per line");
  cfg_opt->excludes(man_opt);
  auto* stages_opt = pl_cmd->add_option("--stages", pl.stages, "Comma-separated subset of doa,count,diarize,recluster,fuse,score");
  auto* out_opt = pl_cmd->add_option("--out-dir", pl.out_dir, "Output directory");
  auto* audio_opt = pl_cmd->add_option("--audio", pl.audio, "Multichannel WAV");
  auto* geo_opt = pl_cmd->add_option("--geometry", pl.geometry, "Array geometry config");
  auto* vad_opt = pl_cmd->add_option("--vad", pl.vad, "Speech regions (RTTM)");
  auto* emb_opt = pl_cmd->add_option("--embeddings", pl.embeddings, "Embedding text file");
  auto* ref_opt = pl_cmd->add_option("--reference", pl.reference, "Reference RTTM");
  auto* track_opt = pl_cmd->add_option("--track", pl.track, "Pre-computed track CSV");
  auto* census_opt = pl_cmd->add_option("--census", pl.census, "Pre-computed census JSON");
  auto* fuse_opt = pl_cmd->add_option("--fuse", pl.fuse, "Fusion input as name-or-file:weight (repeat)");
  auto* seed_opt = pl_cmd->add_option("--seed", pl.seed, "k-means seed");
  auto* threads_opt = pl_cmd->add_option("--threads", pl.threads, "Worker threads for doa (0: hardware)");
  auto* single_opt = pl_cmd->add_flag("--single-label", pl.single_label, "Fusion keeps the top label only");
  auto* ovl_opt = pl_cmd->add_flag("--ignore-overlap", pl.ignore_overlap, "Scoring excludes overlap regions");
  pl_cmd->add_option("--set", pl.set, "Override any config key as key=value (repeat)");
  pl_cmd->callback([&] {
    ad::KeyValueConfig overrides;
    {
      std::string text;
      for (const auto& kv : pl.set) text += kv + "\n";
      overrides = ad::KeyValueConfig::from_string(text);
    }
    auto put = [&](CLI::Option* opt, const std::string& key, nlohmann::json value) {
      if (opt->count() > 0) overrides.set(key, {std::move(value)});
    };
    put(stages_opt, "stages", pl.stages);
    put(out_opt, "out_dir", pl.out_dir);
    put(audio_opt, "audio", pl.audio);
    put(geo_opt, "geometry", pl.geometry);
    put(vad_opt, "vad", pl.vad);
    put(emb_opt, "embeddings", pl.embeddings);
    put(ref_opt, "reference", pl.reference);
    put(track_opt, "track", pl.track);
    put(census_opt, "census", pl.census);
    put(fuse_opt, "fuse", pl.fuse);
    put(seed_opt, "seed", pl.seed);
    put(threads_opt, "threads", pl.threads);
    put(single_opt, "single_label", pl.single_label);
    put(ovl_opt, "ignore_overlap", pl.ignore_overlap);

    std::vector<ad::PipelineConfig> configs;
    if (!pl.manifest.empty()) {
      for (const auto& path : read_manifest(pl.manifest)) {
        auto cfg = ad::KeyValueConfig::load(path);
        cfg.merge(overrides);
        auto pc = ad::PipelineConfig::from_config(cfg);
        // A shared output directory from the command line gets one subdirectory per recording.
        if (out_opt->count() > 0) pc.out_dir = (std::filesystem::path(pl.out_dir) / pc.resolved_recording_id()).string();
        configs.push_back(std::move(pc));
      }
    } else {
      ad::KeyValueConfig cfg;
      if (!pl.config.empty()) cfg = ad::KeyValueConfig::load(pl.config);
      cfg.merge(overrides);
      configs.push_back(ad::PipelineConfig::from_config(cfg));
    }
    const auto results = ad::run_manifest(configs);
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto rec = configs[i].resolved_recording_id();
      if (results[i].census) std::cout << rec << " speakers: " << results[i].census->count << "\n";
      for (const auto& [name, r] : results[i].scores) {
        std::printf("%s %-10s DER %.2f%% (MS %.2f%% FA %.2f%% SER %.2f%%)\n", rec.c_str(), name.c_str(), r.der(),
                    r.missed_pct(), r.false_alarm_pct(), r.speaker_error_pct());
      }
    }
  });

  try {
    app.parse_complete_callback([&] { verbosity.apply(); });
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
