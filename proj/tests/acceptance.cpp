// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>

#include "arraydiar/arraydiar.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

namespace ad = arraydiar;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Outcome {
  bool pass;
  std::string detail;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// 1. SRP-PHAT accuracy

struct SrpRun {
  int hits = 0;
  double srp_seconds = 0;
  double total_seconds = 0;
};

SrpRun srp_frames(double rate, ad::SourceSignal signal, std::uint64_t seed) {
  const auto t0 = Clock::now();
  auto geo = ad::MicArrayGeometry::circular(4, 0.1, rate);
  auto grid = ad::build_grid(geo, 256);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> az(0.0, 360.0);
  SrpRun run;
  for (int i = 0; i < 100; ++i) {
    const double truth = std::floor(az(rng) * 100.0) / 100.0;
    ad::SceneSpec spec{geo, {}};
    spec.duration = 0.5;
    spec.snr_db = 20.0;
    spec.seed = seed * 1000 + static_cast<std::uint64_t>(i);
    ad::SceneSource src{truth, {{0.0, 0.5}}};
    src.signal = signal;
    spec.sources.push_back(src);
    auto clip = ad::render(spec).clip;
    const auto t1 = Clock::now();
    std::vector<std::span<const float>> ch;
    for (std::size_t c = 0; c < 4; ++c) ch.push_back(clip.channel(c));
    auto f = ad::srp_phat_frame(ch, grid);
    run.srp_seconds += seconds_since(t1);
    if (fixture::circ_dist(f.argmax_azimuth, truth) <= grid.step_deg() + 1e-9) ++run.hits;
  }
  run.total_seconds = seconds_since(t0);
  return run;
}

Outcome srp_accuracy() {
  auto r = srp_frames(48000, ad::SourceSignal::kWhiteNoise, 1);
  std::ostringstream ss;
  ss << r.hits << "/100 frames within one grid step (48 kHz broadband source), SRP " << r.srp_seconds << " s, total with synthesis "
     << r.total_seconds << " s";
  return {r.hits >= 98 && r.total_seconds < 5.0, ss.str()};
}

// ---------------------------------------------------------------------------
// 2. GCC-PHAT

Outcome gcc_oracle() {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<int> delay(-64, 64);
  int exact = 0, agree = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int d = delay(rng);
    const std::size_t n = 1024;
    std::vector<double> src(n + 128);
    for (auto& v : src) v = g(rng);
    // y[t] = x[t - d] on a linear (not circular) timeline.
    std::vector<float> x(n), y(n);
    for (std::size_t t = 0; t < n; ++t) {
      x[t] = static_cast<float>(src[t + 64]);
      y[t] = static_cast<float>(src[static_cast<std::size_t>(static_cast<int>(t) + 64 - d)]);
    }
    const int peak = ad::gcc_phat(x, y).peak_lag();
    const int ncc = oracle::ncc_argmax(std::vector<double>(x.begin(), x.end()), std::vector<double>(y.begin(), y.end()), 64);
    exact += peak == d;
    agree += peak == ncc;
  }
  std::ostringstream ss;
  ss << exact << "/50 peaks equal the injected delay, " << agree << "/50 equal the NCC argmax";
  return {exact == 50 && agree == 50, ss.str()};
}

// ---------------------------------------------------------------------------
// 3. Speaker counting

std::size_t estimate_count(const ad::SceneSpec& spec) {
  auto scene = ad::render(spec);
  auto grid = ad::build_grid(spec.geometry, 256);
  auto track = ad::localize(scene.clip, {0.5, 0.5}, grid, scene.vad);
  return ad::count_speakers(ad::build_histogram(track)).count;
}

Outcome counting() {
  auto geo = ad::MicArrayGeometry::circular(4, 0.1, 16000);
  int correct = 0;
  std::ostringstream wrong;
  for (int i = 0; i < 50; ++i) {
    const std::size_t k = 1 + static_cast<std::size_t>(i % 4);
    auto scene = fixture::count_scene(geo, k, 300 + static_cast<std::uint64_t>(i), 15.0);
    const auto est = estimate_count(scene.spec);
    if (est == k) ++correct;
    else wrong << " scene " << i << " (" << k << "->" << est << ")";
  }
  std::ostringstream ss;
  ss << correct << "/50 scenes counted correctly" << wrong.str();
  return {correct >= 45, ss.str()};
}

// ---------------------------------------------------------------------------
// 4. Counting rule

Outcome counting_rule() {
  std::mt19937_64 rng(4);
  int disagree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::array<long, 36> c{};
    const int hi = trial % 2 == 0 ? 5 : 60;
    std::uniform_int_distribution<long> v(0, hi);
    for (auto& x : c) x = v(rng);
    ad::AngularHistogram h;
    h.bins = c;
    if (ad::count_speakers(h).count != oracle::count_rule(c)) ++disagree;
  }
  return {disagree == 0, std::to_string(disagree) + " disagreements in 1000 random histograms"};
}

// ---------------------------------------------------------------------------
// 5. End-to-end spatial diarization

Outcome end_to_end() {
  ad::SceneSpec spec{ad::MicArrayGeometry::circular(4, 0.1, 16000), {}};
  spec.duration = 18.5;
  spec.seed = 5;
  spec.snr_db = kInf;
  spec.sources.push_back({20.0, {{0.25, 3.25}, {9.25, 12.25}}});
  spec.sources.push_back({140.0, {{3.25, 6.25}, {12.25, 15.25}}});
  spec.sources.push_back({260.0, {{6.25, 9.25}, {15.25, 18.25}}});
  auto scene = ad::render(spec);
  auto grid = ad::build_grid(spec.geometry, 256);
  const ad::FramePlan plan{0.5, 0.5};
  auto track = ad::localize(scene.clip, plan, grid, scene.vad);
  auto census = ad::count_speakers(ad::build_histogram(track));
  auto hyp = ad::frames_to_rttm(ad::assign_frames(track, ad::build_sectors(census)), plan, "scene");
  auto r = ad::score(scene.reference, hyp, {0.25, false});
  std::ostringstream ss;
  ss << "count " << census.count << ", DER " << r.der() << "% (collar 0.25 s)";
  return {census.count == 3 && r.der() < 5.0, ss.str()};
}

// ---------------------------------------------------------------------------
// 6. NME-SC

Outcome nme_sc() {
  int k_ok = 0, acc_ok = 0, fixed_ok = 0;
  double worst_acc = 1.0, worst_fixed = 1.0;
  for (int i = 0; i < 20; ++i) {
    const std::size_t k = 2 + static_cast<std::size_t>(i % 3);
    auto b = fixture::separated_blobs(k, 15, 30, 600 + static_cast<std::uint64_t>(i));
    auto aff = ad::cosine_affinity(b.set);
    auto r = ad::nme_sc(aff);
    auto f = ad::sc_fixed_k(aff, static_cast<int>(k));
    const double acc = oracle::label_accuracy(b.truth, r.labels);
    const double facc = oracle::label_accuracy(b.truth, f.labels);
    k_ok += r.k == static_cast<int>(k);
    acc_ok += acc >= 0.95;
    fixed_ok += facc >= 0.98;
    worst_acc = std::min(worst_acc, acc);
    worst_fixed = std::min(worst_fixed, facc);
  }
  std::ostringstream ss;
  ss << "k correct " << k_ok << "/20, accuracy >= 95% in " << acc_ok << "/20 (worst " << worst_acc * 100
     << "%), fixed k >= 98% in " << fixed_ok << "/20 (worst " << worst_fixed * 100 << "%)";
  return {k_ok >= 19 && worst_acc >= 0.95 && worst_fixed >= 0.98, ss.str()};
}

// ---------------------------------------------------------------------------
// 7. AHC

ad::AffinityMatrix matrix_of(const std::vector<std::vector<double>>& s) {
  const auto n = static_cast<Eigen::Index>(s.size());
  ad::AffinityMatrix a{Eigen::MatrixXd(n, n)};
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a.values(i, j) = s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return a;
}

Outcome ahc() {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int mismatches = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(2, 8)(rng);
    std::vector<std::vector<double>> s(n, std::vector<double>(n, 1.0));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s[i][j] = s[j][i] = u(rng);
    const double thr = trial % 2 == 0 ? -2.0 : ad::kDefaultAhcThreshold;
    auto got = ad::ahc_with_dendrogram(matrix_of(s), thr).dendrogram;
    auto want = oracle::ahc_dendrogram(s, thr);
    bool same = got.size() == want.size();
    for (std::size_t m = 0; same && m < got.size(); ++m)
      same = got[m].first == want[m].first && got[m].second == want[m].second &&
             std::abs(got[m].similarity - want[m].similarity) < 1e-12;
    mismatches += !same;
  }
  std::vector<std::vector<double>> at{{1, -0.015}, {-0.015, 1}};
  const bool merges_at = ad::ahc(matrix_of(at)).k == 1;
  at[0][1] = at[1][0] = std::nextafter(-0.015, -1.0);
  const bool stops_below = ad::ahc(matrix_of(at)).k == 2;
  std::ostringstream ss;
  ss << mismatches << " dendrogram mismatches in 50 trials, merge at -0.015 " << (merges_at ? "yes" : "no")
     << ", merge just below " << (stops_below ? "no" : "yes");
  return {mismatches == 0 && merges_at && stops_below, ss.str()};
}

// ---------------------------------------------------------------------------
// 8. DER

ad::Segment seg(double a, double b, const char* spk) { return {"r", a, b - a, spk}; }

ad::SegmentList random_list(std::mt19937_64& rng, int speakers, int segments, const std::string& prefix) {
  ad::SegmentList out;
  std::uniform_int_distribution<int> start(0, 19000), len(100, 4000), spk(0, speakers - 1);
  for (int i = 0; i < segments; ++i) out.push_back({"r", start(rng) / 1000.0, len(rng) / 1000.0, prefix + std::to_string(spk(rng))});
  return out;
}

Outcome der() {
  struct Hand {
    ad::SegmentList ref, hyp;
    ad::ScoreOptions opt;
    double der;
  };
  const std::vector<Hand> hand{
      {{seg(0, 10, "A")}, {seg(0, 5, "X"), seg(5, 10, "Y")}, {0.25, false}, 50.0},
      {{seg(0, 10, "A"), seg(5, 15, "B")}, {seg(0, 15, "X")}, {0.0, true}, 50.0},
      {{seg(0, 10, "A"), seg(5, 15, "B")}, {seg(0, 15, "X")}, {0.0, false}, 50.0},
      {{seg(0, 10, "A")}, {seg(0, 10, "X")}, {0.25, false}, 0.0},
      {{seg(0, 10, "A")}, {}, {0.0, false}, 100.0},
      {{seg(0, 4, "A")}, {seg(0, 4, "X"), seg(6, 8, "Y")}, {0.0, false}, 50.0},
      {{seg(1, 5, "A")}, {seg(1.2, 5.1, "X")}, {0.25, false}, 0.0},
      {{seg(1, 5, "A")}, {seg(1.2, 5.1, "X")}, {0.0, false}, 7.5},
      {{seg(0, 10, "A"), seg(4, 6, "B")}, {seg(0, 10, "X")}, {0.0, false}, 100.0 * 2 / 12},
      {{seg(0, 9, "A"), seg(9, 13, "B")}, {seg(0, 5, "X"), seg(9, 13, "X"), seg(5, 9, "Y")}, {0.0, false}, 100.0 * 5 / 13},
  };
  int hand_ok = 0;
  for (const auto& h : hand) hand_ok += std::abs(ad::score(h.ref, h.hyp, h.opt).der() - h.der) < 0.01;

  std::mt19937_64 rng(8);
  int self_ok = 0;
  for (int trial = 0; trial < 20; ++trial) {
    auto ref = random_list(rng, 4, 10, "s");
    self_ok += ad::score(ref, ref, {0.25, false}).der() == 0.0;
  }
  int hung_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    auto ref = random_list(rng, std::uniform_int_distribution<int>(1, 4)(rng), 10, "r");
    auto hyp = random_list(rng, std::uniform_int_distribution<int>(1, 4)(rng), 10, "h");
    const double got = ad::score(ref, hyp, {0.0, false}).speaker_error;
    hung_ok += std::abs(got - oracle::der_grid(ref, hyp, 0.0, false).se / 1000.0) < 1e-9;
  }
  std::ostringstream ss;
  ss << hand_ok << "/10 hand timelines, " << self_ok << "/20 self-scores at 0.00%, " << hung_ok
     << "/100 mappings equal factorial search";
  return {hand_ok == 10 && self_ok == 20 && hung_ok == 100, ss.str()};
}

// ---------------------------------------------------------------------------
// 9. Fusion

ad::SegmentList random_hyp(std::mt19937_64& rng, int speakers, int segments, const std::string& prefix) {
  ad::SegmentList out;
  std::uniform_int_distribution<int> start(0, 95), len(1, 30), spk(0, speakers - 1);
  for (int i = 0; i < segments; ++i) {
    const int a = start(rng);
    const int b = std::min(100, a + len(rng));
    out.push_back({"r", a / 10.0, (b - a) / 10.0, prefix + std::to_string(spk(rng))});
  }
  return ad::merge_same_speaker(out);
}

bool same_timeline(const ad::SegmentList& a, const ad::SegmentList& b) {
  auto x = ad::normalized(a), y = ad::normalized(b);
  if (x.size() != y.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (x[i].speaker != y[i].speaker || std::abs(x[i].start - y[i].start) > 1e-9 || std::abs(x[i].duration - y[i].duration) > 1e-9)
      return false;
  return true;
}

Outcome fusion() {
  std::mt19937_64 rng(9);
  int unanimous = 0, scaled = 0, tally = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 2;
    auto h = random_hyp(rng, 3, 8, "s");
    std::vector<ad::WeightedHypothesis> same, in, big;
    std::vector<ad::SegmentList> lists;
    std::vector<double> w;
    const double f = std::uniform_real_distribution<double>(0.01, 100.0)(rng);
    for (int i = 0; i < n; ++i) {
      const double wi = std::uniform_int_distribution<int>(1, 5)(rng) / 10.0;
      auto hi = random_hyp(rng, 3, 6, "s");
      same.push_back({h, wi});
      in.push_back({hi, wi});
      big.push_back({hi, wi * f});
      lists.push_back(hi);
      w.push_back(wi);
    }
    unanimous += same_timeline(ad::fuse(same), h);
    scaled += same_timeline(ad::fuse(in), ad::fuse(big));
    const bool single = trial % 4 == 0;
    auto out = ad::vote(lists, w, {single});
    bool ok = true;
    for (int cell = 0; cell < 100 && ok; ++cell) {
      const double t = cell / 10.0 + 0.05;
      auto got = oracle::asserted_at(out, t);
      ok = std::vector<std::string>(got.begin(), got.end()) == oracle::tally_winners(lists, w, t, single);
    }
    tally += ok;
  }
  std::vector<ad::SegmentList> aab{{{"r", 0, 2, "A"}}, {{"r", 0, 2, "A"}}, {{"r", 0, 2, "B"}}};
  auto out = ad::vote(aab, {0.3, 0.3, 0.4}, {true});
  const bool a_wins = out.size() == 1 && out[0].speaker == "A";
  std::ostringstream ss;
  ss << "unanimity " << unanimous << "/100, scaling " << scaled << "/100, brute-force tally " << tally
     << "/100, (A,A,B) at 0.3/0.3/0.4 gives " << (a_wins ? "A" : "not A");
  return {unanimous == 100 && scaled == 100 && tally == 100 && a_wins, ss.str()};
}

// ---------------------------------------------------------------------------
// 10. Determinism

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto dir = fs::temp_directory_path() / "arraydiar_acceptance_det";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<ad::PipelineConfig> manifest;
  for (std::uint64_t rec = 0; rec < 2; ++rec) {
    ad::SceneSpec spec{ad::MicArrayGeometry::circular(4, 0.1, 16000), {}};
    spec.duration = 10.5;
    spec.seed = 10 + rec;
    spec.snr_db = 20;
    spec.recording_id = "rec" + std::to_string(rec);
    spec.sources.push_back({45.0 + 10.0 * static_cast<double>(rec), {{0.25, 2.25}, {6.25, 8.25}}});
    spec.sources.push_back({170.0, {{2.25, 4.25}, {8.25, 10.25}}});
    spec.sources.push_back({290.0, {{4.25, 6.25}}});
    auto scene = ad::render(spec);
    const auto base = dir / spec.recording_id;
    ad::write_wav(scene.clip, base.string() + ".wav");
    ad::write_rttm(scene.reference, base.string() + ".ref.rttm");
    ad::write_rttm(scene.vad, base.string() + ".vad.rttm");
    std::ofstream(base.string() + ".geo.cfg") << spec.geometry.to_config_text();
    ad::EmbeddingSynthOptions eo;
    eo.seed = spec.seed;
    ad::write_embeddings(ad::synthesize_embeddings(scene.reference, scene.vad, eo), base.string() + ".emb.txt");
    ad::PipelineConfig c;
    c.audio = base.string() + ".wav";
    c.geometry = base.string() + ".geo.cfg";
    c.vad = base.string() + ".vad.rttm";
    c.reference = base.string() + ".ref.rttm";
    c.embeddings = base.string() + ".emb.txt";
    c.fusion = {{"spatial", 0.3}, {"recluster", 0.3}, {"spatial", 0.4}};
    c.seed = 11;
    manifest.push_back(c);
  }
  auto run = [&](const std::string& tag) {
    auto m = manifest;
    for (auto& c : m) c.out_dir = (dir / tag / c.resolved_recording_id()).string();
    return ad::run_manifest(m);
  };
  auto a = run("first"), b = run("second");
  std::size_t files = 0, identical = 0;
  for (std::size_t r = 0; r < a.size(); ++r)
    for (const auto& [name, path] : a[r].artifacts) {
      ++files;
      identical += b[r].artifacts.count(name) && slurp(path) == slurp(b[r].artifacts.at(name));
    }
  std::ostringstream ss;
  ss << identical << "/" << files << " output files bit-identical across two manifest runs";
  return {files > 0 && identical == files, ss.str()};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"srp-phat localization accuracy", srp_accuracy},
      {"gcc-phat oracle equivalence", gcc_oracle},
      {"speaker counting", counting},
      {"counting rule truth table", counting_rule},
      {"end-to-end spatial diarization", end_to_end},
      {"nme-sc", nme_sc},
      {"ahc", ahc},
      {"der scorer", der},
      {"fusion", fusion},
      {"pipeline determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o{false, ""};
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.detail = std::string("exception: ") + e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first << ": " << o.detail << std::endl;
  }
  // Band-limited excitation at 16 kHz, reported only.
  auto info = srp_frames(16000, ad::SourceSignal::kSpeechNoise, 1);
  std::cout << "INFO srp-phat with 300-3400 Hz source at 16 kHz: " << info.hits << "/100 frames within one grid step" << std::endl;
  std::cout << (failed ? "FAILED " : "ALL PASSED ") << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size()
            << std::endl;
  return failed ? 1 : 0;
}
