#pragma once

// Clustering of externally supplied speaker embeddings: average-linkage AHC
// on cosine similarity, and spectral clustering whose affinity binarization
// and cluster count are tuned by the normalized maximum eigengap (NME).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arraydiar/common.hpp"
#include "arraydiar/embeddings.hpp"
#include "arraydiar/rttm.hpp"

namespace arraydiar {

inline constexpr double kDefaultAhcThreshold = -0.015;
inline constexpr int kDefaultMaxSpeakers = 10;

struct AffinityMatrix {
  Eigen::MatrixXd values;

  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }

  void validate() const {
    if (values.rows() != values.cols()) throw Error("affinity: matrix must be square");
    for (Eigen::Index i = 0; i < values.rows(); ++i) {
      if (std::abs(values(i, i) - 1.0) > 1e-9) throw Error("affinity: diagonal must be 1");
      for (Eigen::Index j = 0; j < values.cols(); ++j) {
        if (std::abs(values(i, j) - values(j, i)) > 1e-9) throw Error("affinity: matrix must be symmetric");
        if (values(i, j) < -1.0 - 1e-9 || values(i, j) > 1.0 + 1e-9) throw Error("affinity: values must lie in [-1, 1]");
      }
    }
  }
};

inline AffinityMatrix cosine_affinity(const EmbeddingSet& set) {
  set.validate();
  const std::size_t n = set.size();
  if (n < 2) throw Error("affinity: at least 2 segments required");
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = set.segments[i].vector;
    norms[i] = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norms[i] == 0.0) throw Error("affinity: segment " + std::to_string(i) + " has a zero vector");
  }
  AffinityMatrix aff{Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const auto& a = set.segments[i].vector;
      const auto& b = set.segments[j].vector;
      double c = std::inner_product(a.begin(), a.end(), b.begin(), 0.0) / (norms[i] * norms[j]);
      c = std::clamp(c, -1.0, 1.0);
      aff.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = c;
      aff.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = c;
    }
  }
  return aff;
}

enum class ClusterMethod { kAhc, kNmeSc, kScFixedK };

inline std::string to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::kAhc: return "ahc";
    case ClusterMethod::kNmeSc: return "nme-sc";
    case ClusterMethod::kScFixedK: return "sc-fixed-k";
  }
  return "?";
}

struct ClusterAssignment {
  std::vector<int> labels;
  int k = 0;
  ClusterMethod method = ClusterMethod::kAhc;
  int binarization = 0;  // chosen row-threshold p for spectral methods
};

/// Renumbers labels by order of first appearance.
inline std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::vector<int> map;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int l = labels[i];
    if (l >= static_cast<int>(map.size())) map.resize(static_cast<std::size_t>(l) + 1, -1);
    if (map[static_cast<std::size_t>(l)] < 0) map[static_cast<std::size_t>(l)] = *std::max_element(map.begin(), map.end()) + 1;
    out[i] = map[static_cast<std::size_t>(l)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// AHC

/// One merge step; clusters are named by their smallest member index.
struct Merge {
  std::size_t first;
  std::size_t second;
  double similarity;
};

struct AhcResult {
  ClusterAssignment assignment;
  std::vector<Merge> dendrogram;
};

/// Average-linkage agglomeration: repeatedly merge the two clusters with the
/// highest mean pairwise similarity, while that similarity is >= threshold.
/// Exact ties go to the lowest (first, second) pair of smallest-member indices.
inline AhcResult ahc_with_dendrogram(const AffinityMatrix& aff, double threshold = kDefaultAhcThreshold) {
  const std::size_t n = aff.size();
  struct Cluster {
    std::size_t min_member;
    std::vector<std::size_t> members;
  };
  std::vector<Cluster> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters.push_back({i, {i}});
  // Pairwise similarity sums between active clusters, same order as `clusters`.
  std::vector<std::vector<double>> sums(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) sums[i][j] = aff.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));

  AhcResult result;
  while (clusters.size() > 1) {
    std::size_t ba = 0, bb = 1;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < clusters.size(); ++a) {
      for (std::size_t b = a + 1; b < clusters.size(); ++b) {
        const double avg = sums[a][b] / static_cast<double>(clusters[a].members.size() * clusters[b].members.size());
        if (avg > best) {
          best = avg;
          ba = a;
          bb = b;
        }
      }
    }
    if (best < threshold) break;
    result.dendrogram.push_back({clusters[ba].min_member, clusters[bb].min_member, best});
    for (std::size_t c = 0; c < clusters.size(); ++c) {
      sums[ba][c] += sums[bb][c];
      sums[c][ba] = sums[ba][c];
    }
    auto& into = clusters[ba].members;
    into.insert(into.end(), clusters[bb].members.begin(), clusters[bb].members.end());
    clusters.erase(clusters.begin() + static_cast<std::ptrdiff_t>(bb));
    sums.erase(sums.begin() + static_cast<std::ptrdiff_t>(bb));
    for (auto& row : sums) row.erase(row.begin() + static_cast<std::ptrdiff_t>(bb));
  }

  auto& assign = result.assignment;
  assign.method = ClusterMethod::kAhc;
  assign.k = static_cast<int>(clusters.size());
  assign.labels.assign(n, 0);
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (auto m : clusters[c].members) assign.labels[m] = static_cast<int>(c);
  return result;
}

inline ClusterAssignment ahc(const AffinityMatrix& aff, double threshold = kDefaultAhcThreshold) {
  return ahc_with_dendrogram(aff, threshold).assignment;
}

// ---------------------------------------------------------------------------
// k-means

struct KMeansResult {
  std::vector<int> labels;
  double inertia = 0.0;
};

namespace detail {

inline KMeansResult kmeans_once(const Eigen::MatrixXd& x, int k, std::mt19937_64& rng) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd centers(k, x.cols());
  // k-means++ seeding.
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  Eigen::Index first = pick(rng);
  centers.row(0) = x.row(first);
  chosen[static_cast<std::size_t>(first)] = 1;
  std::vector<double> d2(static_cast<std::size_t>(n));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int j = 0; j < c; ++j) best = std::min(best, (x.row(i) - centers.row(j)).squaredNorm());
      d2[static_cast<std::size_t>(i)] = best;
      total += best;
    }
    Eigen::Index next = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double target = u(rng), acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += d2[static_cast<std::size_t>(i)];
        if (acc >= target && d2[static_cast<std::size_t>(i)] > 0.0) {
          next = i;
          break;
        }
      }
    }
    if (next < 0) {
      for (Eigen::Index i = 0; i < n && next < 0; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) next = i;
    }
    chosen[static_cast<std::size_t>(next)] = 1;
    centers.row(c) = x.row(next);
  }

  std::vector<int> labels(static_cast<std::size_t>(n), -1);
  for (int iter = 0; iter < 300; ++iter) {
    bool changed = false;
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (x.row(i) - centers.row(c)).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (labels[static_cast<std::size_t>(i)] != best) {
        labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    // Refill empty clusters with the point farthest from its center, taken
    // from a cluster that has more than one member.
    std::vector<int> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      Eigen::Index far = -1;
      double fd = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const int l = labels[static_cast<std::size_t>(i)];
        if (sizes[static_cast<std::size_t>(l)] < 2) continue;
        const double d = (x.row(i) - centers.row(l)).squaredNorm();
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      if (far < 0) break;
      --sizes[static_cast<std::size_t>(labels[static_cast<std::size_t>(far)])];
      labels[static_cast<std::size_t>(far)] = c;
      ++sizes[static_cast<std::size_t>(c)];
      changed = true;
    }
    centers.setZero();
    for (Eigen::Index i = 0; i < n; ++i) centers.row(labels[static_cast<std::size_t>(i)]) += x.row(i);
    for (int c = 0; c < k; ++c)
      if (sizes[static_cast<std::size_t>(c)] > 0) centers.row(c) /= sizes[static_cast<std::size_t>(c)];
    if (!changed) break;
  }
  KMeansResult out{labels, 0.0};
  for (Eigen::Index i = 0; i < n; ++i) out.inertia += (x.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  return out;
}

}  // namespace detail

/// Best-inertia k-means over `restarts` k-means++ initializations drawn from a
/// generator seeded with `seed`. Labels are renumbered by first appearance.
inline KMeansResult kmeans(const Eigen::MatrixXd& x, int k, std::uint64_t seed = 0, int restarts = 10) {
  if (k < 1 || k > x.rows()) throw Error("kmeans: k must be in [1, n]");
  std::mt19937_64 rng(seed);
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, restarts); ++r) {
    auto cur = detail::kmeans_once(x, k, rng);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  best.labels = canonical_labels(best.labels);
  return best;
}

// ---------------------------------------------------------------------------
// Spectral clustering

struct SpectralOptions {
  int max_speakers = kDefaultMaxSpeakers;
  std::uint64_t seed = 0;
  int kmeans_restarts = 10;
  /// Fixed row-threshold p; when unset p is swept over [1, max(1, n/2)].
  std::optional<int> binarization;
};

/// Keeps the p largest entries of each row as 1, plus any entry tied with the
/// p-th largest, then symmetrizes as (B + B^T) / 2.
inline Eigen::MatrixXd binarize_affinity(const AffinityMatrix& aff, int p) {
  const Eigen::Index n = aff.values.rows();
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, n);
  std::vector<double> row(static_cast<std::size_t>(n));
  const auto kth = static_cast<std::size_t>(std::clamp<Eigen::Index>(p, 1, n) - 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) row[static_cast<std::size_t>(j)] = aff.values(i, j);
    std::nth_element(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(kth), row.end(), std::greater<>());
    const double cut = row[kth];
    for (Eigen::Index j = 0; j < n; ++j)
      if (aff.values(i, j) >= cut) b(i, j) = 1.0;
  }
  return (b + b.transpose()) / 2.0;
}

/// Unnormalized graph Laplacian D - A.
inline Eigen::MatrixXd laplacian(const Eigen::MatrixXd& a) {
  Eigen::MatrixXd l = -a;
  l.diagonal() += a.rowwise().sum();
  return l;
}

/// Eigengap analysis for one binarization p.
struct EigengapStats {
  int binarization = 0;
  int k = 1;               // argmax of the first max_speakers gaps (1-based)
  double max_gap = 0.0;
  double largest_eigenvalue = 0.0;
  double normalized_gap = 0.0;  // max_gap / largest eigenvalue
  double score = 0.0;           // normalized_gap / p; larger is better
  bool degenerate = false;      // Laplacian is zero (no edges)
  Eigen::VectorXd eigenvalues;
};

inline EigengapStats eigengap_stats(const AffinityMatrix& aff, int p, int max_speakers,
                                    std::optional<int> fixed_k = std::nullopt) {
  EigengapStats s;
  s.binarization = p;
  const Eigen::MatrixXd lap = laplacian(binarize_affinity(aff, p));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("spectral: eigensolver failed");
  s.eigenvalues = solver.eigenvalues();
  const Eigen::Index n = s.eigenvalues.size();
  s.largest_eigenvalue = s.eigenvalues(n - 1);
  s.degenerate = s.largest_eigenvalue <= 1e-10;
  if (fixed_k) {
    s.k = *fixed_k;
    s.max_gap = *fixed_k < n ? s.eigenvalues(*fixed_k) - s.eigenvalues(*fixed_k - 1) : 0.0;
  } else {
    const Eigen::Index limit = std::min<Eigen::Index>(max_speakers, n - 1);
    s.k = 1;
    s.max_gap = limit >= 1 ? s.eigenvalues(1) - s.eigenvalues(0) : 0.0;
    for (Eigen::Index i = 2; i <= limit; ++i) {
      const double gap = s.eigenvalues(i) - s.eigenvalues(i - 1);
      if (gap > s.max_gap) {
        s.max_gap = gap;
        s.k = static_cast<int>(i);
      }
    }
  }
  if (!s.degenerate) {
    s.normalized_gap = s.max_gap / s.largest_eigenvalue;
    s.score = s.normalized_gap / static_cast<double>(p);
  }
  return s;
}

namespace detail {

inline EigengapStats select_binarization(const AffinityMatrix& aff, const SpectralOptions& opt,
                                         std::optional<int> fixed_k) {
  const int n = static_cast<int>(aff.size());
  if (opt.binarization) {
    if (*opt.binarization < 1 || *opt.binarization > n) throw Error("spectral: binarization p out of range");
    return eigengap_stats(aff, *opt.binarization, opt.max_speakers, fixed_k);
  }
  std::optional<EigengapStats> best;
  for (int p = 1; p <= std::max(1, n / 2); ++p) {
    auto s = eigengap_stats(aff, p, opt.max_speakers, fixed_k);
    const bool better = !best || (best->degenerate && !s.degenerate) ||
                        (s.degenerate == best->degenerate && s.score > best->score);
    if (better) best = std::move(s);
  }
  return *best;
}

inline ClusterAssignment spectral_assign(const AffinityMatrix& aff, int p, int k, const SpectralOptions& opt,
                                         ClusterMethod method) {
  const Eigen::MatrixXd lap = laplacian(binarize_affinity(aff, p));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  if (solver.info() != Eigen::Success) throw Error("spectral: eigensolver failed");
  const Eigen::MatrixXd embedding = solver.eigenvectors().leftCols(k);
  ClusterAssignment out;
  out.method = method;
  out.binarization = p;
  out.k = k;
  out.labels = kmeans(embedding, k, opt.seed, opt.kmeans_restarts).labels;
  out.k = *std::max_element(out.labels.begin(), out.labels.end()) + 1;
  return out;
}

}  // namespace detail

/// NME-SC: sweeps the row-threshold p, estimates k(p) from the largest
/// eigengap among the first max_speakers Laplacian eigenvalues, keeps the p
/// maximizing (max gap / largest eigenvalue) / p, then clusters the k
/// smallest eigenvectors with k-means.
inline ClusterAssignment nme_sc(const AffinityMatrix& aff, const SpectralOptions& opt = {}) {
  if (aff.size() < 2) throw Error("nme_sc: at least 2 segments required");
  if (opt.max_speakers < 1) throw Error("nme_sc: max_speakers must be >= 1");
  const auto stats = detail::select_binarization(aff, opt, std::nullopt);
  return detail::spectral_assign(aff, stats.binarization, stats.k, opt, ClusterMethod::kNmeSc);
}

/// Spectral clustering with a known cluster count. p is re-tuned by the same
/// NME score evaluated at the gap after the k-th eigenvalue, unless fixed in
/// the options.
inline ClusterAssignment sc_fixed_k(const AffinityMatrix& aff, int k, const SpectralOptions& opt = {}) {
  if (k < 1) throw Error("sc_fixed_k: k must be >= 1");
  if (k > static_cast<int>(aff.size())) throw Error("sc_fixed_k: k exceeds the number of segments");
  const auto stats = detail::select_binarization(aff, opt, k);
  return detail::spectral_assign(aff, stats.binarization, k, opt, ClusterMethod::kScFixedK);
}

// ---------------------------------------------------------------------------

/// Per-segment RTTM entries labeled spk<cluster>. Overlapping neighbors are cut
/// at the midpoint of their overlap, then touching same-label pieces merge.
inline SegmentList assignment_to_rttm(const ClusterAssignment& assign, const EmbeddingSet& set,
                                      const std::string& recording_id) {
  if (assign.labels.size() != set.size()) throw Error("assignment: label count differs from segment count");
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return set.segments[a].start < set.segments[b].start; });
  SegmentList out;
  double cut_prev = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& seg = set.segments[order[r]];
    double start = std::max(seg.start, cut_prev);
    double end = seg.end;
    if (r + 1 < order.size()) {
      const auto& next = set.segments[order[r + 1]];
      if (next.start < seg.end) {
        const double cut = (next.start + seg.end) / 2.0;
        end = std::min(end, cut);
        cut_prev = cut;
      } else {
        cut_prev = -std::numeric_limits<double>::infinity();
      }
    }
    if (end <= start) continue;
    const std::string label = "spk" + std::to_string(assign.labels[order[r]]);
    if (!out.empty() && out.back().speaker == label && start <= out.back().end() + 1e-9) {
      out.back().duration = std::max(out.back().end(), end) - out.back().start;
    } else {
      out.push_back({recording_id, start, end - start, label});
    }
  }
  return out;
}

}  // namespace arraydiar
