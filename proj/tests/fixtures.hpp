#pragma once

// Seeded generators for test inputs.

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "arraydiar/arraydiar.hpp"
#include "oracles.hpp"

namespace fixture {

namespace ad = arraydiar;

struct Blobs {
  ad::EmbeddingSet set;
  std::vector<int> truth;
};

/// Orthonormal directions, one per cluster, from Gram-Schmidt on Gaussian draws.
inline std::vector<std::vector<double>> orthonormal(std::size_t k, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> out;
  while (out.size() < k) {
    std::vector<double> v(dim);
    for (auto& x : v) x = g(rng);
    for (const auto& u : out) {
      double d = 0;
      for (std::size_t i = 0; i < dim; ++i) d += v[i] * u[i];
      for (std::size_t i = 0; i < dim; ++i) v[i] -= d * u[i];
    }
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    for (auto& x : v) x /= n;
    out.push_back(v);
  }
  return out;
}

/// Points scattered around the given centroids. Segments are laid out as
/// consecutive 1.44 s windows with 0.6 s shift in shuffled cluster order.
inline Blobs blobs_around(const std::vector<std::vector<double>>& centroids, const std::vector<int>& sizes, double spread,
                          std::mt19937_64& rng) {
  const std::size_t dim = centroids.front().size();
  std::normal_distribution<double> g(0.0, spread);
  std::vector<int> order;
  for (std::size_t c = 0; c < sizes.size(); ++c) order.insert(order.end(), static_cast<std::size_t>(sizes[c]), static_cast<int>(c));
  std::shuffle(order.begin(), order.end(), rng);
  Blobs b;
  b.set.dim = dim;
  for (std::size_t i = 0; i < order.size(); ++i) {
    std::vector<double> v = centroids[static_cast<std::size_t>(order[i])];
    for (auto& x : v) x += g(rng);
    b.set.segments.push_back({0.6 * static_cast<double>(i), 0.6 * static_cast<double>(i) + 1.44, v});
    b.truth.push_back(order[i]);
  }
  return b;
}

/// Worst intra-cluster and inter-cluster cosine of a labeled set.
inline std::pair<double, double> cosine_extremes(const Blobs& b) {
  double intra = 1.0, inter = -1.0;
  for (std::size_t i = 0; i < b.truth.size(); ++i)
    for (std::size_t j = i + 1; j < b.truth.size(); ++j) {
      const double c = oracle::cosine(b.set.segments[i].vector, b.set.segments[j].vector);
      if (b.truth[i] == b.truth[j]) intra = std::min(intra, c);
      else inter = std::max(inter, c);
    }
  return {intra, inter};
}

/// k blobs with every intra-cluster cosine above `min_intra` and every
/// inter-cluster cosine below `max_inter`; draws again until both hold.
inline Blobs separated_blobs(std::size_t k, int min_size, int max_size, std::uint64_t seed, double min_intra = 0.85,
                             double max_inter = 0.3, std::size_t dim = 32, double spread = 0.05) {
  std::mt19937_64 rng(seed);
  for (;;) {
    const auto centroids = orthonormal(k, dim, rng);
    std::vector<int> sizes;
    for (std::size_t c = 0; c < k; ++c) sizes.push_back(std::uniform_int_distribution<int>(min_size, max_size)(rng));
    auto b = blobs_around(centroids, sizes, spread, rng);
    const auto [intra, inter] = cosine_extremes(b);
    if (intra > min_intra && inter < max_inter) return b;
  }
}

// ---------------------------------------------------------------------------
// Scenes

inline double circ_dist(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

struct CountScene {
  ad::SceneSpec spec;
  std::size_t speakers = 0;
};

/// Randomized census scene: 1-4 speakers at least `min_sep` degrees apart,
/// 2-5 turns of 2 s each in shuffled order with 0.25 s pauses. Every speaker
/// then has at least 2 turns against at most 5 for anyone else, which keeps
/// each above a quarter of the second-most-talkative.
inline CountScene count_scene(const ad::MicArrayGeometry& geo, std::size_t k, std::uint64_t seed, double snr_db,
                              double min_sep = 25.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> az(0.0, 360.0);
  std::vector<double> azimuths;
  while (azimuths.size() < k) {
    const double a = std::floor(az(rng) * 100.0) / 100.0;
    bool ok = true;
    for (double b : azimuths) ok &= circ_dist(a, b) >= min_sep;
    if (ok) azimuths.push_back(a);
  }
  std::uniform_int_distribution<int> turns(2, 5);
  std::vector<std::size_t> order;
  for (std::size_t s = 0; s < k; ++s)
    for (int t = turns(rng); t > 0; --t) order.push_back(s);
  std::shuffle(order.begin(), order.end(), rng);
  CountScene out{ad::SceneSpec{geo, {}}, k};
  for (double a : azimuths) out.spec.sources.push_back({a, {}});
  double t = 0.25;
  for (auto s : order) {
    out.spec.sources[s].schedule.push_back({t, t + 2.0});
    t += 2.25;
  }
  out.spec.duration = t + 0.25;
  out.spec.snr_db = snr_db;
  out.spec.seed = seed + 4000;
  return out;
}

}  // namespace fixture
