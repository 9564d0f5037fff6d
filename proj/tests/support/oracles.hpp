#pragma once

// Reference implementations used only by the tests. Each one is written the
// slow, obvious way and shares no code with the library routine it checks.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "lanesim/network.hpp"

namespace oracle {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Single-source free-flow travel times by edge relaxation, |V|-1 rounds.
inline std::vector<double> bellman_ford(const lanesim::RoadNetwork& net, lanesim::NodeId src) {
  std::vector<double> d(net.node_count(), kInf);
  d[static_cast<std::size_t>(src)] = 0.0;
  for (std::size_t round = 1; round < net.node_count(); ++round) {
    bool changed = false;
    for (const auto& e : net.edges()) {
      const double via = d[static_cast<std::size_t>(e.from)] + e.length_m / e.free_flow_speed;
      if (via < d[static_cast<std::size_t>(e.to)]) {
        d[static_cast<std::size_t>(e.to)] = via;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return d;
}

/// Every cell after `pos`, nearest occupant wins.
inline std::optional<std::pair<int, int>> naive_probe(std::span<const std::uint8_t> lane, int pos,
                                                      int horizon) {
  std::optional<std::pair<int, int>> best;
  for (int i = 0; i < static_cast<int>(lane.size()); ++i) {
    const int d = i - pos;
    if (d <= 0 || d > horizon || lane[static_cast<std::size_t>(i)] == 255) continue;
    if (!best || d < best->first) best = std::make_pair(d, static_cast<int>(lane[static_cast<std::size_t>(i)]));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Partitions

/// Enumerates all K^n labellings.
template <typename F>
void for_each_labelling(int n, int k, F&& f) {
  std::vector<int> lab(static_cast<std::size_t>(n), 0);
  while (true) {
    f(lab);
    int i = 0;
    while (i < n && ++lab[static_cast<std::size_t>(i)] == k) lab[static_cast<std::size_t>(i++)] = 0;
    if (i == n) return;
  }
}

/// Enumerates set partitions as restricted growth strings (Bell(n) of them).
template <typename F>
void for_each_set_partition(int n, F&& f) {
  std::vector<int> a(static_cast<std::size_t>(n), 0);
  auto rec = [&](auto&& self, int i, int used) -> void {
    if (i == n) {
      f(a);
      return;
    }
    for (int c = 0; c <= used; ++c) {
      a[static_cast<std::size_t>(i)] = c;
      self(self, i + 1, std::max(used, c + 1));
    }
  };
  if (n == 0) {
    f(a);
    return;
  }
  a[0] = 0;
  rec(rec, 1, 1);
}

struct GpOptimum {
  double objective = kInf;
  std::vector<int> assignment;
};

/// Min over labellings of the largest split weight times tau, with every
/// shard used (when k <= n) and no shard above capacity.
inline GpOptimum brute_gp(const Eigen::MatrixXd& a, int k, long capacity, double tau) {
  const int n = static_cast<int>(a.rows());
  GpOptimum best;
  for_each_labelling(n, k, [&](const std::vector<int>& lab) {
    std::vector<long> load(static_cast<std::size_t>(k), 0);
    for (int x : lab) ++load[static_cast<std::size_t>(x)];
    for (long l : load) {
      if (l > capacity) return;
      if (k <= n && l == 0) return;
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (lab[static_cast<std::size_t>(i)] != lab[static_cast<std::size_t>(j)]) s = std::max(s, a(i, j) * tau);
    if (s < best.objective) best = {s, lab};
  });
  return best;
}

/// Sum of A_ij over split pairs, each unordered pair once.
inline double cut(const Eigen::MatrixXd& a, const std::vector<int>& lab) {
  double c = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = i + 1; j < a.cols(); ++j)
      if (lab[static_cast<std::size_t>(i)] != lab[static_cast<std::size_t>(j)]) c += a(i, j);
  return c;
}

/// Q from the definition: double sum over all ordered pairs.
inline double modularity(const Eigen::MatrixXd& a, const std::vector<int>& c, double gamma = 1.0) {
  const Eigen::VectorXd k = a.rowwise().sum();
  const double two_m = a.sum();
  double q = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      if (c[static_cast<std::size_t>(i)] == c[static_cast<std::size_t>(j)]) q += a(i, j) - gamma * k(i) * k(j) / two_m;
  return q / two_m;
}

// ---------------------------------------------------------------------------
// Clustering and geometry

inline double wcss(const std::vector<Eigen::Vector2d>& pts, const std::vector<int>& lab, int k) {
  std::vector<Eigen::Vector2d> mean(static_cast<std::size_t>(k), Eigen::Vector2d::Zero());
  std::vector<int> cnt(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    mean[static_cast<std::size_t>(lab[i])] += pts[i];
    ++cnt[static_cast<std::size_t>(lab[i])];
  }
  for (int c = 0; c < k; ++c)
    if (cnt[static_cast<std::size_t>(c)]) mean[static_cast<std::size_t>(c)] /= cnt[static_cast<std::size_t>(c)];
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) s += (pts[i] - mean[static_cast<std::size_t>(lab[i])]).squaredNorm();
  return s;
}

/// Best Lloyd result over `restarts` uniformly random initial centre choices.
inline double restart_kmeans(const std::vector<Eigen::Vector2d>& pts, int k, int restarts,
                             std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  double best = kInf;
  const int n = static_cast<int>(pts.size());
  for (int r = 0; r < restarts; ++r) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<Eigen::Vector2d> c;
    for (int j = 0; j < k; ++j) c.push_back(pts[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])]);
    std::vector<int> lab(static_cast<std::size_t>(n), 0);
    for (int it = 0; it < 200; ++it) {
      bool moved = false;
      for (int i = 0; i < n; ++i) {
        int arg = 0;
        for (int j = 1; j < k; ++j)
          if ((pts[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(j)]).squaredNorm() <
              (pts[static_cast<std::size_t>(i)] - c[static_cast<std::size_t>(arg)]).squaredNorm())
            arg = j;
        if (lab[static_cast<std::size_t>(i)] != arg) moved = true;
        lab[static_cast<std::size_t>(i)] = arg;
      }
      std::vector<Eigen::Vector2d> sum(static_cast<std::size_t>(k), Eigen::Vector2d::Zero());
      std::vector<int> cnt(static_cast<std::size_t>(k), 0);
      for (int i = 0; i < n; ++i) {
        sum[static_cast<std::size_t>(lab[static_cast<std::size_t>(i)])] += pts[static_cast<std::size_t>(i)];
        ++cnt[static_cast<std::size_t>(lab[static_cast<std::size_t>(i)])];
      }
      for (int j = 0; j < k; ++j)
        if (cnt[static_cast<std::size_t>(j)]) c[static_cast<std::size_t>(j)] = sum[static_cast<std::size_t>(j)] / cnt[static_cast<std::size_t>(j)];
      if (!moved && it > 0) break;
    }
    best = std::min(best, wcss(pts, lab, k));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Car following

/// Time for a vehicle starting at rest to cover `length` under the free-road
/// IDM term, integrated with explicit Euler at step h.
inline double free_road_travel_time(double length, double v0, double a, double delta, double h) {
  double x = 0.0, v = 0.0, t = 0.0;
  while (x < length) {
    const double acc = a * (1.0 - std::pow(v / v0, delta));
    x += v * h + 0.5 * acc * h * h;
    v += acc * h;
    t += h;
  }
  return t;
}

}  // namespace oracle
