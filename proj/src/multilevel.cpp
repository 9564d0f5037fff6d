// Balanced k-way partitioning: heavy-edge coarsening, greedy growing on the
// coarsest graph, boundary refinement during uncoarsening.

#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "lanesim/error.hpp"
#include "lanesim/partitioning.hpp"
#include "lanesim/text.hpp"

namespace lanesim {

namespace {

constexpr int kRefinePasses = 10;
constexpr double kEps = 1e-12;

struct Graph {
  SparseMatrixd a;      // zero diagonal
  Eigen::VectorXd vw;   // vertex weights (original node counts)
  Eigen::Index size() const { return a.rows(); }
};

struct Coarsening {
  Graph coarse;
  std::vector<std::int32_t> map;  // fine vertex -> coarse vertex
};

Coarsening coarsen(const Graph& g, double max_vertex_weight) {
  const auto n = g.size();
  std::vector<std::int32_t> map(static_cast<std::size_t>(n), -1);
  // Visit light vertices first so heavy ones keep more matching options.
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto x, auto y) {
    return g.a.col(x).nonZeros() < g.a.col(y).nonZeros();
  });
  std::int32_t next = 0;
  for (auto v : order) {
    if (map[static_cast<std::size_t>(v)] >= 0) continue;
    Eigen::Index mate = -1;
    double best = -1.0;
    for (SparseMatrixd::InnerIterator it(g.a, v); it; ++it) {
      const auto u = it.row();
      if (u == v || map[static_cast<std::size_t>(u)] >= 0) continue;
      if (g.vw[v] + g.vw[u] > max_vertex_weight) continue;
      if (it.value() > best) {
        best = it.value();
        mate = u;
      }
    }
    map[static_cast<std::size_t>(v)] = next;
    if (mate >= 0) map[static_cast<std::size_t>(mate)] = next;
    ++next;
  }
  SparseMatrixd p(n, next);
  std::vector<Eigen::Triplet<double>> t;
  for (Eigen::Index v = 0; v < n; ++v) t.emplace_back(v, map[static_cast<std::size_t>(v)], 1.0);
  p.setFromTriplets(t.begin(), t.end());
  Coarsening c;
  c.coarse.a = SparseMatrixd(p.transpose()) * g.a * p;
  c.coarse.a.prune([](Eigen::Index r, Eigen::Index col, double) { return r != col; });
  c.coarse.a.makeCompressed();
  c.coarse.vw = p.transpose() * g.vw;
  c.map = std::move(map);
  return c;
}

struct State {
  const Graph& g;
  std::vector<std::int32_t> part;
  std::vector<double> load;
  BalanceBounds bounds;

  double conn(Eigen::Index v, std::int32_t k) const {
    double s = 0.0;
    for (SparseMatrixd::InnerIterator it(g.a, v); it; ++it)
      if (part[static_cast<std::size_t>(it.row())] == k) s += it.value();
    return s;
  }
  std::vector<double> conn_all(Eigen::Index v, std::size_t shards) const {
    std::vector<double> c(shards, 0.0);
    for (SparseMatrixd::InnerIterator it(g.a, v); it; ++it)
      c[static_cast<std::size_t>(part[static_cast<std::size_t>(it.row())])] += it.value();
    return c;
  }
  bool can_move(Eigen::Index v, std::int32_t to) const {
    const auto from = part[static_cast<std::size_t>(v)];
    const double w = g.vw[v];
    return load[static_cast<std::size_t>(from)] - w >= static_cast<double>(bounds.lower) - kEps &&
           load[static_cast<std::size_t>(to)] + w <= static_cast<double>(bounds.upper) + kEps;
  }
  void move(Eigen::Index v, std::int32_t to) {
    auto& p = part[static_cast<std::size_t>(v)];
    load[static_cast<std::size_t>(p)] -= g.vw[v];
    load[static_cast<std::size_t>(to)] += g.vw[v];
    p = to;
  }
  bool boundary(Eigen::Index v) const {
    for (SparseMatrixd::InnerIterator it(g.a, v); it; ++it)
      if (part[static_cast<std::size_t>(it.row())] != part[static_cast<std::size_t>(v)]) return true;
    return false;
  }
};

std::vector<double> loads(const Graph& g, const std::vector<std::int32_t>& part, std::int32_t k) {
  std::vector<double> l(static_cast<std::size_t>(k), 0.0);
  for (Eigen::Index v = 0; v < g.size(); ++v) l[static_cast<std::size_t>(part[static_cast<std::size_t>(v)])] += g.vw[v];
  return l;
}

/// Grows shards one at a time from a seed vertex, always absorbing the
/// unassigned vertex most strongly tied to the growing shard.
std::vector<std::int32_t> grow(const Graph& g, std::int32_t shards, const BalanceBounds& b) {
  const auto n = g.size();
  std::vector<std::int32_t> part(static_cast<std::size_t>(n), -1);
  double remaining = g.vw.sum();
  for (std::int32_t k = 0; k + 1 < shards; ++k) {
    const double target = std::min(static_cast<double>(b.upper), remaining / (shards - k));
    std::vector<double> tie(static_cast<std::size_t>(n), 0.0);
    double load = 0.0;
    while (load + kEps < target) {
      Eigen::Index pick = -1;
      for (Eigen::Index v = 0; v < n; ++v) {
        if (part[static_cast<std::size_t>(v)] >= 0) continue;
        if (load + g.vw[v] > static_cast<double>(b.upper) + kEps) continue;
        if (pick < 0 || tie[static_cast<std::size_t>(v)] > tie[static_cast<std::size_t>(pick)]) pick = v;
      }
      if (pick < 0) break;
      part[static_cast<std::size_t>(pick)] = k;
      load += g.vw[pick];
      for (SparseMatrixd::InnerIterator it(g.a, pick); it; ++it)
        tie[static_cast<std::size_t>(it.row())] += it.value();
    }
    remaining -= load;
  }
  for (auto& p : part)
    if (p < 0) p = shards - 1;
  return part;
}

/// Best-improvement boundary moves, then pairwise swaps for the case where
/// tight bounds forbid every single move.
void refine(State& s, std::int32_t shards) {
  const auto n = s.g.size();
  const auto ks = static_cast<std::size_t>(shards);
  for (int pass = 0; pass < kRefinePasses; ++pass) {
    bool improved = false;

    struct Move {
      double gain;
      Eigen::Index v;
      std::int32_t to;
    };
    std::vector<Move> moves;
    for (Eigen::Index v = 0; v < n; ++v) {
      if (!s.boundary(v)) continue;
      const auto c = s.conn_all(v, ks);
      const auto from = s.part[static_cast<std::size_t>(v)];
      for (std::int32_t k = 0; k < shards; ++k) {
        if (k == from) continue;
        const double gain = c[static_cast<std::size_t>(k)] - c[static_cast<std::size_t>(from)];
        if (gain > kEps) moves.push_back({gain, v, k});
      }
    }
    std::stable_sort(moves.begin(), moves.end(), [](const Move& x, const Move& y) {
      if (x.gain != y.gain) return x.gain > y.gain;
      return x.v < y.v;
    });
    std::vector<char> locked(static_cast<std::size_t>(n), 0);
    for (const auto& m : moves) {
      if (locked[static_cast<std::size_t>(m.v)]) continue;
      const auto from = s.part[static_cast<std::size_t>(m.v)];
      const double gain = s.conn(m.v, m.to) - s.conn(m.v, from);
      if (gain <= kEps || !s.can_move(m.v, m.to)) continue;
      s.move(m.v, m.to);
      locked[static_cast<std::size_t>(m.v)] = 1;
      improved = true;
    }

    // Swaps between boundary vertices of two shards.
    for (std::int32_t x = 0; x < shards; ++x) {
      for (std::int32_t y = x + 1; y < shards; ++y) {
        for (int round = 0; round < 64; ++round) {
          auto candidates = [&](std::int32_t from, std::int32_t to) {
            std::vector<std::pair<double, Eigen::Index>> c;
            for (Eigen::Index v = 0; v < n; ++v)
              if (s.part[static_cast<std::size_t>(v)] == from && s.boundary(v))
                c.emplace_back(s.conn(v, to) - s.conn(v, from), v);
            std::stable_sort(c.begin(), c.end(), [](auto& p, auto& q) { return p.first > q.first; });
            if (c.size() > 32) c.resize(32);
            return c;
          };
          const auto cx = candidates(x, y);
          const auto cy = candidates(y, x);
          double best = kEps;
          Eigen::Index bu = -1, bv = -1;
          for (auto& [gu, u] : cx) {
            for (auto& [gv, v] : cy) {
              const double gain = gu + gv - 2.0 * s.g.a.coeff(u, v);
              if (gain <= best) continue;
              const double dw = s.g.vw[v] - s.g.vw[u];
              const double lx = s.load[static_cast<std::size_t>(x)] + dw;
              const double ly = s.load[static_cast<std::size_t>(y)] - dw;
              const auto lo = static_cast<double>(s.bounds.lower) - kEps;
              const auto hi = static_cast<double>(s.bounds.upper) + kEps;
              if (lx < lo || lx > hi || ly < lo || ly > hi) continue;
              best = gain;
              bu = u;
              bv = v;
            }
          }
          if (bu < 0) break;
          s.move(bu, y);
          s.move(bv, x);
          improved = true;
        }
      }
    }
    if (!improved) break;
  }
}

/// Moves vertices out of overfull shards and into underfull ones, choosing
/// each time the move that costs the least cut.
void rebalance(State& s, std::int32_t shards) {
  const auto n = s.g.size();
  const auto lo = static_cast<double>(s.bounds.lower);
  const auto hi = static_cast<double>(s.bounds.upper);
  for (Eigen::Index guard = 0; guard < 4 * n + 16; ++guard) {
    std::int32_t over = -1, under = -1;
    for (std::int32_t k = 0; k < shards; ++k) {
      if (s.load[static_cast<std::size_t>(k)] > hi + kEps && over < 0) over = k;
      if (s.load[static_cast<std::size_t>(k)] < lo - kEps && under < 0) under = k;
    }
    if (over < 0 && under < 0) return;

    double best = -std::numeric_limits<double>::infinity();
    Eigen::Index bv = -1;
    std::int32_t bto = -1;
    for (Eigen::Index v = 0; v < n; ++v) {
      const auto from = s.part[static_cast<std::size_t>(v)];
      if (over >= 0 && from != over) continue;
      if (over < 0 && s.load[static_cast<std::size_t>(from)] - s.g.vw[v] < lo - kEps) continue;
      for (std::int32_t k = 0; k < shards; ++k) {
        if (k == from) continue;
        if (under >= 0 && k != under) continue;
        if (s.load[static_cast<std::size_t>(k)] + s.g.vw[v] > hi + kEps) continue;
        const double gain = s.conn(v, k) - s.conn(v, from);
        if (gain > best) {
          best = gain;
          bv = v;
          bto = k;
        }
      }
    }
    if (bv < 0) break;
    s.move(bv, bto);
  }
  throw ValidationError("could not reach the balance bounds");
}

}  // namespace

BalancedResult balanced_partition(const TrafficGraph& tg, std::int32_t shards, double epsilon) {
  const auto n = tg.size();
  const auto bounds = balance_bounds(n, shards, epsilon);
  if (static_cast<std::int64_t>(shards) * bounds.lower > n ||
      static_cast<std::int64_t>(shards) * bounds.upper < n)
  {
    const double c = static_cast<double>((n + shards - 1) / shards);
    const double min_eps = 1.0 - static_cast<double>(n / shards) / c;
    throw ValidationError("no partition of " + std::to_string(n) + " nodes into " +
                          std::to_string(shards) + " shards meets the balance bounds; epsilon must be at least " +
                          text::format_double(std::ceil(min_eps * 1e4) / 1e4));
  }
  BalancedResult result;
  if (shards == 1) {
    result.assignment = PartitionAssignment::single(static_cast<std::size_t>(n));
    return result;
  }

  std::vector<Graph> levels{Graph{tg.adjacency, Eigen::VectorXd::Ones(n)}};
  std::vector<std::vector<std::int32_t>> maps;
  const auto stop = static_cast<Eigen::Index>(10) * shards;
  while (levels.back().size() > stop) {
    auto c = coarsen(levels.back(), static_cast<double>(bounds.upper));
    if (c.coarse.size() > levels.back().size() * 95 / 100) break;
    maps.push_back(std::move(c.map));
    levels.push_back(std::move(c.coarse));
  }
  result.levels = static_cast<std::int32_t>(levels.size());

  std::vector<std::int32_t> part = grow(levels.back(), shards, bounds);
  for (std::size_t li = levels.size(); li-- > 0;) {
    const Graph& g = levels[li];
    State s{g, std::move(part), {}, bounds};
    s.load = loads(g, s.part, shards);
    if (li == 0) rebalance(s, shards);
    refine(s, shards);
    if (li == 0) rebalance(s, shards);
    part = std::move(s.part);
    if (li > 0) {
      const auto& map = maps[li - 1];
      std::vector<std::int32_t> fine(map.size());
      for (std::size_t v = 0; v < map.size(); ++v) fine[v] = part[static_cast<std::size_t>(map[v])];
      part = std::move(fine);
    }
  }

  result.assignment = PartitionAssignment{std::move(part), shards};
  result.cut = cut_weight(tg, result.assignment);
  return result;
}

}  // namespace lanesim
