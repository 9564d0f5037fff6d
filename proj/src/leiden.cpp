// Leiden community detection on modularity: fast local moving, refinement
// restricted to each community, aggregation on the refined partition.

#include <algorithm>
#include <deque>
#include <numeric>
#include <random>
#include <unordered_map>

#include "lanesim/partitioning.hpp"

namespace lanesim {

namespace {

constexpr double kMinGain = 1e-12;

struct Level {
  SparseMatrixd a;       // may carry self-loops after aggregation
  Eigen::VectorXd k;     // strengths including self-loops
  Eigen::Index size() const { return a.rows(); }
};

/// Weight from v to each neighbouring label, self-loop excluded.
void neighbour_weights(const Level& g, Eigen::Index v, const std::vector<std::int32_t>& label,
                       std::unordered_map<std::int32_t, double>& out,
                       std::vector<std::int32_t>& order) {
  out.clear();
  order.clear();
  for (SparseMatrixd::InnerIterator it(g.a, v); it; ++it) {
    if (it.row() == v) continue;
    const auto c = label[static_cast<std::size_t>(it.row())];
    auto [pos, fresh] = out.try_emplace(c, 0.0);
    if (fresh) order.push_back(c);
    pos->second += it.value();
  }
  std::sort(order.begin(), order.end());
}

void move_nodes_fast(const Level& g, std::vector<std::int32_t>& label, double gamma, double two_m,
                     std::mt19937_64& rng) {
  const auto n = g.size();
  std::vector<double> tot(static_cast<std::size_t>(n), 0.0);
  std::vector<std::int32_t> count(static_cast<std::size_t>(n), 0);
  for (Eigen::Index v = 0; v < n; ++v) {
    tot[static_cast<std::size_t>(label[v])] += g.k[v];
    ++count[static_cast<std::size_t>(label[v])];
  }
  std::vector<std::int32_t> empty;
  for (Eigen::Index c = n - 1; c >= 0; --c)
    if (count[static_cast<std::size_t>(c)] == 0) empty.push_back(static_cast<std::int32_t>(c));

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::deque<Eigen::Index> queue(order.begin(), order.end());
  std::vector<char> queued(static_cast<std::size_t>(n), 1);

  std::unordered_map<std::int32_t, double> w;
  std::vector<std::int32_t> cand;
  while (!queue.empty()) {
    const auto v = queue.front();
    queue.pop_front();
    queued[static_cast<std::size_t>(v)] = 0;
    const auto old = label[static_cast<std::size_t>(v)];
    neighbour_weights(g, v, label, w, cand);
    const double kv = g.k[v];

    tot[static_cast<std::size_t>(old)] -= kv;
    --count[static_cast<std::size_t>(old)];
    auto score = [&](std::int32_t c) {
      auto it = w.find(c);
      const double kin = it == w.end() ? 0.0 : it->second;
      return kin - gamma * kv * tot[static_cast<std::size_t>(c)] / two_m;
    };
    std::int32_t best = old;
    double best_score = score(old);
    for (auto c : cand) {
      const double s = score(c);
      if (s > best_score + kMinGain) {
        best = c;
        best_score = s;
      }
    }
    // An empty community scores zero.
    if (best == old && count[static_cast<std::size_t>(old)] > 0 && !empty.empty() &&
        0.0 > best_score + kMinGain)
      best = empty.back();
    if (best != old) {
      if (!empty.empty() && best == empty.back()) empty.pop_back();
      if (count[static_cast<std::size_t>(old)] == 0) empty.push_back(old);
    }
    tot[static_cast<std::size_t>(best)] += kv;
    ++count[static_cast<std::size_t>(best)];
    label[static_cast<std::size_t>(v)] = best;

    if (best != old) {
      for (SparseMatrixd::InnerIterator it(g.a, v); it; ++it) {
        const auto u = it.row();
        if (u == v || queued[static_cast<std::size_t>(u)] || label[static_cast<std::size_t>(u)] == best)
          continue;
        queued[static_cast<std::size_t>(u)] = 1;
        queue.push_back(u);
      }
    }
  }
}

/// Merges singletons within each community into well-connected subsets.
/// Greedy choice of the best nonnegative merge keeps the result deterministic.
std::vector<std::int32_t> refine(const Level& g, const std::vector<std::int32_t>& part, double gamma,
                                 double two_m, std::mt19937_64& rng) {
  const auto n = g.size();
  std::vector<std::int32_t> ref(static_cast<std::size_t>(n));
  std::iota(ref.begin(), ref.end(), 0);
  std::vector<double> tot(static_cast<std::size_t>(n));
  std::vector<double> ext(static_cast<std::size_t>(n), 0.0);  // weight to the rest of its community
  std::vector<char> singleton(static_cast<std::size_t>(n), 1);
  std::vector<double> part_tot(static_cast<std::size_t>(n), 0.0);
  for (Eigen::Index v = 0; v < n; ++v) {
    tot[static_cast<std::size_t>(v)] = g.k[v];
    part_tot[static_cast<std::size_t>(part[v])] += g.k[v];
    for (SparseMatrixd::InnerIterator it(g.a, v); it; ++it)
      if (it.row() != v && part[static_cast<std::size_t>(it.row())] == part[v])
        ext[static_cast<std::size_t>(v)] += it.value();
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::shuffle(order.begin(), order.end(), rng);

  std::unordered_map<std::int32_t, double> w;
  std::vector<std::int32_t> cand;
  for (auto v : order) {
    const auto vi = static_cast<std::size_t>(v);
    if (!singleton[vi]) continue;
    const double kv = g.k[v];
    const double ptot = part_tot[static_cast<std::size_t>(part[vi])];
    if (ext[vi] < gamma * kv * (ptot - kv) / two_m) continue;

    w.clear();
    cand.clear();
    for (SparseMatrixd::InnerIterator it(g.a, v); it; ++it) {
      const auto u = static_cast<std::size_t>(it.row());
      if (it.row() == v || part[u] != part[vi]) continue;
      auto [pos, fresh] = w.try_emplace(ref[u], 0.0);
      if (fresh) cand.push_back(ref[u]);
      pos->second += it.value();
    }
    std::sort(cand.begin(), cand.end());

    std::int32_t best = -1;
    double best_score = 0.0;
    for (auto c : cand) {
      const auto ci = static_cast<std::size_t>(c);
      if (ext[ci] < gamma * tot[ci] * (ptot - tot[ci]) / two_m) continue;
      const double s = w[c] - gamma * kv * tot[ci] / two_m;
      if (s < -kMinGain) continue;
      if (best < 0 || s > best_score + kMinGain) {
        best = c;
        best_score = s;
      }
    }
    if (best < 0) continue;
    const auto bi = static_cast<std::size_t>(best);
    ext[bi] = ext[bi] + ext[vi] - 2.0 * w[best];
    tot[bi] += kv;
    ref[vi] = best;
    singleton[vi] = 0;
    singleton[bi] = 0;
  }
  return ref;
}

/// Relabels to 0..c-1 in first-appearance order; returns c.
std::int32_t compact(std::vector<std::int32_t>& label) {
  std::unordered_map<std::int32_t, std::int32_t> remap;
  for (auto& l : label) {
    auto [it, fresh] = remap.try_emplace(l, static_cast<std::int32_t>(remap.size()));
    l = it->second;
  }
  return static_cast<std::int32_t>(remap.size());
}

Level aggregate(const Level& g, const std::vector<std::int32_t>& ref, std::int32_t count) {
  SparseMatrixd p(g.size(), count);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<std::size_t>(g.size()));
  for (Eigen::Index v = 0; v < g.size(); ++v) t.emplace_back(v, ref[static_cast<std::size_t>(v)], 1.0);
  p.setFromTriplets(t.begin(), t.end());
  Level out;
  out.a = SparseMatrixd(p.transpose()) * g.a * p;
  out.a.makeCompressed();
  out.k = p.transpose() * g.k;
  return out;
}

}  // namespace

LeidenResult leiden_communities(const TrafficGraph& g, const LeidenOptions& options) {
  const auto n = g.size();
  LeidenResult result;
  result.membership.resize(static_cast<std::size_t>(n));
  std::iota(result.membership.begin(), result.membership.end(), 0);
  const double two_m = 2.0 * g.total_weight();
  if (!(two_m > 0.0)) {
    result.count = static_cast<std::int32_t>(n);
    return result;
  }

  std::mt19937_64 rng(options.seed);
  Level level{g.adjacency, g.strength()};
  std::vector<std::int32_t> flat(static_cast<std::size_t>(n));  // original node -> level node
  std::iota(flat.begin(), flat.end(), 0);
  std::vector<std::int32_t> part(static_cast<std::size_t>(n));
  std::iota(part.begin(), part.end(), 0);

  auto carried = [&] {
    std::vector<std::int32_t> m(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i)
      m[static_cast<std::size_t>(i)] = part[static_cast<std::size_t>(flat[static_cast<std::size_t>(i)])];
    return m;
  };

  for (int iter = 0; iter < options.max_iterations; ++iter) {
    result.iterations = iter + 1;
    move_nodes_fast(level, part, options.resolution, two_m, rng);
    result.quality_trace.push_back(modularity_by_community(g, carried(), options.resolution));

    auto distinct = part;
    const auto communities = compact(distinct);
    if (communities == level.size()) break;

    auto ref = refine(level, part, options.resolution, two_m, rng);
    const auto refined = compact(ref);
    Level next = aggregate(level, ref, refined);
    std::vector<std::int32_t> next_part(static_cast<std::size_t>(refined));
    for (Eigen::Index v = 0; v < level.size(); ++v)
      next_part[static_cast<std::size_t>(ref[static_cast<std::size_t>(v)])] = part[static_cast<std::size_t>(v)];
    for (auto& f : flat) f = ref[static_cast<std::size_t>(f)];
    compact(next_part);
    level = std::move(next);
    part = std::move(next_part);
    result.quality_trace.push_back(modularity_by_community(g, carried(), options.resolution));
  }

  result.membership = carried();
  result.count = compact(result.membership);
  return result;
}

}  // namespace lanesim
