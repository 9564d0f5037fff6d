#include "lanesim/partitioning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include "lanesim/error.hpp"
#include "lanesim/text.hpp"

namespace lanesim {

namespace {

using Triplet = Eigen::Triplet<double>;

SparseMatrixd symmetric_from(Eigen::Index n, const std::vector<Triplet>& directed) {
  SparseMatrixd a(n, n);
  a.setFromTriplets(directed.begin(), directed.end());
  SparseMatrixd sym = SparseMatrixd(a.transpose()) + a;
  sym.prune([](Eigen::Index r, Eigen::Index c, double v) { return r != c && v != 0.0; });
  sym.makeCompressed();
  return sym;
}

Points2d default_coords(Eigen::Index n) {
  Points2d p(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) << static_cast<double>(i), 0.0;
  return p;
}

std::int32_t label_count(const std::vector<std::int32_t>& membership) {
  std::int32_t c = 0;
  for (auto l : membership) {
    if (l < 0) throw ValidationError("community labels must be nonnegative");
    c = std::max(c, l + 1);
  }
  return c;
}

}  // namespace

// ---------------------------------------------------------------------------
// TrafficGraph

Eigen::VectorXd TrafficGraph::strength() const {
  Eigen::VectorXd k = Eigen::VectorXd::Zero(size());
  for (Eigen::Index c = 0; c < adjacency.outerSize(); ++c)
    for (SparseMatrixd::InnerIterator it(adjacency, c); it; ++it) k[it.row()] += it.value();
  return k;
}

double TrafficGraph::total_weight() const { return 0.5 * adjacency.sum(); }

TrafficGraph TrafficGraph::from_edges(Eigen::Index n,
                                      const std::vector<std::tuple<int, int, double>>& edges,
                                      Points2d coords) {
  std::vector<Triplet> t;
  t.reserve(edges.size());
  for (auto [i, j, w] : edges) {
    if (i < 0 || j < 0 || i >= n || j >= n) throw ValidationError("edge endpoint out of range");
    if (w < 0) throw ValidationError("edge weights must be nonnegative");
    t.emplace_back(i, j, w);
  }
  TrafficGraph g;
  g.adjacency = symmetric_from(n, t);
  g.node_weight = Eigen::VectorXd::Zero(n);
  g.edge_traversals = Eigen::VectorXd::Zero(0);
  g.coords = coords.rows() == n ? std::move(coords) : default_coords(n);
  return g;
}

TrafficGraph build_traffic_graph(const RoadNetwork& net, const std::vector<Trip>& trips,
                                 const std::vector<Route>& routes, double window_begin_s,
                                 double window_end_s) {
  if (trips.size() != routes.size())
    throw ValidationError("trip and route tables differ in length");
  const auto n = static_cast<Eigen::Index>(net.node_count());
  TrafficGraph g;
  g.node_weight = Eigen::VectorXd::Zero(n);
  g.edge_traversals = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(net.edge_count()));
  g.coords.resize(n, 2);
  for (const auto& node : net.nodes()) g.coords.row(node.id) << node.x, node.y;

  std::vector<Triplet> directed;
  for (std::size_t i = 0; i < trips.size(); ++i) {
    const Trip& t = trips[i];
    if (t.depart_s < window_begin_s || t.depart_s >= window_end_s) continue;
    const Route& r = routes[i];
    if (r.edges.empty()) continue;
    g.node_weight[net.edge(r.edges.front()).from] += 1.0;
    for (EdgeId eid : r.edges) {
      const Edge& e = net.edge(eid);
      g.edge_traversals[eid] += 1.0;
      g.node_weight[e.to] += 1.0;
      directed.emplace_back(e.from, e.to, 1.0);
    }
  }
  g.adjacency = symmetric_from(n, directed);
  return g;
}

// ---------------------------------------------------------------------------
// PartitionAssignment

std::vector<std::int64_t> PartitionAssignment::sizes() const {
  std::vector<std::int64_t> s(static_cast<std::size_t>(std::max(shards, 0)), 0);
  for (auto k : shard_of)
    if (k >= 0 && k < shards) ++s[static_cast<std::size_t>(k)];
  return s;
}

bool PartitionAssignment::complete() const {
  return std::all_of(shard_of.begin(), shard_of.end(), [&](auto k) { return k >= 0 && k < shards; });
}

void PartitionAssignment::validate() const {
  if (shards < 1) throw ValidationError("shard count must be at least 1");
  if (!complete()) throw ValidationError("partition leaves nodes unassigned or out of range");
  if (static_cast<std::size_t>(shards) <= shard_of.size()) {
    const auto s = sizes();
    if (std::find(s.begin(), s.end(), 0) != s.end())
      throw ValidationError("partition leaves a shard empty");
  }
}

PartitionAssignment PartitionAssignment::single(std::size_t nodes) {
  return PartitionAssignment{std::vector<std::int32_t>(nodes, 0), 1};
}

double cut_weight(const TrafficGraph& g, const PartitionAssignment& p) {
  double cut = 0.0;
  for (Eigen::Index c = 0; c < g.adjacency.outerSize(); ++c)
    for (SparseMatrixd::InnerIterator it(g.adjacency, c); it; ++it)
      if (it.row() < c && p.shard_of[static_cast<std::size_t>(it.row())] !=
                              p.shard_of[static_cast<std::size_t>(c)])
        cut += it.value();
  return cut;
}

// ---------------------------------------------------------------------------
// Exact program

void PartitionCostModel::validate() const {
  if (!(tau_cal > 0.0) || !(tau_com >= tau_cal))
    throw ValidationError("cost model needs tau_com >= tau_cal > 0");
  if (capacity < 1) throw ValidationError("shard capacity must be at least 1");
}

double gp_objective(const TrafficGraph& g, const PartitionAssignment& p,
                    const PartitionCostModel& cost) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < g.adjacency.outerSize(); ++c)
    for (SparseMatrixd::InnerIterator it(g.adjacency, c); it; ++it)
      if (p.shard_of[static_cast<std::size_t>(it.row())] != p.shard_of[static_cast<std::size_t>(c)])
        s = std::max(s, it.value() * cost.tau_com);
  return s;
}

GpSolution solve_gp_exact(const TrafficGraph& g, std::int32_t shards,
                          const PartitionCostModel& cost) {
  cost.validate();
  const Eigen::Index n = g.size();
  if (n > kMaxExactNodes)
    throw ValidationError("exact partitioning is limited to " + std::to_string(kMaxExactNodes) +
                          " nodes");
  if (shards < 1) throw ValidationError("shard count must be at least 1");
  if (static_cast<std::int64_t>(shards) * cost.capacity < n)
    throw ValidationError("infeasible capacity: K * capacity < |V|");
  const std::int32_t used_shards = static_cast<std::int32_t>(std::min<Eigen::Index>(shards, n));

  const Eigen::MatrixXd a = Eigen::MatrixXd(g.adjacency) * cost.tau_com;
  std::vector<std::int32_t> cur(static_cast<std::size_t>(n), 0), best;
  std::vector<std::int64_t> load(static_cast<std::size_t>(shards), 0);
  double best_s = std::numeric_limits<double>::infinity();

  // Labels are introduced in first-use order, which enumerates each set
  // partition once and in lexicographic order; strict improvement keeps the
  // smallest vector among ties.
  std::function<void(Eigen::Index, std::int32_t, double)> search =
      [&](Eigen::Index i, std::int32_t labels, double s) {
        if (s >= best_s) return;
        if (i == n) {
          if (labels < used_shards) return;
          best_s = s;
          best = cur;
          return;
        }
        if (used_shards - labels > n - i) return;
        const std::int32_t top = std::min(labels + 1, shards);
        for (std::int32_t k = 0; k < top; ++k) {
          if (load[static_cast<std::size_t>(k)] >= cost.capacity) continue;
          double s_next = s;
          for (Eigen::Index j = 0; j < i; ++j)
            if (cur[static_cast<std::size_t>(j)] != k) s_next = std::max(s_next, a(i, j));
          cur[static_cast<std::size_t>(i)] = k;
          ++load[static_cast<std::size_t>(k)];
          search(i + 1, std::max(labels, k + 1), s_next);
          --load[static_cast<std::size_t>(k)];
        }
      };
  search(0, 0, 0.0);
  if (best.empty() && n > 0) throw ValidationError("no feasible assignment under the capacity");
  return GpSolution{PartitionAssignment{std::move(best), shards}, n > 0 ? best_s : 0.0};
}

BalanceBounds balance_bounds(std::int64_t nodes, std::int32_t shards, double epsilon) {
  if (shards < 1) throw ValidationError("shard count must be at least 1");
  if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be nonnegative");
  const double c = static_cast<double>((nodes + shards - 1) / shards);
  constexpr double slack = 1e-9;
  return BalanceBounds{
      std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((1.0 - epsilon) * c - slack))),
      static_cast<std::int64_t>(std::floor((1.0 + epsilon) * c + slack))};
}

// ---------------------------------------------------------------------------
// Modularity

double modularity_pairwise(const TrafficGraph& g, const std::vector<std::int32_t>& membership,
                           double resolution) {
  const double two_m = 2.0 * g.total_weight();
  if (!(two_m > 0.0)) throw ValidationError("modularity is undefined on a graph with no weight");
  const Eigen::VectorXd k = g.strength();
  const Eigen::Index n = g.size();
  const std::int32_t c = label_count(membership);
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(c));
  for (Eigen::Index i = 0; i < n; ++i) members[static_cast<std::size_t>(membership[i])].push_back(i);
  double q = 0.0;
  for (const auto& group : members)
    for (Eigen::Index i : group)
      for (Eigen::Index j : group)
        q += g.adjacency.coeff(i, j) - resolution * k[i] * k[j] / two_m;
  return q / two_m;
}

double modularity_by_community(const TrafficGraph& g, const std::vector<std::int32_t>& membership,
                               double resolution) {
  const double two_m = 2.0 * g.total_weight();
  if (!(two_m > 0.0)) throw ValidationError("modularity is undefined on a graph with no weight");
  const auto comms = describe_communities(g, membership);
  double q = 0.0;
  for (const auto& c : comms) {
    const double tot = c.sigma_tot / two_m;
    q += c.sigma_in / two_m - resolution * tot * tot;
  }
  return q;
}

double modularity(const TrafficGraph& g, const std::vector<std::int32_t>& membership,
                  double resolution) {
  if (membership.size() != static_cast<std::size_t>(g.size()))
    throw ValidationError("membership does not cover the graph");
  const double q = modularity_by_community(g, membership, resolution);
  std::vector<double> per(static_cast<std::size_t>(label_count(membership)), 0.0);
  for (auto l : membership) per[static_cast<std::size_t>(l)] += 1.0;
  double pairs = 0.0;
  for (double s : per) pairs += s * s;
  if (pairs <= 4e6) {
    const double q2 = modularity_pairwise(g, membership, resolution);
    if (std::abs(q - q2) > 1e-9)
      throw std::logic_error("modularity forms disagree: " + text::format_double(q) + " vs " +
                             text::format_double(q2));
  }
  return q;
}

std::vector<Community> describe_communities(const TrafficGraph& g,
                                            const std::vector<std::int32_t>& membership) {
  const std::int32_t c = label_count(membership);
  std::vector<Community> out(static_cast<std::size_t>(c));
  const Eigen::VectorXd k = g.strength();
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    auto& com = out[static_cast<std::size_t>(membership[static_cast<std::size_t>(i)])];
    com.members.push_back(static_cast<std::int32_t>(i));
    com.centroid += g.coords.row(i).transpose();
    com.sigma_tot += k[i];
  }
  for (Eigen::Index col = 0; col < g.adjacency.outerSize(); ++col)
    for (SparseMatrixd::InnerIterator it(g.adjacency, col); it; ++it)
      if (membership[static_cast<std::size_t>(it.row())] == membership[static_cast<std::size_t>(col)])
        out[static_cast<std::size_t>(membership[static_cast<std::size_t>(col)])].sigma_in += it.value();
  for (auto& com : out)
    if (!com.members.empty()) com.centroid /= static_cast<double>(com.members.size());
  return out;
}

bool communities_connected(const TrafficGraph& g, const std::vector<std::int32_t>& membership) {
  const auto comms = describe_communities(g, membership);
  std::vector<char> seen(static_cast<std::size_t>(g.size()), 0);
  for (const auto& com : comms) {
    if (com.members.empty()) continue;
    const auto label = membership[static_cast<std::size_t>(com.members.front())];
    std::vector<std::int32_t> stack{com.members.front()};
    seen[static_cast<std::size_t>(com.members.front())] = 1;
    std::size_t reached = 0;
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      ++reached;
      for (SparseMatrixd::InnerIterator it(g.adjacency, v); it; ++it) {
        const auto u = static_cast<std::size_t>(it.row());
        if (it.value() > 0 && !seen[u] && membership[u] == label) {
          seen[u] = 1;
          stack.push_back(static_cast<std::int32_t>(u));
        }
      }
    }
    if (reached != com.members.size()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// k-means over community centroids

double within_cluster_ss(const Points2d& points, const std::vector<std::int32_t>& labels,
                         std::int32_t clusters) {
  Eigen::MatrixX2d centers = Eigen::MatrixX2d::Zero(clusters, 2);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(clusters);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    centers.row(labels[static_cast<std::size_t>(i)]) += points.row(i);
    counts[labels[static_cast<std::size_t>(i)]] += 1.0;
  }
  for (Eigen::Index c = 0; c < clusters; ++c)
    if (counts[c] > 0) centers.row(c) /= counts[c];
  double ss = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    ss += (points.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
  return ss;
}

namespace {

struct KMeansRun {
  std::vector<std::int32_t> labels;
  double wcss = 0.0;
};

std::int32_t nearest_center(const Eigen::RowVector2d& p, const Eigen::MatrixX2d& centers) {
  std::int32_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < centers.rows(); ++c) {
    const double d = (p - centers.row(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = static_cast<std::int32_t>(c);
    }
  }
  return best;
}

KMeansRun lloyd(const Points2d& pts, Eigen::MatrixX2d centers, const KMeansOptions& opt) {
  const Eigen::Index n = pts.rows();
  const auto k = centers.rows();
  std::vector<std::int32_t> labels(static_cast<std::size_t>(n), 0);
  for (int iter = 0; iter < opt.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i)
      labels[static_cast<std::size_t>(i)] = nearest_center(pts.row(i), centers);

    Eigen::MatrixX2d next = Eigen::MatrixX2d::Zero(k, 2);
    Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      next.row(labels[static_cast<std::size_t>(i)]) += pts.row(i);
      counts[labels[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0) {
        next.row(c) /= counts[c];
        continue;
      }
      // Empty cluster: reseed at the point worst served by its center.
      Eigen::Index far = 0;
      double far_d = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (counts[labels[static_cast<std::size_t>(i)]] <= 1) continue;
        const double d = (pts.row(i) - centers.row(labels[static_cast<std::size_t>(i)])).squaredNorm();
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      counts[labels[static_cast<std::size_t>(far)]] -= 1.0;
      labels[static_cast<std::size_t>(far)] = static_cast<std::int32_t>(c);
      counts[c] = 1.0;
      next.row(c) = pts.row(far);
    }
    const double shift = (next - centers).rowwise().norm().maxCoeff();
    centers = next;
    if (shift <= opt.tolerance_m) break;
  }
  for (Eigen::Index i = 0; i < n; ++i)
    labels[static_cast<std::size_t>(i)] = nearest_center(pts.row(i), centers);
  // A final reassignment can empty a cluster only with duplicate centers;
  // keep every cluster populated.
  std::vector<std::int32_t> counts(static_cast<std::size_t>(k), 0);
  for (auto l : labels) ++counts[static_cast<std::size_t>(l)];
  for (Eigen::Index c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto& l = labels[static_cast<std::size_t>(i)];
      if (counts[static_cast<std::size_t>(l)] > 1) {
        --counts[static_cast<std::size_t>(l)];
        l = static_cast<std::int32_t>(c);
        counts[static_cast<std::size_t>(c)] = 1;
        break;
      }
    }
  }
  return KMeansRun{labels, within_cluster_ss(pts, labels, static_cast<std::int32_t>(k))};
}

Eigen::MatrixX2d plus_plus_init(const Points2d& pts, std::int32_t k, std::mt19937_64& rng) {
  const Eigen::Index n = pts.rows();
  Eigen::MatrixX2d centers(k, 2);
  std::uniform_int_distribution<Eigen::Index> first(0, n - 1);
  centers.row(0) = pts.row(first(rng));
  Eigen::VectorXd d2(n);
  for (Eigen::Index i = 0; i < n; ++i) d2[i] = (pts.row(i) - centers.row(0)).squaredNorm();
  for (std::int32_t c = 1; c < k; ++c) {
    const double total = d2.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        r -= d2[pick];
        if (r < 0.0 && d2[pick] > 0.0) break;
      }
    } else {
      pick = c % n;
    }
    centers.row(c) = pts.row(pick);
    for (Eigen::Index i = 0; i < n; ++i)
      d2[i] = std::min(d2[i], (pts.row(i) - centers.row(c)).squaredNorm());
  }
  return centers;
}

}  // namespace

std::vector<std::int32_t> kmeans_labels(const Points2d& points, std::int32_t k,
                                        const KMeansOptions& options) {
  const auto n = points.rows();
  if (k < 1) throw ValidationError("cluster count must be at least 1");
  if (n < k)
    throw ValidationError("only " + std::to_string(n) + " communities for " + std::to_string(k) +
                          " shards; lower the shard count");
  if (n == k) {
    std::vector<std::int32_t> id(static_cast<std::size_t>(n));
    std::iota(id.begin(), id.end(), 0);
    return id;
  }
  std::mt19937_64 rng(options.seed);
  KMeansRun best;
  best.wcss = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, options.restarts); ++r) {
    auto run = lloyd(points, plus_plus_init(points, k, rng), options);
    if (run.wcss < best.wcss) best = std::move(run);
  }
  // Relabel clusters in order of first appearance for stable shard indices.
  std::vector<std::int32_t> remap(static_cast<std::size_t>(k), -1);
  std::int32_t next = 0;
  for (auto& l : best.labels) {
    auto& m = remap[static_cast<std::size_t>(l)];
    if (m < 0) m = next++;
    l = m;
  }
  return best.labels;
}

PartitionAssignment kmeans_aggregate(const std::vector<Community>& communities,
                                     std::int32_t shards, std::size_t node_count,
                                     const KMeansOptions& options) {
  Points2d centroids(static_cast<Eigen::Index>(communities.size()), 2);
  for (std::size_t c = 0; c < communities.size(); ++c)
    centroids.row(static_cast<Eigen::Index>(c)) = communities[c].centroid.transpose();
  const auto labels = kmeans_labels(centroids, shards, options);
  PartitionAssignment p{std::vector<std::int32_t>(node_count, PartitionAssignment::kUnassigned),
                        shards};
  for (std::size_t c = 0; c < communities.size(); ++c)
    for (auto v : communities[c].members) p.shard_of[static_cast<std::size_t>(v)] = labels[c];
  return p;
}

PartitionAssignment assign_outliers(PartitionAssignment assignment, const TrafficGraph& g) {
  const auto& s = assignment.shard_of;
  std::vector<Eigen::Index> assigned;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (s[i] != PartitionAssignment::kUnassigned) assigned.push_back(static_cast<Eigen::Index>(i));
  if (assigned.empty()) throw ValidationError("cannot place outliers: no node is assigned");
  std::vector<std::int32_t> result = s;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != PartitionAssignment::kUnassigned) continue;
    const auto p = g.coords.row(static_cast<Eigen::Index>(i));
    double best_d = std::numeric_limits<double>::infinity();
    std::int32_t best_k = std::numeric_limits<std::int32_t>::max();
    for (auto j : assigned) {
      const double d = (g.coords.row(j) - p).squaredNorm();
      const auto k = s[static_cast<std::size_t>(j)];
      if (d < best_d || (d == best_d && k < best_k)) {
        best_d = d;
        best_k = k;
      }
    }
    result[i] = best_k;
  }
  assignment.shard_of = std::move(result);
  return assignment;
}

// ---------------------------------------------------------------------------
// Pipeline

std::string_view to_string(PartitionMethod m) noexcept {
  switch (m) {
    case PartitionMethod::exact: return "exact";
    case PartitionMethod::balanced: return "balanced";
    case PartitionMethod::unbalanced: return "unbalanced";
    case PartitionMethod::random: return "random";
  }
  return "balanced";
}

PartitionMethod parse_partition_method(std::string_view s) {
  for (auto m : {PartitionMethod::exact, PartitionMethod::balanced, PartitionMethod::unbalanced,
                 PartitionMethod::random})
    if (to_string(m) == s) return m;
  throw ValidationError("unknown partition method '" + std::string(s) + "'");
}

namespace {

PartitionAssignment unbalanced_partition(const TrafficGraph& g, std::int32_t shards,
                                         const PartitionOptions& opt) {
  // Communities are sought among visited nodes only; the rest are outliers.
  std::vector<Eigen::Index> visited;
  std::vector<Eigen::Index> local(static_cast<std::size_t>(g.size()), -1);
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    if (g.node_weight[i] > 0 || g.adjacency.col(i).nonZeros() > 0) {
      local[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(visited.size());
      visited.push_back(i);
    }
  }
  if (visited.empty()) throw ValidationError("no traffic in the partition window");

  const auto nv = static_cast<Eigen::Index>(visited.size());
  std::vector<Triplet> t;
  for (Eigen::Index c = 0; c < g.adjacency.outerSize(); ++c)
    for (SparseMatrixd::InnerIterator it(g.adjacency, c); it; ++it)
      if (local[static_cast<std::size_t>(it.row())] >= 0 && local[static_cast<std::size_t>(c)] >= 0)
        t.emplace_back(local[static_cast<std::size_t>(it.row())], local[static_cast<std::size_t>(c)],
                       it.value());
  TrafficGraph sub;
  sub.adjacency.resize(nv, nv);
  sub.adjacency.setFromTriplets(t.begin(), t.end());
  sub.node_weight.resize(nv);
  sub.coords.resize(nv, 2);
  for (Eigen::Index i = 0; i < nv; ++i) {
    sub.node_weight[i] = g.node_weight[visited[static_cast<std::size_t>(i)]];
    sub.coords.row(i) = g.coords.row(visited[static_cast<std::size_t>(i)]);
  }

  std::vector<std::int32_t> membership;
  if (sub.total_weight() > 0) {
    membership = leiden_communities(sub, LeidenOptions{opt.resolution, opt.seed, 100}).membership;
  } else {
    membership.resize(static_cast<std::size_t>(nv));
    std::iota(membership.begin(), membership.end(), 0);
  }
  auto comms = describe_communities(sub, membership);
  for (auto& c : comms)
    for (auto& v : c.members) v = static_cast<std::int32_t>(visited[static_cast<std::size_t>(v)]);
  auto p = kmeans_aggregate(comms, shards, static_cast<std::size_t>(g.size()),
                            KMeansOptions{opt.seed, 100, 1e-6, 10});
  return assign_outliers(std::move(p), g);
}

PartitionAssignment random_partition(Eigen::Index n, std::int32_t shards, std::uint64_t seed) {
  std::vector<std::int32_t> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  PartitionAssignment p{std::vector<std::int32_t>(static_cast<std::size_t>(n), 0), shards};
  for (std::size_t i = 0; i < order.size(); ++i)
    p.shard_of[static_cast<std::size_t>(order[i])] = static_cast<std::int32_t>(i % static_cast<std::size_t>(shards));
  return p;
}

}  // namespace

PartitionAssignment partition_graph(const TrafficGraph& g, PartitionMethod method,
                                    std::int32_t shards, const PartitionOptions& options) {
  if (shards < 1) throw ValidationError("shard count must be at least 1");
  if (shards > g.size()) throw ValidationError("more shards than nodes");
  if (shards == 1) return PartitionAssignment::single(static_cast<std::size_t>(g.size()));
  PartitionAssignment p;
  switch (method) {
    case PartitionMethod::exact: {
      auto cost = options.cost;
      if (cost.capacity <= 0)
        cost.capacity = balance_bounds(g.size(), shards, options.epsilon).upper;
      p = solve_gp_exact(g, shards, cost).assignment;
      break;
    }
    case PartitionMethod::balanced:
      p = balanced_partition(g, shards, options.epsilon).assignment;
      break;
    case PartitionMethod::unbalanced:
      p = unbalanced_partition(g, shards, options);
      break;
    case PartitionMethod::random:
      p = random_partition(g.size(), shards, options.seed);
      break;
  }
  p.validate();
  return p;
}

void save_partition(const PartitionAssignment& p, const RoadNetwork& net,
                    const std::filesystem::path& path) {
  p.validate();
  if (p.shard_of.size() != net.node_count())
    throw ValidationError("partition does not match the network");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write partition file " + path.string());
  out << "node_id,shard_index\n";
  for (std::size_t i = 0; i < p.shard_of.size(); ++i)
    out << net.node(static_cast<NodeId>(i)).external_id << ',' << p.shard_of[i] << '\n';
}

PartitionAssignment load_partition(const std::filesystem::path& path, const RoadNetwork& net) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open partition file " + path.string());
  PartitionAssignment p{std::vector<std::int32_t>(net.node_count(), PartitionAssignment::kUnassigned),
                        0};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (text::is_skippable(raw) || text::trim(raw) == "node_id,shard_index") continue;
    const auto f = text::split(text::trim(raw));
    auto id = f.size() == 2 ? text::parse_number<std::int64_t>(f[0]) : std::nullopt;
    auto k = f.size() == 2 ? text::parse_number<std::int32_t>(f[1]) : std::nullopt;
    if (!id || !k || *k < 0) throw ParseError(path.string(), line_no, "malformed partition record");
    auto node = net.find_node(*id);
    if (!node) throw ParseError(path.string(), line_no, "unknown node id " + std::to_string(*id));
    auto& slot = p.shard_of[static_cast<std::size_t>(*node)];
    if (slot != PartitionAssignment::kUnassigned)
      throw ParseError(path.string(), line_no, "node assigned twice");
    slot = *k;
    p.shards = std::max(p.shards, *k + 1);
  }
  p.validate();
  return p;
}

}  // namespace lanesim
