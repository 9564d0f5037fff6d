#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <tuple>
#include <vector>

#include "lanesim/demand.hpp"
#include "lanesim/network.hpp"

namespace lanesim {

using SparseMatrixd = Eigen::SparseMatrix<double>;
using Points2d = Eigen::Matrix<double, Eigen::Dynamic, 2>;

/// Route-weighted view of the network used by every partitioner.
struct TrafficGraph {
  SparseMatrixd adjacency;          // symmetric, A_ij + A_ji traversal counts, zero diagonal
  Eigen::VectorXd node_weight;      // visit counts
  Eigen::VectorXd edge_traversals;  // per network edge, directed counts
  Points2d coords;                  // planar node positions

  Eigen::Index size() const noexcept { return adjacency.rows(); }
  Eigen::VectorXd strength() const;  // k_i, row sums of the adjacency
  double total_weight() const;       // m, half the adjacency sum

  /// Undirected weighted graph from (i, j, w) triples; duplicates add up,
  /// self-loops are dropped. Coordinates default to (i, 0).
  static TrafficGraph from_edges(Eigen::Index n,
                                 const std::vector<std::tuple<int, int, double>>& edges,
                                 Points2d coords = {});
};

/// Counts route traversals of trips departing in [window_begin, window_end).
TrafficGraph build_traffic_graph(const RoadNetwork& net, const std::vector<Trip>& trips,
                                 const std::vector<Route>& routes, double window_begin_s,
                                 double window_end_s);

struct PartitionAssignment {
  static constexpr std::int32_t kUnassigned = -1;

  std::vector<std::int32_t> shard_of;  // per dense node id
  std::int32_t shards = 1;

  std::int32_t operator[](std::size_t node) const { return shard_of[node]; }
  std::vector<std::int64_t> sizes() const;
  bool complete() const;
  /// Total assignment, shard indices in range, every shard nonempty when
  /// shards <= node count.
  void validate() const;

  static PartitionAssignment single(std::size_t nodes);
  friend bool operator==(const PartitionAssignment&, const PartitionAssignment&) = default;
};

/// Sum of adjacency weight over pairs split across shards (each pair once).
double cut_weight(const TrafficGraph& g, const PartitionAssignment& p);

// ---------------------------------------------------------------------------
// Exact min-max program (desk-scale oracle)

struct PartitionCostModel {
  double tau_com = 1.0;  // s per cross-shard vehicle event
  double tau_cal = 1.0;  // s per on-shard vehicle update; not part of the objective
  std::int64_t capacity = 0;  // max nodes per shard
  void validate() const;
};

struct GpSolution {
  PartitionAssignment assignment;
  double objective = 0.0;
};

/// max over split pairs of A_ij * tau_com.
double gp_objective(const TrafficGraph& g, const PartitionAssignment& p,
                    const PartitionCostModel& cost);

inline constexpr Eigen::Index kMaxExactNodes = 14;

/// Exhaustive search with label-symmetry pruning. Among optimal assignments
/// the lexicographically smallest vector is returned.
GpSolution solve_gp_exact(const TrafficGraph& g, std::int32_t shards,
                          const PartitionCostModel& cost);

// ---------------------------------------------------------------------------
// Balanced multilevel partitioning

struct BalanceBounds {
  std::int64_t lower = 0;
  std::int64_t upper = 0;
};

/// (1-eps) ceil(n/k) <= |V_k| <= (1+eps) ceil(n/k), rounded inward.
BalanceBounds balance_bounds(std::int64_t nodes, std::int32_t shards, double epsilon);

struct BalancedResult {
  PartitionAssignment assignment;
  double cut = 0.0;
  std::int32_t levels = 0;
};

BalancedResult balanced_partition(const TrafficGraph& g, std::int32_t shards, double epsilon);

// ---------------------------------------------------------------------------
// Communities

/// (1/2m) sum_ij [A_ij - gamma k_i k_j / 2m] delta(c_i, c_j), evaluated pair by pair.
double modularity_pairwise(const TrafficGraph& g, const std::vector<std::int32_t>& membership,
                           double resolution = 1.0);
/// sum_c [S_in / 2m - gamma (S_tot / 2m)^2].
double modularity_by_community(const TrafficGraph& g, const std::vector<std::int32_t>& membership,
                               double resolution = 1.0);
/// Community form, cross-checked against the pairwise form to 1e-9 when the
/// pairwise sum is affordable. Throws ValidationError when m = 0.
double modularity(const TrafficGraph& g, const std::vector<std::int32_t>& membership,
                  double resolution = 1.0);

struct LeidenOptions {
  double resolution = 1.0;
  std::uint64_t seed = 7;
  int max_iterations = 100;
};

struct LeidenResult {
  std::vector<std::int32_t> membership;  // labels 0..count-1 in first-appearance order
  std::int32_t count = 0;
  /// Modularity of the carried partition on the input graph after each
  /// local-moving and each refinement/aggregation phase.
  std::vector<double> quality_trace;
  int iterations = 0;
};

LeidenResult leiden_communities(const TrafficGraph& g, const LeidenOptions& options = {});

struct Community {
  std::vector<std::int32_t> members;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  double sigma_in = 0.0;   // internal weight, each edge counted twice
  double sigma_tot = 0.0;  // total strength of members
};

std::vector<Community> describe_communities(const TrafficGraph& g,
                                            const std::vector<std::int32_t>& membership);

/// True when every community induces a connected subgraph.
bool communities_connected(const TrafficGraph& g, const std::vector<std::int32_t>& membership);

/// Within-cluster sum of squares of points under a labelling.
double within_cluster_ss(const Points2d& points, const std::vector<std::int32_t>& labels,
                         std::int32_t clusters);

struct KMeansOptions {
  std::uint64_t seed = 11;
  int max_iterations = 100;
  double tolerance_m = 1e-6;
  int restarts = 10;
};

/// k-means over centroids with k-means++ seeding; returns a cluster per point.
std::vector<std::int32_t> kmeans_labels(const Points2d& points, std::int32_t k,
                                        const KMeansOptions& options = {});

/// Clusters community centroids into `shards` groups; nodes inherit their
/// community's cluster. Nodes outside every community stay unassigned.
PartitionAssignment kmeans_aggregate(const std::vector<Community>& communities,
                                     std::int32_t shards, std::size_t node_count,
                                     const KMeansOptions& options = {});

/// Gives each unassigned node the shard of its Euclidean-nearest assigned
/// node; equal distances go to the lower shard index.
PartitionAssignment assign_outliers(PartitionAssignment assignment, const TrafficGraph& g);

// ---------------------------------------------------------------------------
// Pipeline and files

enum class PartitionMethod { exact, balanced, unbalanced, random };

std::string_view to_string(PartitionMethod m) noexcept;
PartitionMethod parse_partition_method(std::string_view s);

struct PartitionOptions {
  double epsilon = 0.05;
  double resolution = 1.0;
  std::uint64_t seed = 1;
  PartitionCostModel cost{};
};

PartitionAssignment partition_graph(const TrafficGraph& g, PartitionMethod method,
                                    std::int32_t shards, const PartitionOptions& options = {});

/// `node_id,shard_index` with external node ids.
void save_partition(const PartitionAssignment& p, const RoadNetwork& net,
                    const std::filesystem::path& path);
PartitionAssignment load_partition(const std::filesystem::path& path, const RoadNetwork& net);

}  // namespace lanesim
