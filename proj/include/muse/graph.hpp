#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "muse/ops.hpp"
#include "muse/tensor.hpp"

namespace muse {

// Undirected edge stored once with u < v.
struct Edge {
  std::uint32_t u = 0;
  std::uint32_t v = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Counts of edge records discarded while building a graph.
struct EdgeCleanup {
  std::size_t self_loops = 0;
  std::size_t duplicates = 0;  // repeated or reversed copies of an edge
};

// Immutable undirected graph with node features and optional labels.
// Copies are cheap and share storage.
class Graph {
 public:
  Graph() = default;

  // Canonicalises `edges` (orients u < v, drops self-loops and duplicates).
  // Throws FormatError on out-of-range endpoints, feature rows != n_nodes or
  // labels outside [0, n_classes).
  static Graph build(std::string name, std::size_t n_nodes,
                     std::span<const std::pair<std::size_t, std::size_t>> edges, Tensor features,
                     std::optional<std::vector<int>> labels, std::size_t n_classes,
                     EdgeCleanup* cleanup = nullptr);

  // Same nodes, features and labels over a subset of this graph's edges.
  Graph with_edges(std::vector<Edge> edges) const;

  const std::string& name() const { return impl_->name; }
  std::size_t n_nodes() const { return impl_ ? impl_->n_nodes : 0; }
  std::size_t n_edges() const { return impl_ ? impl_->edges.size() : 0; }
  std::size_t n_features() const { return impl_->features.cols(); }
  std::size_t n_classes() const { return impl_->n_classes; }
  std::span<const Edge> edges() const { return impl_->edges; }
  const Tensor& features() const { return impl_->features; }
  bool has_labels() const { return impl_->labels != nullptr; }
  std::span<const int> labels() const;
  std::span<const std::size_t> degree() const { return impl_->degree; }
  std::span<const std::uint32_t> neighbors(std::size_t node) const;

 private:
  struct Impl {
    std::string name;
    std::size_t n_nodes = 0;
    std::size_t n_classes = 0;
    std::vector<Edge> edges;
    Tensor features;
    std::shared_ptr<const std::vector<int>> labels;
    std::vector<std::size_t> degree;
    std::vector<std::size_t> nbr_ptr;
    std::vector<std::uint32_t> nbr_idx;
  };

  static std::shared_ptr<Impl> finish(std::shared_ptr<Impl> impl);

  std::shared_ptr<const Impl> impl_;
};

// ---------------------------------------------------------------------------
// On-disk dataset directory:
//   meta.json     {"name": str, "n_nodes": int, "n_features": int, "n_classes": int}
//   edges.tsv     "<u>\t<v>" per line, 0-based
//   features.csv  n_nodes lines of n_features comma-separated reals
//   labels.txt    optional, n_nodes lines of one 0-based class each

struct LoadedGraph {
  Graph graph;
  EdgeCleanup cleanup;
};

LoadedGraph load_graph_with_report(const std::filesystem::path& dir);
// Logs dropped edge records to stderr.
Graph load_graph(const std::filesystem::path& dir);
void write_graph(const Graph& g, const std::filesystem::path& dir);

// D^-1/2 (A [+ I]) D^-1/2 with degrees taken after the optional self-loops.
// Rows of isolated nodes hold only their self-loop (or nothing).
Tensor normalized_adjacency(const Graph& g, bool add_self_loops);
SparseMatrix normalized_adjacency_sparse(const Graph& g, bool add_self_loops);

// ---------------------------------------------------------------------------

struct SplitRatio {
  double train = 0.48;
  double val = 0.32;
  double test = 0.20;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
  std::uint64_t seed = 0;
};

// Largest-remainder apportionment of n items; ties go to the earlier part.
std::array<std::size_t, 3> split_sizes(std::size_t n, const SplitRatio& ratio);

// n_splits random train/val/test partitions of the labelled nodes. Each
// split's train part must contain every class; up to 100 draws are tried.
std::vector<Split> make_splits(const Graph& g, const SplitRatio& ratio, std::size_t n_splits,
                               std::uint64_t seed);

// Cosine between each node's features and the mean of its neighbours'
// features. Isolated nodes get 0 and are flagged.
struct NeighborhoodSimilarity {
  std::vector<double> values;
  std::vector<bool> isolated;
};
NeighborhoodSimilarity neighborhood_similarity(const Graph& g);

}  // namespace muse
