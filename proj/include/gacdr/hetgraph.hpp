#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "gacdr/corpus.hpp"
#include "gacdr/embedding.hpp"
#include "gacdr/random.hpp"

namespace gacdr {

enum class EdgeKind : std::uint8_t { UI, UU, II };

const char* to_string(EdgeKind kind);

struct Edge {
  std::uint32_t neighbor = 0;
  double weight = 0.0;
  EdgeKind kind = EdgeKind::UI;

  bool operator==(const Edge&) const = default;
};

/// Undirected weighted graph over the users (ids 0..m-1) and items (ids m..m+n-1) of one dataset.
/// Adjacency lists are sorted by neighbor id; every edge is stored in both directions.
class HetGraph {
 public:
  HetGraph() = default;
  HetGraph(std::size_t users, std::size_t items);

  std::size_t users() const { return users_; }
  std::size_t items() const { return items_; }
  std::size_t node_count() const { return adjacency_.size(); }
  std::uint32_t item_node(std::uint32_t item) const { return static_cast<std::uint32_t>(users_ + item); }

  std::span<const Edge> neighbors(std::uint32_t node) const { return adjacency_.at(node); }
  std::size_t degree(std::uint32_t node) const { return adjacency_.at(node).size(); }
  bool adjacent(std::uint32_t a, std::uint32_t b) const;
  std::size_t edge_count() const;  // undirected edges

  /// Adds both directions. Rejects self-loops and weights outside (0, 1]; finalize() rejects duplicates.
  void add_edge(std::uint32_t a, std::uint32_t b, double weight, EdgeKind kind);

  /// Sorts adjacency lists and rejects duplicate edges; call once after the last add_edge.
  void finalize();

  bool operator==(const HetGraph&) const = default;

 private:
  std::size_t users_ = 0;
  std::size_t items_ = 0;
  std::vector<std::vector<Edge>> adjacency_;
};

struct GraphConfig {
  double alpha = 0.05;
  std::uint64_t seed = 1;
  std::size_t candidate_cap = 5000;
  std::size_t top_neighbors = 50;  // candidates per entity above the cap
};

/// Interaction edges weighted r / max(R), plus user-user and item-item edges each kept with
/// probability alpha * normalized_sim and weighted by that similarity.
HetGraph build_graph(const Corpus& corpus, std::size_t dataset, const EntityEmbeddings& content,
                     const GraphConfig& config);

/// Draws the similarity edges among `vectors` rows flagged present. Returned pairs have a < b.
struct SimilarityEdge {
  std::uint32_t a, b;
  double weight;
};
std::vector<SimilarityEdge> sample_similarity_edges(const Matrix& vectors, const std::vector<bool>& present,
                                                    const GraphConfig& config, Rng& rng);

struct DegreeStats {
  std::size_t edges = 0;       // undirected edges of this kind
  std::size_t degree_sum = 0;  // = 2 * edges
  std::size_t min_degree = 0;  // over nodes that can carry this kind
  std::size_t max_degree = 0;
  double mean_degree = 0.0;
};

std::map<EdgeKind, DegreeStats> degree_histogram(const HetGraph& graph);

/// `#nodes m n` header, then one `src<TAB>dst<TAB>weight<TAB>kind` line per undirected edge (src < dst).
void write_graph(const std::filesystem::path& path, const HetGraph& graph);
HetGraph read_graph(const std::filesystem::path& path);

}  // namespace gacdr
