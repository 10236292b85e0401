#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gacdr/embedding.hpp"
#include "gacdr/hetgraph.hpp"
#include "gacdr/random.hpp"

namespace gacdr {

struct WalkConfig {
  double p = 1.0;  // return parameter
  double q = 1.0;  // in-out parameter
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 80;
  std::size_t window = 10;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double lr = 0.025;
  std::size_t dim = 16;
  std::uint64_t seed = 1;
  /// Entries allowed for precomputed second-order alias tables; above it walks sample linearly.
  std::size_t alias_budget = 1u << 24;

  void validate() const;  // throws ConfigError
};

/// Vose alias table over a fixed discrete distribution.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights);
  std::size_t sample(Rng& rng) const;
  std::size_t size() const { return prob_.size(); }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// Unnormalized second-order transition weights out of `cur`, having arrived from `prev`.
/// Without `prev` (first step) the weights are the raw edge weights.
std::vector<std::pair<std::uint32_t, double>> transition_weights(const HetGraph& graph,
                                                                 std::optional<std::uint32_t> prev,
                                                                 std::uint32_t cur, double p, double q);

using Walk = std::vector<std::uint32_t>;

/// walks_per_node walks from every non-isolated node, ordered by (walk index, start node).
/// Each walk draws from its own stream derived from (seed, start, walk index).
std::vector<Walk> generate_walks(const HetGraph& graph, const WalkConfig& config);

struct SkipGramResult {
  EmbeddingMatrix in;   // the node embeddings
  EmbeddingMatrix out;  // context vectors, kept for diagnostics
  /// Negative-sampling loss of a fixed (center, context, negatives) probe, after each epoch.
  std::vector<double> epoch_loss;
};

/// Skip-gram with negative sampling over the walk corpus.
SkipGramResult train_skipgram(const std::vector<Walk>& walks, std::size_t node_count, const WalkConfig& config);

/// Rows 0..m-1 are users, m..m+n-1 items. Throws ShapeMismatch when rows != m + n.
std::pair<EmbeddingMatrix, EmbeddingMatrix> split_embeddings(const EmbeddingMatrix& matrix, std::size_t m,
                                                             std::size_t n);

/// Walks + skip-gram + split, for one graph.
EntityEmbeddings embed_graph(const HetGraph& graph, const WalkConfig& config);

}  // namespace gacdr
