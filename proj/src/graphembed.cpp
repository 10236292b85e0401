#include "gacdr/graphembed.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "gacdr/error.hpp"

namespace gacdr {

void WalkConfig::validate() const {
  if (!(p > 0.0)) throw ConfigError("walk.p", "must be > 0");
  if (!(q > 0.0)) throw ConfigError("walk.q", "must be > 0");
  if (walks_per_node < 1) throw ConfigError("walk.walks_per_node", "must be >= 1");
  if (walk_length < 1) throw ConfigError("walk.walk_length", "must be >= 1");
  if (window < 1) throw ConfigError("walk.window", "must be >= 1");
  if (negatives < 1) throw ConfigError("walk.negatives", "must be >= 1");
  if (epochs < 1) throw ConfigError("walk.epochs", "must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("walk.lr", "must be > 0");
  if (dim < 1) throw ConfigError("walk.dim", "must be >= 1");
}

AliasTable::AliasTable(const std::vector<double>& weights) : prob_(weights.size()), alias_(weights.size()) {
  const std::size_t n = weights.size();
  if (n == 0) return;
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    auto s = small.back();
    small.pop_back();
    auto l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto i : large) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
  for (auto i : small) {  // numerical leftovers
    prob_[i] = 1.0;
    alias_[i] = i;
  }
}

std::size_t AliasTable::sample(Rng& rng) const {
  const double u = uniform01(rng) * static_cast<double>(prob_.size());
  auto column = std::min(static_cast<std::size_t>(u), prob_.size() - 1);
  const double coin = u - static_cast<double>(column);
  return coin < prob_[column] ? column : alias_[column];
}

std::vector<std::pair<std::uint32_t, double>> transition_weights(const HetGraph& graph,
                                                                 std::optional<std::uint32_t> prev,
                                                                 std::uint32_t cur, double p, double q) {
  auto adj = graph.neighbors(cur);
  if (adj.empty()) throw IsolatedNode("node " + std::to_string(cur) + " has no neighbors");
  std::vector<std::pair<std::uint32_t, double>> out;
  out.reserve(adj.size());
  for (const auto& e : adj) {
    double bias = 1.0;
    if (prev) {
      if (e.neighbor == *prev)
        bias = 1.0 / p;
      else if (!graph.adjacent(*prev, e.neighbor))
        bias = 1.0 / q;
    }
    out.emplace_back(e.neighbor, e.weight * bias);
  }
  return out;
}

namespace {

std::vector<double> weights_only(const std::vector<std::pair<std::uint32_t, double>>& tw) {
  std::vector<double> w(tw.size());
  for (std::size_t i = 0; i < tw.size(); ++i) w[i] = tw[i].second;
  return w;
}

std::size_t sample_linear(const std::vector<double>& w, Rng& rng) {
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (u < w[i]) return i;
    u -= w[i];
  }
  return w.size() - 1;
}

}  // namespace

std::vector<Walk> generate_walks(const HetGraph& graph, const WalkConfig& config) {
  config.validate();
  const std::size_t nodes = graph.node_count();

  std::vector<AliasTable> first(nodes);
  for (std::uint32_t v = 0; v < nodes; ++v)
    if (graph.degree(v) > 0) first[v] = AliasTable(weights_only(transition_weights(graph, std::nullopt, v, config.p, config.q)));

  // edge_tables[prev][i] serves the step out of adj(prev)[i].neighbor having come from prev.
  std::size_t entries = 0;
  for (std::uint32_t v = 0; v < nodes; ++v)
    for (const auto& e : graph.neighbors(v)) entries += graph.degree(e.neighbor);
  const bool use_alias = entries <= config.alias_budget;
  std::vector<std::vector<AliasTable>> edge_tables;
  if (use_alias) {
    edge_tables.resize(nodes);
    for (std::uint32_t v = 0; v < nodes; ++v) {
      auto adj = graph.neighbors(v);
      edge_tables[v].reserve(adj.size());
      for (const auto& e : adj)
        edge_tables[v].emplace_back(weights_only(transition_weights(graph, v, e.neighbor, config.p, config.q)));
    }
  }

  std::vector<Walk> walks;
  for (std::size_t r = 0; r < config.walks_per_node; ++r) {
    for (std::uint32_t start = 0; start < nodes; ++start) {
      if (graph.degree(start) == 0) continue;
      Rng rng = make_rng(derive_seed(config.seed, start, r));
      Walk walk;
      walk.reserve(config.walk_length);
      walk.push_back(start);
      std::uint32_t prev = start;
      std::size_t via = 0;  // index of the current node in adj(prev)
      while (walk.size() < config.walk_length) {
        const std::uint32_t cur = walk.back();
        auto adj = graph.neighbors(cur);
        if (adj.empty()) break;
        std::size_t pick;
        if (walk.size() == 1) {
          pick = first[cur].sample(rng);
        } else if (use_alias) {
          pick = edge_tables[prev][via].sample(rng);
        } else {
          pick = sample_linear(weights_only(transition_weights(graph, prev, cur, config.p, config.q)), rng);
        }
        prev = cur;
        via = pick;
        walk.push_back(adj[pick].neighbor);
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

namespace {

double log_sigmoid(double x) { return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x)); }

struct ProbePair {
  std::uint32_t center, context;
  std::vector<std::uint32_t> negatives;
};

}  // namespace

SkipGramResult train_skipgram(const std::vector<Walk>& walks, std::size_t node_count, const WalkConfig& config) {
  config.validate();
  const std::size_t k = config.dim;
  const auto K = static_cast<Eigen::Index>(k);
  const auto N = static_cast<Eigen::Index>(node_count);

  std::vector<double> freq(node_count, 0.0);
  std::size_t positions = 0;
  for (const auto& w : walks) {
    for (auto v : w) freq.at(v) += 1.0;
    positions += w.size();
  }
  for (auto& f : freq) f = std::pow(f, 0.75);
  const bool have_tokens = positions > 0;
  AliasTable noise_table;
  if (have_tokens) noise_table = AliasTable(freq);
  auto noise = [&noise_table](Rng& r) { return static_cast<std::uint32_t>(noise_table.sample(r)); };

  Rng rng = make_rng(derive_seed(config.seed, 0x736b6970ULL));
  Matrix in(N, K), out = Matrix::Zero(N, K);
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(k), 0.5 / static_cast<double>(k));
  for (Eigen::Index r = 0; r < N; ++r)
    for (Eigen::Index c = 0; c < K; ++c) in(r, c) = init(rng);

  std::vector<ProbePair> probe;
  if (have_tokens) {
    Rng prng = make_rng(derive_seed(config.seed, 0x70726f6265ULL));
    std::uniform_int_distribution<std::size_t> pick_walk(0, walks.size() - 1);
    for (std::size_t s = 0, attempts = 0; s < 2000 && attempts < 20000; ++attempts) {
      const auto& w = walks[pick_walk(prng)];
      if (w.size() < 2) continue;
      std::uniform_int_distribution<std::size_t> pick_pos(0, w.size() - 1);
      const std::size_t i = pick_pos(prng);
      const std::size_t lo = i >= config.window ? i - config.window : 0;
      const std::size_t hi = std::min(w.size() - 1, i + config.window);
      std::uniform_int_distribution<std::size_t> pick_ctx(lo, hi);
      std::size_t j = pick_ctx(prng);
      if (j == i) continue;
      ProbePair pp{w[i], w[j], {}};
      for (std::size_t q = 0; q < config.negatives; ++q) pp.negatives.push_back(noise(prng));
      probe.push_back(std::move(pp));
      ++s;
    }
  }
  auto probe_loss = [&]() {
    if (probe.empty()) return 0.0;
    double total = 0.0;
    for (const auto& pp : probe) {
      total -= log_sigmoid(in.row(pp.center).dot(out.row(pp.context)));
      for (auto n : pp.negatives) total -= log_sigmoid(-in.row(pp.center).dot(out.row(n)));
    }
    return total / static_cast<double>(probe.size());
  };

  SkipGramResult result;
  std::vector<std::size_t> order(walks.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(k);
  const double total_positions = static_cast<double>(positions * config.epochs) + 1.0;
  std::size_t done = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && have_tokens; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (auto wi : order) {
      const auto& w = walks[wi];
      for (std::size_t i = 0; i < w.size(); ++i) {
        const double lr = config.lr * std::max(0.01, 1.0 - static_cast<double>(done++) / total_positions);
        double* center = in.row(w[i]).data();
        const std::size_t lo = i >= config.window ? i - config.window : 0;
        const std::size_t hi = std::min(w.size() - 1, i + config.window);
        for (std::size_t j = lo; j <= hi; ++j) {
          if (j == i) continue;
          std::fill(grad.begin(), grad.end(), 0.0);
          for (std::size_t qn = 0; qn <= config.negatives; ++qn) {
            std::uint32_t target = w[j];
            double label = 1.0;
            if (qn > 0) {
              target = noise(rng);
              if (target == w[j]) continue;
              label = 0.0;
            }
            double* ctx = out.row(target).data();
            double dot = 0.0;
            for (std::size_t c = 0; c < k; ++c) dot += center[c] * ctx[c];
            const double g = (label - 1.0 / (1.0 + std::exp(-dot))) * lr;
            for (std::size_t c = 0; c < k; ++c) {
              grad[c] += g * ctx[c];
              ctx[c] += g * center[c];
            }
          }
          for (std::size_t c = 0; c < k; ++c) center[c] += grad[c];
        }
      }
    }
    result.epoch_loss.push_back(probe_loss());
  }
  result.in = EmbeddingMatrix(std::move(in));
  result.out = EmbeddingMatrix(std::move(out));
  return result;
}

std::pair<EmbeddingMatrix, EmbeddingMatrix> split_embeddings(const EmbeddingMatrix& matrix, std::size_t m,
                                                             std::size_t n) {
  if (matrix.rows() != m + n)
    throw ShapeMismatch("embedding has " + std::to_string(matrix.rows()) + " rows, expected " + std::to_string(m + n));
  return {EmbeddingMatrix(matrix.data.topRows(static_cast<Eigen::Index>(m))),
          EmbeddingMatrix(matrix.data.bottomRows(static_cast<Eigen::Index>(n)))};
}

EntityEmbeddings embed_graph(const HetGraph& graph, const WalkConfig& config) {
  auto walks = generate_walks(graph, config);
  auto trained = train_skipgram(walks, graph.node_count(), config);
  auto [users, items] = split_embeddings(trained.in, graph.users(), graph.items());
  EntityEmbeddings emb;
  emb.users = std::move(users);
  emb.items = std::move(items);
  emb.user_present.assign(graph.users(), true);
  emb.item_present.assign(graph.items(), true);
  return emb;
}

}  // namespace gacdr
