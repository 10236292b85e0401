#include "gacdr/hetgraph.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "gacdr/error.hpp"
#include "gacdr/random.hpp"
#include "gacdr/text_util.hpp"
#include "gacdr/textembed.hpp"

namespace gacdr {

const char* to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::UI: return "UI";
    case EdgeKind::UU: return "UU";
    case EdgeKind::II: return "II";
  }
  return "?";
}

HetGraph::HetGraph(std::size_t users, std::size_t items) : users_(users), items_(items), adjacency_(users + items) {}

bool HetGraph::adjacent(std::uint32_t a, std::uint32_t b) const {
  const auto& adj = adjacency_.at(a);
  auto it = std::lower_bound(adj.begin(), adj.end(), b, [](const Edge& e, std::uint32_t v) { return e.neighbor < v; });
  return it != adj.end() && it->neighbor == b;
}

std::size_t HetGraph::edge_count() const {
  std::size_t total = 0;
  for (const auto& adj : adjacency_) total += adj.size();
  return total / 2;
}

void HetGraph::add_edge(std::uint32_t a, std::uint32_t b, double weight, EdgeKind kind) {
  if (a == b) throw Error("self-loop on node " + std::to_string(a));
  if (a >= adjacency_.size() || b >= adjacency_.size()) throw Error("edge endpoint out of range");
  if (!(weight > 0.0 && weight <= 1.0)) throw Error("edge weight " + std::to_string(weight) + " outside (0, 1]");
  adjacency_[a].push_back(Edge{b, weight, kind});
  adjacency_[b].push_back(Edge{a, weight, kind});
}

void HetGraph::finalize() {
  for (auto& adj : adjacency_) {
    std::sort(adj.begin(), adj.end(), [](const Edge& x, const Edge& y) { return x.neighbor < y.neighbor; });
    for (std::size_t i = 1; i < adj.size(); ++i)
      if (adj[i].neighbor == adj[i - 1].neighbor) throw Error("duplicate edge to node " + std::to_string(adj[i].neighbor));
  }
}

std::vector<SimilarityEdge> sample_similarity_edges(const Matrix& vectors, const std::vector<bool>& present,
                                                    const GraphConfig& config, Rng& rng) {
  std::vector<std::uint32_t> nodes;
  for (std::uint32_t i = 0; i < present.size(); ++i)
    if (present[i] && vectors.row(i).squaredNorm() > 0.0) nodes.push_back(i);

  std::vector<SimilarityEdge> edges;
  if (config.alpha <= 0.0 || nodes.size() < 2) return edges;

  auto trial = [&](std::uint32_t a, std::uint32_t b) {
    const double sim = normalized_sim(vectors.row(a), vectors.row(b));
    if (uniform01(rng) < config.alpha * sim) edges.push_back(SimilarityEdge{a, b, sim});
  };

  if (nodes.size() <= config.candidate_cap) {
    for (std::size_t x = 0; x < nodes.size(); ++x)
      for (std::size_t y = x + 1; y < nodes.size(); ++y) trial(nodes[x], nodes[y]);
    return edges;
  }

  // Above the cap each entity proposes its most similar neighbors; the union is tried once.
  std::set<std::pair<std::uint32_t, std::uint32_t>> candidates;
  std::vector<std::pair<double, std::uint32_t>> scored(nodes.size());
  const std::size_t keep = std::min(config.top_neighbors, nodes.size() - 1);
  for (auto a : nodes) {
    scored.clear();
    for (auto b : nodes)
      if (b != a) scored.emplace_back(normalized_sim(vectors.row(a), vectors.row(b)), b);
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(),
                      [](const auto& x, const auto& y) { return x.first > y.first || (x.first == y.first && x.second < y.second); });
    for (std::size_t t = 0; t < keep; ++t) candidates.emplace(std::min(a, scored[t].second), std::max(a, scored[t].second));
  }
  for (auto [a, b] : candidates) trial(a, b);
  return edges;
}

HetGraph build_graph(const Corpus& corpus, std::size_t dataset, const EntityEmbeddings& content,
                     const GraphConfig& config) {
  const Dataset& ds = corpus.dataset(dataset);
  const std::size_t m = ds.desc.users, n = ds.desc.items;
  HetGraph graph(m, n);
  for (const auto& x : ds.interactions) graph.add_edge(x.user, graph.item_node(x.item), x.rating / ds.desc.max_rating, EdgeKind::UI);

  if (config.alpha > 0.0) {
    if (content.users.rows() != m || content.items.rows() != n)
      throw ShapeMismatch("content embeddings do not match dataset " + ds.desc.name);
    const bool any = content.users.data.squaredNorm() > 0.0 || content.items.data.squaredNorm() > 0.0;
    if (!any && m + n > 0) throw MissingContent("dataset " + ds.desc.name + " has no nonzero content vectors");

    Rng rng = make_rng(derive_seed(config.seed, fnv1a(ds.desc.name), 0x6772617068ULL));
    for (const auto& e : sample_similarity_edges(content.users.data, content.user_present, config, rng))
      graph.add_edge(e.a, e.b, e.weight, EdgeKind::UU);
    for (const auto& e : sample_similarity_edges(content.items.data, content.item_present, config, rng))
      graph.add_edge(graph.item_node(e.a), graph.item_node(e.b), e.weight, EdgeKind::II);
  }
  graph.finalize();
  return graph;
}

std::map<EdgeKind, DegreeStats> degree_histogram(const HetGraph& graph) {
  std::map<EdgeKind, DegreeStats> out;
  for (EdgeKind kind : {EdgeKind::UI, EdgeKind::UU, EdgeKind::II}) {
    std::uint32_t first = 0, last = static_cast<std::uint32_t>(graph.node_count());
    if (kind == EdgeKind::UU) last = static_cast<std::uint32_t>(graph.users());
    if (kind == EdgeKind::II) first = static_cast<std::uint32_t>(graph.users());
    DegreeStats s;
    s.min_degree = last > first ? SIZE_MAX : 0;
    for (std::uint32_t v = first; v < last; ++v) {
      std::size_t deg = 0;
      for (const auto& e : graph.neighbors(v))
        if (e.kind == kind) ++deg;
      s.degree_sum += deg;
      s.min_degree = std::min(s.min_degree, deg);
      s.max_degree = std::max(s.max_degree, deg);
    }
    s.edges = s.degree_sum / 2;
    if (last > first) s.mean_degree = static_cast<double>(s.degree_sum) / static_cast<double>(last - first);
    out[kind] = s;
  }
  return out;
}

void write_graph(const std::filesystem::path& path, const HetGraph& graph) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << "#nodes " << graph.users() << ' ' << graph.items() << '\n';
  for (std::uint32_t v = 0; v < graph.node_count(); ++v)
    for (const auto& e : graph.neighbors(v))
      if (v < e.neighbor) out << v << '\t' << e.neighbor << '\t' << text::format_real(e.weight) << '\t' << to_string(e.kind) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

HetGraph read_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string file = path.string();
  std::string line;
  std::optional<HetGraph> graph;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    if (line.front() == '#') {
      auto f = text::split_ws(line.substr(1));
      if (f.size() == 3 && f[0] == "nodes") graph.emplace(std::stoul(f[1]), std::stoul(f[2]));
      continue;
    }
    if (!graph) throw MalformedLine(file, line_no, "edge before '#nodes m n' header");
    auto f = text::split(line, '\t');
    if (f.size() != 4) throw MalformedLine(file, line_no, "expected src<TAB>dst<TAB>weight<TAB>kind");
    EdgeKind kind;
    if (f[3] == "UI")
      kind = EdgeKind::UI;
    else if (f[3] == "UU")
      kind = EdgeKind::UU;
    else if (f[3] == "II")
      kind = EdgeKind::II;
    else
      throw MalformedLine(file, line_no, "unknown edge kind '" + f[3] + "'");
    try {
      graph->add_edge(static_cast<std::uint32_t>(std::stoul(f[0])), static_cast<std::uint32_t>(std::stoul(f[1])),
                      std::stod(f[2]), kind);
    } catch (const std::logic_error&) {
      throw MalformedLine(file, line_no, "bad number");
    } catch (const Error& e) {
      throw MalformedLine(file, line_no, e.what());
    }
  }
  if (!graph) throw MalformedLine(file, 1, "missing '#nodes m n' header");
  graph->finalize();
  return std::move(*graph);
}

}  // namespace gacdr
