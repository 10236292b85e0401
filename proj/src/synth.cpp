#include "gacdr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "gacdr/error.hpp"
#include "gacdr/random.hpp"
#include "gacdr/text_util.hpp"

namespace gacdr {

SynthConfig SynthConfig::dtcdr_default() {
  SynthConfig c;
  c.datasets = {SynthDataset{"rich", 300, 300, 0.05}, SynthDataset{"sparse", 300, 300, 0.01}};
  c.links = {SynthLink{0, 1, 0.6, 0.0}};
  return c;
}

void SynthConfig::validate() const {
  if (datasets.empty()) throw ConfigError("synth.datasets", "at least one dataset required");
  std::set<std::string> names;
  for (const auto& d : datasets) {
    if (d.name.empty() || !names.insert(d.name).second) throw ConfigError("synth.datasets", "names must be unique and non-empty");
    if (d.users == 0 || d.items == 0) throw ConfigError("synth.datasets." + d.name, "users and items must be positive");
    if (!(d.density > 0.0)) throw ConfigError("synth.datasets." + d.name + ".density", "must be in (0, 1]");
    const double cells = static_cast<double>(d.users) * static_cast<double>(d.items);
    const double target = std::round(d.density * cells);
    if (d.density > 1.0 || target > cells)
      throw InfeasibleDensity("dataset " + d.name + ": density " + text::format_real(d.density) + " exceeds 1");
    if (target < static_cast<double>(min_per_user * d.users) || min_per_user > d.items)
      throw InfeasibleDensity("dataset " + d.name + ": " + text::format_real(target) +
                              " interactions cannot give every user " + std::to_string(min_per_user));
  }
  for (const auto& l : links) {
    if (l.a >= datasets.size() || l.b >= datasets.size() || l.a == l.b)
      throw ConfigError("synth.links", "link must join two distinct declared datasets");
    if (!(l.user_fraction >= 0.0 && l.user_fraction <= 1.0) || !(l.item_fraction >= 0.0 && l.item_fraction <= 1.0))
      throw ConfigError("synth.links", "fractions must lie in [0, 1]");
  }
  if (latent_dim == 0 || clusters == 0) throw ConfigError("synth.latent_dim", "latent_dim and clusters must be positive");
  if (!(temperature >= 0.0) || !(noise_sigma >= 0.0) || !(cluster_spread >= 0.0))
    throw ConfigError("synth", "temperature, noise_sigma and cluster_spread must be >= 0");
  if (!(max_rating >= 1.0) || max_rating != std::floor(max_rating)) throw ConfigError("synth.max_rating", "must be an integer >= 1");
  if (vocab_size < clusters) throw ConfigError("synth.vocab_size", "must be at least the number of clusters");
  for (double s : {user_content_signal, item_content_signal})
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("synth.content_signal", "must lie in [0, 1]");
}

double SynthTruth::affinity(std::size_t dataset, const std::string& user, const std::string& item) const {
  return users.at(dataset).at(user).latent.dot(items.at(dataset).at(item).latent);
}

namespace {

constexpr std::uint64_t kLatentTag = 0x6c6174656e74ULL;
constexpr std::uint64_t kCenterTag = 0x63656e746572ULL;
constexpr std::uint64_t kDocTag = 0x646f63ULL;
constexpr std::uint64_t kRatingTag = 0x726174696e67ULL;

/// Global entity ids per dataset for one kind, with overlaps applied.
std::vector<std::vector<std::uint64_t>> assign_globals(const SynthConfig& c, EntityKind kind, std::uint64_t& next) {
  std::vector<std::vector<std::uint64_t>> ids(c.datasets.size());
  std::vector<std::vector<bool>> fresh(c.datasets.size());
  for (std::size_t d = 0; d < c.datasets.size(); ++d) {
    const auto count = kind == EntityKind::User ? c.datasets[d].users : c.datasets[d].items;
    for (std::size_t i = 0; i < count; ++i) ids[d].push_back(next++);
    fresh[d].assign(count, true);
  }
  for (const auto& l : c.links) {
    const double frac = kind == EntityKind::User ? l.user_fraction : l.item_fraction;
    const auto want = static_cast<std::size_t>(std::floor(frac * static_cast<double>(std::min(ids[l.a].size(), ids[l.b].size()))));
    std::set<std::uint64_t> in_b(ids[l.b].begin(), ids[l.b].end());
    std::size_t done = 0, slot = 0;
    for (std::size_t i = 0; i < ids[l.a].size() && done < want; ++i) {
      if (in_b.count(ids[l.a][i])) continue;
      while (slot < fresh[l.b].size() && !fresh[l.b][slot]) ++slot;
      if (slot == fresh[l.b].size()) break;
      ids[l.b][slot] = ids[l.a][i];
      fresh[l.b][slot] = false;
      in_b.insert(ids[l.a][i]);
      ++done;
    }
    if (done < want)
      throw ConfigError("synth.links", "cannot place " + std::to_string(want) + " shared " + to_string(kind) +
                                           "s between " + c.datasets[l.a].name + " and " + c.datasets[l.b].name);
  }
  return ids;
}

std::string raw_name(EntityKind kind, std::uint64_t global) {
  return (kind == EntityKind::User ? "u" : "i") + std::to_string(global);
}

std::string make_doc(const SynthConfig& c, std::uint32_t cluster, double signal, Rng& rng) {
  const std::size_t slice = c.vocab_size / c.clusters;
  std::uniform_int_distribution<std::size_t> in_slice(0, slice - 1), anywhere(0, c.vocab_size - 1);
  std::string doc;
  for (std::size_t t = 0; t < c.tokens_per_doc; ++t) {
    const std::size_t token = uniform01(rng) < signal ? cluster * slice + in_slice(rng) : anywhere(rng);
    if (t) doc += ' ';
    doc += "t" + std::to_string(token);
  }
  return doc;
}

}  // namespace

SynthData generate_data(const SynthConfig& config) {
  config.validate();
  const auto L = static_cast<Eigen::Index>(config.latent_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.latent_dim));
  SynthData data;
  data.config = config;
  const std::size_t nd = config.datasets.size();

  Matrix centers(static_cast<Eigen::Index>(config.clusters), L);
  {
    Rng rng = make_rng(derive_seed(config.seed, kCenterTag));
    std::normal_distribution<double> g(0.0, 1.0);
    for (Eigen::Index r = 0; r < centers.rows(); ++r)
      for (Eigen::Index c = 0; c < L; ++c) centers(r, c) = g(rng);
  }
  auto truth_of = [&](EntityKind kind, std::uint64_t global) {
    Rng rng = make_rng(derive_seed(config.seed, kLatentTag, static_cast<std::uint64_t>(kind), global));
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(config.clusters - 1));
    std::normal_distribution<double> g(0.0, config.cluster_spread);
    EntityTruth t;
    t.cluster = pick(rng);
    t.latent = centers.row(t.cluster);
    for (Eigen::Index c = 0; c < L; ++c) t.latent[c] += g(rng);
    return t;
  };

  std::uint64_t next = 0;
  auto user_ids = assign_globals(config, EntityKind::User, next);
  next = 0;
  auto item_ids = assign_globals(config, EntityKind::Item, next);

  data.truth.users.resize(nd);
  data.truth.items.resize(nd);
  data.ratings.resize(nd);
  data.user_docs.resize(nd);
  data.item_docs.resize(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    const auto& shape = config.datasets[d];
    const std::uint64_t dtag = fnv1a(shape.name);
    std::vector<EntityTruth> ut, it;
    for (auto g : user_ids[d]) ut.push_back(truth_of(EntityKind::User, g));
    for (auto g : item_ids[d]) it.push_back(truth_of(EntityKind::Item, g));
    for (std::size_t u = 0; u < ut.size(); ++u) data.truth.users[d][raw_name(EntityKind::User, user_ids[d][u])] = ut[u];
    for (std::size_t j = 0; j < it.size(); ++j) data.truth.items[d][raw_name(EntityKind::Item, item_ids[d][j])] = it[j];

    Rng rng = make_rng(derive_seed(config.seed, kRatingTag, dtag));
    const std::size_t m = shape.users, n = shape.items;
    const auto total = static_cast<std::size_t>(std::round(shape.density * static_cast<double>(m) * static_cast<double>(n)));
    std::vector<std::size_t> counts(m, config.min_per_user);
    {
      std::lognormal_distribution<double> activity(0.0, 0.5);
      std::vector<double> w(m);
      for (auto& x : w) x = activity(rng);
      std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
      for (std::size_t extra = total - config.min_per_user * m; extra > 0;) {
        const auto u = pick(rng);
        if (counts[u] >= n) continue;
        ++counts[u];
        --extra;
      }
    }

    struct Chosen {
      std::uint32_t u, j;
      double affinity;
    };
    std::vector<Chosen> chosen;
    std::extreme_value_distribution<double> gumbel(0.0, 1.0);
    std::vector<std::pair<double, std::uint32_t>> utility(n);
    for (std::size_t u = 0; u < m; ++u) {
      for (std::uint32_t j = 0; j < n; ++j) {
        const double a = ut[u].latent.dot(it[j].latent) * scale;
        utility[j] = {a + config.temperature * gumbel(rng), j};
      }
      std::partial_sort(utility.begin(), utility.begin() + static_cast<std::ptrdiff_t>(counts[u]), utility.end(),
                        [](const auto& x, const auto& y) { return x.first > y.first || (x.first == y.first && x.second < y.second); });
      for (std::size_t c = 0; c < counts[u]; ++c) {
        const auto j = utility[c].second;
        chosen.push_back({static_cast<std::uint32_t>(u), j, ut[u].latent.dot(it[j].latent) * scale});
      }
    }
    double mean = 0.0, var = 0.0;
    for (const auto& c : chosen) mean += c.affinity;
    mean /= static_cast<double>(chosen.size());
    for (const auto& c : chosen) var += (c.affinity - mean) * (c.affinity - mean);
    const double sd = std::sqrt(var / static_cast<double>(chosen.size())) + 1e-12;
    std::shuffle(chosen.begin(), chosen.end(), rng);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double mid = (1.0 + config.max_rating) / 2.0;
    for (std::size_t t = 0; t < chosen.size(); ++t) {
      const auto& c = chosen[t];
      const double raw = mid + 1.2 * (c.affinity - mean) / sd + config.noise_sigma * noise(rng);
      const double rating = std::clamp(std::round(raw), 1.0, config.max_rating);
      data.ratings[d].push_back(SynthRating{raw_name(EntityKind::User, user_ids[d][c.u]),
                                            raw_name(EntityKind::Item, item_ids[d][c.j]), rating,
                                            static_cast<std::int64_t>(t + 1)});
    }

    for (std::size_t u = 0; u < m; ++u) {
      Rng drng = make_rng(derive_seed(config.seed, kDocTag, dtag, 0, u));
      data.user_docs[d][raw_name(EntityKind::User, user_ids[d][u])] = make_doc(config, ut[u].cluster, config.user_content_signal, drng);
    }
    for (std::size_t j = 0; j < n; ++j) {
      Rng drng = make_rng(derive_seed(config.seed, kDocTag, dtag, 1, j));
      data.item_docs[d][raw_name(EntityKind::Item, item_ids[d][j])] = make_doc(config, it[j].cluster, config.item_content_signal, drng);
    }
  }

  for (const auto& l : config.links) {
    for (EntityKind kind : {EntityKind::User, EntityKind::Item}) {
      const auto& ids = kind == EntityKind::User ? user_ids : item_ids;
      std::set<std::uint64_t> in_a(ids[l.a].begin(), ids[l.a].end());
      for (auto g : ids[l.b])
        if (in_a.count(g)) data.alignment.emplace_back(kind, l.a, raw_name(kind, g), l.b, raw_name(kind, g));
    }
  }
  return data;
}

namespace {

void write_truth(const std::filesystem::path& path, const std::map<std::string, EntityTruth>& truth) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& [raw, t] : truth) {
    out << raw << '\t' << t.cluster << '\t';
    for (Eigen::Index c = 0; c < t.latent.size(); ++c) out << (c ? " " : "") << text::format_real(t.latent[c]);
    out << '\n';
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::map<std::string, EntityTruth> read_truth_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("truth", path.string());
  std::map<std::string, EntityTruth> out;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    if (line.empty()) continue;
    auto f = text::split(line, '\t');
    if (f.size() != 3) throw MalformedLine(path.string(), line_no, "expected raw_id<TAB>cluster<TAB>latent");
    auto values = text::split_ws(f[2]);
    EntityTruth t;
    try {
      t.cluster = static_cast<std::uint32_t>(std::stoul(f[1]));
      t.latent.resize(static_cast<Eigen::Index>(values.size()));
      for (std::size_t c = 0; c < values.size(); ++c) t.latent[static_cast<Eigen::Index>(c)] = std::stod(values[c]);
    } catch (const std::exception&) {
      throw MalformedLine(path.string(), line_no, "bad number");
    }
    out[f[0]] = std::move(t);
  }
  return out;
}

}  // namespace

std::filesystem::path write_synth(const SynthData& data, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "truth");
  const auto& cfg = data.config;
  std::ofstream manifest(dir / "corpus.manifest");
  if (!manifest) throw Error("cannot write " + (dir / "corpus.manifest").string());
  for (std::size_t d = 0; d < cfg.datasets.size(); ++d) {
    const auto& name = cfg.datasets[d].name;
    manifest << "dataset = " << name << '\n'
             << name << ".ratings = " << name << ".ratings.tsv\n"
             << name << ".content = " << name << ".content.tsv\n"
             << name << ".max_rating = " << text::format_real(cfg.max_rating) << '\n';
    std::ofstream ratings(dir / (name + ".ratings.tsv"));
    for (const auto& r : data.ratings[d])
      ratings << r.user << '\t' << r.item << '\t' << text::format_real(r.rating) << '\t' << r.timestamp << '\n';
    std::ofstream content(dir / (name + ".content.tsv"));
    for (const auto& [raw, doc] : data.user_docs[d]) content << "user\t" << raw << '\t' << doc << '\n';
    for (const auto& [raw, doc] : data.item_docs[d]) content << "item\t" << raw << '\t' << doc << '\n';
    if (!ratings || !content) throw Error("failed writing dataset files for " + name);
    write_truth(dir / "truth" / (name + ".users.tsv"), data.truth.users[d]);
    write_truth(dir / "truth" / (name + ".items.tsv"), data.truth.items[d]);
  }
  manifest << "alignment = alignment.tsv\n";
  std::ofstream align(dir / "alignment.tsv");
  for (const auto& [kind, a, ra, b, rb] : data.alignment)
    align << to_string(kind) << '\t' << cfg.datasets[a].name << '\t' << ra << '\t' << cfg.datasets[b].name << '\t' << rb
          << '\n';
  if (!manifest || !align) throw Error("failed writing " + dir.string());
  return dir / "corpus.manifest";
}

std::filesystem::path generate(const SynthConfig& config, const std::filesystem::path& dir) {
  return write_synth(generate_data(config), dir);
}

SynthTruth read_truth(const std::filesystem::path& dir, const std::vector<std::string>& dataset_names) {
  SynthTruth t;
  for (const auto& name : dataset_names) {
    t.users.push_back(read_truth_file(dir / "truth" / (name + ".users.tsv")));
    t.items.push_back(read_truth_file(dir / "truth" / (name + ".items.tsv")));
  }
  return t;
}

SynthStats describe(const SynthData& data) {
  SynthStats s;
  const auto nd = data.config.datasets.size();
  std::vector<std::set<std::string>> users(nd), items(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    std::set<std::pair<std::string, std::string>> cells;
    for (const auto& r : data.ratings[d]) {
      users[d].insert(r.user);
      items[d].insert(r.item);
      cells.emplace(r.user, r.item);
    }
    MatrixStats m;
    m.users = users[d].size();
    m.items = items[d].size();
    m.interactions = cells.size();
    const double c = static_cast<double>(m.users) * static_cast<double>(m.items);
    m.density = c > 0 ? static_cast<double>(m.interactions) / c : 0.0;
    s.datasets.push_back(m);
  }
  // Shared raw ids are the same string in every dataset, so overlap is a set intersection
  // restricted to entities some alignment line connects.
  std::set<std::string> aligned_users, aligned_items;
  for (const auto& [kind, a, ra, b, rb] : data.alignment) (kind == EntityKind::User ? aligned_users : aligned_items).insert(ra);
  for (std::size_t a = 0; a < nd; ++a)
    for (std::size_t b = a + 1; b < nd; ++b) {
      std::size_t cu = 0, ci = 0;
      for (const auto& u : users[a]) cu += users[b].count(u) && aligned_users.count(u);
      for (const auto& i : items[a]) ci += items[b].count(i) && aligned_items.count(i);
      if (cu || ci) s.overlaps[{a, b}] = {cu, ci};
    }
  return s;
}

SynthStats describe(const Corpus& corpus) {
  SynthStats s;
  for (std::size_t d = 0; d < corpus.dataset_count(); ++d) s.datasets.push_back(interaction_matrix_stats(corpus, d));
  for (std::size_t a = 0; a < corpus.dataset_count(); ++a)
    for (std::size_t b = a + 1; b < corpus.dataset_count(); ++b) {
      const auto cu = common_entities(corpus, a, b, EntityKind::User).size();
      const auto ci = common_entities(corpus, a, b, EntityKind::Item).size();
      if (cu || ci) s.overlaps[{a, b}] = {cu, ci};
    }
  return s;
}

std::string format_stats(const SynthStats& stats, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "dataset\tusers\titems\tinteractions\tdensity\n";
  for (std::size_t d = 0; d < stats.datasets.size(); ++d) {
    const auto& m = stats.datasets[d];
    out << names.at(d) << '\t' << m.users << '\t' << m.items << '\t' << m.interactions << '\t'
        << text::format_real(m.density) << '\n';
  }
  out << "pair\tcommon_users\tcommon_items\n";
  for (const auto& [pair, counts] : stats.overlaps)
    out << names.at(pair.first) << '-' << names.at(pair.second) << '\t' << counts.first << '\t' << counts.second << '\n';
  return out.str();
}

}  // namespace gacdr
