#include "gacdr/pipeline.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/spdlog.h>

#include "gacdr/error.hpp"
#include "gacdr/random.hpp"
#include "gacdr/text_util.hpp"
#include "json.hpp"

namespace gacdr {

namespace fs = std::filesystem;
using json = nlohmann::json;

const char* to_string(Scenario scenario) {
  switch (scenario) {
    case Scenario::Single: return "single";
    case Scenario::Dtcdr: return "dtcdr";
    case Scenario::Mtcdr: return "mtcdr";
    case Scenario::CdrCsr: return "cdr+csr";
  }
  return "?";
}

Scenario parse_scenario(const std::string& text) {
  if (text == "single") return Scenario::Single;
  if (text == "dtcdr") return Scenario::Dtcdr;
  if (text == "mtcdr") return Scenario::Mtcdr;
  if (text == "cdr+csr") return Scenario::CdrCsr;
  throw ConfigError("scenario", "expected single, dtcdr, mtcdr or cdr+csr, got '" + text + "'");
}

namespace {

/// Reads the keys of one JSON object and rejects any it was not asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    used_.insert(key);
    const json& v = j_.at(key);
    const std::string where = qualify(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where, "expected true or false");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!v.is_number_unsigned()) throw ConfigError(where, "expected a non-negative integer");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where, "expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where, "expected a string");
    }
    out = v.get<T>();
  }

  bool has(const char* key) const { return j_.contains(key); }

  Section sub(const char* key) {
    used_.insert(key);
    return Section(j_.at(key), qualify(key));
  }

  const json& raw(const char* key) {
    used_.insert(key);
    return j_.at(key);
  }

  std::string qualify(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items())
      if (!used_.count(key)) throw ConfigError(qualify(key), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

enum : std::uint64_t { kTextSeed = 1, kGraphSeed, kWalkSeed, kModelSeed, kTrainSeed, kSplitSeed, kSynthSeed };

SynthConfig parse_synth(Section s) {
  SynthConfig c;
  if (s.has("datasets")) {
    const json& list = s.raw("datasets");
    if (!list.is_array()) throw ConfigError("synth.datasets", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section d(list[i], "synth.datasets[" + std::to_string(i) + "]");
      SynthDataset ds;
      d.get("name", ds.name);
      d.get("users", ds.users);
      d.get("items", ds.items);
      d.get("density", ds.density);
      d.finish();
      c.datasets.push_back(ds);
    }
  }
  if (s.has("links")) {
    const json& list = s.raw("links");
    if (!list.is_array()) throw ConfigError("synth.links", "expected a list");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section l(list[i], "synth.links[" + std::to_string(i) + "]");
      std::string a, b;
      SynthLink link;
      l.get("a", a);
      l.get("b", b);
      l.get("user_fraction", link.user_fraction);
      l.get("item_fraction", link.item_fraction);
      l.finish();
      auto find = [&](const std::string& name) {
        for (std::size_t d = 0; d < c.datasets.size(); ++d)
          if (c.datasets[d].name == name) return d;
        throw ConfigError("synth.links[" + std::to_string(i) + "]", "undeclared dataset '" + name + "'");
      };
      link.a = find(a);
      link.b = find(b);
      c.links.push_back(link);
    }
  }
  s.get("latent_dim", c.latent_dim);
  s.get("clusters", c.clusters);
  s.get("cluster_spread", c.cluster_spread);
  s.get("temperature", c.temperature);
  s.get("noise_sigma", c.noise_sigma);
  s.get("max_rating", c.max_rating);
  s.get("min_per_user", c.min_per_user);
  s.get("vocab_size", c.vocab_size);
  s.get("tokens_per_doc", c.tokens_per_doc);
  s.get("user_content_signal", c.user_content_signal);
  s.get("item_content_signal", c.item_content_signal);
  s.get("seed", c.seed);
  s.finish();
  return c;
}

json synth_json(const SynthConfig& c) {
  json ds = json::array(), links = json::array();
  for (const auto& d : c.datasets) ds.push_back({{"name", d.name}, {"users", d.users}, {"items", d.items}, {"density", d.density}});
  for (const auto& l : c.links)
    links.push_back({{"a", c.datasets.at(l.a).name},
                     {"b", c.datasets.at(l.b).name},
                     {"user_fraction", l.user_fraction},
                     {"item_fraction", l.item_fraction}});
  return {{"datasets", ds},
          {"links", links},
          {"latent_dim", c.latent_dim},
          {"clusters", c.clusters},
          {"cluster_spread", c.cluster_spread},
          {"temperature", c.temperature},
          {"noise_sigma", c.noise_sigma},
          {"max_rating", c.max_rating},
          {"min_per_user", c.min_per_user},
          {"vocab_size", c.vocab_size},
          {"tokens_per_doc", c.tokens_per_doc},
          {"user_content_signal", c.user_content_signal},
          {"item_content_signal", c.item_content_signal},
          {"seed", c.seed}};
}

}  // namespace

void RunConfig::set_seed(std::uint64_t s) {
  seed = s;
  text.seed = derive_seed(s, kTextSeed);
  graph.seed = derive_seed(s, kGraphSeed);
  walk.seed = derive_seed(s, kWalkSeed);
  model.seed = derive_seed(s, kModelSeed);
  train.seed = derive_seed(s, kTrainSeed);
}

RunConfig RunConfig::parse(const std::string& json_text, const fs::path& base_dir) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON: ") + e.what());
  }
  RunConfig c;
  Section s(root, "");
  s.get("name", c.name);
  std::uint64_t seed = 1;
  s.get("seed", seed);
  c.set_seed(seed);
  std::string scenario = to_string(c.scenario);
  s.get("scenario", scenario);
  c.scenario = parse_scenario(scenario);

  if (s.has("corpus")) {
    auto sec = s.sub("corpus");
    std::string manifest;
    sec.get("manifest", manifest);
    if (!manifest.empty()) {
      fs::path p(manifest);
      c.corpus_manifest = p.is_absolute() ? p : base_dir / p;
    }
    sec.get("min_interactions_per_user", c.load_options.min_interactions_per_user);
    sec.finish();
  }
  bool synth_seed_given = false;
  if (s.has("synth")) {
    synth_seed_given = root.at("synth").contains("seed");
    c.synth = parse_synth(s.sub("synth"));
  }
  if (c.synth && !synth_seed_given) c.synth->seed = derive_seed(seed, kSynthSeed);
  bool text_dim_given = false;
  if (s.has("text")) {
    auto sec = s.sub("text");
    text_dim_given = sec.has("dim");
    sec.get("dim", c.text.dim);
    sec.get("epochs", c.text.epochs);
    sec.get("negatives", c.text.negatives);
    sec.get("lr", c.text.lr);
    sec.get("seed", c.text.seed);
    sec.finish();
  }
  if (s.has("graph")) {
    auto sec = s.sub("graph");
    sec.get("alpha", c.graph.alpha);
    sec.get("candidate_cap", c.graph.candidate_cap);
    sec.get("top_neighbors", c.graph.top_neighbors);
    sec.get("seed", c.graph.seed);
    sec.finish();
  }
  std::optional<std::size_t> walk_dim;
  if (s.has("walk")) {
    auto sec = s.sub("walk");
    sec.get("p", c.walk.p);
    sec.get("q", c.walk.q);
    sec.get("walks_per_node", c.walk.walks_per_node);
    sec.get("walk_length", c.walk.walk_length);
    sec.get("window", c.walk.window);
    sec.get("negatives", c.walk.negatives);
    sec.get("epochs", c.walk.epochs);
    sec.get("lr", c.walk.lr);
    sec.get("alias_budget", c.walk.alias_budget);
    sec.get("seed", c.walk.seed);
    if (sec.has("dim")) {
      std::size_t dim = 0;
      sec.get("dim", dim);
      walk_dim = dim;
    }
    sec.finish();
  }
  if (s.has("model")) {
    auto sec = s.sub("model");
    sec.get("k", c.model.k);
    std::string structure = c.model.structure.to_string(), fusion = to_string(c.model.fusion);
    sec.get("structure", structure);
    try {
      c.model.structure = TowerStructure::parse(structure);
    } catch (const BadStructure& e) {
      throw ConfigError("model.structure", e.what());
    }
    sec.get("fusion", fusion);
    c.model.fusion = parse_fusion_mode(fusion);
    sec.get("share", c.model.share);
    sec.get("init_sigma", c.model.init_sigma);
    sec.get("seed", c.model.seed);
    sec.finish();
  }
  if (s.has("train")) {
    auto sec = s.sub("train");
    std::string objective = to_string(c.train.objective), reg_target = to_string(c.train.reg_target);
    sec.get("objective", objective);
    c.train.objective = parse_objective(objective);
    sec.get("negatives_per_positive", c.train.negatives_per_positive);
    sec.get("batch_size", c.train.batch_size);
    sec.get("epochs", c.train.epochs);
    sec.get("lr", c.train.lr);
    sec.get("reg_lambda", c.train.reg_lambda);
    sec.get("theta", c.train.theta);
    sec.get("finetune_base", c.train.finetune_base);
    sec.get("reg_target", reg_target);
    c.train.reg_target = parse_reg_target(reg_target);
    sec.get("penalty_sample", c.train.penalty_sample);
    sec.get("seed", c.train.seed);
    sec.finish();
  }
  if (s.has("eval")) {
    auto sec = s.sub("eval");
    sec.get("candidates", c.eval_candidates);
    sec.finish();
  }
  s.finish();
  if (walk_dim && *walk_dim != c.model.k) throw ConfigError("walk.dim", "must equal model.k");
  c.walk.dim = c.model.k;
  if (!text_dim_given) c.text.dim = c.model.k;
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.parent_path());
}

void RunConfig::validate() const {
  if (name.empty() || name.find('/') != std::string::npos || name == "." || name == "..")
    throw ConfigError("name", "must be a plain directory name");
  if (!corpus_manifest && !synth) throw ConfigError("corpus.manifest", "either a corpus manifest or a synth section is required");
  if (synth) synth->validate();
  if (text.dim == 0 || text.epochs == 0 || text.negatives == 0 || !(text.lr > 0.0))
    throw ConfigError("text", "dim, epochs, negatives and lr must be positive");
  if (!(graph.alpha >= 0.0 && graph.alpha <= 1.0)) throw ConfigError("graph.alpha", "must lie in [0, 1]");
  walk.validate();
  if (model.k == 0) throw ConfigError("model.k", "must be positive");
  if (!(model.init_sigma > 0.0)) throw ConfigError("model.init_sigma", "must be positive");
  train.validate();
  if (eval_candidates == 0) throw ConfigError("eval.candidates", "must be positive");
}

std::string RunConfig::to_json() const {
  json j = {
      {"name", name},
      {"seed", seed},
      {"scenario", to_string(scenario)},
      {"corpus", {{"manifest", corpus_manifest ? corpus_manifest->generic_string() : std::string()},
                  {"min_interactions_per_user", load_options.min_interactions_per_user}}},
      {"text", {{"dim", text.dim}, {"epochs", text.epochs}, {"negatives", text.negatives}, {"lr", text.lr}, {"seed", text.seed}}},
      {"graph", {{"alpha", graph.alpha}, {"candidate_cap", graph.candidate_cap}, {"top_neighbors", graph.top_neighbors}, {"seed", graph.seed}}},
      {"walk", {{"p", walk.p}, {"q", walk.q}, {"walks_per_node", walk.walks_per_node}, {"walk_length", walk.walk_length},
                {"window", walk.window}, {"negatives", walk.negatives}, {"epochs", walk.epochs}, {"lr", walk.lr},
                {"alias_budget", walk.alias_budget}, {"dim", walk.dim}, {"seed", walk.seed}}},
      {"model", {{"k", model.k}, {"structure", model.structure.to_string()}, {"fusion", to_string(model.fusion)},
                 {"share", model.share}, {"init_sigma", model.init_sigma}, {"seed", model.seed}}},
      {"train", {{"objective", to_string(train.objective)}, {"negatives_per_positive", train.negatives_per_positive},
                 {"batch_size", train.batch_size}, {"epochs", train.epochs}, {"lr", train.lr}, {"reg_lambda", train.reg_lambda},
                 {"theta", train.theta}, {"finetune_base", train.finetune_base}, {"reg_target", to_string(train.reg_target)},
                 {"penalty_sample", train.penalty_sample}, {"seed", train.seed}}},
      {"eval", {{"candidates", eval_candidates}}},
  };
  if (synth) j["synth"] = synth_json(*synth);
  return j.dump(2) + "\n";
}

void check_scenario(Scenario scenario, const Corpus& corpus) {
  const auto nd = corpus.dataset_count();
  const bool users = !corpus.alignment().user_links().empty();
  const bool items = !corpus.alignment().item_links().empty();
  const std::string name = to_string(scenario);
  switch (scenario) {
    case Scenario::Single:
      if (nd != 1) throw ValidationError("scenario single needs exactly 1 dataset, corpus has " + std::to_string(nd));
      break;
    case Scenario::Dtcdr:
      if (nd != 2) throw ValidationError("scenario dtcdr needs exactly 2 datasets, corpus has " + std::to_string(nd));
      if (!users) throw ValidationError("scenario dtcdr needs common users between the two datasets");
      break;
    case Scenario::Mtcdr:
      if (nd < 3) throw ValidationError("scenario mtcdr needs at least 3 datasets, corpus has " + std::to_string(nd));
      if (!users) throw ValidationError("scenario mtcdr needs common users");
      break;
    case Scenario::CdrCsr:
      if (nd < 3) throw ValidationError("scenario cdr+csr needs at least 3 datasets, corpus has " + std::to_string(nd));
      if (!users || !items) throw ValidationError("scenario cdr+csr needs both common users and common items");
      break;
  }
}

// ---------------------------------------------------------------------------------------------

namespace {

std::uint64_t dataset_seed(std::uint64_t seed, const std::string& name) { return derive_seed(seed, fnv1a(name)); }

/// The precision embedding files keep, so in-memory and file-backed runs agree.
void round_to_file_precision(EntityEmbeddings& e) {
  e.users.data = e.users.data.cast<float>().cast<double>();
  e.items.data = e.items.data.cast<float>().cast<double>();
}

}  // namespace

Prepared prepare(const Corpus& full, const RunConfig& config) {
  Prepared p{full, {}, full, {}, {}, {}};
  for (std::size_t d = 0; d < full.dataset_count(); ++d) {
    p.splits.push_back(make_split(full, d, derive_seed(config.seed, kSplitSeed), config.eval_candidates));
    p.train = p.train.with_interactions(d, p.splits.back().train);
  }
  for (std::size_t d = 0; d < full.dataset_count(); ++d) {
    const auto& name = full.dataset(d).desc.name;
    PvDbowConfig text = config.text;
    text.seed = dataset_seed(text.seed, name);
    auto content = train_pvdbow(full, d, text);
    round_to_file_precision(content);
    p.graphs.push_back(build_graph(p.train, d, content, config.graph));
    p.content.push_back(std::move(content));
    WalkConfig walk = config.walk;
    walk.seed = dataset_seed(walk.seed, name);
    auto emb = embed_graph(p.graphs.back(), walk);
    round_to_file_precision(emb);
    p.graph_embeddings.push_back(std::move(emb));
  }
  return p;
}

std::vector<DatasetReport> evaluate_model(const GaModel& model, const Corpus& full, const std::vector<EvalSplit>& splits) {
  const auto outputs = ModelOutputs::of(model);
  std::vector<DatasetReport> reports;
  for (const auto& split : splits) {
    const auto d = split.dataset;
    reports.push_back(evaluate([&](std::uint32_t u, std::uint32_t i) { return outputs.score(d, u, i); }, split,
                               full.dataset(d).desc.name));
  }
  return reports;
}

Outcome train_and_evaluate(const Prepared& prepared, const ModelConfig& model_config, const TrainConfig& train_config,
                           const StepCallback& on_step) {
  Outcome out{GaModel::create(prepared.train, prepared.graph_embeddings, model_config), {}, {}};
  out.trace = train_loop(prepared.train, out.model, train_config, on_step);
  out.reports = evaluate_model(out.model, prepared.full, prepared.splits);
  return out;
}

// ---------------------------------------------------------------------------------------------

Run::Run(RunConfig config, fs::path dir) : config_(std::move(config)), dir_(std::move(dir)) {
  config_.walk.dim = config_.model.k;
  config_.validate();
}

fs::path Run::corpus_manifest() const {
  return config_.corpus_manifest ? *config_.corpus_manifest : dir_ / "data" / "corpus.manifest";
}

fs::path Run::require(const std::string& stage, const fs::path& path) const {
  if (!fs::exists(path)) throw MissingArtifact(stage, path.string());
  return path;
}

Corpus Run::load_full(const std::string& stage) const {
  if (!config_.corpus_manifest) require(stage, corpus_manifest());
  return load_corpus(corpus_manifest(), config_.load_options);
}

Corpus Run::load_train(const Corpus& full, std::vector<EvalSplit>* splits) const {
  Corpus train = full;
  for (std::size_t d = 0; d < full.dataset_count(); ++d) {
    auto split = read_split(dir_ / "split" / (full.dataset(d).desc.name + ".test.tsv"), full, d);
    train = train.with_interactions(d, split.train);
    if (splits) splits->push_back(std::move(split));
  }
  return train;
}

void Run::record(const std::string& stage) {
  fs::create_directories(dir_);
  const std::string snapshot = config_.to_json();
  {
    std::ofstream out(dir_ / "config.snapshot", std::ios::binary);
    out << snapshot;
  }
  std::map<std::string, std::string> entries;
  {
    std::ifstream in(dir_ / "manifest");
    std::string line;
    while (std::getline(in, line)) {
      auto eq = line.find(" = ");
      if (eq != std::string::npos && line.rfind("stage.", 0) == 0) entries[line.substr(0, eq)] = line.substr(eq + 3);
    }
  }
  entries["stage." + stage] = "done";
  std::ostringstream hash;
  hash << std::hex << fnv1a(snapshot);
  std::ofstream out(dir_ / "manifest", std::ios::binary);
  out << "name = " << config_.name << '\n'
      << "seed = " << config_.seed << '\n'
      << "config_hash = " << hash.str() << '\n'
      << "corpus = " << corpus_manifest().generic_string() << '\n';
  for (const auto& [key, value] : entries) out << key << " = " << value << '\n';
  if (!out) throw Error("failed writing " + (dir_ / "manifest").string());
}

void Run::synth() {
  if (!config_.synth) throw ConfigError("synth", "the config has no synth section");
  auto data = generate_data(*config_.synth);
  write_synth(data, dir_ / "data");
  std::vector<std::string> names;
  for (const auto& d : config_.synth->datasets) names.push_back(d.name);
  std::ofstream(dir_ / "data" / "stats.tsv", std::ios::binary) << format_stats(describe(data), names);
  record("synth");
}

void Run::ingest() {
  require("ingest", corpus_manifest());
  Corpus full = load_full("ingest");
  check_scenario(config_.scenario, full);
  fs::create_directories(dir_ / "split");
  std::vector<std::string> names;
  for (std::size_t d = 0; d < full.dataset_count(); ++d) {
    names.push_back(full.dataset(d).desc.name);
    auto split = make_split(full, d, derive_seed(config_.seed, kSplitSeed), config_.eval_candidates);
    write_split(dir_ / "split" / (names.back() + ".test.tsv"), full, split);
  }
  std::ofstream(dir_ / "split" / "stats.tsv", std::ios::binary) << format_stats(describe(full), names);
  record("ingest");
}

void Run::embed_text() {
  require("embed-text", corpus_manifest());
  Corpus full = load_full("embed-text");
  fs::create_directories(dir_ / "embeddings");
  for (std::size_t d = 0; d < full.dataset_count(); ++d) {
    const auto& ds = full.dataset(d);
    PvDbowConfig text = config_.text;
    text.seed = dataset_seed(text.seed, ds.desc.name);
    write_embedding_file(dir_ / "embeddings" / (ds.desc.name + ".content.tsv"), ds, train_pvdbow(full, d, text), true);
  }
  record("embed-text");
}

void Run::build_graph() {
  Corpus full = load_full("build-graph");
  for (std::size_t d = 0; d < full.dataset_count(); ++d)
    require("build-graph", dir_ / "split" / (full.dataset(d).desc.name + ".test.tsv"));
  Corpus train = load_train(full, nullptr);
  fs::create_directories(dir_ / "graphs");
  for (std::size_t d = 0; d < full.dataset_count(); ++d) {
    const auto& name = full.dataset(d).desc.name;
    auto content = read_embedding_file(require("build-graph", dir_ / "embeddings" / (name + ".content.tsv")), train.dataset(d));
    write_graph(dir_ / "graphs" / (name + ".graph.tsv"), gacdr::build_graph(train, d, content, config_.graph));
  }
  record("build-graph");
}

void Run::embed_graph() {
  Corpus full = load_full("embed-graph");
  for (std::size_t d = 0; d < full.dataset_count(); ++d) {
    const auto& ds = full.dataset(d);
    HetGraph graph = read_graph(require("embed-graph", dir_ / "graphs" / (ds.desc.name + ".graph.tsv")));
    if (graph.users() != ds.desc.users || graph.items() != ds.desc.items)
      throw ValidationError("graph of " + ds.desc.name + " does not match the corpus");
    WalkConfig walk = config_.walk;
    walk.seed = dataset_seed(walk.seed, ds.desc.name);
    fs::create_directories(dir_ / "embeddings");
    write_embedding_file(dir_ / "embeddings" / (ds.desc.name + ".graph.tsv"), ds, gacdr::embed_graph(graph, walk), true);
  }
  record("embed-graph");
}

void Run::train() {
  Corpus full = load_full("train");
  std::vector<EntityEmbeddings> base;
  for (std::size_t d = 0; d < full.dataset_count(); ++d) {
    const auto& name = full.dataset(d).desc.name;
    require("train", dir_ / "split" / (name + ".test.tsv"));
    base.push_back(read_embedding_file(require("train", dir_ / "embeddings" / (name + ".graph.tsv")), full.dataset(d)));
  }
  Corpus train = load_train(full, nullptr);
  GaModel model = GaModel::create(train, base, config_.model);
  auto trace = train_loop(train, model, config_.train);
  save_checkpoint(dir_ / "model.ckpt", model);
  write_trace_csv(dir_ / "trace.csv", model, trace);
  write_attention_weights(dir_ / "attention.tsv", train, model.groups(), model.attention(), model.fusion());
  record("train");
}

void Run::eval() {
  Corpus full = load_full("eval");
  const auto ckpt = require("eval", dir_ / "model.ckpt");
  for (std::size_t d = 0; d < full.dataset_count(); ++d)
    require("eval", dir_ / "split" / (full.dataset(d).desc.name + ".test.tsv"));
  std::vector<EvalSplit> splits;
  load_train(full, &splits);
  GaModel model = load_checkpoint(ckpt);
  if (model.datasets().size() != full.dataset_count())
    throw ValidationError("checkpoint " + ckpt.string() + " was trained on a different corpus");
  for (std::size_t d = 0; d < full.dataset_count(); ++d) {
    const auto& a = model.datasets()[d];
    const auto& b = full.dataset(d).desc;
    if (a.name != b.name || a.users != b.users || a.items != b.items)
      throw ValidationError("checkpoint dataset " + a.name + " does not match corpus dataset " + b.name);
  }
  auto reports = evaluate_model(model, full, splits);
  write_eval_csv(dir_ / "eval.csv", reports);
  write_ranks_csv(dir_ / "ranks.csv", full, splits, reports);
  record("eval");
}

void Run::pipeline() {
  if (!config_.corpus_manifest) synth();
  ingest();
  embed_text();
  build_graph();
  embed_graph();
  train();
  eval();
}

}  // namespace gacdr
