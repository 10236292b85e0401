#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gacdr/corpus.hpp"
#include "gacdr/eval.hpp"
#include "gacdr/graphembed.hpp"
#include "gacdr/hetgraph.hpp"
#include "gacdr/model.hpp"
#include "gacdr/synth.hpp"
#include "gacdr/textembed.hpp"
#include "gacdr/train.hpp"

namespace gacdr {

enum class Scenario : std::uint8_t { Single, Dtcdr, Mtcdr, CdrCsr };

const char* to_string(Scenario scenario);
Scenario parse_scenario(const std::string& text);  // throws ConfigError

/// Every stage's settings. Stage seeds are derived from `seed`; the walk dimension is model.k.
struct RunConfig {
  std::string name = "run";
  std::uint64_t seed = 1;
  Scenario scenario = Scenario::Dtcdr;
  std::optional<std::filesystem::path> corpus_manifest;  // absent: use the synth section
  LoadOptions load_options;
  std::optional<SynthConfig> synth;
  PvDbowConfig text;
  GraphConfig graph;
  WalkConfig walk;
  ModelConfig model;
  TrainConfig train;
  std::size_t eval_candidates = 99;

  /// JSON text; unknown keys throw ConfigError. Relative corpus paths resolve against `base_dir`.
  static RunConfig parse(const std::string& json_text, const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);
  /// Canonical JSON of the resolved configuration, stage seeds included.
  std::string to_json() const;
  /// Replaces the global seed and re-derives every stage seed.
  void set_seed(std::uint64_t seed);
  void validate() const;
};

/// Checks dataset count and alignment topology against the scenario. Throws ValidationError.
void check_scenario(Scenario scenario, const Corpus& corpus);

/// In-memory products of the stages up to graph embedding.
struct Prepared {
  Corpus full;
  std::vector<EvalSplit> splits;
  Corpus train;  // full with the test interactions removed
  std::vector<ContentEmbeddings> content;
  std::vector<HetGraph> graphs;
  std::vector<EntityEmbeddings> graph_embeddings;
};

Prepared prepare(const Corpus& full, const RunConfig& config);

struct Outcome {
  GaModel model;
  std::vector<EpochRecord> trace;
  std::vector<DatasetReport> reports;
};

/// Builds a model on prepared embeddings, trains and evaluates it.
Outcome train_and_evaluate(const Prepared& prepared, const ModelConfig& model_config, const TrainConfig& train_config,
                           const StepCallback& on_step = {});

std::vector<DatasetReport> evaluate_model(const GaModel& model, const Corpus& full, const std::vector<EvalSplit>& splits);

/// File-backed stages under one run directory:
///   config.snapshot, manifest, data/ (synth), split/, embeddings/, graphs/,
///   model.ckpt, trace.csv, attention.tsv, eval.csv, ranks.csv
class Run {
 public:
  Run(RunConfig config, std::filesystem::path dir);

  const std::filesystem::path& dir() const { return dir_; }
  const RunConfig& config() const { return config_; }

  void synth();
  void ingest();
  void embed_text();
  void build_graph();
  void embed_graph();
  void train();
  void eval();
  void pipeline();

 private:
  std::filesystem::path corpus_manifest() const;
  Corpus load_full(const std::string& stage) const;
  Corpus load_train(const Corpus& full, std::vector<EvalSplit>* splits) const;
  std::filesystem::path require(const std::string& stage, const std::filesystem::path& path) const;
  void record(const std::string& stage);

  RunConfig config_;
  std::filesystem::path dir_;
};

}  // namespace gacdr
