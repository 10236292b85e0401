// Command-line driver: one subcommand per pipeline stage over a JSON run config.
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "gacdr/error.hpp"
#include "gacdr/pipeline.hpp"

namespace {

namespace fs = std::filesystem;

enum Exit : int { kOk = 0, kValidation = 1, kRuntime = 2 };

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  bool verbose = false;
};

void add_common(CLI::App& cmd, CommonOptions& opts) {
  cmd.add_option("--config", opts.config, "Run configuration (JSON)")->required();
  cmd.add_option("--seed", opts.seed, "Override the global seed");
  cmd.add_option("--out", opts.out, "Parent of the run directory")->capture_default_str();
  cmd.add_flag("-v,--verbose", opts.verbose, "Debug logging");
}

int execute(const CommonOptions& opts, const std::function<void(gacdr::Run&)>& stage) {
  try {
    spdlog::set_level(opts.verbose ? spdlog::level::debug : spdlog::level::info);
    auto config = gacdr::RunConfig::load(opts.config);
    if (opts.seed) config.set_seed(*opts.seed);
    gacdr::Run run(config, fs::path(opts.out) / config.name);
    stage(run);
    return kOk;
  } catch (const gacdr::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph-embedding and attention cross-domain recommender toolkit"};
  app.require_subcommand(1);

  struct Stage {
    const char* name;
    const char* help;
    void (gacdr::Run::*fn)();
  };
  const std::vector<Stage> stages = {
      {"synth", "Generate the planted synthetic corpus into data/", &gacdr::Run::synth},
      {"ingest", "Load the corpus, hold out test interactions, write split/ and stats.tsv", &gacdr::Run::ingest},
      {"embed-text", "Train document embeddings into embeddings/", &gacdr::Run::embed_text},
      {"build-graph", "Build per-dataset heterogeneous graphs into graphs/", &gacdr::Run::build_graph},
      {"embed-graph", "Run biased walks and skip-gram into embeddings/", &gacdr::Run::embed_graph},
      {"train", "Train the model; writes model.ckpt, trace.csv, attention.tsv", &gacdr::Run::train},
      {"eval", "Leave-one-out evaluation; writes eval.csv and ranks.csv", &gacdr::Run::eval},
      {"pipeline", "Run every stage in order", &gacdr::Run::pipeline},
  };

  CommonOptions opts;
  std::vector<std::pair<CLI::App*, const Stage*>> commands;
  for (const auto& s : stages) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(*cmd, opts);
    commands.emplace_back(cmd, &s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  for (const auto& [cmd, stage] : commands)
    if (cmd->parsed()) return execute(opts, [fn = stage->fn](gacdr::Run& run) { (run.*fn)(); });
  return kValidation;
}
