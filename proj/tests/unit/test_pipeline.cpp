#include <doctest.h>

#include <set>

#include <cstdlib>
#include <sys/wait.h>

#include "gacdr/random.hpp"
#include "gacdr/matrix.hpp"
#include "gacdr/error.hpp"
#include "gacdr/pipeline.hpp"
#include "support.hpp"

using namespace gacdr;
using gacdr::testing::TempDir;
using gacdr::testing::read_text;
using gacdr::testing::write_text;

namespace {

const char* kTiny = R"({
  "name": "t", "seed": 5, "scenario": "dtcdr",
  "synth": {
    "datasets": [{"name": "a", "users": 25, "items": 30, "density": 0.15},
                 {"name": "b", "users": 25, "items": 30, "density": 0.1}],
    "links": [{"a": "a", "b": "b", "user_fraction": 0.4}],
    "vocab_size": 64, "tokens_per_doc": 12
  },
  "text": {"dim": 4, "epochs": 2},
  "walk": {"walks_per_node": 2, "walk_length": 10, "window": 3, "epochs": 1},
  "model": {"k": 4, "structure": "1-2-1"},
  "train": {"epochs": 2, "batch_size": 64},
  "eval": {"candidates": 10}
})";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(GACDR_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  auto c = RunConfig::parse(kTiny);
  CHECK(c.name == "t");
  CHECK(c.scenario == Scenario::Dtcdr);
  CHECK(c.walk.dim == 4);
  CHECK(c.eval_candidates == 10);
  REQUIRE(c.synth);
  CHECK(c.synth->links[0].b == 1);
  // The canonical form parses back to itself.
  CHECK(RunConfig::parse(c.to_json()).to_json() == c.to_json());

  CHECK_THROWS_AS(RunConfig::parse(R"({"name": "x", "synth": {"datasets": [{"name": "a"}]}, "bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse(R"({"name": "x", "synth": {"datasets": [{"name": "a"}]}, "train": {"epoch": 1}})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse(R"({"name": "x"})"), ConfigError);
  CHECK_THROWS_AS(RunConfig::parse(R"({"name": "x", "synth": {"datasets": [{"name": "a"}]}, "model": {"structure": "1-0"}})"),
                  ConfigError);
  CHECK_THROWS_AS(RunConfig::parse("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_scenario("quad"), ConfigError);
}

TEST_CASE("set_seed re-derives stage seeds") {
  auto c = RunConfig::parse(kTiny);
  auto d = c;
  d.set_seed(6);
  CHECK(d.seed == 6);
  CHECK(d.train.seed != c.train.seed);
  CHECK(d.walk.seed != c.walk.seed);
  d.set_seed(5);
  CHECK(d.to_json() == c.to_json());
}

TEST_CASE("scenario topology checks") {
  auto two = gacdr::testing::toy_corpus(6, 8, 3, 3);
  CHECK_NOTHROW(check_scenario(Scenario::Dtcdr, two));
  CHECK_THROWS_AS(check_scenario(Scenario::Single, two), ValidationError);
  CHECK_THROWS_AS(check_scenario(Scenario::Mtcdr, two), ValidationError);
}

TEST_CASE("staged run matches the one-shot pipeline and is deterministic") {
  TempDir root("run");
  auto cfg = RunConfig::parse(kTiny);
  Run staged(cfg, root / "staged");
  CHECK_THROWS_AS(staged.train(), MissingArtifact);
  staged.synth();
  staged.ingest();
  staged.embed_text();
  staged.build_graph();
  staged.embed_graph();
  staged.train();
  staged.eval();
  Run whole(cfg, root / "whole");
  whole.pipeline();
  for (const char* f : {"eval.csv", "trace.csv", "ranks.csv", "attention.tsv", "model.ckpt"})
    CHECK(read_text(root / "staged" / f) == read_text(root / "whole" / f));
  const auto eval = read_text(root / "whole" / "eval.csv");
  CHECK(eval.rfind("dataset,N,hr,ndcg\n", 0) == 0);
  CHECK(std::count(eval.begin(), eval.end(), '\n') == 21);
}

TEST_CASE("cli exit codes") {
  TempDir root("cli");
  write_text(root / "tiny.json", kTiny);
  const std::string conf = (root / "tiny.json").string(), out = (root / "out").string();
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("train --help") == 0);
  CHECK(run_cli("frobnicate") == 1);
  CHECK(run_cli("train --config " + (root / "absent.json").string()) == 1);
  CHECK(run_cli("train --config " + conf + " --out " + out) == 1);  // earlier stages missing
  CHECK(run_cli("pipeline --config " + conf + " --out " + out) == 0);
  CHECK(read_text(root / "out" / "t" / "eval.csv").size() > 0);
  write_text(root / "bad.json", R"({"name": "t", "nonsense": true})");
  CHECK(run_cli("pipeline --config " + (root / "bad.json").string() + " --out " + out) == 1);
}
