#include <doctest.h>

#include <cmath>
#include <set>

#include "gacdr/random.hpp"
#include "gacdr/matrix.hpp"
#include "gacdr/error.hpp"
#include "gacdr/synth.hpp"
#include "support.hpp"

using namespace gacdr;
using gacdr::testing::TempDir;
using gacdr::testing::read_text;

namespace {

SynthConfig one(std::size_t users, std::size_t items, double density, std::uint64_t seed = 1) {
  SynthConfig c;
  c.datasets = {SynthDataset{"d", users, items, density}};
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("observed density matches the request") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    auto data = generate_data(one(100, 200, 0.05, seed));
    const auto& r = data.ratings[0];
    CHECK(r.size() >= 900);
    CHECK(r.size() <= 1100);
    std::set<std::pair<std::string, std::string>> cells;
    std::map<std::string, std::size_t> per_user;
    for (const auto& x : r) {
      cells.emplace(x.user, x.item);
      ++per_user[x.user];
      CHECK(x.rating >= 1.0);
      CHECK(x.rating <= 5.0);
      CHECK(x.rating == std::floor(x.rating));
    }
    CHECK(cells.size() == r.size());
    CHECK(per_user.size() == 100);
    for (const auto& [u, n] : per_user) CHECK(n >= 2);
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i - 1].timestamp <= r[i].timestamp);
  }
}

TEST_CASE("written files reload to the generated statistics") {
  auto cfg = SynthConfig::dtcdr_default();
  cfg.datasets[0].users = cfg.datasets[1].users = 80;
  cfg.datasets[0].items = cfg.datasets[1].items = 90;
  cfg.datasets[1].density = 0.03;
  auto data = generate_data(cfg);
  TempDir dir("synth");
  auto manifest = write_synth(data, dir.path());
  Corpus c = load_corpus(manifest);
  CHECK(describe(c) == describe(data));
  auto stats = describe(data);
  CHECK(stats.overlaps.at({0, 1}).first == 48);  // floor(0.6 * 80)
  CHECK(stats.overlaps.at({0, 1}).second == 0);
  CHECK(common_entities(c, 0, 1, EntityKind::User).size() == 48);
  CHECK(format_stats(stats, {"rich", "sparse"}).find("rich") != std::string::npos);

  auto truth = read_truth(dir.path(), {"rich", "sparse"});
  CHECK(truth.users[0].size() == 80);
  const auto& rating = data.ratings[0][0];
  CHECK(truth.affinity(0, rating.user, rating.item) == data.truth.affinity(0, rating.user, rating.item));
}

TEST_CASE("same seed writes identical bytes; another seed differs") {
  auto cfg = one(30, 40, 0.1);
  cfg.datasets.push_back(SynthDataset{"e", 30, 40, 0.1});
  cfg.links = {SynthLink{0, 1, 0.5, 0.25}};
  TempDir a("synth"), b("synth"), c("synth");
  generate(cfg, a.path());
  generate(cfg, b.path());
  cfg.seed = 2;
  generate(cfg, c.path());
  for (const char* f : {"corpus.manifest", "d.ratings.tsv", "d.content.tsv", "e.ratings.tsv", "alignment.tsv"})
    CHECK(read_text(a / f) == read_text(b / f));
  CHECK(read_text(a / "d.ratings.tsv") != read_text(c / "d.ratings.tsv"));
}

TEST_CASE("overlap sizes and zero fractions") {
  auto cfg = one(30, 40, 0.4);  // dense enough that every shared item is rated
  cfg.datasets.push_back(SynthDataset{"e", 50, 20, 0.2});
  cfg.links = {SynthLink{0, 1, 0.5, 0.25}};
  auto stats = describe(generate_data(cfg));
  CHECK(stats.overlaps.at({0, 1}) == std::pair<std::size_t, std::size_t>{15, 5});

  cfg.links = {SynthLink{0, 1, 0.0, 0.0}};
  auto data = generate_data(cfg);
  CHECK(data.alignment.empty());
}

TEST_CASE("chain topology shares only along its links") {
  SynthConfig cfg;
  cfg.datasets = {SynthDataset{"x", 20, 20, 0.2}, SynthDataset{"y", 20, 20, 0.2}, SynthDataset{"z", 20, 20, 0.2}};
  cfg.links = {SynthLink{0, 1, 0.5, 0.0}, SynthLink{1, 2, 0.0, 0.5}};
  auto stats = describe(generate_data(cfg));
  CHECK(stats.overlaps.at({0, 1}) == std::pair<std::size_t, std::size_t>{10, 0});
  CHECK(stats.overlaps.at({1, 2}) == std::pair<std::size_t, std::size_t>{0, 10});
  CHECK_FALSE(stats.overlaps.contains({0, 2}));
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(generate_data(one(10, 10, 1.5)), InfeasibleDensity);
  CHECK_THROWS_AS(generate_data(one(100, 100, 0.01)), InfeasibleDensity);  // 100 cells < 2 per user
  CHECK_THROWS_AS(generate_data(one(10, 10, 0.0)), ConfigError);
  auto bad = one(10, 10, 0.5);
  bad.links = {SynthLink{0, 0, 0.5, 0.0}};
  CHECK_THROWS_AS(generate_data(bad), ConfigError);
  auto dup = one(10, 10, 0.5);
  dup.datasets.push_back(dup.datasets[0]);
  CHECK_THROWS_AS(generate_data(dup), ConfigError);
  CHECK_NOTHROW(SynthConfig::dtcdr_default().validate());
}

TEST_CASE("oracle ranker beats chance on held-out taste") {
  // Items a user rated should have higher planted affinity than items they did not.
  auto data = generate_data(one(60, 80, 0.1, 4));
  std::set<std::pair<std::string, std::string>> seen;
  double in = 0, out = 0;
  std::size_t n_in = 0, n_out = 0;
  for (const auto& r : data.ratings[0]) seen.emplace(r.user, r.item);
  for (const auto& [u, _] : data.truth.users[0])
    for (const auto& [i, __] : data.truth.items[0]) {
      double a = data.truth.affinity(0, u, i);
      if (seen.count({u, i})) in += a, ++n_in;
      else out += a, ++n_out;
    }
  CHECK(in / n_in > out / n_out + 0.1);
}
