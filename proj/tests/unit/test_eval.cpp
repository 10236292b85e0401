#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "gacdr/random.hpp"
#include "gacdr/matrix.hpp"
#include "gacdr/eval.hpp"
#include "support.hpp"

using namespace gacdr;

namespace {

/// Full sort of every score with the test item placed after ties, then a scan for its position.
std::size_t brute_rank(double test, const std::vector<double>& cands) {
  std::vector<std::pair<double, int>> all;
  for (double c : cands) all.emplace_back(c, 0);
  all.emplace_back(test, 1);
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // candidates before the test item on ties
  });
  for (std::size_t i = 0; i < all.size(); ++i)
    if (all[i].second == 1) return i + 1;
  return 0;
}

}  // namespace

TEST_CASE("rank rule") {
  CHECK(rank_test_item(0.9, {0.1, 0.5, 0.3}) == 1);
  CHECK(rank_test_item(0.5, std::vector<double>(99, 0.5)) == 100);
  CHECK(rank_test_item(0.4, {0.9, 0.4, 0.1, 0.7, 0.2}) == brute_rank(0.4, {0.9, 0.4, 0.1, 0.7, 0.2}));
}

TEST_CASE("metric spot values") {
  CHECK(ndcg_at({1}, 10) == 1.0);
  CHECK(ndcg_at({3}, 10) == doctest::Approx(0.5));
  CHECK(hr_at({11}, 10) == 0.0);
  CHECK(ndcg_at({11}, 10) == 0.0);
  CHECK(hr_at({1, 11}, 10) == 0.5);
  CHECK(ndcg_at({1, 11}, 10) == 0.5);
}

TEST_CASE("latest interaction is held out; single-interaction users are excluded") {
  CorpusBuilder b;
  auto d = b.add_dataset("d", 5);
  b.add_rating(d, "u", "i1", 3, 1);
  b.add_rating(d, "u", "i5", 3, 5);
  b.add_rating(d, "u", "i3", 3, 3);
  b.add_rating(d, "lonely", "i1", 3, 1);
  b.add_rating(d, "tie", "i1", 3, 7);
  b.add_rating(d, "tie", "i3", 3, 7);
  Corpus c = b.build();
  const auto& ds = c.dataset(0);
  auto split = make_split(c, 0, 1, 99);
  REQUIRE(split.tests.size() == 2);
  for (const auto& t : split.tests) {
    if (t.user == *ds.user_index("u")) CHECK(t.item == *ds.item_index("i5"));
    if (t.user == *ds.user_index("tie")) CHECK(t.item == *ds.item_index("i3"));
  }
  CHECK(split.excluded_users == std::vector<std::uint32_t>{*ds.user_index("lonely")});
  CHECK(split.train.size() == ds.interactions.size() - 2);
}

TEST_CASE("missing timestamps hold out the last line") {
  CorpusBuilder b;
  auto d = b.add_dataset("d", 5);
  b.add_rating(d, "u", "i2", 3);
  b.add_rating(d, "u", "i1", 3);
  Corpus c = b.build();
  auto split = make_split(c, 0, 1, 5);
  REQUIRE(split.tests.size() == 1);
  CHECK(split.tests[0].item == *c.dataset(0).item_index("i1"));
}

TEST_CASE("candidates are unobserved, distinct and deterministic") {
  auto c = gacdr::testing::toy_corpus(80, 150, 5, 0);
  REQUIRE(c.dataset(0).desc.items >= 110);
  auto split = make_split(c, 0, 4, 99);
  auto again = make_split(c, 0, 4, 99);
  CHECK(split == again);
  const auto& ds = c.dataset(0);
  for (const auto& t : split.tests) {
    CHECK(t.candidates.size() == 99);
    std::set<std::uint32_t> seen(t.candidates.begin(), t.candidates.end());
    CHECK(seen.size() == 99);
    for (const auto& x : ds.interactions)
      if (x.user == t.user) CHECK(seen.count(x.item) == 0);
  }
  CHECK_FALSE(make_split(c, 0, 5, 99) == split);
}

TEST_CASE("small item universes sample every unseen item") {
  auto c = gacdr::testing::toy_corpus(6, 20, 4, 0);
  const auto& ds = c.dataset(0);
  auto split = make_split(c, 0, 1, 99);
  for (const auto& t : split.tests) {
    std::set<std::uint32_t> seen;
    for (const auto& x : ds.interactions)
      if (x.user == t.user) seen.insert(x.item);
    CHECK(t.candidates.size() == ds.desc.items - seen.size());
  }
}

TEST_CASE("evaluate equals a brute-force reimplementation") {
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    auto c = gacdr::testing::toy_corpus(5 + inst % 15, 40, 3, 0, inst + 1);
    auto split = make_split(c, 0, inst, 20);
    Rng rng = make_rng(inst * 17 + 1);
    // Coarse scores so ties occur.
    Matrix scores(static_cast<Eigen::Index>(c.dataset(0).desc.users), 40);
    for (Eigen::Index i = 0; i < scores.size(); ++i) scores.data()[i] = static_cast<double>(rng() % 6);
    auto score = [&](std::uint32_t u, std::uint32_t i) { return scores(u, i); };
    auto rep = evaluate(score, split, "d");
    std::vector<std::size_t> ranks;
    for (const auto& t : split.tests) {
      std::vector<double> cs;
      for (auto i : t.candidates) cs.push_back(score(t.user, i));
      ranks.push_back(brute_rank(score(t.user, t.item), cs));
    }
    CHECK(rep.ranks == ranks);
    for (std::size_t n = 1; n <= kMaxCutoff; ++n) {
      double hr = 0, nd = 0;
      for (auto r : ranks) {
        hr += r <= n ? 1.0 : 0.0;
        nd += r <= n ? 1.0 / std::log2(static_cast<double>(r) + 1.0) : 0.0;
      }
      CHECK(rep.hr[n - 1] == hr / static_cast<double>(ranks.size()));
      CHECK(rep.ndcg[n - 1] == nd / static_cast<double>(ranks.size()));
    }
  }
}

TEST_CASE("report invariants") {
  auto c = gacdr::testing::toy_corpus(15, 60, 4, 0);
  auto split = make_split(c, 0, 2, 30);
  Rng rng = make_rng(1);
  std::vector<double> noise(15 * 60);
  for (auto& v : noise) v = uniform01(rng);
  auto rep = evaluate([&](std::uint32_t u, std::uint32_t i) { return noise[u * 60 + i]; }, split, "d");
  for (std::size_t n = 0; n < kMaxCutoff; ++n) {
    CHECK(rep.ndcg[n] <= rep.hr[n]);
    CHECK(rep.hr[n] >= 0.0);
    CHECK(rep.hr[n] <= 1.0);
    if (n > 0) {
      CHECK(rep.hr[n] >= rep.hr[n - 1]);
      CHECK(rep.ndcg[n] >= rep.ndcg[n - 1]);
    }
  }
  auto perfect = evaluate([&](std::uint32_t u, std::uint32_t i) {
    for (const auto& t : split.tests)
      if (t.user == u && t.item == i) return 1.0;
    return 0.0;
  }, split, "d");
  for (std::size_t n = 0; n < kMaxCutoff; ++n) {
    CHECK(perfect.hr[n] == 1.0);
    CHECK(perfect.ndcg[n] == 1.0);
  }
  EvalSplit none;
  auto empty = evaluate([](std::uint32_t, std::uint32_t) { return 0.0; }, none, "d");
  CHECK(empty.empty);
  CHECK(empty.hr[9] == 0.0);
}

TEST_CASE("split file round trip and eval csv layout") {
  gacdr::testing::TempDir dir("eval");
  auto c = gacdr::testing::toy_corpus(8, 30, 3, 0);
  auto split = make_split(c, 0, 3, 10);
  write_split(dir / "d.test.tsv", c, split);
  auto back = read_split(dir / "d.test.tsv", c, 0);
  CHECK(back.tests == split.tests);
  auto rep = evaluate([](std::uint32_t u, std::uint32_t i) { return static_cast<double>((u * 7 + i) % 5); }, split, "a");
  write_eval_csv(dir / "eval.csv", {rep});
  auto text = gacdr::testing::read_text(dir / "eval.csv");
  CHECK(text.rfind("dataset,N,hr,ndcg\na,1,", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 11);
}
