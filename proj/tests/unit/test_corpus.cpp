#include <doctest.h>

#include <set>

#include "gacdr/random.hpp"
#include "gacdr/matrix.hpp"
#include "gacdr/corpus.hpp"
#include "gacdr/error.hpp"
#include "support.hpp"

using namespace gacdr;
using gacdr::testing::TempDir;
using gacdr::testing::write_text;

namespace {

std::filesystem::path two_dataset_files(const TempDir& dir, const std::string& ratings_a, const std::string& align) {
  write_text(dir / "a.tsv", ratings_a);
  write_text(dir / "b.tsv", "x\tj1\t3\t1\nu1\tj2\t4\t2\n");
  write_text(dir / "align.tsv", align);
  write_text(dir / "corpus.manifest",
             "dataset = a\na.ratings = a.tsv\na.max_rating = 5\n"
             "dataset = b\nb.ratings = b.tsv\nb.max_rating = 5\nalignment = align.tsv\n");
  return dir / "corpus.manifest";
}

}  // namespace

TEST_CASE("one shared raw user gives one user link") {
  TempDir dir("corpus");
  auto manifest = two_dataset_files(dir, "u1\ti1\t5\t1\nu2\ti1\t2\t2\n", "user\ta\tu1\tb\tu1\n");
  Corpus c = load_corpus(manifest);
  REQUIRE(c.dataset_count() == 2);
  CHECK(c.alignment().user_links().size() == 1);
  CHECK(c.alignment().item_links().empty());
  auto rows = common_entities(c, 0, 1, EntityKind::User);
  REQUIRE(rows.size() == 1);
  CHECK(c.dataset(0).user_ids[rows.rows_a[0]] == "u1");
  CHECK(c.dataset(1).user_ids[rows.rows_b[0]] == "u1");
}

TEST_CASE("min interactions filter drops thin users") {
  CorpusBuilder b;
  auto d = b.add_dataset("d", 5);
  for (int i = 0; i < 4; ++i) b.add_rating(d, "thin", "i" + std::to_string(i), 3);
  for (int i = 0; i < 5; ++i) b.add_rating(d, "thick", "i" + std::to_string(i), 3);
  Corpus c = b.build(LoadOptions{5});
  CHECK_FALSE(c.dataset(0).user_index("thin").has_value());
  CHECK(c.dataset(0).user_index("thick").has_value());
  // Items stay in the universe even when only dropped users rated them.
  CHECK(c.dataset(0).desc.items == 5);
  for (const auto& x : c.dataset(0).interactions) CHECK(x.user == *c.dataset(0).user_index("thick"));
}

TEST_CASE("filtering reaches a fixpoint") {
  // Every surviving user must meet the threshold after the pass that removes others.
  CorpusBuilder b;
  auto d = b.add_dataset("d", 5);
  b.add_rating(d, "a", "i1", 1);
  b.add_rating(d, "a", "i2", 1);
  b.add_rating(d, "b", "i1", 1);
  Corpus c = b.build(LoadOptions{2});
  const auto& ds = c.dataset(0);
  std::map<std::uint32_t, int> count;
  for (const auto& x : ds.interactions) ++count[x.user];
  for (const auto& [u, n] : count) CHECK(n >= 2);
  CHECK(ds.desc.users == 1);
}

TEST_CASE("ratings above max_rating are rejected") {
  TempDir dir("corpus");
  auto manifest = two_dataset_files(dir, "u1\ti9\t6.0\n", "");
  CHECK_THROWS_AS(load_corpus(manifest), RatingOutOfRange);
  CorpusBuilder b;
  auto d = b.add_dataset("d", 5);
  CHECK_THROWS_AS(b.add_rating(d, "u", "i", 0.0), RatingOutOfRange);
}

TEST_CASE("malformed lines name file and line") {
  TempDir dir("corpus");
  auto manifest = two_dataset_files(dir, "u1\ti1\t5\nbroken line\n", "");
  try {
    load_corpus(manifest);
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(e.line_no() == 2);
    CHECK(e.file().find("a.tsv") != std::string::npos);
  }
  auto manifest2 = two_dataset_files(dir, "u1\ti1\tfive\n", "");
  CHECK_THROWS_AS(load_corpus(manifest2), MalformedLine);
}

TEST_CASE("conflicting max rating and bad dataset names") {
  CorpusBuilder b;
  b.add_dataset("d", 5);
  CHECK_NOTHROW(b.add_dataset("d", 5));
  CHECK_THROWS_AS(b.add_dataset("d", 10), ConflictingMaxRating);
  CHECK_THROWS_AS(b.add_dataset("has space", 5), ValidationError);
}

TEST_CASE("alignment closure is transitive and rejects two members of one dataset") {
  CorpusBuilder b;
  for (const char* n : {"a", "b", "c"}) {
    auto d = b.add_dataset(n, 5);
    b.add_rating(d, "u", "i", 4);
    b.add_rating(d, "v", "i", 4);
  }
  b.add_alignment(EntityKind::User, "a", "u", "b", "u");
  b.add_alignment(EntityKind::User, "b", "u", "c", "u");
  Corpus c = b.build();
  CHECK(c.alignment().classes(EntityKind::User).size() == 1);
  CHECK(c.alignment().classes(EntityKind::User)[0].size() == 3);
  CHECK(c.alignment().user_links().size() == 3);  // a-b, a-c, b-c
  CHECK(common_entities(c, 0, 2, EntityKind::User).size() == 1);

  CorpusBuilder bad = b;
  bad.add_alignment(EntityKind::User, "a", "v", "c", "u");
  CHECK_THROWS_AS(bad.build(), DuplicateAlignment);
}

TEST_CASE("common_entities is sorted, aligned and stable") {
  Corpus c = gacdr::testing::toy_corpus(12, 8, 3, 5);
  auto r1 = common_entities(c, 0, 1, EntityKind::User);
  auto r2 = common_entities(c, 0, 1, EntityKind::User);
  CHECK(r1 == r2);
  REQUIRE(r1.size() == 5);
  CHECK(std::is_sorted(r1.rows_a.begin(), r1.rows_a.end()));
  for (std::size_t i = 0; i < r1.size(); ++i)
    CHECK(c.dataset(0).user_ids[r1.rows_a[i]] == c.dataset(1).user_ids[r1.rows_b[i]]);
  CHECK(common_entities(c, 0, 1, EntityKind::Item).empty());
}

TEST_CASE("interaction matrix stats") {
  CorpusBuilder b;
  auto d = b.add_dataset("d", 5);
  b.add_rating(d, "u1", "i1", 1);
  b.add_rating(d, "u2", "i2", 1);
  b.add_rating(d, "u1", "i2", 1);
  Corpus c = b.build();
  auto s = interaction_matrix_stats(c, 0);
  CHECK(s.users == 2);
  CHECK(s.items == 2);
  CHECK(s.density == doctest::Approx(0.75));

  CorpusBuilder e;
  e.add_dataset("empty", 5);
  CHECK(interaction_matrix_stats(e.build(), 0).density == 0.0);

  // Dataset shaped like a published book corpus: 96041 / (2110 * 6777).
  CHECK(96041.0 / (2110.0 * 6777.0) == doctest::Approx(0.0067).epsilon(0.01));
}

TEST_CASE("interning is lexicographic and reloads are identical") {
  TempDir dir("corpus");
  auto manifest = two_dataset_files(dir, "zed\ti2\t5\t3\nalf\ti1\t2\t1\nalf\ti2\t3\t2\n", "user\ta\talf\tb\tu1\n");
  Corpus c1 = load_corpus(manifest);
  Corpus c2 = load_corpus(manifest);
  CHECK(c1 == c2);
  CHECK(c1.dataset(0).user_ids == std::vector<std::string>{"alf", "zed"});
  CHECK(c1.dataset(0).interactions.front().order == 0);
}

TEST_CASE("duplicate ratings keep the last line") {
  CorpusBuilder b;
  auto d = b.add_dataset("d", 5);
  b.add_rating(d, "u", "i", 1);
  b.add_rating(d, "u", "j", 2);
  b.add_rating(d, "u", "i", 4);
  Corpus c = b.build();
  REQUIRE(c.dataset(0).interactions.size() == 2);
  CHECK(c.dataset(0).interactions[0].rating == 2);
  CHECK(c.dataset(0).interactions[1].rating == 4);
}

TEST_CASE("missing manifest file is a validation error") {
  CHECK_THROWS_AS(load_corpus(std::filesystem::path("/nonexistent/corpus.manifest")), ValidationError);
}
