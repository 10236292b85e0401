#include <doctest.h>

#include <set>

#include <cmath>

#include "gacdr/random.hpp"
#include "gacdr/matrix.hpp"
#include "gacdr/error.hpp"
#include "gacdr/scorer.hpp"

using namespace gacdr;

TEST_CASE("default tower shapes for k = 8") {
  ad::ParamStore store;
  init_towers(store, 0, "d", 8, TowerStructure{}, 1);
  auto layers = tower_layers(store, 0, EntityKind::User, 6);
  const std::vector<std::pair<int, int>> shapes{{8, 16}, {16, 32}, {32, 64}, {64, 32}, {32, 16}, {16, 8}};
  REQUIRE(layers.size() == shapes.size());
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    CHECK(layers[l].rows() == shapes[l].first);
    CHECK(layers[l].cols() == shapes[l].second);
  }
}

TEST_CASE("structure maps k to k for the standard sizes") {
  for (std::size_t k : {8, 16, 32, 64, 128}) {
    auto w = TowerStructure{}.widths(k);
    CHECK(w.front() == k);
    CHECK(w.back() == k);
  }
  CHECK(TowerStructure::parse("1-2-1").layers() == 2);
  CHECK(TowerStructure::parse("1-2-4-8-4-2-1").to_string() == "1-2-4-8-4-2-1");
  CHECK_THROWS_AS(TowerStructure::parse("2-4-1"), BadStructure);
  CHECK_THROWS_AS(TowerStructure::parse("1-x-1"), BadStructure);
  CHECK_THROWS_AS(TowerStructure::parse("1"), BadStructure);
}

TEST_CASE("initialization statistics and determinism") {
  ad::ParamStore a, b;
  init_towers(a, 0, "d", 32, TowerStructure{}, 7);
  init_towers(b, 0, "d", 32, TowerStructure{}, 7);
  CHECK(a == b);
  double sum = 0, sq = 0, n = 0;
  for (const auto& [name, m] : a.values()) {
    sum += m.sum();
    sq += m.squaredNorm();
    n += static_cast<double>(m.size());
  }
  CHECK(n > 1e5);
  CHECK(std::abs(sum / n) < 0.01);
  CHECK(std::sqrt(sq / n) == doctest::Approx(0.1).epsilon(0.02));
}

TEST_CASE("a dataset's towers do not depend on other datasets") {
  ad::ParamStore one, two;
  init_towers(one, 0, "books", 4, TowerStructure{}, 3);
  init_towers(two, 0, "movies", 4, TowerStructure{}, 3);
  init_towers(two, 1, "books", 4, TowerStructure{}, 3);
  CHECK(tower_layers(one, 0, EntityKind::Item, 6) == tower_layers(two, 1, EntityKind::Item, 6));
}

TEST_CASE("forward properties") {
  ad::ParamStore store;
  init_towers(store, 0, "d", 6, TowerStructure{}, 2);
  RowVector zero = RowVector::Zero(6);
  CHECK(forward_user(store, 0, 6, zero).isZero(0));
  RowVector x = RowVector::Random(6);
  RowVector y = forward_user(store, 0, 6, x);
  CHECK((y.array() >= 0).all());
  RowVector scaled = forward_user(store, 0, 6, x * 2.5);
  CHECK((scaled - 2.5 * y).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(forward_item(store, 0, 6, x) == forward_item(store, 0, 6, x));
}

TEST_CASE("identity single layer is ReLU") {
  Matrix x(1, 3);
  x << -1.0, 0.5, 2.0;
  Matrix out = tower_forward({Matrix::Identity(3, 3)}, x);
  CHECK(out(0, 0) == 0.0);
  CHECK(out(0, 1) == 0.5);
  CHECK(out(0, 2) == 2.0);
  Matrix bad(1, 3);
  bad << std::nan(""), 0, 0;
  CHECK_THROWS_AS(tower_forward({Matrix::Identity(3, 3)}, bad), NonFinite);
}

TEST_CASE("predict clamps cosine") {
  RowVector p(2), q(2);
  p << 1, 0;
  q << 1, 1;
  CHECK(predict(p, q) == doctest::Approx(1.0 / std::sqrt(2.0)));
  CHECK(predict(p, p) == 1.0 - kPredictionEps);
  RowVector o(2);
  o << 0, 1;
  CHECK(predict(p, o) == kPredictionEps);
  CHECK(predict(p, RowVector::Zero(2)) == kPredictionEps);
}
