#include <doctest.h>

#include <set>

#include <fstream>

#include "gacdr/random.hpp"
#include "gacdr/matrix.hpp"
#include "gacdr/error.hpp"
#include "gacdr/model.hpp"
#include "gacdr/train.hpp"
#include "model_fixture.hpp"

using namespace gacdr;
using gacdr::testing::TempDir;
using gacdr::testing::TinyModel;

TEST_CASE("model layout") {
  TinyModel t(8, 9, 4, 4);
  const auto& m = t.model;
  CHECK(m.k() == 4);
  CHECK(m.groups().size() == 1);
  REQUIRE(m.pairs().size() == 1);
  CHECK(m.pairs()[0].users.size() == 4);
  CHECK(m.pair_weights() == std::vector<double>{1.0});
  CHECK(m.find_dataset("b") == 1u);
  CHECK(m.params().contains(attention_param_name(EntityKind::User, 0, 1)));
  CHECK(m.params().contains(GaModel::pair_param_name(0, 1)));
  for (std::size_t d = 0; d < 2; ++d) {
    CHECK(m.inputs(d, EntityKind::User).rows() == static_cast<Eigen::Index>(t.corpus.dataset(d).desc.users));
    Matrix out = m.outputs(d, EntityKind::Item);
    CHECK((out.array() >= 0).all());
  }
}

TEST_CASE("average mode keeps no attention parameters; no sharing keeps no groups") {
  TinyModel avg(8, 9, 4, 4, FusionMode::Average);
  for (const auto& n : avg.model.params().names()) CHECK(n.rfind("attn/", 0) != 0);
  ModelConfig mc;
  mc.k = 4;
  mc.share = false;
  mc.structure = TowerStructure::parse("1-2-1");
  GaModel solo = GaModel::create(avg.corpus, gacdr::testing::random_base(avg.corpus, 4, 1), mc);
  CHECK(solo.groups().empty());
  CHECK(solo.inputs(0, EntityKind::User) == solo.base(0, EntityKind::User));
}

TEST_CASE("model inputs agree with the tape path") {
  TinyModel t(8, 9, 4, 4);
  for (const auto& n : t.model.params().names())
    if (n.rfind("attn/", 0) == 0) t.model.params().value(n) = Matrix::Random(1, 4);
  ad::Tape tape;
  ModelTape mt(tape, t.model, false);
  std::vector<std::uint32_t> rows{7, 0, 3, 3, 5};
  Matrix via_tape = mt.outputs(1, EntityKind::User, rows).value();
  Matrix all = t.model.outputs(1, EntityKind::User);
  for (std::size_t r = 0; r < rows.size(); ++r)
    CHECK((via_tape.row(static_cast<Eigen::Index>(r)) - all.row(rows[r])).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("checkpoint round trip is bit exact") {
  TinyModel t(8, 9, 4, 4);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.objective = Objective::Personalized;
  train_loop(t.corpus, t.model, cfg);
  TempDir dir("ckpt");
  save_checkpoint(dir / "model.ckpt", t.model);
  GaModel back = load_checkpoint(dir / "model.ckpt");
  CHECK(back == t.model);
  auto a = ModelOutputs::of(t.model), b = ModelOutputs::of(back);
  for (std::size_t d = 0; d < 2; ++d)
    for (std::uint32_t u = 0; u < t.corpus.dataset(d).desc.users; ++u)
      for (std::uint32_t i = 0; i < t.corpus.dataset(d).desc.items; ++i) CHECK(a.score(d, u, i) == b.score(d, u, i));
  // Saving the loaded model reproduces the file byte for byte.
  save_checkpoint(dir / "again.ckpt", back);
  CHECK(gacdr::testing::read_text(dir / "model.ckpt") == gacdr::testing::read_text(dir / "again.ckpt"));
}

TEST_CASE("damaged checkpoints are rejected") {
  TinyModel t;
  TempDir dir("ckpt");
  save_checkpoint(dir / "m.ckpt", t.model);
  const std::string good = gacdr::testing::read_text(dir / "m.ckpt");

  gacdr::testing::write_text(dir / "magic.ckpt", "not a checkpoint\n");
  CHECK_THROWS_AS(load_checkpoint(dir / "magic.ckpt"), ValidationError);

  gacdr::testing::write_text(dir / "short.ckpt", good.substr(0, good.size() - 16));
  CHECK_THROWS_AS(load_checkpoint(dir / "short.ckpt"), ValidationError);

  CHECK_THROWS_AS(load_checkpoint(dir / "absent.ckpt"), MissingArtifact);
}
