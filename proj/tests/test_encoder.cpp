#include <cmath>
#include <cstring>

#include "doctest.h"
#include "dqlore/encoder.hpp"
#include "helpers.hpp"

using namespace dqlore;

namespace {

// four instances over a six-item pool, one positive and one negative each
Pool pair_pool() {
  return Pool("p", {
                       {"a", "alpha problem one", "alpha steps", "1"},
                       {"b", "beta problem two", "beta steps", "2"},
                       {"c", "gamma problem three", "gamma steps", "3"},
                       {"d", "delta problem four", "delta steps", "4"},
                       {"e", "epsilon problem five", "epsilon steps", "5"},
                       {"f", "zeta problem six", "zeta steps", "6"},
                   });
}

std::vector<ContrastiveInstance> pair_instances() {
  auto mk = [](const std::string& anchor, const std::string& pos,
               const std::string& neg) {
    ContrastiveInstance inst;
    inst.anchor_id = anchor;
    inst.positives = {pos};
    inst.negatives = {neg};
    inst.all_scored = {{pos, 1, -1.0}, {neg, 2, -5.0}};
    return inst;
  };
  return {mk("a", "b", "c"), mk("b", "c", "d"), mk("c", "d", "e"),
          mk("d", "e", "f")};
}

EncoderModel small_model(std::size_t d_out, std::size_t d_in,
                         std::uint64_t seed) {
  EncoderModel model;
  model.base = BaseEmbedder::hashing(d_in, 7);
  model.W = Matrix(d_out, d_in);
  Rng rng(seed);
  for (double& x : model.W.data) x = 0.3 * rng.normal();
  return model;
}

}  // namespace

TEST_CASE("hashing embedder basics") {
  auto emb = BaseEmbedder::hashing(16, 3);
  CHECK(emb.dim() == 16);

  Vec v = emb.embed("any", "the cat sat on the mat");
  CHECK(v.size() == 16);
  CHECK(std::sqrt(dot(v, v)) == doctest::Approx(1.0));
  CHECK(emb.embed("other-id", "the cat sat on the mat") == v);  // id ignored

  Vec zero = emb.embed("x", "");
  CHECK(dot(zero, zero) == 0.0);

  // different seeds bucket differently
  auto emb2 = BaseEmbedder::hashing(16, 4);
  CHECK(emb2.embed("x", "the cat sat on the mat") != v);

  CHECK_THROWS_AS(BaseEmbedder::hashing(0), ValidationError);
}

TEST_CASE("file embedder lookup and validation") {
  testutil::TempDir dir("encoder");
  std::string path = dir.file("emb.jsonl");
  testutil::write_file(path,
                       "{\"id\":\"a\",\"vector\":[1.0,0.0]}\n"
                       "{\"id\":\"b\",\"vector\":[0.5,0.5]}\n");
  auto emb = BaseEmbedder::from_file(path);
  CHECK(emb.dim() == 2);
  CHECK(emb.embed("a", "ignored text") == Vec{1.0, 0.0});
  CHECK_THROWS_WITH_AS(emb.embed("ghost", "t"),
                       doctest::Contains("ghost"), ValidationError);

  // spec round trip preserves the lookup table source
  auto again = BaseEmbedder::from_spec_json(emb.spec_json());
  CHECK(again.embed("b", "") == Vec{0.5, 0.5});

  testutil::write_file(path,
                       "{\"id\":\"a\",\"vector\":[1.0]}\n"
                       "{\"id\":\"b\",\"vector\":[1.0,2.0]}\n");
  CHECK_THROWS_AS(BaseEmbedder::from_file(path), ValidationError);
  testutil::write_file(path,
                       "{\"id\":\"a\",\"vector\":[1.0]}\n"
                       "{\"id\":\"a\",\"vector\":[2.0]}\n");
  CHECK_THROWS_AS(BaseEmbedder::from_file(path), ValidationError);
  testutil::write_file(path, "");
  CHECK_THROWS_AS(BaseEmbedder::from_file(path), ValidationError);
  CHECK_THROWS_AS(BaseEmbedder::from_file(dir.file("nope.jsonl")), Error);
}

TEST_CASE("embedder spec json round trip") {
  auto emb = BaseEmbedder::hashing(32, 9);
  auto back = BaseEmbedder::from_spec_json(emb.spec_json());
  CHECK(back.dim() == 32);
  CHECK(back.embed("x", "hello world") == emb.embed("x", "hello world"));
  CHECK_THROWS_AS(BaseEmbedder::from_spec_json("{\"kind\":\"quantum\"}"),
                  ValidationError);
  CHECK_THROWS_AS(BaseEmbedder::from_spec_json("not json"), ParseError);
}

TEST_CASE("anchor_text joins question and cot") {
  Exemplar e{"id", "the question", "the steps", "9"};
  CHECK(anchor_text(e) == "the question\nthe steps");
  e.cot = "";
  CHECK(anchor_text(e) == "the question");
}

TEST_CASE("loss_from_sims closed-form values") {
  for (std::size_t b : {std::size_t{1}, std::size_t{8}, std::size_t{16}}) {
    Matrix sims(b, 2 * b, 0.7);  // all similarities equal
    CHECK(loss_from_sims(sims) ==
          doctest::Approx(std::log(2.0 * static_cast<double>(b)))
              .epsilon(1e-9));
  }

  Matrix one(1, 2);
  one.data = {1.0, 0.0};
  CHECK(loss_from_sims(one) ==
        doctest::Approx(std::log(1.0 + std::exp(-1.0))).epsilon(1e-9));

  // invariance under a constant shift of every similarity
  Matrix base(2, 4);
  base.data = {0.3, -0.2, 0.9, 0.1, -0.5, 0.4, 0.0, 0.8};
  Matrix shifted = base;
  for (double& x : shifted.data) x += 123.0;
  CHECK(loss_from_sims(shifted) ==
        doctest::Approx(loss_from_sims(base)).epsilon(1e-12));

  // extreme magnitudes stay finite thanks to max subtraction
  Matrix big(1, 2);
  big.data = {1000.0, 990.0};
  CHECK(std::isfinite(loss_from_sims(big)));

  Matrix bad(2, 3);
  CHECK_THROWS_AS(loss_from_sims(bad), ValidationError);
}

TEST_CASE("sample_pairs is deterministic and ordered") {
  auto instances = pair_instances();
  instances[0].positives = {"b", "c", "d"};
  instances[0].negatives = {"e", "f"};

  Rng r1(42), r2(42), r3(43);
  auto p1 = sample_pairs(instances, r1);
  auto p2 = sample_pairs(instances, r2);
  REQUIRE(p1.size() == instances.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].pos_id == p2[i].pos_id);
    CHECK(p1[i].neg_id == p2[i].neg_id);
  }
  // instances with a single choice always yield it
  CHECK(p1[1].pos_id == "c");
  CHECK(p1[1].neg_id == "d");

  ContrastiveInstance empty;
  empty.anchor_id = "x";
  empty.positives = {};
  empty.negatives = {"y"};
  Rng r4(1);
  CHECK_THROWS_AS(sample_pairs({empty}, r4), ValidationError);
}

TEST_CASE("contrastive_loss at a zero projection is ln(2b)") {
  Pool pool = pair_pool();
  auto instances = pair_instances();
  EncoderModel model = small_model(3, 8, 1);
  for (double& x : model.W.data) x = 0.0;

  auto [loss, pairs] = contrastive_loss(model, instances, pool, 5);
  CHECK(loss == doctest::Approx(std::log(8.0)).epsilon(1e-9));  // 2b = 8
  CHECK(pairs.size() == 4);
}

TEST_CASE("analytic gradient matches central differences") {
  Pool pool = pair_pool();
  auto instances = pair_instances();
  const double h = 1e-5;

  for (std::uint64_t trial = 0; trial < 5; ++trial) {
    EncoderModel model = small_model(3, 8, 100 + trial);
    Matrix grad = loss_gradient(model, instances, pool, trial);

    double max_rel = 0.0;
    for (std::size_t i = 0; i < model.W.data.size(); ++i) {
      EncoderModel up = model, down = model;
      up.W.data[i] += h;
      down.W.data[i] -= h;
      double fd = (contrastive_loss(up, instances, pool, trial).first -
                   contrastive_loss(down, instances, pool, trial).first) /
                  (2.0 * h);
      double denom = std::max({std::fabs(fd), std::fabs(grad.data[i]), 1e-8});
      max_rel = std::max(max_rel, std::fabs(fd - grad.data[i]) / denom);
    }
    CHECK(max_rel < 1e-4);
  }
}

TEST_CASE("gradient at a zero projection is zero, matching finite differences") {
  Pool pool = pair_pool();
  auto instances = pair_instances();
  EncoderModel model = small_model(3, 8, 2);
  for (double& x : model.W.data) x = 0.0;

  Matrix grad = loss_gradient(model, instances, pool, 3);
  for (double g : grad.data) CHECK(g == 0.0);

  // similarities are quadratic in W, so central differences vanish too
  const double h = 1e-5;
  for (std::size_t i : {std::size_t{0}, std::size_t{7}, std::size_t{23}}) {
    EncoderModel up = model, down = model;
    up.W.data[i] += h;
    down.W.data[i] -= h;
    double fd = (contrastive_loss(up, instances, pool, 3).first -
                 contrastive_loss(down, instances, pool, 3).first) /
                (2.0 * h);
    CHECK(fd == doctest::Approx(0.0).epsilon(1e-10));
  }
}

TEST_CASE("identity projection preserves base similarities") {
  Pool pool = pair_pool();
  EncoderModel model;
  model.base = BaseEmbedder::hashing(8, 7);
  model.W = Matrix(8, 8);
  for (std::size_t i = 0; i < 8; ++i) model.W.at(i, i) = 1.0;

  const Exemplar& a = pool.by_id("a");
  Vec direct = model.base.embed(a.id, anchor_text(a));
  Vec through = model.embed_anchor(a);
  REQUIRE(direct.size() == through.size());
  for (std::size_t i = 0; i < direct.size(); ++i)
    CHECK(through[i] == doctest::Approx(direct[i]).epsilon(1e-15));
}

TEST_CASE("train is deterministic and reduces the loss") {
  Pool pool = pair_pool();
  auto instances = pair_instances();

  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.learning_rate = 1e-2;
  cfg.epochs = 25;
  cfg.seed = 11;
  cfg.d_out = 4;

  EncoderModel m1 = train(pool, instances, BaseEmbedder::hashing(8, 7), cfg);
  EncoderModel m2 = train(pool, instances, BaseEmbedder::hashing(8, 7), cfg);
  REQUIRE(m1.W.data.size() == m2.W.data.size());
  CHECK(std::memcmp(m1.W.data.data(), m2.W.data.data(),
                    m1.W.data.size() * sizeof(double)) == 0);
  REQUIRE(m1.loss_history.size() == 25);
  CHECK(m1.loss_history == m2.loss_history);
  CHECK(m1.loss_history.back() < m1.loss_history.front());

  TrainConfig other = cfg;
  other.seed = 12;
  EncoderModel m3 = train(pool, instances, BaseEmbedder::hashing(8, 7), other);
  CHECK(std::memcmp(m1.W.data.data(), m3.W.data.data(),
                    m1.W.data.size() * sizeof(double)) != 0);
}

TEST_CASE("train with zero epochs yields the identity-padded init") {
  Pool pool = pair_pool();
  auto instances = pair_instances();
  TrainConfig cfg;
  cfg.epochs = 0;
  cfg.d_out = 3;

  EncoderModel model = train(pool, instances, BaseEmbedder::hashing(8, 7), cfg);
  CHECK(model.loss_history.empty());
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 8; ++c)
      CHECK(model.W.at(r, c) == (r == c ? 1.0 : 0.0));
}

TEST_CASE("train validates its inputs") {
  Pool pool = pair_pool();
  auto instances = pair_instances();
  TrainConfig cfg;

  CHECK_THROWS_AS(train(pool, {}, BaseEmbedder::hashing(8), cfg),
                  ValidationError);
  TrainConfig bad = cfg;
  bad.batch_size = 0;
  CHECK_THROWS_AS(train(pool, instances, BaseEmbedder::hashing(8), bad),
                  ValidationError);
  bad = cfg;
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(train(pool, instances, BaseEmbedder::hashing(8), bad),
                  ValidationError);
  bad = cfg;
  bad.d_out = 0;
  CHECK_THROWS_AS(train(pool, instances, BaseEmbedder::hashing(8), bad),
                  ValidationError);
}

TEST_CASE("model save/load round trip") {
  testutil::TempDir dir("encoder");
  Pool pool = pair_pool();
  auto instances = pair_instances();
  TrainConfig cfg;
  cfg.batch_size = 2;
  cfg.epochs = 3;
  cfg.d_out = 4;
  cfg.seed = 5;
  EncoderModel model = train(pool, instances, BaseEmbedder::hashing(8, 7), cfg);

  std::string path = dir.file("model.json");
  save_model(model, path, "{\"note\": \"test\"}");
  EncoderModel loaded = load_model(path);

  CHECK(loaded.d_in() == 8);
  CHECK(loaded.d_out() == 4);
  CHECK(loaded.W.data == model.W.data);  // exact round trip
  CHECK(loaded.train_config.batch_size == 2);
  CHECK(loaded.train_config.seed == 5);
  CHECK(loaded.loss_history == model.loss_history);
  CHECK(loaded.base.dim() == 8);

  // projections agree bit for bit
  const Exemplar& a = pool.by_id("a");
  CHECK(loaded.embed_anchor(a) == model.embed_anchor(a));

  CHECK_THROWS_AS(load_model(dir.file("missing.json")), Error);
  testutil::write_file(path, "{}");
  CHECK_THROWS_AS(load_model(path), ParseError);
}

TEST_CASE("load_model validates matrix shape and finiteness") {
  testutil::TempDir dir("encoder");
  std::string path = dir.file("bad.json");
  testutil::write_file(
      path,
      "{\"d_in\":2,\"d_out\":1,\"W\":[1.0],"
      "\"base_embedder\":{\"kind\":\"hashing\",\"dim\":2,\"seed\":0},"
      "\"train_config\":{\"batch_size\":1,\"learning_rate\":0.1,\"epochs\":1,"
      "\"seed\":0}}");
  CHECK_THROWS_AS(load_model(path), ValidationError);  // W too small

  testutil::write_file(
      path,
      "{\"d_in\":2,\"d_out\":1,\"W\":[1.0,null],"
      "\"base_embedder\":{\"kind\":\"hashing\",\"dim\":2,\"seed\":0},"
      "\"train_config\":{\"batch_size\":1,\"learning_rate\":0.1,\"epochs\":1,"
      "\"seed\":0}}");
  CHECK_THROWS_AS(load_model(path), Error);

  testutil::write_file(
      path,
      "{\"d_in\":3,\"d_out\":1,\"W\":[1.0,0.0,0.0],"
      "\"base_embedder\":{\"kind\":\"hashing\",\"dim\":2,\"seed\":0},"
      "\"train_config\":{\"batch_size\":1,\"learning_rate\":0.1,\"epochs\":1,"
      "\"seed\":0}}");
  CHECK_THROWS_AS(load_model(path), ValidationError);  // base dim mismatch
}
