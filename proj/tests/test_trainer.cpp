#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fitb/error.hpp"
#include "fitb/optimizer.hpp"
#include "fitb/rng.hpp"
#include "fitb/trainer.hpp"
#include "test_support.hpp"

using namespace fitb;
using fitb::testing::error_kind;

namespace {

std::vector<PairSample> numbered_pairs(std::size_t n) {
  std::vector<PairSample> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.push_back({"a" + std::to_string(i), "b" + std::to_string(i), int(i % 2)});
  return pairs;
}

EmbeddingStore two_point_store() {
  EmbeddingTable text(2);
  text.add("a", std::vector<double>{1.0, 1.0});
  text.add("b", std::vector<double>{0.0, 0.0});
  return EmbeddingStore(std::nullopt, std::move(text));
}

struct SmallWorld {
  SyntheticData data;
  EmbeddingStore store;
};

SmallWorld small_world(double noise, std::size_t products_per_cluster = 10, std::size_t outfits_per_cluster = 10) {
  SyntheticOptions opts;
  opts.n_clusters = 4;
  opts.products_per_cluster = products_per_cluster;
  opts.outfits_per_cluster = outfits_per_cluster;
  opts.d_img = 8;
  opts.d_txt = 8;
  opts.noise_sigma = noise;
  auto data = generate_synthetic(opts);
  EmbeddingStore store(data.image, data.text);
  return {std::move(data), std::move(store)};
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.layer_dims = {32, 16};
  cfg.batch_size = 32;
  return cfg;
}

}  // namespace

TEST_CASE("make_batches sizes and coverage") {
  const auto pairs = numbered_pairs(10);
  const auto batches = make_batches(pairs, 4, 0, 1);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].size() == 4);
  CHECK(batches[1].size() == 4);
  CHECK(batches[2].size() == 2);
  std::set<std::string> seen;
  for (const auto& b : batches) {
    for (const auto& p : b) seen.insert(p.id_a);
  }
  CHECK(seen.size() == 10);
  CHECK(error_kind([&] { make_batches(pairs, 0, 0, 1); }) == ErrorKind::InvalidArgument);
  CHECK(make_batches(std::span<const PairSample>{}, 4, 0, 1).empty());
}

TEST_CASE("make_batches is keyed by seed and epoch") {
  const auto pairs = numbered_pairs(100);
  const auto first = make_batches(pairs, 100, 0, 42);
  CHECK(first == make_batches(pairs, 100, 0, 42));
  CHECK(first != make_batches(pairs, 100, 1, 42));
  CHECK(first != make_batches(pairs, 100, 0, 43));
}

TEST_CASE("optimizer steps") {
  SUBCASE("plain SGD") {
    OptimizerState sgd(SgdConfig{0.1, 0.0}, 3);
    std::vector<double> p{1.0, 2.0, 3.0};
    sgd.step(p, std::vector<double>{1.0, -2.0, 0.0});
    CHECK(p[0] == doctest::Approx(0.9));
    CHECK(p[1] == doctest::Approx(2.2));
    CHECK(p[2] == 3.0);
    const auto before = p;
    sgd.step(p, std::vector<double>{0.0, 0.0, 0.0});
    CHECK(p == before);
  }
  SUBCASE("SGD momentum accumulates velocity") {
    OptimizerState sgd(SgdConfig{0.1, 0.5}, 1);
    std::vector<double> p{0.0};
    sgd.step(p, std::vector<double>{1.0});  // v = -0.1
    sgd.step(p, std::vector<double>{1.0});  // v = -0.05 - 0.1
    CHECK(p[0] == doctest::Approx(-0.25));
  }
  SUBCASE("Adam first step moves each component by about lr") {
    const double lr = 1e-3;
    OptimizerState adam(AdamConfig{lr}, 4);
    std::vector<double> p{0.0, 0.0, 0.0, 0.0};
    const std::vector<double> g{0.5, -3.0, 1e-2, 100.0};
    adam.step(p, g);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(std::abs(p[k]) == doctest::Approx(lr).epsilon(1e-4));
      CHECK((p[k] < 0) == (g[k] > 0));
    }
    CHECK(adam.steps() == 1);
  }
  SUBCASE("shape mismatch") {
    OptimizerState adam(AdamConfig{}, 2);
    std::vector<double> p{0.0, 0.0};
    CHECK(error_kind([&] { adam.step(p, std::vector<double>{1.0}); }) == ErrorKind::ShapeMismatch);
  }
}

TEST_CASE("train_step: zero learning rate leaves parameters unchanged") {
  const auto store = two_point_store();
  auto head = init_head({2, {3, 2}}, 7, RepresentationMode::TextOnly);
  const auto before = head;
  OptimizerState sgd(SgdConfig{0.0, 0.0}, head.parameter_count());
  const std::vector<PairSample> batch{{"a", "b", 1}, {"a", "b", 0}};
  const double loss = train_step(head, batch, store, RepresentationMode::TextOnly, sgd, LossConfig{});
  CHECK(head == before);
  CHECK(loss > 0.0);
}

TEST_CASE("train_step: coincident positive pair is a zero-gradient step") {
  const auto store = two_point_store();
  auto head = init_head({2, {3, 2}}, 7, RepresentationMode::TextOnly);
  const auto before = head;
  OptimizerState sgd(SgdConfig{0.5, 0.0}, head.parameter_count());
  const std::vector<PairSample> batch{{"a", "a", 1}};
  CHECK(train_step(head, batch, store, RepresentationMode::TextOnly, sgd, LossConfig{}) == 0.0);
  CHECK(head == before);
}

TEST_CASE("train_step: hand-computed SGD update on a one-layer head") {
  // W = [[1,2],[0,1]], b = 0, x_a = (1,1), x_b = (0,0), positive pair.
  // W(x_a - x_b) = (3,1), loss = 10, dL/dW = 2 (3,1)^T (1,1) = [[6,6],[2,2]], dL/db = 0.
  const auto store = two_point_store();
  SiameseHead head({{2, 2, Activation::Linear}}, RepresentationMode::TextOnly);
  auto w = head.weights(0);
  w[0] = 1;
  w[1] = 2;
  w[2] = 0;
  w[3] = 1;
  OptimizerState sgd(SgdConfig{0.1, 0.0}, head.parameter_count());
  const std::vector<PairSample> batch{{"a", "b", 1}};
  CHECK(train_step(head, batch, store, RepresentationMode::TextOnly, sgd, LossConfig{}) == doctest::Approx(10.0));
  const auto updated = head.weights(0);
  CHECK(updated[0] == doctest::Approx(0.4));
  CHECK(updated[1] == doctest::Approx(1.4));
  CHECK(updated[2] == doctest::Approx(-0.2));
  CHECK(updated[3] == doctest::Approx(0.8));
  CHECK(head.bias(0)[0] == 0.0);
  CHECK(head.bias(0)[1] == 0.0);
}

TEST_CASE("train_step: missing product names the id") {
  const auto store = two_point_store();
  auto head = init_head({2, {2}}, 1, RepresentationMode::TextOnly);
  OptimizerState sgd(SgdConfig{}, head.parameter_count());
  const std::vector<PairSample> batch{{"a", "ghost", 1}};
  try {
    train_step(head, batch, store, RepresentationMode::TextOnly, sgd, LossConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingProduct);
    CHECK(std::string(e.what()).find("ghost") != std::string::npos);
  }
}

TEST_CASE("pair gradient accumulates both twins into the shared parameters") {
  Rng rng(11);
  const double h = 1e-6;
  for (int t = 0; t < 20; ++t) {
    auto head = init_head({5, {6, 3}}, rng.next());
    for (std::size_t l = 0; l < 2; ++l) {
      for (double& b : head.bias(l)) b = rng.uniform(-0.3, 0.3);
    }
    std::vector<double> xa(5), xb(5);
    for (auto& v : xa) v = rng.normal();
    for (auto& v : xb) v = rng.normal();
    const int label = t % 2;
    const LossConfig loss{3.0};
    const double d = euclidean_distance(project(head, xa), project(head, xb));
    if (std::abs(d - loss.margin) < 1e-2) continue;

    std::vector<double> grads(head.parameter_count(), 0.0);
    accumulate_pair_gradient(head, xa, xb, label, loss, grads);
    for (std::size_t i = 0; i < head.parameter_count(); ++i) {
      auto plus = head;
      auto minus = head;
      plus.parameters()[i] += h;
      minus.parameters()[i] -= h;
      const double numeric = (contrastive_loss(project(plus, xa), project(plus, xb), label, loss) -
                              contrastive_loss(project(minus, xa), project(minus, xb), label, loss)) /
                             (2 * h);
      CHECK(std::abs(grads[i] - numeric) <= 1e-5 * std::max({1.0, std::abs(numeric)}));
    }
  }
}

TEST_CASE("train: config validation") {
  TrainConfig cfg;
  cfg.epochs = 0;
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::InvalidArgument);
  cfg = {};
  cfg.batch_size = 0;
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::InvalidArgument);
  cfg = {};
  cfg.optimizer = SgdConfig{0.1, 1.0};
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::InvalidArgument);
  cfg = {};
  cfg.layer_dims = {};
  CHECK(error_kind([&] { cfg.validate(); }) == ErrorKind::InvalidArgument);
  CHECK_FALSE(error_kind([] { TrainConfig{}.validate(); }).has_value());
}

TEST_CASE("train: failures") {
  auto world = small_world(0.05);
  SUBCASE("no trainable pairs") {
    std::vector<Outfit> singles{{"o1", {"c000_p000"}}, {"o2", {"c001_p000"}}};
    CHECK(error_kind([&] { train(singles, world.store, small_config()); }) == ErrorKind::NoTrainablePairs);
  }
  SUBCASE("missing product") {
    std::vector<Outfit> outfits{{"o1", {"c000_p000", "nope"}}};
    CHECK(error_kind([&] { train(outfits, world.store, small_config()); }) == ErrorKind::MissingProduct);
  }
  SUBCASE("missing modality") {
    EmbeddingStore image_only(world.data.image, std::nullopt);
    CHECK(error_kind([&] { train(world.data.outfits, image_only, small_config()); }) == ErrorKind::MissingProduct);
  }
}

TEST_CASE("train: same seed gives byte-identical checkpoints") {
  auto world = small_world(0.05);
  auto cfg = small_config();
  cfg.epochs = 3;
  const auto a = train(world.data.outfits, world.store, cfg);
  const auto b = train(world.data.outfits, world.store, cfg);
  CHECK(encode_checkpoint(a.head) == encode_checkpoint(b.head));
  CHECK(a.epoch_losses == b.epoch_losses);
  CHECK(a.head.mode() == RepresentationMode::TextAndImage);
  CHECK(a.n_pairs == a.n_positive + a.n_negative);
  cfg.seed = 43;
  CHECK(encode_checkpoint(train(world.data.outfits, world.store, cfg).head) != encode_checkpoint(a.head));

  cfg.seed = 42;
  cfg.resample_pairs = true;
  const auto r1 = train(world.data.outfits, world.store, cfg);
  const auto r2 = train(world.data.outfits, world.store, cfg);
  CHECK(encode_checkpoint(r1.head) == encode_checkpoint(r2.head));
}

TEST_CASE("train: zero-noise clusters drive the loss down") {
  // With 6 products per cluster and 20 outfits of 4, every same-cluster pair
  // shares an outfit, so all negatives cross clusters and the data is separable.
  auto world = small_world(0.0, 6, 20);
  for (double margin : {1.0, 3.0}) {
    CAPTURE(margin);
    auto cfg = small_config();
    cfg.loss.margin = margin;
    std::vector<double> seen;
    const auto report =
        train(world.data.outfits, world.store, cfg, [&](std::size_t, double l) { seen.push_back(l); });
    REQUIRE(report.epoch_losses.size() == 10);
    CHECK(seen == report.epoch_losses);
    for (std::size_t e = 1; e < report.epoch_losses.size(); ++e) {
      INFO("epoch " << e + 1);
      CHECK(report.epoch_losses[e] <= report.epoch_losses[e - 1]);
    }
    CHECK(report.epoch_losses.back() < 0.1 * report.epoch_losses.front());
    const std::size_t batches_per_epoch = (report.n_pairs + cfg.batch_size - 1) / cfg.batch_size;
    CHECK(report.n_steps == 10 * batches_per_epoch);

    // one parameter set serves both twins: a product projects identically twice
    const auto x = assemble_representation(world.store, "c000_p000", cfg.mode);
    CHECK(project(report.head, x) == project(report.head, x));
  }
}

TEST_CASE("train: same-cluster negatives keep the loss off zero") {
  // Zero noise makes same-cluster products identical; a same-cluster pair that
  // never co-occurs is a negative at distance 0 whatever the head does.
  auto world = small_world(0.0);
  const auto report = train(world.data.outfits, world.store, small_config());
  CHECK(report.epoch_losses.back() > 0.0);
}

TEST_CASE("train settings overlay and echo") {
  Settings s{{"epochs", "3"}, {"optimizer", "sgd"}, {"lr", "0.05"}, {"momentum", "0.9"}, {"layers", "16,4"},
             {"mode", "text"}, {"resample-pairs", "true"}, {"margin", "2"}};
  const auto cfg = train_config_from_settings(s);
  CHECK(cfg.epochs == 3);
  REQUIRE(std::holds_alternative<SgdConfig>(cfg.optimizer));
  CHECK(std::get<SgdConfig>(cfg.optimizer).lr == 0.05);
  CHECK(std::get<SgdConfig>(cfg.optimizer).momentum == 0.9);
  CHECK(cfg.layer_dims == std::vector<std::size_t>{16, 4});
  CHECK(cfg.mode == RepresentationMode::TextOnly);
  CHECK(cfg.resample_pairs);
  CHECK(cfg.loss.margin == 2.0);
  CHECK(cfg.batch_size == TrainConfig{}.batch_size);

  const auto echoed = train_config_from_settings(to_settings(cfg));
  CHECK(to_settings(echoed) == to_settings(cfg));
  for (const auto& [key, value] : to_settings(TrainConfig{})) {
    CHECK(std::find(train_setting_keys().begin(), train_setting_keys().end(), key) != train_setting_keys().end());
  }

  CHECK(error_kind([] { train_config_from_settings({{"epochs", "three"}}); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind([] { train_config_from_settings({{"optimizer", "rmsprop"}}); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind([] { train_config_from_settings({{"layers", "4,,2"}}); }) == ErrorKind::InvalidArgument);
}
