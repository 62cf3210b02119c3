#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "fitb/error.hpp"
#include "fitb/metrics.hpp"
#include "fitb/rng.hpp"
#include "oracles.hpp"
#include "test_support.hpp"

using namespace fitb;
using fitb::testing::error_kind;

namespace {

Ranking ranked(std::vector<std::size_t> order) {
  Ranking r;
  r.scores.assign(order.size(), 0.0);
  r.order = std::move(order);
  return r;
}

EmbeddingStore line_store(std::size_t n) {
  EmbeddingTable text(2);
  for (std::size_t i = 0; i < n; ++i) {
    text.add("p" + std::to_string(i), std::vector<double>{std::cos(0.3 * double(i)), std::sin(0.3 * double(i))});
  }
  return EmbeddingStore(std::nullopt, std::move(text));
}

}  // namespace

TEST_CASE("gold_rank, accuracy and mrr: worked values") {
  const std::vector<Ranking> rankings{ranked({2, 0, 1}), ranked({0, 1, 2}), ranked({1, 2, 0}), ranked({1, 0, 2})};
  CHECK(gold_rank(rankings[0], 2) == 1);
  CHECK(gold_rank(rankings[0], 1) == 3);
  CHECK(error_kind([&] { gold_rank(rankings[0], 7); }) == ErrorKind::InvalidArgument);

  CHECK(accuracy(rankings, std::vector<std::size_t>{2, 0, 1, 1}) == 1.0);
  CHECK(mrr(rankings, std::vector<std::size_t>{2, 0, 1, 1}) == 1.0);
  CHECK(accuracy(rankings, std::vector<std::size_t>{0, 1, 2, 2}) == 0.0);
  CHECK(accuracy(rankings, std::vector<std::size_t>{2, 1, 2, 2}) == 0.25);

  const std::vector<Ranking> two{ranked({1, 0, 2, 3}), ranked({3, 2, 1, 0})};
  CHECK(mrr(two, std::vector<std::size_t>{0, 0}) == doctest::Approx(0.375));

  CHECK(error_kind([&] { accuracy(rankings, std::vector<std::size_t>{0}); }) == ErrorKind::InvalidArgument);
  CHECK(error_kind([] { mrr(std::vector<Ranking>{}, std::vector<std::size_t>{}); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("mrr of a uniformly random ranking over 5 candidates") {
  std::vector<std::size_t> perm{0, 1, 2, 3, 4};
  std::vector<Ranking> all;
  do all.push_back(ranked(perm));
  while (std::next_permutation(perm.begin(), perm.end()));
  REQUIRE(all.size() == 120);
  const std::vector<std::size_t> golds(all.size(), 3);
  CHECK(mrr(all, golds) == doctest::Approx((1 + 1.0 / 2 + 1.0 / 3 + 1.0 / 4 + 1.0 / 5) / 5).epsilon(1e-12));
  CHECK(mrr(all, golds) == doctest::Approx(0.45667).epsilon(1e-5));
  CHECK(accuracy(all, golds) == doctest::Approx(0.2));
}

TEST_CASE("evaluate: bookkeeping") {
  const auto store = line_store(6);
  const ScoringConfig zs{Scorer::ZeroShot, Aggregation::MeanDistance, RepresentationMode::TextOnly};
  const FitbQuery hit{"hit", {"p0"}, {"p1", "p5"}, 0};
  auto report = evaluate(std::vector<FitbQuery>{hit}, zs, nullptr, store);
  CHECK(report.n_queries == 1);
  CHECK(report.n_skipped == 0);
  CHECK(report.accuracy == 1.0);
  CHECK(report.mrr == 1.0);

  const FitbQuery unlabeled{"u", {"p0"}, {"p1", "p5"}, std::nullopt};
  const FitbQuery miss{"miss", {"p0"}, {"p1", "p5"}, 1};
  report = evaluate(std::vector<FitbQuery>{hit, unlabeled, miss, unlabeled}, zs, nullptr, store, 2, {{"seed", "4"}});
  CHECK(report.n_queries == 2);
  CHECK(report.n_skipped == 2);
  CHECK(report.accuracy == 0.5);
  CHECK(report.mrr == 0.75);
  CHECK(report.scorer == Scorer::ZeroShot);
  CHECK(report.mode == RepresentationMode::TextOnly);
  CHECK(report.config.at("seed") == "4");
  CHECK(to_json(report) ==
        R"({"n_queries":2,"n_skipped":2,"accuracy":0.5,"mrr":0.75,"mode":"text","scorer":"zeroshot",)"
        R"("aggregation":"mean","config":{"seed":"4"}})");
  const std::vector<EvalReport> table{report};
  CHECK(format_table(table).find("0.75000") != std::string::npos);

  CHECK(error_kind([&] { evaluate(std::vector<FitbQuery>{unlabeled}, zs, nullptr, store); }) ==
        ErrorKind::NoScorableQueries);
}

TEST_CASE("evaluate agrees with a brute-force reimplementation") {
  Rng rng(20);
  const std::size_t n = 16;
  const auto store = line_store(n);
  const auto head = init_head({2, {4, 3}}, 8, RepresentationMode::TextOnly);
  std::vector<FitbQuery> queries;
  for (std::size_t q = 0; q < 20; ++q) {
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("p" + std::to_string(i));
    rng.shuffle(ids);
    FitbQuery query{"q" + std::to_string(q), {ids[0], ids[1]}, {ids.begin() + 2, ids.begin() + 7}, rng.uniform_index(5)};
    queries.push_back(query);
  }
  for (auto scorer : {Scorer::TrainedHead, Scorer::ZeroShot}) {
    const ScoringConfig scoring{scorer, Aggregation::MeanDistance, RepresentationMode::TextOnly};
    const SiameseHead* h = scorer == Scorer::TrainedHead ? &head : nullptr;
    std::vector<std::vector<std::size_t>> orders;
    std::vector<std::size_t> golds;
    for (const auto& q : queries) {
      std::vector<double> scores;
      for (const auto& c : q.candidates) scores.push_back(oracle::candidate_score(scoring, h, store, q.incomplete_outfit, c));
      orders.push_back(oracle::brute_force_order(scores, lower_is_better(scorer)));
      golds.push_back(*q.gold_index);
    }
    const auto expected = oracle::brute_force_metrics(orders, golds);
    const auto report = evaluate(queries, scoring, h, store);
    CHECK(report.accuracy == doctest::Approx(expected.accuracy).epsilon(1e-12));
    CHECK(report.mrr == doctest::Approx(expected.mrr).epsilon(1e-12));
    CHECK(report.mrr >= report.accuracy);

    auto shuffled = queries;
    rng.shuffle(shuffled);
    const auto again = evaluate(shuffled, scoring, h, store);
    CHECK(again.accuracy == doctest::Approx(report.accuracy).epsilon(1e-12));
    CHECK(again.mrr == doctest::Approx(report.mrr).epsilon(1e-12));
  }
}

TEST_CASE("mrr is never below accuracy") {
  Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    std::vector<Ranking> rankings;
    std::vector<std::size_t> golds;
    const std::size_t nq = 1 + rng.uniform_index(10);
    for (std::size_t q = 0; q < nq; ++q) {
      std::vector<std::size_t> order(2 + rng.uniform_index(5));
      std::iota(order.begin(), order.end(), 0);
      rng.shuffle(order);
      golds.push_back(rng.uniform_index(order.size()));
      rankings.push_back(ranked(std::move(order)));
    }
    CHECK(mrr(rankings, golds) >= accuracy(rankings, golds));
  }
}
