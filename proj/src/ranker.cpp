#include "fitb/ranker.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <json.hpp>

#include "fitb/error.hpp"
#include "fitb/loss.hpp"

namespace fitb {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return sum;
}

void normalize_in_place(std::span<double> v, const std::string& product_id) {
  const double norm = std::sqrt(dot(v, v));
  if (!(norm > 0.0)) fail(ErrorKind::ZeroNorm, fmt::format("product '{}' has a zero-norm embedding", product_id));
  for (double& x : v) x /= norm;
}

/// Scores for every candidate of one query; each product is embedded once.
template <class Embed, class Score>
std::vector<double> score_query(const FitbQuery& query, Embed&& embed, Score&& score) {
  std::vector<std::vector<double>> items;
  items.reserve(query.incomplete_outfit.size());
  for (const auto& id : query.incomplete_outfit) items.push_back(embed(id));
  std::vector<double> scores;
  scores.reserve(query.candidates.size());
  for (const auto& candidate : query.candidates) scores.push_back(score(embed(candidate), items));
  return scores;
}

}  // namespace

std::string_view to_string(Scorer scorer) { return scorer == Scorer::TrainedHead ? "head" : "zeroshot"; }

std::string_view to_string(Aggregation aggregation) {
  return aggregation == Aggregation::MeanDistance ? "mean" : "min";
}

Scorer parse_scorer(std::string_view name) {
  if (name == "head") return Scorer::TrainedHead;
  if (name == "zeroshot") return Scorer::ZeroShot;
  fail(ErrorKind::InvalidArgument, fmt::format("unknown scorer '{}' (expected head|zeroshot)", name));
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "mean") return Aggregation::MeanDistance;
  if (name == "min") return Aggregation::MinDistance;
  fail(ErrorKind::InvalidArgument, fmt::format("unknown aggregation '{}' (expected mean|min)", name));
}

double aggregate(std::span<const double> distances, Aggregation aggregation) {
  if (distances.empty()) fail(ErrorKind::InvalidArgument, "cannot aggregate over an empty outfit");
  if (aggregation == Aggregation::MinDistance) return *std::min_element(distances.begin(), distances.end());
  return std::accumulate(distances.begin(), distances.end(), 0.0) / static_cast<double>(distances.size());
}

double score_candidate_model(const SiameseHead& head, const EmbeddingStore& store, RepresentationMode mode,
                             std::span<const std::string> outfit_items, const std::string& candidate,
                             Aggregation aggregation) {
  const auto projected = project(head, assemble_representation(store, candidate, mode));
  std::vector<double> distances;
  distances.reserve(outfit_items.size());
  for (const auto& item : outfit_items) {
    distances.push_back(euclidean_distance(projected, project(head, assemble_representation(store, item, mode))));
  }
  return aggregate(distances, aggregation);
}

std::vector<double> zero_shot_embedding(const EmbeddingStore& store, const std::string& product_id,
                                        RepresentationMode mode) {
  std::vector<double> out;
  for (auto part : modality_parts(store, product_id, mode)) {
    std::vector<double> unit(part.begin(), part.end());
    normalize_in_place(unit, product_id);
    out.insert(out.end(), unit.begin(), unit.end());
  }
  normalize_in_place(out, product_id);
  return out;
}

double score_candidate_zeroshot(const EmbeddingStore& store, RepresentationMode mode,
                                std::span<const std::string> outfit_items, const std::string& candidate) {
  if (outfit_items.empty()) fail(ErrorKind::InvalidArgument, "cannot score against an empty outfit");
  const auto c = zero_shot_embedding(store, candidate, mode);
  double total = 0.0;
  for (const auto& item : outfit_items) total += dot(c, zero_shot_embedding(store, item, mode));
  return total / static_cast<double>(outfit_items.size());
}

std::vector<std::size_t> order_by_scores(std::span<const double> scores, bool ascending) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ascending ? scores[a] < scores[b] : scores[a] > scores[b];
  });
  return order;
}

Ranking rank(const FitbQuery& query, const ScoringConfig& scoring, const SiameseHead* head,
             const EmbeddingStore& store) {
  try {
    validate_query(query);
    std::vector<double> scores;
    if (scoring.scorer == Scorer::TrainedHead) {
      if (head == nullptr) fail(ErrorKind::InvalidArgument, "trained-head scoring needs a head");
      if (head->mode() != scoring.mode) {
        fail(ErrorKind::InvalidArgument, fmt::format("checkpoint was trained for mode '{}', scoring uses '{}'",
                                                     to_string(head->mode()), to_string(scoring.mode)));
      }
      scores = score_query(
          query, [&](const std::string& id) { return project(*head, assemble_representation(store, id, scoring.mode)); },
          [&](const std::vector<double>& c, const std::vector<std::vector<double>>& items) {
            std::vector<double> distances;
            distances.reserve(items.size());
            for (const auto& item : items) distances.push_back(euclidean_distance(c, item));
            return aggregate(distances, scoring.aggregation);
          });
    } else {
      if (head != nullptr) fail(ErrorKind::InvalidArgument, "zero-shot scoring takes no head");
      scores = score_query(
          query, [&](const std::string& id) { return zero_shot_embedding(store, id, scoring.mode); },
          [](const std::vector<double>& c, const std::vector<std::vector<double>>& items) {
            double total = 0.0;
            for (const auto& item : items) total += dot(c, item);
            return total / static_cast<double>(items.size());
          });
    }
    Ranking ranking{query.query_id, order_by_scores(scores, lower_is_better(scoring.scorer)), std::move(scores)};
    return ranking;
  } catch (const Error& e) {
    throw Error(e.kind(), fmt::format("query '{}': {}", query.query_id, e.detail()));
  }
}

std::vector<Ranking> rank_all(std::span<const FitbQuery> queries, const ScoringConfig& scoring,
                              const SiameseHead* head, const EmbeddingStore& store, std::size_t threads) {
  std::vector<Ranking> rankings(queries.size());
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(queries.size(), 1));
  if (workers == 1) {
    for (std::size_t q = 0; q < queries.size(); ++q) rankings[q] = rank(queries[q], scoring, head, store);
    return rankings;
  }

  std::vector<std::exception_ptr> errors(queries.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t q = next++; q < queries.size(); q = next++) {
      try {
        rankings[q] = rank(queries[q], scoring, head, store);
      } catch (...) {
        errors[q] = std::current_exception();
      }
    }
  };
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();  // joins
  // report the first failing query so the error does not depend on scheduling
  for (const auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  return rankings;
}

std::string format_predictions(std::span<const Ranking> rankings) {
  std::string out;
  for (const auto& ranking : rankings) {
    nlohmann::ordered_json record;
    record["query_id"] = ranking.query_id;
    record["ranking"] = ranking.order;
    record["scores"] = ranking.scores;
    out += record.dump();
    out += '\n';
  }
  return out;
}

}  // namespace fitb
