#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fitb/dataset.hpp"
#include "fitb/embedding_store.hpp"
#include "fitb/model.hpp"

namespace fitb {

enum class Scorer { TrainedHead, ZeroShot };
enum class Aggregation { MeanDistance, MinDistance };

std::string_view to_string(Scorer scorer);
std::string_view to_string(Aggregation aggregation);
/// CLI spellings: "head" / "zeroshot", "mean" / "min".
Scorer parse_scorer(std::string_view name);
Aggregation parse_aggregation(std::string_view name);

struct ScoringConfig {
  Scorer scorer = Scorer::TrainedHead;
  Aggregation aggregation = Aggregation::MeanDistance;
  RepresentationMode mode = RepresentationMode::TextAndImage;
};

/// Distances rank ascending, similarities descending.
constexpr bool lower_is_better(Scorer scorer) { return scorer == Scorer::TrainedHead; }

struct Ranking {
  std::string query_id;
  std::vector<std::size_t> order;  // candidate indices, best first
  std::vector<double> scores;      // indexed by candidate

  friend bool operator==(const Ranking&, const Ranking&) = default;
};

/// Mean or min of `distances`; throws InvalidArgument when empty.
double aggregate(std::span<const double> distances, Aggregation aggregation);

/// Aggregated euclidean distance between the candidate's projection and each
/// outfit item's projection. Lower is better.
double score_candidate_model(const SiameseHead& head, const EmbeddingStore& store, RepresentationMode mode,
                             std::span<const std::string> outfit_items, const std::string& candidate,
                             Aggregation aggregation);

/// Unit-normalized raw embedding; for TextAndImage each modality is normalized
/// before concatenation and the result renormalized. Throws ZeroNorm.
std::vector<double> zero_shot_embedding(const EmbeddingStore& store, const std::string& product_id,
                                        RepresentationMode mode);

/// Mean cosine similarity between the candidate and each outfit item on the
/// normalized raw embeddings. Higher is better.
double score_candidate_zeroshot(const EmbeddingStore& store, RepresentationMode mode,
                                std::span<const std::string> outfit_items, const std::string& candidate);

/// Orders candidate indices best-first; exact ties go to the lower index.
std::vector<std::size_t> order_by_scores(std::span<const double> scores, bool ascending);

/// Scores every candidate of `query`. `head` must be non-null exactly when the
/// scorer is TrainedHead, and its mode must match. Errors name the query.
Ranking rank(const FitbQuery& query, const ScoringConfig& scoring, const SiameseHead* head,
             const EmbeddingStore& store);

/// Ranks every query, optionally on `threads` workers; output order follows
/// the input and is independent of the thread count.
std::vector<Ranking> rank_all(std::span<const FitbQuery> queries, const ScoringConfig& scoring,
                              const SiameseHead* head, const EmbeddingStore& store, std::size_t threads = 1);

/// `{"query_id": ..., "ranking": [...], "scores": [...]}` per line.
std::string format_predictions(std::span<const Ranking> rankings);

}  // namespace fitb
