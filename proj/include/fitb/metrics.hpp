#pragma once

#include <span>
#include <string>
#include <vector>

#include "fitb/config.hpp"
#include "fitb/dataset.hpp"
#include "fitb/ranker.hpp"

namespace fitb {

/// 1-based position of `gold` in the ranking.
std::size_t gold_rank(const Ranking& ranking, std::size_t gold);

/// Fraction of rankings whose top index is the gold index.
double accuracy(std::span<const Ranking> rankings, std::span<const std::size_t> golds);

/// Mean over queries of 1 / gold_rank.
double mrr(std::span<const Ranking> rankings, std::span<const std::size_t> golds);

struct EvalReport {
  std::size_t n_queries = 0;  // ranked queries (those with a gold index)
  std::size_t n_skipped = 0;  // queries without a gold index
  double accuracy = 0.0;
  double mrr = 0.0;
  RepresentationMode mode = RepresentationMode::TextAndImage;
  Scorer scorer = Scorer::TrainedHead;
  Aggregation aggregation = Aggregation::MeanDistance;
  Settings config;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Ranks every gold-bearing query and scores it. Throws NoScorableQueries when
/// none carries a gold index.
EvalReport evaluate(std::span<const FitbQuery> queries, const ScoringConfig& scoring, const SiameseHead* head,
                    const EmbeddingStore& store, std::size_t threads = 1, Settings config_echo = {});

/// Single-line JSON record.
std::string to_json(const EvalReport& report);

/// Fixed-width table, one row per report.
std::string format_table(std::span<const EvalReport> reports);

}  // namespace fitb
