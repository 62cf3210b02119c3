#include "fitb/metrics.hpp"

#include <algorithm>

#include <fmt/format.h>
#include <json.hpp>

#include "fitb/error.hpp"

namespace fitb {
namespace {

void check_inputs(std::span<const Ranking> rankings, std::span<const std::size_t> golds) {
  if (rankings.size() != golds.size()) {
    fail(ErrorKind::InvalidArgument,
         fmt::format("{} rankings but {} gold indices", rankings.size(), golds.size()));
  }
  if (rankings.empty()) fail(ErrorKind::InvalidArgument, "no rankings to score");
}

}  // namespace

std::size_t gold_rank(const Ranking& ranking, std::size_t gold) {
  const auto it = std::find(ranking.order.begin(), ranking.order.end(), gold);
  if (it == ranking.order.end()) {
    fail(ErrorKind::InvalidArgument, fmt::format("gold index {} not in ranking of '{}'", gold, ranking.query_id));
  }
  return static_cast<std::size_t>(it - ranking.order.begin()) + 1;
}

double accuracy(std::span<const Ranking> rankings, std::span<const std::size_t> golds) {
  check_inputs(rankings, golds);
  std::size_t hits = 0;
  for (std::size_t q = 0; q < rankings.size(); ++q) hits += gold_rank(rankings[q], golds[q]) == 1 ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double mrr(std::span<const Ranking> rankings, std::span<const std::size_t> golds) {
  check_inputs(rankings, golds);
  double total = 0.0;
  for (std::size_t q = 0; q < rankings.size(); ++q) {
    total += 1.0 / static_cast<double>(gold_rank(rankings[q], golds[q]));
  }
  return total / static_cast<double>(rankings.size());
}

EvalReport evaluate(std::span<const FitbQuery> queries, const ScoringConfig& scoring, const SiameseHead* head,
                    const EmbeddingStore& store, std::size_t threads, Settings config_echo) {
  std::vector<FitbQuery> scorable;
  std::vector<std::size_t> golds;
  for (const auto& query : queries) {
    if (!query.gold_index) continue;
    scorable.push_back(query);
    golds.push_back(*query.gold_index);
  }
  if (scorable.empty()) fail(ErrorKind::NoScorableQueries, "no query carries a gold_index");

  const auto rankings = rank_all(scorable, scoring, head, store, threads);
  EvalReport report;
  report.n_queries = scorable.size();
  report.n_skipped = queries.size() - scorable.size();
  report.accuracy = accuracy(rankings, golds);
  report.mrr = mrr(rankings, golds);
  report.mode = scoring.mode;
  report.scorer = scoring.scorer;
  report.aggregation = scoring.aggregation;
  report.config = std::move(config_echo);
  return report;
}

std::string to_json(const EvalReport& report) {
  nlohmann::ordered_json record;
  record["n_queries"] = report.n_queries;
  record["n_skipped"] = report.n_skipped;
  record["accuracy"] = report.accuracy;
  record["mrr"] = report.mrr;
  record["mode"] = to_string(report.mode);
  record["scorer"] = to_string(report.scorer);
  record["aggregation"] = to_string(report.aggregation);
  record["config"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : report.config) record["config"][key] = value;
  return record.dump();
}

std::string format_table(std::span<const EvalReport> reports) {
  std::string out = fmt::format("{:<6} {:<9} {:<5} {:>8} {:>8} {:>9} {:>9}\n", "mode", "scorer", "agg", "queries",
                                "skipped", "accuracy", "mrr");
  for (const auto& r : reports) {
    out += fmt::format("{:<6} {:<9} {:<5} {:>8} {:>8} {:>9.5f} {:>9.5f}\n", to_string(r.mode), to_string(r.scorer),
                       to_string(r.aggregation), r.n_queries, r.n_skipped, r.accuracy, r.mrr);
  }
  return out;
}

}  // namespace fitb
