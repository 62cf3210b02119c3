#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fitb/embedding_store.hpp"

namespace fitb {

struct Outfit {
  std::string outfit_id;
  std::vector<std::string> item_ids;

  friend bool operator==(const Outfit&, const Outfit&) = default;
};

struct FitbQuery {
  std::string query_id;
  std::vector<std::string> incomplete_outfit;
  std::vector<std::string> candidates;
  std::optional<std::size_t> gold_index;

  friend bool operator==(const FitbQuery&, const FitbQuery&) = default;
};

struct PairSample {
  std::string id_a;
  std::string id_b;
  int label = 0;  // 1 = same outfit, 0 = no shared outfit

  friend bool operator==(const PairSample&, const PairSample&) = default;
};

// ---------------------------------------------------------------------------
// Line-delimited JSON files
// ---------------------------------------------------------------------------

/// One `{"outfit_id": ..., "items": [...]}` object per line; blank lines are
/// ignored. Errors carry the 1-based line number.
std::vector<Outfit> parse_outfits(std::string_view text, std::string_view source = "<memory>");
std::vector<Outfit> load_outfits(const std::string& path);
std::string format_outfits(const std::vector<Outfit>& outfits);
void write_outfits(const std::vector<Outfit>& outfits, const std::string& path);

std::vector<FitbQuery> parse_queries(std::string_view text, std::string_view source = "<memory>");
std::vector<FitbQuery> load_queries(const std::string& path);
std::string format_queries(const std::vector<FitbQuery>& queries);
void write_queries(const std::vector<FitbQuery>& queries, const std::string& path);

/// Throws MalformedRecord if a query breaks the FitbQuery invariants.
void validate_query(const FitbQuery& query);

// ---------------------------------------------------------------------------
// Co-occurrence
// ---------------------------------------------------------------------------

/// Undirected "shares at least one outfit" relation.
class CooccurrenceIndex {
 public:
  explicit CooccurrenceIndex(const std::vector<Outfit>& outfits);

  bool cooccur(const std::string& a, const std::string& b) const;
  /// Partners of `id` (excluding itself); empty when `id` is unknown.
  const std::unordered_set<std::string>& partners(const std::string& id) const;

 private:
  std::unordered_map<std::string, std::unordered_set<std::string>> partners_;
};

/// Sorted union of every item of every outfit.
std::set<std::string> collect_products(const std::vector<Outfit>& outfits);

// ---------------------------------------------------------------------------
// Splits and queries
// ---------------------------------------------------------------------------

struct OutfitSplit {
  std::vector<Outfit> train;
  std::vector<Outfit> test;
};

/// Seeded shuffle of the outfits, the first round(test_fraction * n) of which
/// (at least one when n >= 2) become the test split. Both halves keep input
/// order.
OutfitSplit split_outfits(const std::vector<Outfit>& outfits, double test_fraction, std::uint64_t seed);

enum class DistractorPool {
  /// Any product that is not an item of the query's outfit.
  NotInOutfit,
  /// Additionally excludes products that share an outfit (in `cooccurrence`)
  /// with any item of the incomplete outfit.
  NonCooccurring,
};

struct QueryGenerationOptions {
  std::size_t n_candidates = 5;
  std::uint64_t seed = 42;
  DistractorPool pool = DistractorPool::NotInOutfit;
  /// Required for DistractorPool::NonCooccurring.
  const CooccurrenceIndex* cooccurrence = nullptr;
};

struct QueryGeneration {
  std::vector<FitbQuery> queries;
  std::size_t skipped = 0;  // outfits with a single item
};

/// Holds out the last item of each outfit as the gold answer and mixes it with
/// n_candidates - 1 uniformly drawn distractors. Throws InsufficientPool when an
/// outfit cannot be given enough distractors.
QueryGeneration generate_fitb_queries(const std::vector<Outfit>& outfits,
                                      const std::set<std::string>& all_products,
                                      const QueryGenerationOptions& options);

// ---------------------------------------------------------------------------
// Pair sampling
// ---------------------------------------------------------------------------

struct PairSamplingOptions {
  std::size_t negatives_per_positive = 1;
  std::size_t max_positives_per_outfit = 15;
  std::uint64_t seed = 42;
};

struct PairSampling {
  std::vector<PairSample> pairs;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t negatives_unfilled = 0;  // endpoints that co-occur with everything
};

/// Positives are within-outfit unordered pairs (capped per outfit). Each
/// positive is followed by its negatives: one endpoint kept, the other replaced
/// by a product that shares no outfit with the kept one.
PairSampling sample_pairs(const std::vector<Outfit>& outfits, const std::set<std::string>& all_products,
                          const PairSamplingOptions& options);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

struct SyntheticOptions {
  std::size_t n_clusters = 8;
  std::size_t products_per_cluster = 20;
  std::size_t outfit_size = 4;
  std::size_t outfits_per_cluster = 40;
  std::size_t d_img = 32;
  std::size_t d_txt = 32;
  double noise_sigma = 0.05;
  /// Pairs clusters (0,1), (2,3), ...; even pairs share the image center, odd
  /// pairs share the text center. Requires an even cluster count.
  bool modality_split = false;
  std::uint64_t seed = 42;
};

struct SyntheticData {
  EmbeddingTable image;
  EmbeddingTable text;
  std::vector<Outfit> outfits;
  std::vector<std::vector<double>> image_centers;
  std::vector<std::vector<double>> text_centers;
  /// cluster index of each product, keyed by product id
  std::unordered_map<std::string, std::size_t> cluster_of;
};

SyntheticData generate_synthetic(const SyntheticOptions& options);

}  // namespace fitb
