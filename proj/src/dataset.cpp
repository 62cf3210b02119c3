#include "fitb/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <json.hpp>

#include "binary_io.hpp"
#include "fitb/error.hpp"
#include "fitb/rng.hpp"

namespace fitb {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void malformed(std::string_view source, std::size_t line_no, const std::string& what) {
  fail(ErrorKind::MalformedRecord, fmt::format("{}:{}: {}", source, line_no, what));
}

std::vector<std::string> string_array(const json& record, const char* key, std::string_view source,
                                      std::size_t line_no) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_array()) malformed(source, line_no, fmt::format("missing string array '{}'", key));
  std::vector<std::string> out;
  out.reserve(it->size());
  for (const auto& element : *it) {
    if (!element.is_string()) malformed(source, line_no, fmt::format("'{}' must contain only strings", key));
    out.push_back(element.get<std::string>());
  }
  return out;
}

std::string string_field(const json& record, const char* key, std::string_view source, std::size_t line_no) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_string()) malformed(source, line_no, fmt::format("missing string field '{}'", key));
  return it->get<std::string>();
}

/// Calls `handle(record, line_no)` for every non-blank line.
template <class Handler>
void for_each_record(std::string_view text, std::string_view source, Handler&& handle) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (record.is_discarded() || !record.is_object()) malformed(source, line_no, "not a JSON object");
    handle(record, line_no);
  }
}

template <class T>
std::size_t count_distinct(const std::vector<T>& values) {
  std::unordered_set<T> seen(values.begin(), values.end());
  return seen.size();
}

}  // namespace

std::vector<Outfit> parse_outfits(std::string_view text, std::string_view source) {
  std::vector<Outfit> outfits;
  std::unordered_set<std::string> outfit_ids;
  for_each_record(text, source, [&](const json& record, std::size_t line_no) {
    Outfit outfit{string_field(record, "outfit_id", source, line_no), string_array(record, "items", source, line_no)};
    if (outfit.item_ids.empty()) malformed(source, line_no, "outfit has no items");
    std::unordered_set<std::string> seen;
    for (const auto& item : outfit.item_ids) {
      if (item.empty()) malformed(source, line_no, "empty item id");
      if (!seen.insert(item).second) {
        fail(ErrorKind::DuplicateItem,
             fmt::format("{}:{}: item '{}' repeated in outfit '{}'", source, line_no, item, outfit.outfit_id));
      }
    }
    if (!outfit_ids.insert(outfit.outfit_id).second) {
      fail(ErrorKind::DuplicateOutfit, fmt::format("{}:{}: duplicate outfit_id '{}'", source, line_no, outfit.outfit_id));
    }
    outfits.push_back(std::move(outfit));
  });
  return outfits;
}

std::vector<Outfit> load_outfits(const std::string& path) { return parse_outfits(detail::read_file(path), path); }

std::string format_outfits(const std::vector<Outfit>& outfits) {
  std::string out;
  for (const auto& outfit : outfits) {
    ordered_json record;
    record["outfit_id"] = outfit.outfit_id;
    record["items"] = outfit.item_ids;
    out += record.dump();
    out += '\n';
  }
  return out;
}

void write_outfits(const std::vector<Outfit>& outfits, const std::string& path) {
  detail::write_file(path, format_outfits(outfits));
}

void validate_query(const FitbQuery& query) {
  auto bad = [&](const std::string& what) {
    fail(ErrorKind::MalformedRecord, fmt::format("query '{}': {}", query.query_id, what));
  };
  if (query.incomplete_outfit.empty()) bad("incomplete_outfit is empty");
  if (query.candidates.size() < 2) bad("fewer than two candidates");
  if (count_distinct(query.candidates) != query.candidates.size()) bad("candidates are not distinct");
  const std::unordered_set<std::string> outfit(query.incomplete_outfit.begin(), query.incomplete_outfit.end());
  for (const auto& candidate : query.candidates) {
    if (outfit.contains(candidate)) bad(fmt::format("candidate '{}' is part of the incomplete outfit", candidate));
  }
  if (query.gold_index && *query.gold_index >= query.candidates.size()) bad("gold_index out of range");
}

std::vector<FitbQuery> parse_queries(std::string_view text, std::string_view source) {
  std::vector<FitbQuery> queries;
  for_each_record(text, source, [&](const json& record, std::size_t line_no) {
    FitbQuery query;
    query.query_id = string_field(record, "query_id", source, line_no);
    query.incomplete_outfit = string_array(record, "incomplete_outfit", source, line_no);
    query.candidates = string_array(record, "candidates", source, line_no);
    if (const auto it = record.find("gold_index"); it != record.end() && !it->is_null()) {
      if (!it->is_number_integer() || it->get<long long>() < 0) {
        malformed(source, line_no, "gold_index must be a non-negative integer");
      }
      query.gold_index = it->get<std::size_t>();
    }
    try {
      validate_query(query);
    } catch (const Error& e) {
      malformed(source, line_no, e.what());
    }
    queries.push_back(std::move(query));
  });
  return queries;
}

std::vector<FitbQuery> load_queries(const std::string& path) { return parse_queries(detail::read_file(path), path); }

std::string format_queries(const std::vector<FitbQuery>& queries) {
  std::string out;
  for (const auto& query : queries) {
    ordered_json record;
    record["query_id"] = query.query_id;
    record["incomplete_outfit"] = query.incomplete_outfit;
    record["candidates"] = query.candidates;
    if (query.gold_index) record["gold_index"] = *query.gold_index;
    out += record.dump();
    out += '\n';
  }
  return out;
}

void write_queries(const std::vector<FitbQuery>& queries, const std::string& path) {
  detail::write_file(path, format_queries(queries));
}

CooccurrenceIndex::CooccurrenceIndex(const std::vector<Outfit>& outfits) {
  for (const auto& outfit : outfits) {
    for (const auto& a : outfit.item_ids) {
      auto& partners = partners_[a];
      for (const auto& b : outfit.item_ids) {
        if (a != b) partners.insert(b);
      }
    }
  }
}

bool CooccurrenceIndex::cooccur(const std::string& a, const std::string& b) const {
  const auto it = partners_.find(a);
  return it != partners_.end() && it->second.contains(b);
}

const std::unordered_set<std::string>& CooccurrenceIndex::partners(const std::string& id) const {
  static const std::unordered_set<std::string> kNone;
  const auto it = partners_.find(id);
  return it == partners_.end() ? kNone : it->second;
}

std::set<std::string> collect_products(const std::vector<Outfit>& outfits) {
  std::set<std::string> products;
  for (const auto& outfit : outfits) products.insert(outfit.item_ids.begin(), outfit.item_ids.end());
  return products;
}

OutfitSplit split_outfits(const std::vector<Outfit>& outfits, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    fail(ErrorKind::InvalidArgument, fmt::format("test fraction {} outside [0, 1)", test_fraction));
  }
  const std::size_t n = outfits.size();
  std::size_t n_test = 0;
  if (n >= 2) {
    n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<bool> is_test(n, false);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;

  OutfitSplit split;
  for (std::size_t i = 0; i < n; ++i) (is_test[i] ? split.test : split.train).push_back(outfits[i]);
  return split;
}

QueryGeneration generate_fitb_queries(const std::vector<Outfit>& outfits, const std::set<std::string>& all_products,
                                      const QueryGenerationOptions& options) {
  if (options.n_candidates < 2) fail(ErrorKind::InvalidArgument, "n_candidates must be at least 2");
  if (options.pool == DistractorPool::NonCooccurring && options.cooccurrence == nullptr) {
    fail(ErrorKind::InvalidArgument, "non-co-occurring distractor pool needs a co-occurrence index");
  }
  const std::vector<std::string> products(all_products.begin(), all_products.end());
  const std::size_t n_distractors = options.n_candidates - 1;
  Rng rng(options.seed);

  QueryGeneration result;
  for (const auto& outfit : outfits) {
    if (outfit.item_ids.size() < 2) {
      ++result.skipped;
      continue;
    }
    FitbQuery query;
    query.query_id = outfit.outfit_id;
    query.incomplete_outfit.assign(outfit.item_ids.begin(), outfit.item_ids.end() - 1);
    const std::string& gold = outfit.item_ids.back();

    std::unordered_set<std::string> excluded(outfit.item_ids.begin(), outfit.item_ids.end());
    if (options.pool == DistractorPool::NonCooccurring) {
      for (const auto& item : query.incomplete_outfit) {
        const auto& partners = options.cooccurrence->partners(item);
        excluded.insert(partners.begin(), partners.end());
      }
    }
    std::size_t excluded_present = 0;
    for (const auto& id : excluded) excluded_present += all_products.contains(id) ? 1 : 0;
    const std::size_t pool_size = products.size() - excluded_present;
    if (pool_size < n_distractors) {
      fail(ErrorKind::InsufficientPool,
           fmt::format("outfit '{}' needs {} distractors but only {} products are eligible", outfit.outfit_id,
                       n_distractors, pool_size));
    }

    std::vector<std::string> candidates{gold};
    if (2 * pool_size >= products.size()) {
      std::unordered_set<std::size_t> chosen;
      while (candidates.size() < options.n_candidates) {
        const std::size_t pick = rng.uniform_index(products.size());
        if (excluded.contains(products[pick]) || !chosen.insert(pick).second) continue;
        candidates.push_back(products[pick]);
      }
    } else {
      std::vector<std::size_t> pool;
      pool.reserve(pool_size);
      for (std::size_t i = 0; i < products.size(); ++i) {
        if (!excluded.contains(products[i])) pool.push_back(i);
      }
      for (std::size_t k = 0; k < n_distractors; ++k) {
        const std::size_t j = k + rng.uniform_index(pool.size() - k);
        std::swap(pool[k], pool[j]);
        candidates.push_back(products[pool[k]]);
      }
    }
    rng.shuffle(candidates);
    query.gold_index =
        static_cast<std::size_t>(std::find(candidates.begin(), candidates.end(), gold) - candidates.begin());
    query.candidates = std::move(candidates);
    result.queries.push_back(std::move(query));
  }
  return result;
}

PairSampling sample_pairs(const std::vector<Outfit>& outfits, const std::set<std::string>& all_products,
                          const PairSamplingOptions& options) {
  if (options.negatives_per_positive < 1) fail(ErrorKind::InvalidArgument, "negatives_per_positive must be >= 1");
  if (options.max_positives_per_outfit < 1) fail(ErrorKind::InvalidArgument, "max_positives_per_outfit must be >= 1");

  const CooccurrenceIndex cooccurrence(outfits);
  const std::vector<std::string> products(all_products.begin(), all_products.end());
  Rng rng(options.seed);
  constexpr int kRejectionAttempts = 64;

  auto draw_negative_partner = [&](const std::string& keep) -> std::optional<std::string> {
    auto eligible = [&](const std::string& id) { return id != keep && !cooccurrence.cooccur(keep, id); };
    if (products.empty()) return std::nullopt;
    for (int attempt = 0; attempt < kRejectionAttempts; ++attempt) {
      const std::string& pick = products[rng.uniform_index(products.size())];
      if (eligible(pick)) return pick;
    }
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < products.size(); ++i) {
      if (eligible(products[i])) pool.push_back(i);
    }
    if (pool.empty()) return std::nullopt;
    return products[pool[rng.uniform_index(pool.size())]];
  };

  PairSampling result;
  for (const auto& outfit : outfits) {
    const auto& items = outfit.item_ids;
    const std::size_t n = items.size();
    std::vector<std::pair<std::size_t, std::size_t>> within;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) within.emplace_back(i, j);
    }
    if (within.size() > options.max_positives_per_outfit) {
      for (std::size_t k = 0; k < options.max_positives_per_outfit; ++k) {
        const std::size_t j = k + rng.uniform_index(within.size() - k);
        std::swap(within[k], within[j]);
      }
      within.resize(options.max_positives_per_outfit);
      std::sort(within.begin(), within.end());
    }
    for (const auto& [i, j] : within) {
      result.pairs.push_back({items[i], items[j], 1});
      ++result.positives;
      for (std::size_t r = 0; r < options.negatives_per_positive; ++r) {
        const std::string& keep = rng.coin() ? items[i] : items[j];
        auto partner = draw_negative_partner(keep);
        if (!partner) {
          ++result.negatives_unfilled;
          continue;
        }
        result.pairs.push_back({keep, std::move(*partner), 0});
        ++result.negatives;
      }
    }
  }
  return result;
}

SyntheticData generate_synthetic(const SyntheticOptions& options) {
  auto require = [](bool ok, const char* what) {
    if (!ok) fail(ErrorKind::InvalidArgument, what);
  };
  require(options.n_clusters > 0, "n_clusters must be positive");
  require(options.products_per_cluster > 0, "products_per_cluster must be positive");
  require(options.outfit_size > 0, "outfit_size must be positive");
  require(options.outfits_per_cluster > 0, "outfits_per_cluster must be positive");
  require(options.d_img > 0 && options.d_txt > 0, "dimensions must be positive");
  require(options.outfit_size <= options.products_per_cluster, "outfit_size exceeds products_per_cluster");
  require(std::isfinite(options.noise_sigma) && options.noise_sigma >= 0.0, "noise_sigma must be finite and >= 0");
  require(!options.modality_split || options.n_clusters % 2 == 0, "modality_split needs an even number of clusters");

  Rng rng(options.seed);
  auto unit_vector = [&](std::size_t dim) {
    std::vector<double> v(dim);
    double norm = 0.0;
    while (norm == 0.0) {
      norm = 0.0;
      for (auto& x : v) {
        x = rng.normal();
        norm += x * x;
      }
      norm = std::sqrt(norm);
    }
    for (auto& x : v) x /= norm;
    return v;
  };

  SyntheticData data{EmbeddingTable(options.d_img), EmbeddingTable(options.d_txt), {}, {}, {}, {}};
  for (std::size_t k = 0; k < options.n_clusters; ++k) {
    data.image_centers.push_back(unit_vector(options.d_img));
    data.text_centers.push_back(unit_vector(options.d_txt));
    if (options.modality_split && k % 2 == 1) {
      // pair k/2: even pairs differ only in text, odd pairs only in image
      if ((k / 2) % 2 == 0) {
        data.image_centers[k] = data.image_centers[k - 1];
      } else {
        data.text_centers[k] = data.text_centers[k - 1];
      }
    }
  }

  // Values are rounded through float so the in-memory tables equal what an
  // FEMB round trip produces.
  auto noisy = [&](const std::vector<double>& center) {
    std::vector<double> v(center.size());
    for (std::size_t c = 0; c < v.size(); ++c) {
      v[c] = static_cast<double>(static_cast<float>(center[c] + options.noise_sigma * rng.normal()));
    }
    return v;
  };

  std::vector<std::vector<std::string>> members(options.n_clusters);
  for (std::size_t k = 0; k < options.n_clusters; ++k) {
    for (std::size_t i = 0; i < options.products_per_cluster; ++i) {
      std::string id = fmt::format("c{:03}_p{:03}", k, i);
      data.image.add(id, noisy(data.image_centers[k]));
      data.text.add(id, noisy(data.text_centers[k]));
      data.cluster_of.emplace(id, k);
      members[k].push_back(std::move(id));
    }
  }

  for (std::size_t k = 0; k < options.n_clusters; ++k) {
    std::vector<std::size_t> slots(options.products_per_cluster);
    for (std::size_t j = 0; j < options.outfits_per_cluster; ++j) {
      std::iota(slots.begin(), slots.end(), 0);
      Outfit outfit{fmt::format("o{:03}_{:03}", k, j), {}};
      for (std::size_t s = 0; s < options.outfit_size; ++s) {
        const std::size_t pick = s + rng.uniform_index(slots.size() - s);
        std::swap(slots[s], slots[pick]);
        outfit.item_ids.push_back(members[k][slots[s]]);
      }
      data.outfits.push_back(std::move(outfit));
    }
  }
  return data;
}

}  // namespace fitb
