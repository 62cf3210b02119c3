#include "fitb/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "fitb/config.hpp"
#include "fitb/dataset.hpp"
#include "fitb/embedding_store.hpp"
#include "fitb/error.hpp"
#include "fitb/metrics.hpp"
#include "fitb/model.hpp"
#include "fitb/ranker.hpp"
#include "fitb/rng.hpp"
#include "fitb/trainer.hpp"

namespace fitb::cli {
namespace {

namespace fs = std::filesystem;

constexpr const char* kDefaultSeed = "42";

/// Usage problems detected after parsing (missing companion flags, bad values).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct OptionSpec {
  std::string key;
  std::optional<std::string> default_value;
  std::string help;
  bool is_flag = false;
};

/// One subcommand: its options, and the flag > config file > default
/// resolution of their values.
class Command {
 public:
  Command(const Command&) = delete;
  Command& operator=(const Command&) = delete;

  Command(CLI::App& app, std::string name, std::string description, std::vector<OptionSpec> specs)
      : specs_(std::move(specs)) {
    sub_ = app.add_subcommand(std::move(name), std::move(description));
    sub_->add_option("--config", config_path_, "key=value settings file (flags take precedence)");
    for (const auto& spec : specs_) {
      std::string help = spec.help;
      if (spec.default_value) help += fmt::format(" [default: {}]", *spec.default_value);
      if (spec.is_flag) {
        options_[spec.key] = sub_->add_flag("--" + spec.key, flags_[spec.key], help);
      } else {
        options_[spec.key] = sub_->add_option("--" + spec.key, values_[spec.key], help);
      }
    }
  }

  CLI::App* app() const { return sub_; }
  bool parsed() const { return sub_->parsed(); }
  bool knows(const std::string& key) const { return options_.contains(key); }

  /// Effective settings plus where each value came from.
  Settings resolve(const std::function<bool(const std::string&)>& known_elsewhere) {
    Settings file;
    if (!config_path_.empty()) {
      try {
        file = load_settings(config_path_);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Io) throw;
        throw UsageError(e.what());
      }
    }
    for (const auto& [key, value] : file) {
      if (!knows(key) && !known_elsewhere(key)) throw UsageError(fmt::format("{}: unknown key '{}'", config_path_, key));
    }
    Settings effective;
    for (const auto& spec : specs_) {
      const CLI::Option* opt = options_.at(spec.key);
      if (opt->count() > 0) {
        effective[spec.key] = spec.is_flag ? "true" : values_.at(spec.key);
        provenance_[spec.key] = "flag";
      } else if (auto it = file.find(spec.key); it != file.end()) {
        effective[spec.key] = it->second;
        provenance_[spec.key] = "config";
      } else if (spec.default_value) {
        effective[spec.key] = *spec.default_value;
        provenance_[spec.key] = "default";
      }
    }
    return effective;
  }

  void log_effective(const Settings& effective) const {
    std::string line;
    for (const auto& [key, value] : effective) {
      line += fmt::format(" {}={} ({})", key, value, provenance_.at(key));
    }
    spdlog::info("effective config:{}", line);
  }

 private:
  CLI::App* sub_ = nullptr;
  std::vector<OptionSpec> specs_;
  std::string config_path_;
  std::map<std::string, std::string> values_;
  std::map<std::string, bool> flags_;
  std::map<std::string, CLI::Option*> options_;
  std::map<std::string, std::string> provenance_;
};

const std::string* find(const Settings& s, const std::string& key) {
  const auto it = s.find(key);
  return it == s.end() ? nullptr : &it->second;
}

const std::string& require(const Settings& s, const std::string& key, const std::string& why) {
  const auto* v = find(s, key);
  if (v == nullptr || v->empty()) throw UsageError(fmt::format("--{} is required {}", key, why));
  return *v;
}

/// Typed access that turns malformed values into usage errors.
template <class F>
auto usage_guard(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) throw UsageError(e.detail());
    throw;
  }
}

std::size_t get_size(const Settings& s, const std::string& key) {
  return usage_guard([&] { return static_cast<std::size_t>(parse_uint(key, require(s, key, ""))); });
}

void write_text(const std::string& path, const std::string& text) { detail::write_file(path, text); }

void ensure_parent(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
}

EmbeddingStore load_store(const Settings& s, std::optional<RepresentationMode> mode) {
  std::optional<EmbeddingTable> image;
  std::optional<EmbeddingTable> text;
  const bool need_image = !mode || *mode != RepresentationMode::TextOnly;
  const bool need_text = !mode || *mode != RepresentationMode::ImageOnly;
  if (mode) {
    if (need_image && !find(s, "image-emb")) {
      throw UsageError(fmt::format("--image-emb is required for mode '{}'", to_string(*mode)));
    }
    if (need_text && !find(s, "text-emb")) {
      throw UsageError(fmt::format("--text-emb is required for mode '{}'", to_string(*mode)));
    }
  }
  if (const auto* p = find(s, "image-emb"); p && need_image) image = load_embeddings(*p, Modality::Image);
  if (const auto* p = find(s, "text-emb"); p && need_text) text = load_embeddings(*p, Modality::Text);
  return EmbeddingStore(std::move(image), std::move(text));
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

int cmd_ingest(const Settings& s, std::ostream& out) {
  if (!find(s, "image-emb") && !find(s, "text-emb")) {
    throw UsageError("ingest needs --image-emb and/or --text-emb");
  }
  const EmbeddingStore store = load_store(s, std::nullopt);
  nlohmann::ordered_json summary;
  if (store.image()) summary["image"] = {{"count", store.image()->size()}, {"dim", store.image()->dim()}};
  if (store.text()) summary["text"] = {{"count", store.text()->size()}, {"dim", store.text()->dim()}};

  std::set<std::string> referenced;
  if (const auto* p = find(s, "outfits")) {
    const auto outfits = load_outfits(*p);
    summary["outfits"] = outfits.size();
    const auto products = collect_products(outfits);
    referenced.insert(products.begin(), products.end());
  }
  if (const auto* p = find(s, "queries")) {
    const auto queries = load_queries(*p);
    summary["queries"] = queries.size();
    for (const auto& q : queries) {
      referenced.insert(q.incomplete_outfit.begin(), q.incomplete_outfit.end());
      referenced.insert(q.candidates.begin(), q.candidates.end());
    }
  }
  std::vector<std::string> missing;
  for (const auto& id : referenced) {
    const bool in_image = !store.image() || store.image()->contains(id);
    const bool in_text = !store.text() || store.text()->contains(id);
    if (!in_image || !in_text) missing.push_back(id);
  }
  summary["referenced_products"] = referenced.size();
  summary["missing_products"] = missing.size();
  if (const auto* p = find(s, "manifest")) {
    const auto manifest = load_manifest(*p);
    std::size_t without_metadata = 0;
    for (const auto& id : referenced) without_metadata += manifest.contains(id) ? 0 : 1;
    summary["manifest_entries"] = manifest.size();
    summary["without_metadata"] = without_metadata;
  }
  const std::string line = summary.dump();
  out << line << '\n';
  if (const auto* p = find(s, "out")) write_text(*p, line + '\n');
  if (!missing.empty()) {
    fail(ErrorKind::MissingProduct, fmt::format("{} referenced products lack embeddings (first: '{}')",
                                                missing.size(), missing.front()));
  }
  return kOk;
}

int cmd_gen_synthetic(const Settings& s, std::ostream& out) {
  SyntheticOptions options = usage_guard([&] {
    SyntheticOptions o;
    o.n_clusters = get_size(s, "clusters");
    o.products_per_cluster = get_size(s, "products-per-cluster");
    o.outfit_size = get_size(s, "outfit-size");
    o.outfits_per_cluster = get_size(s, "outfits-per-cluster");
    o.d_img = get_size(s, "dim-img");
    o.d_txt = get_size(s, "dim-txt");
    o.noise_sigma = parse_double("noise", require(s, "noise", ""));
    o.modality_split = parse_bool("modality-split", require(s, "modality-split", ""));
    o.seed = parse_uint("seed", require(s, "seed", ""));
    return o;
  });
  const SyntheticData data = usage_guard([&] { return generate_synthetic(options); });

  const fs::path dir = require(s, "out", "");
  fs::create_directories(dir);
  auto path_for = [&](const char* key, const char* file) {
    const auto* explicit_path = find(s, key);
    std::string path = explicit_path ? *explicit_path : (dir / file).string();
    ensure_parent(path);
    return path;
  };
  const std::string image_path = path_for("image-emb", "image.femb");
  const std::string text_path = path_for("text-emb", "text.femb");
  const std::string outfits_path = path_for("outfits", "outfits.jsonl");
  write_embeddings(data.image, Modality::Image, image_path);
  write_embeddings(data.text, Modality::Text, text_path);
  write_outfits(data.outfits, outfits_path);

  nlohmann::ordered_json summary{{"products", data.image.size()},
                                 {"outfits", data.outfits.size()},
                                 {"image_emb", image_path},
                                 {"text_emb", text_path},
                                 {"outfits_file", outfits_path}};
  out << summary.dump() << '\n';
  return kOk;
}

int cmd_split(const Settings& s, std::ostream& out) {
  const auto outfits = load_outfits(require(s, "outfits", "for split"));
  struct Params {
    std::size_t candidates;
    std::uint64_t seed;
    double test_fraction;
    DistractorPool pool;
  };
  const Params params = usage_guard([&] {
    Params p{get_size(s, "candidates"), parse_uint("seed", require(s, "seed", "")),
             parse_double("test-fraction", require(s, "test-fraction", "")), DistractorPool::NotInOutfit};
    const std::string& pool = require(s, "distractors", "");
    if (pool == "non-cooccurring") {
      p.pool = DistractorPool::NonCooccurring;
    } else if (pool != "outfit") {
      fail(ErrorKind::InvalidArgument, fmt::format("unknown distractor pool '{}' (outfit|non-cooccurring)", pool));
    }
    if (p.candidates < 2) fail(ErrorKind::InvalidArgument, "--candidates must be at least 2");
    return p;
  });

  const OutfitSplit split = usage_guard([&] { return split_outfits(outfits, params.test_fraction, params.seed); });
  const CooccurrenceIndex cooccurrence(outfits);
  QueryGenerationOptions query_options{params.candidates, derive_seed(params.seed, 1), params.pool, &cooccurrence};
  const QueryGeneration generated = generate_fitb_queries(split.test, collect_products(outfits), query_options);

  const fs::path dir = require(s, "out", "");
  fs::create_directories(dir);
  const std::string queries_path = find(s, "queries") ? *find(s, "queries") : (dir / "queries.jsonl").string();
  ensure_parent(queries_path);
  write_outfits(split.train, (dir / "train.jsonl").string());
  write_outfits(split.test, (dir / "test.jsonl").string());
  write_queries(generated.queries, queries_path);

  nlohmann::ordered_json summary{{"train_outfits", split.train.size()},
                                 {"test_outfits", split.test.size()},
                                 {"queries", generated.queries.size()},
                                 {"skipped", generated.skipped},
                                 {"queries_file", queries_path}};
  out << summary.dump() << '\n';
  return kOk;
}

int cmd_train(const Settings& s, std::ostream& out) {
  const std::string& checkpoint = require(s, "checkpoint", "as the output path for train");
  const std::string& outfits_path = require(s, "outfits", "for train");
  const TrainConfig config = usage_guard([&] {
    TrainConfig c = train_config_from_settings(s);
    c.validate();
    return c;
  });
  const EmbeddingStore store = load_store(s, config.mode);
  const auto outfits = load_outfits(outfits_path);
  const TrainReport report = train(outfits, store, config);
  ensure_parent(checkpoint);
  save_checkpoint(report.head, checkpoint);

  nlohmann::ordered_json summary;
  summary["checkpoint"] = checkpoint;
  summary["mode"] = to_string(config.mode);
  summary["parameters"] = report.head.parameter_count();
  summary["pairs"] = report.n_pairs;
  summary["positives"] = report.n_positive;
  summary["negatives"] = report.n_negative;
  summary["steps"] = report.n_steps;
  summary["epoch_losses"] = report.epoch_losses;
  const std::string line = summary.dump();
  out << line << '\n';
  if (const auto* p = find(s, "out")) write_text(*p, line + '\n');
  return kOk;
}

struct ScoringSetup {
  ScoringConfig scoring;
  std::optional<SiameseHead> head;
  std::size_t threads = 1;
};

ScoringSetup scoring_setup(const Settings& s) {
  ScoringSetup setup;
  usage_guard([&] {
    setup.scoring.scorer = parse_scorer(require(s, "scorer", ""));
    setup.scoring.aggregation = parse_aggregation(require(s, "aggregation", ""));
    setup.threads = get_size(s, "threads");
    if (setup.threads == 0) fail(ErrorKind::InvalidArgument, "--threads must be at least 1");
    return 0;
  });
  const auto* mode = find(s, "mode");
  if (setup.scoring.scorer == Scorer::TrainedHead) {
    const auto& checkpoint = require(s, "checkpoint", "when --scorer is head");
    setup.head = load_checkpoint(checkpoint);
    setup.scoring.mode = mode ? usage_guard([&] { return parse_mode(*mode); }) : setup.head->mode();
    if (setup.head->mode() != setup.scoring.mode) {
      throw UsageError(fmt::format("checkpoint mode '{}' does not match --mode '{}'", to_string(setup.head->mode()),
                                   to_string(setup.scoring.mode)));
    }
  } else {
    setup.scoring.mode = usage_guard([&] { return parse_mode(mode ? *mode : "both"); });
  }
  return setup;
}

int cmd_eval(const Settings& s, std::ostream& out) {
  const auto queries = load_queries(require(s, "queries", "for eval"));
  const ScoringSetup setup = scoring_setup(s);
  const EmbeddingStore store = load_store(s, setup.scoring.mode);
  const EvalReport report = evaluate(queries, setup.scoring, setup.head ? &*setup.head : nullptr, store,
                                     setup.threads, s);
  const std::string line = to_json(report);
  out << line << '\n' << format_table(std::span(&report, 1));
  if (const auto* p = find(s, "out")) write_text(*p, line + '\n');
  return kOk;
}

int cmd_predict(const Settings& s, std::ostream& out) {
  const auto queries = load_queries(require(s, "queries", "for predict"));
  const ScoringSetup setup = scoring_setup(s);
  const EmbeddingStore store = load_store(s, setup.scoring.mode);
  const auto rankings = rank_all(queries, setup.scoring, setup.head ? &*setup.head : nullptr, store, setup.threads);
  const std::string text = format_predictions(rankings);
  if (const auto* p = find(s, "out")) {
    write_text(*p, text);
  } else {
    out << text;
  }
  return kOk;
}

spdlog::level::level_enum log_level_from_env() {
  const char* raw = std::getenv("FITB_LOG");
  const std::string level = raw ? raw : "info";
  if (level == "error") return spdlog::level::err;
  if (level == "warn") return spdlog::level::warn;
  if (level == "debug") return spdlog::level::debug;
  return spdlog::level::info;
}

/// Routes the default logger to `err` for the duration of one run.
class ScopedLogger {
 public:
  explicit ScopedLogger(std::ostream& err) : previous_(spdlog::default_logger()) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, /*force_flush=*/true);
    auto logger = std::make_shared<spdlog::logger>("fitb", sink);
    logger->set_pattern("[fitb] [%l] %v");
    logger->set_level(log_level_from_env());
    spdlog::set_default_logger(logger);
  }
  ~ScopedLogger() { spdlog::set_default_logger(previous_); }
  ScopedLogger(const ScopedLogger&) = delete;
  ScopedLogger& operator=(const ScopedLogger&) = delete;

 private:
  std::shared_ptr<spdlog::logger> previous_;
};

}  // namespace

int run(std::span<const std::string> args, std::ostream& out, std::ostream& err) {
  ScopedLogger logger(err);
  CLI::App app{"Fill-in-the-blank outfit completion with a siamese projection head", "fitb"};
  app.require_subcommand(1);

  const OptionSpec seed{"seed", kDefaultSeed, "random seed"};
  const OptionSpec image_in{"image-emb", std::nullopt, "image embeddings (FEMB)"};
  const OptionSpec text_in{"text-emb", std::nullopt, "text embeddings (FEMB)"};
  std::vector<std::unique_ptr<Command>> commands;
  commands.push_back(std::make_unique<Command>(app, "ingest", "validate embedding files and their coverage of outfits/queries",
                        std::vector<OptionSpec>{image_in, text_in,
                                                {"outfits", std::nullopt, "outfits file (JSONL)"},
                                                {"queries", std::nullopt, "queries file (JSONL)"},
                                                {"manifest", std::nullopt, "product_id<TAB>metadata manifest"},
                                                {"out", std::nullopt, "write the summary here"}}));
  commands.push_back(std::make_unique<Command>(app, "gen-synthetic", "write a clustered synthetic dataset",
                        std::vector<OptionSpec>{{"clusters", "8", "number of clusters"},
                                                {"products-per-cluster", "20", "products per cluster"},
                                                {"outfit-size", "4", "items per outfit"},
                                                {"outfits-per-cluster", "40", "outfits drawn per cluster"},
                                                {"dim-img", "32", "image embedding dimension"},
                                                {"dim-txt", "32", "text embedding dimension"},
                                                {"noise", "0.05", "per-component Gaussian noise sigma"},
                                                {"modality-split", "false", "pair clusters that differ in one modality", true},
                                                seed,
                                                {"out", ".", "output directory"},
                                                {"image-emb", std::nullopt, "image output path [default: OUT/image.femb]"},
                                                {"text-emb", std::nullopt, "text output path [default: OUT/text.femb]"},
                                                {"outfits", std::nullopt, "outfits output path [default: OUT/outfits.jsonl]"}}));
  commands.push_back(std::make_unique<Command>(app, "split", "90/10 outfit split and FITB query generation",
                        std::vector<OptionSpec>{{"outfits", std::nullopt, "outfits file (JSONL)"},
                                                {"candidates", "5", "candidates per query"},
                                                seed,
                                                {"test-fraction", "0.1", "fraction of outfits held out"},
                                                {"distractors", "outfit", "distractor pool: outfit|non-cooccurring"},
                                                {"out", ".", "output directory"},
                                                {"queries", std::nullopt, "queries output path [default: OUT/queries.jsonl]"}}));
  const TrainConfig defaults;
  const Settings train_defaults = to_settings(defaults);
  auto train_default = [&](const char* key) { return std::optional<std::string>(train_defaults.at(key)); };
  commands.push_back(std::make_unique<Command>(
      app, "train", "train the siamese head with contrastive loss",
      std::vector<OptionSpec>{{"outfits", std::nullopt, "training outfits (JSONL)"},
                              image_in,
                              text_in,
                              {"mode", train_default("mode"), "representation: text|image|both"},
                              {"epochs", train_default("epochs"), "training epochs"},
                              {"batch-size", train_default("batch-size"), "pairs per batch"},
                              {"optimizer", train_default("optimizer"), "adam|sgd"},
                              {"lr", train_default("lr"), "learning rate"},
                              {"momentum", std::nullopt, "SGD momentum [default: 0]"},
                              {"margin", train_default("margin"), "contrastive margin"},
                              {"layers", train_default("layers"), "hidden widths then output width"},
                              {"negatives", train_default("negatives"), "negatives per positive"},
                              {"max-positives", train_default("max-positives"), "positive pairs per outfit cap"},
                              {"resample-pairs", std::nullopt, "re-sample pairs every epoch", true},
                              seed,
                              {"checkpoint", std::nullopt, "output checkpoint (FCKP)"},
                              {"out", std::nullopt, "write the training report here"}}));
  const std::vector<OptionSpec> scoring_specs{{"queries", std::nullopt, "queries file (JSONL)"},
                                              image_in,
                                              text_in,
                                              {"checkpoint", std::nullopt, "trained head (FCKP); needed for --scorer head"},
                                              {"mode", std::nullopt, "text|image|both [default: checkpoint mode, or both]"},
                                              {"scorer", "head", "head|zeroshot"},
                                              {"aggregation", "mean", "mean|min distance to outfit items"},
                                              {"threads", "1", "ranking worker threads"},
                                              {"out", std::nullopt, "output path"}};
  commands.push_back(std::make_unique<Command>(app, "eval", "accuracy and MRR over gold-bearing queries", scoring_specs));
  commands.push_back(std::make_unique<Command>(app, "predict", "rank candidates for every query", scoring_specs));

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run 'fitb --help' for usage\n";
    return kUsage;
  }

  auto known_elsewhere = [&](const std::string& key) {
    for (const auto& c : commands) {
      if (c->knows(key)) return true;
    }
    return false;
  };

  try {
    for (auto& command : commands) {
      if (!command->parsed()) continue;
      const Settings effective = command->resolve(known_elsewhere);
      command->log_effective(effective);
      const std::string& name = command->app()->get_name();
      if (name == "ingest") return cmd_ingest(effective, out);
      if (name == "gen-synthetic") return cmd_gen_synthetic(effective, out);
      if (name == "split") return cmd_split(effective, out);
      if (name == "train") return cmd_train(effective, out);
      if (name == "eval") return cmd_eval(effective, out);
      if (name == "predict") return cmd_predict(effective, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace fitb::cli
