#include "fitb/trainer.hpp"

#include <cmath>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "fitb/error.hpp"
#include "fitb/rng.hpp"

namespace fitb {
namespace {

// independent random streams derived from TrainConfig::seed
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kPairStream = 2;
constexpr std::uint64_t kBatchStream = 3;

std::string format_real(double v) { return fmt::format("{}", v); }

}  // namespace

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::InvalidArgument, what);
  };
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  const double lr = learning_rate(optimizer);
  require(lr > 0.0 && std::isfinite(lr), "learning rate must be positive");
  if (const auto* sgd = std::get_if<SgdConfig>(&optimizer)) {
    require(sgd->momentum >= 0.0 && sgd->momentum < 1.0, "momentum must be in [0, 1)");
  } else {
    const auto& adam = std::get<AdamConfig>(optimizer);
    require(adam.beta1 >= 0.0 && adam.beta1 < 1.0, "beta1 must be in [0, 1)");
    require(adam.beta2 >= 0.0 && adam.beta2 < 1.0, "beta2 must be in [0, 1)");
    require(adam.epsilon > 0.0, "adam epsilon must be positive");
  }
  loss.validate();
  require(negatives_per_positive >= 1, "negatives_per_positive must be >= 1");
  require(max_positives_per_outfit >= 1, "max_positives_per_outfit must be >= 1");
  require(!layer_dims.empty(), "layers must list at least the output width");
  for (std::size_t d : layer_dims) require(d > 0, "layer widths must be positive");
}

const std::vector<std::string>& train_setting_keys() {
  static const std::vector<std::string> keys{
      "mode",   "epochs",     "batch-size",       "optimizer", "lr",     "momentum",
      "beta1",  "beta2",      "adam-epsilon",     "margin",    "distance-epsilon",
      "seed",   "negatives",  "max-positives",    "layers",    "resample-pairs",
  };
  return keys;
}

TrainConfig train_config_from_settings(const Settings& settings, TrainConfig base) {
  auto get = [&](const char* key) -> const std::string* {
    const auto it = settings.find(key);
    return it == settings.end() ? nullptr : &it->second;
  };
  if (const auto* v = get("mode")) base.mode = parse_mode(*v);
  if (const auto* v = get("epochs")) base.epochs = parse_uint("epochs", *v);
  if (const auto* v = get("batch-size")) base.batch_size = parse_uint("batch-size", *v);
  if (const auto* v = get("optimizer")) {
    const std::string name = normalize_key(*v);
    if (name == "adam") {
      if (!std::holds_alternative<AdamConfig>(base.optimizer)) base.optimizer = AdamConfig{};
    } else if (name == "sgd") {
      if (!std::holds_alternative<SgdConfig>(base.optimizer)) base.optimizer = SgdConfig{};
    } else {
      fail(ErrorKind::InvalidArgument, fmt::format("setting 'optimizer': unknown optimizer '{}' (adam|sgd)", *v));
    }
  }
  if (const auto* v = get("lr")) {
    std::visit([&](auto& c) { c.lr = parse_double("lr", *v); }, base.optimizer);
  }
  if (auto* sgd = std::get_if<SgdConfig>(&base.optimizer)) {
    if (const auto* v = get("momentum")) sgd->momentum = parse_double("momentum", *v);
  } else {
    auto& adam = std::get<AdamConfig>(base.optimizer);
    if (const auto* v = get("beta1")) adam.beta1 = parse_double("beta1", *v);
    if (const auto* v = get("beta2")) adam.beta2 = parse_double("beta2", *v);
    if (const auto* v = get("adam-epsilon")) adam.epsilon = parse_double("adam-epsilon", *v);
  }
  if (const auto* v = get("margin")) base.loss.margin = parse_double("margin", *v);
  if (const auto* v = get("distance-epsilon")) base.loss.distance_epsilon = parse_double("distance-epsilon", *v);
  if (const auto* v = get("seed")) base.seed = parse_uint("seed", *v);
  if (const auto* v = get("negatives")) base.negatives_per_positive = parse_uint("negatives", *v);
  if (const auto* v = get("max-positives")) base.max_positives_per_outfit = parse_uint("max-positives", *v);
  if (const auto* v = get("layers")) base.layer_dims = parse_dims("layers", *v);
  if (const auto* v = get("resample-pairs")) base.resample_pairs = parse_bool("resample-pairs", *v);
  return base;
}

Settings to_settings(const TrainConfig& config) {
  Settings s;
  s["mode"] = std::string(to_string(config.mode));
  s["epochs"] = std::to_string(config.epochs);
  s["batch-size"] = std::to_string(config.batch_size);
  if (const auto* sgd = std::get_if<SgdConfig>(&config.optimizer)) {
    s["optimizer"] = "sgd";
    s["lr"] = format_real(sgd->lr);
    s["momentum"] = format_real(sgd->momentum);
  } else {
    const auto& adam = std::get<AdamConfig>(config.optimizer);
    s["optimizer"] = "adam";
    s["lr"] = format_real(adam.lr);
    s["beta1"] = format_real(adam.beta1);
    s["beta2"] = format_real(adam.beta2);
    s["adam-epsilon"] = format_real(adam.epsilon);
  }
  s["margin"] = format_real(config.loss.margin);
  s["distance-epsilon"] = format_real(config.loss.distance_epsilon);
  s["seed"] = std::to_string(config.seed);
  s["negatives"] = std::to_string(config.negatives_per_positive);
  s["max-positives"] = std::to_string(config.max_positives_per_outfit);
  s["layers"] = format_dims(config.layer_dims);
  s["resample-pairs"] = config.resample_pairs ? "true" : "false";
  return s;
}

std::vector<std::vector<PairSample>> make_batches(std::span<const PairSample> pairs, std::size_t batch_size,
                                                  std::size_t epoch, std::uint64_t seed) {
  if (batch_size == 0) fail(ErrorKind::InvalidArgument, "batch_size must be >= 1");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, epoch));
  rng.shuffle(order);

  std::vector<std::vector<PairSample>> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    std::vector<PairSample> batch;
    batch.reserve(end - start);
    for (std::size_t k = start; k < end; ++k) batch.push_back(pairs[order[k]]);
    batches.push_back(std::move(batch));
  }
  return batches;
}

double accumulate_pair_gradient(const SiameseHead& head, std::span<const double> x_a, std::span<const double> x_b,
                                int label, const LossConfig& loss, std::span<double> parameter_gradients) {
  const ForwardResult twin_a = forward(head, x_a);
  const ForwardResult twin_b = forward(head, x_b);
  const double value = contrastive_loss(twin_a.output, twin_b.output, label, loss);
  const ContrastiveGradient grad = contrastive_grad(twin_a.output, twin_b.output, label, loss);
  backward_accumulate(head, twin_a.trace, grad.wrt_i, parameter_gradients);
  backward_accumulate(head, twin_b.trace, grad.wrt_j, parameter_gradients);
  return value;
}

double train_step(SiameseHead& head, std::span<const PairSample> batch, const EmbeddingStore& store,
                  RepresentationMode mode, OptimizerState& optimizer, const LossConfig& loss) {
  if (batch.empty()) fail(ErrorKind::InvalidArgument, "empty batch");
  std::vector<double> gradients(head.parameter_count(), 0.0);
  double total = 0.0;
  for (const auto& pair : batch) {
    const auto x_a = assemble_representation(store, pair.id_a, mode);
    const auto x_b = assemble_representation(store, pair.id_b, mode);
    total += accumulate_pair_gradient(head, x_a, x_b, pair.label, loss, gradients);
  }
  const double scale = 1.0 / static_cast<double>(batch.size());
  for (double& g : gradients) g *= scale;
  optimizer.step(head.parameters(), gradients);
  return total * scale;
}

TrainReport train(const std::vector<Outfit>& outfits, const EmbeddingStore& store, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  const std::set<std::string> products = collect_products(outfits);
  for (const auto& id : products) {
    if (!store.has_product(id, config.mode)) {
      fail(ErrorKind::MissingProduct,
           fmt::format("training product '{}' lacks embeddings for mode '{}'", id, to_string(config.mode)));
    }
  }

  HeadConfig head_config{store.input_dim(config.mode), config.layer_dims, Activation::Relu};
  TrainReport report{{}, init_head(head_config, derive_seed(config.seed, kInitStream), config.mode), 0, 0, 0, 0};
  OptimizerState optimizer(config.optimizer, report.head.parameter_count());

  auto draw_pairs = [&](std::uint64_t seed) {
    PairSampling sampling =
        sample_pairs(outfits, products, {config.negatives_per_positive, config.max_positives_per_outfit, seed});
    if (sampling.positives == 0) fail(ErrorKind::NoTrainablePairs, "no outfit has two or more items");
    return sampling;
  };
  const std::uint64_t pair_seed = derive_seed(config.seed, kPairStream);
  PairSampling sampling = draw_pairs(pair_seed);
  report.n_pairs = sampling.pairs.size();
  report.n_positive = sampling.positives;
  report.n_negative = sampling.negatives;
  spdlog::debug("sampled {} pairs ({} positive, {} negative)", report.n_pairs, report.n_positive, report.n_negative);

  const std::uint64_t batch_seed = derive_seed(config.seed, kBatchStream);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.resample_pairs && epoch > 0) sampling = draw_pairs(derive_seed(pair_seed, epoch));
    double total = 0.0;
    for (const auto& batch : make_batches(sampling.pairs, config.batch_size, epoch, batch_seed)) {
      const double mean = train_step(report.head, batch, store, config.mode, optimizer, config.loss);
      total += mean * static_cast<double>(batch.size());
      ++report.n_steps;
    }
    const double epoch_loss = total / static_cast<double>(sampling.pairs.size());
    if (!std::isfinite(epoch_loss)) fail(ErrorKind::NonFinite, fmt::format("loss diverged in epoch {}", epoch + 1));
    report.epoch_losses.push_back(epoch_loss);
    spdlog::info("epoch {}/{}: mean loss {:.6f}", epoch + 1, config.epochs, epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return report;
}

}  // namespace fitb
