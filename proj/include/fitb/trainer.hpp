#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fitb/config.hpp"
#include "fitb/dataset.hpp"
#include "fitb/embedding_store.hpp"
#include "fitb/loss.hpp"
#include "fitb/model.hpp"
#include "fitb/optimizer.hpp"

namespace fitb {

struct TrainConfig {
  RepresentationMode mode = RepresentationMode::TextAndImage;
  std::size_t epochs = 10;
  std::size_t batch_size = 64;
  OptimizerConfig optimizer = AdamConfig{};
  LossConfig loss;
  std::uint64_t seed = 42;
  std::size_t negatives_per_positive = 1;
  std::size_t max_positives_per_outfit = 15;
  /// Hidden widths then output width; the input width comes from the store.
  std::vector<std::size_t> layer_dims{512, 128};
  /// Draw a fresh pair sample every epoch instead of once up front.
  bool resample_pairs = false;

  void validate() const;
};

/// Keys understood by train_config_from_settings (normalized spelling).
const std::vector<std::string>& train_setting_keys();

/// Overlays `settings` on `base`. Unknown keys are ignored; malformed values
/// throw InvalidArgument.
TrainConfig train_config_from_settings(const Settings& settings, TrainConfig base = {});

/// Flattens a config back to settings (used to echo the effective config).
Settings to_settings(const TrainConfig& config);

struct TrainReport {
  std::vector<double> epoch_losses;
  SiameseHead head;
  std::size_t n_pairs = 0;
  std::size_t n_positive = 0;
  std::size_t n_negative = 0;
  std::size_t n_steps = 0;
};

/// Seeded permutation keyed by (seed, epoch), cut into contiguous batches; the
/// last batch may be short.
std::vector<std::vector<PairSample>> make_batches(std::span<const PairSample> pairs, std::size_t batch_size,
                                                  std::size_t epoch, std::uint64_t seed);

/// Runs both twins through the same head, adds d(loss)/d(params) into
/// `parameter_gradients` and returns the pair's loss.
double accumulate_pair_gradient(const SiameseHead& head, std::span<const double> x_a, std::span<const double> x_b,
                                int label, const LossConfig& loss, std::span<double> parameter_gradients);

/// One optimizer step on the mean loss of `batch`; returns that mean loss.
double train_step(SiameseHead& head, std::span<const PairSample> batch, const EmbeddingStore& store,
                  RepresentationMode mode, OptimizerState& optimizer, const LossConfig& loss);

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

/// Samples pairs, initializes a head and runs epochs x batches of train_step.
/// Identical inputs and seed give bit-identical heads.
TrainReport train(const std::vector<Outfit>& outfits, const EmbeddingStore& store, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace fitb
