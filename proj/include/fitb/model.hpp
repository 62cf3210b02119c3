#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fitb/embedding_store.hpp"

namespace fitb {

enum class Activation : std::uint8_t { Linear = 0, Relu = 1 };

/// Architecture of the projection head. `layer_dims` lists hidden widths
/// followed by the output width d; hidden layers use `hidden_activation`,
/// the output layer is always linear.
struct HeadConfig {
  std::size_t input_dim = 0;
  std::vector<std::size_t> layer_dims{512, 128};
  Activation hidden_activation = Activation::Relu;

  /// Throws InvalidArgument on an empty layer list or a zero dimension.
  void validate() const;
  std::size_t output_dim() const { return layer_dims.empty() ? 0 : layer_dims.back(); }
};

struct LayerShape {
  std::size_t in = 0;
  std::size_t out = 0;
  Activation activation = Activation::Linear;

  friend bool operator==(const LayerShape&, const LayerShape&) = default;
};

/// Shared-weight projection g_p. All parameters live in one flat buffer laid
/// out layer by layer, each layer's row-major (out x in) weights followed by
/// its bias; gradients and the checkpoint payload use the same layout.
class SiameseHead {
 public:
  /// Zero-initialized head; throws ShapeMismatch on inconsistent layers.
  SiameseHead(std::vector<LayerShape> layers, RepresentationMode mode);

  const std::vector<LayerShape>& layers() const { return layers_; }
  RepresentationMode mode() const { return mode_; }
  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t output_dim() const { return layers_.back().out; }
  std::size_t parameter_count() const { return params_.size(); }

  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  /// Offset of layer `layer`'s weights inside the flat buffer.
  std::size_t offset(std::size_t layer) const { return offsets_[layer]; }

  friend bool operator==(const SiameseHead& a, const SiameseHead& b) {
    return a.mode_ == b.mode_ && a.layers_ == b.layers_ && a.params_ == b.params_;
  }

 private:
  std::vector<LayerShape> layers_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
  RepresentationMode mode_;
};

/// Sum over layers of in*out + out. An empty layer list counts zero.
std::size_t param_count(const HeadConfig& config);

/// Glorot-uniform weights, zero biases; bit-identical for equal seeds.
SiameseHead init_head(const HeadConfig& config, std::uint64_t seed,
                      RepresentationMode mode = RepresentationMode::TextAndImage);

/// Per-layer inputs and pre-activations retained for the backward pass.
struct ActivationTrace {
  std::vector<std::vector<double>> inputs;          // inputs[l] feeds layer l
  std::vector<std::vector<double>> pre_activations;  // z of layer l
};

struct ForwardResult {
  std::vector<double> output;
  ActivationTrace trace;
};

ForwardResult forward(const SiameseHead& head, std::span<const double> x);

/// Forward pass without a trace.
std::vector<double> project(const SiameseHead& head, std::span<const double> x);

struct BackwardResult {
  std::vector<double> parameter_gradients;  // same layout as SiameseHead::parameters()
  std::vector<double> input_gradient;
};

/// Reverse-mode gradients of dot(output, grad_output). ReLU'(0) is taken as 0.
BackwardResult backward(const SiameseHead& head, const ActivationTrace& trace,
                        std::span<const double> grad_output);

/// As backward(), but adds the parameter gradients into `parameter_gradients`
/// and returns only the input gradient.
std::vector<double> backward_accumulate(const SiameseHead& head, const ActivationTrace& trace,
                                        std::span<const double> grad_output,
                                        std::span<double> parameter_gradients);

// FCKP checkpoints

std::string encode_checkpoint(const SiameseHead& head);
SiameseHead parse_checkpoint(std::string_view bytes, std::string_view source = "<memory>");
void save_checkpoint(const SiameseHead& head, const std::string& path);
SiameseHead load_checkpoint(const std::string& path);

}  // namespace fitb
