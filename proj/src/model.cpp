#include "fitb/model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "binary_io.hpp"
#include "fitb/error.hpp"
#include "fitb/rng.hpp"

namespace fitb {
namespace {

constexpr std::string_view kMagic = "FCKP";
constexpr std::uint16_t kVersion = 1;

std::size_t layer_size(const LayerShape& layer) { return layer.in * layer.out + layer.out; }

}  // namespace

void HeadConfig::validate() const {
  if (input_dim == 0) fail(ErrorKind::InvalidArgument, "head input_dim must be positive");
  if (layer_dims.empty()) fail(ErrorKind::InvalidArgument, "head needs at least one layer");
  for (std::size_t d : layer_dims) {
    if (d == 0) fail(ErrorKind::InvalidArgument, "head layer widths must be positive");
  }
}

SiameseHead::SiameseHead(std::vector<LayerShape> layers, RepresentationMode mode)
    : layers_(std::move(layers)), mode_(mode) {
  if (layers_.empty()) fail(ErrorKind::ShapeMismatch, "head has no layers");
  std::size_t total = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    if (layer.in == 0 || layer.out == 0) fail(ErrorKind::ShapeMismatch, fmt::format("layer {} has a zero dimension", l));
    if (l > 0 && layer.in != layers_[l - 1].out) {
      fail(ErrorKind::ShapeMismatch,
           fmt::format("layer {} expects {} inputs but layer {} emits {}", l, layer.in, l - 1, layers_[l - 1].out));
    }
    offsets_.push_back(total);
    total += layer_size(layer);
  }
  params_.assign(total, 0.0);
}

std::span<double> SiameseHead::weights(std::size_t layer) {
  return {params_.data() + offsets_[layer], layers_[layer].in * layers_[layer].out};
}
std::span<const double> SiameseHead::weights(std::size_t layer) const {
  return {params_.data() + offsets_[layer], layers_[layer].in * layers_[layer].out};
}
std::span<double> SiameseHead::bias(std::size_t layer) {
  return {params_.data() + offsets_[layer] + layers_[layer].in * layers_[layer].out, layers_[layer].out};
}
std::span<const double> SiameseHead::bias(std::size_t layer) const {
  return {params_.data() + offsets_[layer] + layers_[layer].in * layers_[layer].out, layers_[layer].out};
}

std::size_t param_count(const HeadConfig& config) {
  std::size_t total = 0;
  std::size_t in = config.input_dim;
  for (std::size_t out : config.layer_dims) {
    total += in * out + out;
    in = out;
  }
  return total;
}

SiameseHead init_head(const HeadConfig& config, std::uint64_t seed, RepresentationMode mode) {
  config.validate();
  std::vector<LayerShape> layers;
  std::size_t in = config.input_dim;
  for (std::size_t l = 0; l < config.layer_dims.size(); ++l) {
    const bool last = l + 1 == config.layer_dims.size();
    layers.push_back({in, config.layer_dims[l], last ? Activation::Linear : config.hidden_activation});
    in = config.layer_dims[l];
  }
  SiameseHead head(std::move(layers), mode);
  Rng rng(seed);
  for (std::size_t l = 0; l < head.layers().size(); ++l) {
    const auto& shape = head.layers()[l];
    const double bound = std::sqrt(6.0 / static_cast<double>(shape.in + shape.out));
    for (double& w : head.weights(l)) w = rng.uniform(-bound, bound);
  }
  return head;
}

ForwardResult forward(const SiameseHead& head, std::span<const double> x) {
  if (x.size() != head.input_dim()) {
    fail(ErrorKind::DimensionMismatch,
         fmt::format("head expects {} inputs, got {}", head.input_dim(), x.size()));
  }
  ForwardResult result;
  std::vector<double> activation(x.begin(), x.end());
  for (std::size_t l = 0; l < head.layers().size(); ++l) {
    const auto& shape = head.layers()[l];
    const auto w = head.weights(l);
    const auto b = head.bias(l);
    std::vector<double> z(shape.out);
    for (std::size_t r = 0; r < shape.out; ++r) {
      const double* row = w.data() + r * shape.in;
      double sum = b[r];
      for (std::size_t c = 0; c < shape.in; ++c) sum += row[c] * activation[c];
      z[r] = sum;
    }
    std::vector<double> next = z;
    if (shape.activation == Activation::Relu) {
      for (double& v : next) v = v > 0.0 ? v : 0.0;
    }
    result.trace.inputs.push_back(std::move(activation));
    result.trace.pre_activations.push_back(std::move(z));
    activation = std::move(next);
  }
  result.output = std::move(activation);
  return result;
}

std::vector<double> project(const SiameseHead& head, std::span<const double> x) {
  return forward(head, x).output;
}

std::vector<double> backward_accumulate(const SiameseHead& head, const ActivationTrace& trace,
                                        std::span<const double> grad_output,
                                        std::span<double> parameter_gradients) {
  const std::size_t n_layers = head.layers().size();
  if (trace.inputs.size() != n_layers || trace.pre_activations.size() != n_layers) {
    fail(ErrorKind::ShapeMismatch, "activation trace does not match the head's layer count");
  }
  if (grad_output.size() != head.output_dim()) {
    fail(ErrorKind::ShapeMismatch,
         fmt::format("grad_output has {} components, head emits {}", grad_output.size(), head.output_dim()));
  }
  if (parameter_gradients.size() != head.parameter_count()) {
    fail(ErrorKind::ShapeMismatch, "parameter gradient buffer has the wrong size");
  }

  std::vector<double> delta(grad_output.begin(), grad_output.end());
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& shape = head.layers()[l];
    const auto& input = trace.inputs[l];
    const auto& z = trace.pre_activations[l];
    if (input.size() != shape.in || z.size() != shape.out) {
      fail(ErrorKind::ShapeMismatch, fmt::format("activation trace shape mismatch at layer {}", l));
    }
    if (shape.activation == Activation::Relu) {
      for (std::size_t r = 0; r < shape.out; ++r) {
        if (!(z[r] > 0.0)) delta[r] = 0.0;
      }
    }
    double* grad_w = parameter_gradients.data() + head.offset(l);
    double* grad_b = grad_w + shape.in * shape.out;
    const auto w = head.weights(l);
    std::vector<double> previous(shape.in, 0.0);
    for (std::size_t r = 0; r < shape.out; ++r) {
      const double d = delta[r];
      grad_b[r] += d;
      if (d == 0.0) continue;
      double* grad_row = grad_w + r * shape.in;
      const double* row = w.data() + r * shape.in;
      for (std::size_t c = 0; c < shape.in; ++c) {
        grad_row[c] += d * input[c];
        previous[c] += row[c] * d;
      }
    }
    delta = std::move(previous);
  }
  return delta;
}

BackwardResult backward(const SiameseHead& head, const ActivationTrace& trace, std::span<const double> grad_output) {
  BackwardResult result;
  result.parameter_gradients.assign(head.parameter_count(), 0.0);
  result.input_gradient = backward_accumulate(head, trace, grad_output, result.parameter_gradients);
  return result;
}

std::string encode_checkpoint(const SiameseHead& head) {
  detail::ByteWriter out;
  out.bytes(kMagic);
  out.uint(kVersion);
  out.uint(static_cast<std::uint8_t>(head.mode()));
  out.uint(std::uint8_t{0});
  out.uint(static_cast<std::uint32_t>(head.layers().size()));
  for (const auto& layer : head.layers()) {
    out.uint(static_cast<std::uint32_t>(layer.in));
    out.uint(static_cast<std::uint32_t>(layer.out));
    out.uint(static_cast<std::uint8_t>(layer.activation));
    out.uint(std::uint8_t{0});
    out.uint(std::uint16_t{0});
  }
  for (double p : head.parameters()) out.f64(p);
  return out.data();
}

SiameseHead parse_checkpoint(std::string_view bytes, std::string_view source) {
  detail::ByteReader in(bytes);
  auto corrupt = [&](const std::string& what) {
    fail(ErrorKind::CorruptCheckpoint, fmt::format("{}: {} (offset {})", source, what, in.offset()));
  };
  std::string_view magic;
  if (!in.bytes(4, magic) || magic != kMagic) corrupt("missing FCKP magic");
  std::uint16_t version = 0;
  std::uint8_t mode = 0;
  std::uint8_t reserved = 0;
  std::uint32_t layer_count = 0;
  if (!in.uint(version)) corrupt("truncated header");
  if (version != kVersion) corrupt(fmt::format("unsupported version {}", version));
  if (!in.uint(mode) || !in.uint(reserved) || !in.uint(layer_count)) corrupt("truncated header");
  if (mode > static_cast<std::uint8_t>(RepresentationMode::TextAndImage)) corrupt(fmt::format("bad mode code {}", mode));
  if (layer_count == 0) fail(ErrorKind::ShapeMismatch, fmt::format("{}: checkpoint has no layers", source));
  // each layer entry is 12 bytes; reject absurd counts before allocating
  if (in.remaining() / 12 < layer_count) corrupt("truncated layer table");

  std::vector<LayerShape> layers;
  for (std::uint32_t l = 0; l < layer_count; ++l) {
    std::uint32_t in_dim = 0;
    std::uint32_t out_dim = 0;
    std::uint8_t activation = 0;
    std::uint8_t pad8 = 0;
    std::uint16_t pad16 = 0;
    if (!in.uint(in_dim) || !in.uint(out_dim) || !in.uint(activation) || !in.uint(pad8) || !in.uint(pad16)) {
      corrupt("truncated layer table");
    }
    if (activation > static_cast<std::uint8_t>(Activation::Relu)) corrupt(fmt::format("bad activation code {}", activation));
    layers.push_back({in_dim, out_dim, static_cast<Activation>(activation)});
  }
  std::size_t expected = 0;
  for (const auto& layer : layers) expected += layer.in * layer.out + layer.out;
  if (in.remaining() != expected * 8) {
    corrupt(fmt::format("parameter payload is {} bytes, layer table implies {}", in.remaining(), expected * 8));
  }
  SiameseHead head(std::move(layers), static_cast<RepresentationMode>(mode));
  auto params = head.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    in.f64(params[i]);
    if (!std::isfinite(params[i])) {
      fail(ErrorKind::NonFinite, fmt::format("{}: non-finite parameter {} at offset {}", source, i, in.offset() - 8));
    }
  }
  return head;
}

void save_checkpoint(const SiameseHead& head, const std::string& path) {
  for (double p : head.parameters()) {
    if (!std::isfinite(p)) fail(ErrorKind::NonFinite, "refusing to save a head with non-finite parameters");
  }
  detail::write_file(path, encode_checkpoint(head));
}

SiameseHead load_checkpoint(const std::string& path) { return parse_checkpoint(detail::read_file(path), path); }

}  // namespace fitb
