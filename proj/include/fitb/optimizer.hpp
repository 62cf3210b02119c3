#pragma once

#include <cstdint>
#include <span>
#include <variant>
#include <vector>

namespace fitb {

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

double learning_rate(const OptimizerConfig& config);

/// Per-parameter optimizer memory over a flat parameter vector.
///   SGD:  v <- mu*v - lr*g;  p <- p + v
///   Adam: bias-corrected first/second moments, p <- p - lr*m_hat/(sqrt(v_hat)+eps)
class OptimizerState {
 public:
  OptimizerState(OptimizerConfig config, std::size_t parameter_count);

  /// Throws ShapeMismatch if the spans disagree with the state size.
  void step(std::span<double> params, std::span<const double> grads);

  const OptimizerConfig& config() const { return config_; }
  std::uint64_t steps() const { return steps_; }

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<double> first_;   // SGD velocity or Adam m
  std::vector<double> second_;  // Adam v
};

}  // namespace fitb
