#include "fitb/optimizer.hpp"

#include <cmath>

#include <fmt/format.h>

#include "fitb/error.hpp"

namespace fitb {

double learning_rate(const OptimizerConfig& config) {
  return std::visit([](const auto& c) { return c.lr; }, config);
}

OptimizerState::OptimizerState(OptimizerConfig config, std::size_t parameter_count)
    : config_(config), first_(parameter_count, 0.0) {
  if (std::holds_alternative<AdamConfig>(config_)) second_.assign(parameter_count, 0.0);
}

void OptimizerState::step(std::span<double> params, std::span<const double> grads) {
  if (params.size() != first_.size() || grads.size() != first_.size()) {
    fail(ErrorKind::ShapeMismatch, fmt::format("optimizer holds {} parameters, got {} params / {} grads",
                                               first_.size(), params.size(), grads.size()));
  }
  ++steps_;
  if (const auto* sgd = std::get_if<SgdConfig>(&config_)) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      first_[i] = sgd->momentum * first_[i] - sgd->lr * grads[i];
      params[i] += first_[i];
    }
    return;
  }
  const auto& adam = std::get<AdamConfig>(config_);
  const double t = static_cast<double>(steps_);
  const double correction1 = 1.0 - std::pow(adam.beta1, t);
  const double correction2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    first_[i] = adam.beta1 * first_[i] + (1.0 - adam.beta1) * g;
    second_[i] = adam.beta2 * second_[i] + (1.0 - adam.beta2) * g * g;
    const double m_hat = first_[i] / correction1;
    const double v_hat = second_[i] / correction2;
    params[i] -= adam.lr * m_hat / (std::sqrt(v_hat) + adam.epsilon);
  }
}

}  // namespace fitb
