#include "fitb/loss.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "fitb/error.hpp"

namespace fitb {
namespace {

void check_pair(std::span<const double> a, std::span<const double> b, int label) {
  if (a.size() != b.size()) {
    fail(ErrorKind::DimensionMismatch, fmt::format("embedding lengths differ: {} vs {}", a.size(), b.size()));
  }
  if (label != 0 && label != 1) fail(ErrorKind::InvalidArgument, fmt::format("pair label must be 0 or 1, got {}", label));
}

}  // namespace

void LossConfig::validate() const {
  if (!(margin > 0.0) || !std::isfinite(margin)) fail(ErrorKind::InvalidArgument, "margin must be positive and finite");
  if (!(distance_epsilon > 0.0)) fail(ErrorKind::InvalidArgument, "distance_epsilon must be positive");
}

double euclidean_distance(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    fail(ErrorKind::DimensionMismatch, fmt::format("embedding lengths differ: {} vs {}", a.size(), b.size()));
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

double contrastive_loss(std::span<const double> p_i, std::span<const double> p_j, int label,
                        const LossConfig& config) {
  check_pair(p_i, p_j, label);
  const double distance = euclidean_distance(p_i, p_j);
  if (label == 1) return distance * distance;
  const double hinge = std::max(0.0, config.margin - distance);
  return hinge * hinge;
}

ContrastiveGradient contrastive_grad(std::span<const double> p_i, std::span<const double> p_j, int label,
                                     const LossConfig& config) {
  check_pair(p_i, p_j, label);
  ContrastiveGradient grad{std::vector<double>(p_i.size(), 0.0), std::vector<double>(p_i.size(), 0.0)};
  double scale = 0.0;  // dL/dp_i = scale * (p_i - p_j)
  if (label == 1) {
    scale = 2.0;
  } else {
    const double distance = euclidean_distance(p_i, p_j);
    if (distance >= config.margin || distance < config.distance_epsilon) return grad;
    scale = -2.0 * (config.margin - distance) / distance;
  }
  for (std::size_t k = 0; k < p_i.size(); ++k) {
    const double g = scale * (p_i[k] - p_j[k]);
    grad.wrt_i[k] = g;
    grad.wrt_j[k] = -g;
  }
  return grad;
}

}  // namespace fitb
