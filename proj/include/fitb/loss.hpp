#pragma once

#include <span>
#include <vector>

namespace fitb {

struct LossConfig {
  double margin = 1.0;
  /// Below this distance a negative pair's gradient is defined as zero.
  double distance_epsilon = 1e-12;

  /// Throws InvalidArgument unless margin > 0 and distance_epsilon > 0.
  void validate() const;
};

double euclidean_distance(std::span<const double> a, std::span<const double> b);

/// Y * D^2 + (1 - Y) * max(0, m - D)^2 with D the euclidean distance.
double contrastive_loss(std::span<const double> p_i, std::span<const double> p_j, int label,
                        const LossConfig& config);

struct ContrastiveGradient {
  std::vector<double> wrt_i;
  std::vector<double> wrt_j;
};

ContrastiveGradient contrastive_grad(std::span<const double> p_i, std::span<const double> p_j, int label,
                                     const LossConfig& config);

}  // namespace fitb
