#pragma once

#include <span>
#include <vector>

namespace gwe {

/// Per-parameter accumulated squared gradients. The accumulator is sized
/// lazily on the first step so one state can shadow any parameter tensor.
struct AdagradState {
  std::vector<double> accum;
  double epsilon = 1e-8;
};

/// accum += grad^2; param -= lr * grad / (sqrt(accum) + epsilon).
void adagrad_step(std::span<double> param, std::span<const double> grad, AdagradState& state,
                  double lr);

/// Elementwise variant over a caller-owned accumulator slice, for sparse
/// row updates (GloVe rows, embedding rows).
void adagrad_update(std::span<double> param, std::span<const double> grad, std::span<double> accum,
                    double lr, double epsilon = 1e-8);

}  // namespace gwe
