#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "plab/datasets.hpp"
#include "plab/network.hpp"

namespace plab {

enum class OptimizerKind {
  plain,     // full-batch gradient descent; discretized gradient flow
  momentum,  // heavy-ball momentum with reduce-on-plateau; figure mode
};

enum class TrainerPath {
  automatic,
  primal,  // recompute pre-activations from the weights every step
  kernel,  // identity loss only: update pre-activations through the Gram matrix
};

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer(std::string_view name);
std::string_view to_string(TrainerPath path) noexcept;
TrainerPath parse_trainer_path(std::string_view name);

struct TrainOptions {
  LossKind loss = LossKind::identity;
  std::size_t steps = 0;
  double step_size = 0.1;
  OptimizerKind optimizer = OptimizerKind::plain;
  double momentum = 0.9;
  double plateau_factor = 0.1;
  std::size_t plateau_patience = 10;
  double plateau_threshold = 1e-4;
  TrainerPath path = TrainerPath::automatic;
  /// Upper bound on N for the kernel path (its Gram matrix is N x N).
  std::size_t kernel_path_max_n = 4096;
};

struct ProbeSigns {
  std::vector<double> z;
  std::vector<std::int8_t> initial;  // sign of h_i(z) at t = 0, in {-1, 0, +1}
  std::vector<std::int8_t> final;    // sign at the end of training
  double drift_sum = 0.0;            // sum_n |<x_n, z> + 1| * w_n
  double width_sum = 0.0;            // sum_n (|<x_n, z>| + 1) * w_n
};

/// Everything the theory side consumes from one training run.
struct TrainTrace {
  /// w_n ~ integral over [0, T] of l'(-y_n f(x_n; t)) dt (left Riemann sum).
  std::vector<double> integral_weights;
  /// Mean loss at the start of every step plus the final value (steps + 1 entries).
  std::vector<double> loss_history;
  double flow_time = 0.0;  // steps * step_size
  std::size_t steps = 0;
  double step_size = 0.0;
  LossKind loss = LossKind::identity;
  OptimizerKind optimizer = OptimizerKind::plain;
  TrainerPath path_used = TrainerPath::primal;
  std::size_t n_samples = 0;
  std::vector<ProbeSigns> probes;
  TwoLayerNet initial_net;
  TwoLayerNet final_net;

  /// True when the weights approximate gradient-flow integrals.
  bool is_flow() const { return optimizer == OptimizerKind::plain; }
};

/// Full-batch training of V and a on mean loss; alpha is never touched.
/// Throws NonFiniteLoss (with the step index) if the loss leaves the finite range.
TrainTrace train(const TwoLayerNet& net, const Dataset& ds, const TrainOptions& opts,
                 std::span<const std::vector<double>> probes = {});

void save_trace(const TrainTrace& trace, const std::filesystem::path& path);
TrainTrace load_trace(const std::filesystem::path& path);

}  // namespace plab
