#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "plab/datasets.hpp"

namespace plab {

enum class LossKind { identity, exponential, logistic };

std::string_view to_string(LossKind kind) noexcept;
LossKind parse_loss(std::string_view name);

/// (l(margin), l'(margin)). Exponential loss throws on overflow; logistic is
/// evaluated in a form that stays finite for any finite margin.
std::pair<double, double> loss_and_deriv(LossKind kind, double margin);

/// Leaky-ReLU phi(x) = max(gamma x, x) and its derivative, with phi'(0) := gamma.
inline double activation(double h, double gamma) noexcept { return h > 0.0 ? h : gamma * h; }
inline double activation_deriv(double h, double gamma) noexcept { return h > 0.0 ? 1.0 : gamma; }

/// f(x) = sum_i alpha_i phi(<v_i, x> + a_i). V and a are trainable; alpha is
/// fixed at initialization.
struct TwoLayerNet {
  std::size_t m = 0;
  std::size_t d = 0;
  double gamma = 0.0;
  std::vector<double> V;      // m x d, row i is v_i
  std::vector<double> a;      // m
  std::vector<double> alpha;  // m

  std::span<const double> hidden(std::size_t i) const { return {V.data() + i * d, d}; }

  /// Throws unless shapes are consistent and gamma is in [0, 1]; gamma = 1 is the affine limit.
  void validate() const;

  bool operator==(const TwoLayerNet&) const = default;
};

/// V_ij ~ N(0, 1/d), a_i ~ N(0, 1), alpha_i ~ N(0, 1/m), deterministic per seed.
TwoLayerNet init_net(std::size_t m, std::size_t d, double gamma, std::uint64_t seed);

/// Hidden pre-activations <v_i, z> + a_i.
std::vector<double> pre_activations(const TwoLayerNet& net, std::span<const double> z);

double forward(const TwoLayerNet& net, std::span<const double> z);

/// grad_z f(z) = sum_i alpha_i phi'(<v_i, z> + a_i) v_i.
std::vector<double> input_gradient(const TwoLayerNet& net, std::span<const double> z);

/// Network outputs on every row of a dataset.
std::vector<double> forward_batch(const TwoLayerNet& net, const Dataset& ds);

struct ParamGradient {
  std::vector<double> V;  // m x d
  std::vector<double> a;  // m
};

/// Mean loss (1/N) sum_n l(-y_n f(x_n)).
double mean_loss(const TwoLayerNet& net, const Dataset& ds, LossKind loss);

/// Gradient of mean_loss with respect to V and a.
ParamGradient loss_gradient(const TwoLayerNet& net, const Dataset& ds, LossKind loss);

/// Fraction of rows with sgn f(x_n) = y_n (f = 0 counts as wrong).
double accuracy(const TwoLayerNet& net, const Dataset& ds);

nlohmann::json net_meta(const TwoLayerNet& net);
void save_net(const TwoLayerNet& net, const std::filesystem::path& path);
TwoLayerNet load_net(const std::filesystem::path& path);

/// SHA-256 of the serialized parameters; identifies a net in provenance records.
std::string net_fingerprint(const TwoLayerNet& net);

}  // namespace plab
