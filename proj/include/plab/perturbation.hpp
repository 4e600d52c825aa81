#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "plab/datasets.hpp"
#include "plab/network.hpp"
#include "plab/trainer.hpp"

namespace plab {

enum class Scenario {
  A,  // g learns from the bare perturbations r_n
  B,  // g learns from the perturbed inputs x_n + r_n
};

enum class TargetMode { uniform, flip };

enum class DegeneratePolicy {
  strict,  // throw DegenerateGradient with the sample index
  skip,    // drop the sample and count it
};

std::string_view to_string(Scenario s) noexcept;
Scenario parse_scenario(std::string_view name);
std::string_view to_string(TargetMode mode) noexcept;
TargetMode parse_target_mode(std::string_view name);

/// eps = sqrt(d * c^2) for a per-coordinate size c.
double eps_from_per_coordinate(double c, std::size_t d);

/// The adversarial training set for g. Per-sample arrays (y, y_adv,
/// grad_norm, skipped) cover all N clean samples; `r` holds one row per kept
/// sample in the order of `kept`.
struct AdvSet {
  std::size_t n = 0;
  std::size_t d = 0;
  double eps = 0.0;
  Scenario scenario = Scenario::A;
  std::vector<std::int8_t> y;
  std::vector<std::int8_t> y_adv;
  std::vector<double> grad_norm;  // ||grad_x f(x_n)|| at the end of training f
  std::vector<std::int8_t> skipped;
  std::vector<std::size_t> kept;
  std::vector<double> r;  // kept.size() x d
  std::string source_net;  // net_fingerprint of f after training

  std::size_t n_kept() const { return kept.size(); }
  std::size_t n_skipped() const { return n - kept.size(); }
  std::span<const double> perturbation(std::size_t j) const { return {r.data() + j * d, d}; }

  /// Input of g for kept sample j: r_j (A) or x_{kept[j]} + r_j (B).
  std::vector<double> g_input(std::size_t j, const Dataset& clean) const;

  bool operator==(const AdvSet&) const = default;
};

/// Uniform mode: i.i.d. +-1. Flip mode: -y_n.
std::vector<std::int8_t> sample_target_labels(std::size_t n, TargetMode mode,
                                              std::span<const std::int8_t> clean_labels,
                                              std::uint64_t seed);

/// r = -eps * grad_x l(-y_adv f(x)) / ||grad_x l(-y_adv f(x))||.
/// Throws DegenerateGradient (index 0) if the gradient vanishes.
std::vector<double> make_perturbation(const TwoLayerNet& net, std::span<const double> x, int y_adv,
                                      double eps, LossKind loss);

/// Builds D^adv from the trained f. eps = 0 gives the zero-perturbation control.
std::pair<AdvSet, Dataset> build_adv_set(const TwoLayerNet& net_f, const TrainTrace& trace_f,
                                         const Dataset& clean, std::span<const std::int8_t> y_adv,
                                         double eps, Scenario scenario, LossKind loss,
                                         DegeneratePolicy policy = DegeneratePolicy::strict);

/// CSV with columns index,y,y_adv,eps,grad_norm,skipped_flag.
std::string adv_set_csv(const AdvSet& adv);

void save_adv_set(const AdvSet& adv, const std::filesystem::path& path);
AdvSet load_adv_set(const std::filesystem::path& path);

}  // namespace plab
