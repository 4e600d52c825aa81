#pragma once

#include <array>
#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "plab/datasets.hpp"
#include "plab/perturbation.hpp"
#include "plab/trainer.hpp"

namespace plab {

/// <u, v> / (|u| |v|). Throws on a zero vector.
double cosine(std::span<const double> u, std::span<const double> v);

/// (1/N) sum_k y_k Phi(x_n, x_k) w_k x_k with w = trace_f.integral_weights.
std::vector<double> predicted_direction(const TrainTrace& trace_f, const Dataset& ds, std::size_t n);

/// All N predicted directions as an N x d row-major matrix.
std::vector<double> predicted_directions(const TrainTrace& trace_f, const Dataset& ds);

/// (1/N) sum_n y_n Phi(x_n, z) <x_n, z> w_n.
double f_hat(std::span<const double> z, const Dataset& ds, std::span<const double> weights_f, double gamma);

/// (1/(N N_g)) sum_j Phi(p_j, z) w^g_j sum_k y_k Phi(x_{n_j}, x_k) <x_k, z> w^f_k, over the
/// N_g kept adversarial samples j (n_j their clean index; p_j = r_j or x_{n_j} + r_j).
double g_hat(std::span<const double> z, const Dataset& ds, const AdvSet& adv, std::span<const double> weights_f,
             std::span<const double> weights_g, double gamma);

/// |sum_n y_n <x_n, z> w_n| / max_{x in {x_1..x_N, z}} sum_n lambda(x_n, x) |<x_n, z>| w_n.
/// Zero denominator gives 0.
double sufficient_ratio(std::span<const double> z, const Dataset& ds, std::span<const double> weights_f);

inline double sufficient_threshold(double gamma) { return (1.0 - gamma) / (1.0 + gamma); }

/// Constants standing in for the hidden factors of the margin conditions.
struct Thresholds {
  double c1 = 1.0;
  double c2 = 1.0;
};

struct ConditionReport {
  std::vector<double> z;
  Scenario scenario = Scenario::A;
  double f_hat = 0.0;
  double g_hat = 0.0;
  double margin_f = 0.0;
  double margin_g = 0.0;
  bool signs_agree = false;
  bool undetermined = false;  // f_hat or g_hat is exactly 0
  double sufficient_ratio = 0.0;
  double sufficient_threshold = 0.0;
  double width_diag = 0.0;
  /// |(1/N_g) sum_j y^adv_j Phi(p_j, z) w^g_j|, reported next to the g margin.
  double label_bias_term = 0.0;
  Thresholds thresholds_used;
  /// Mean integral weight of f, and the product of the f and g means; the
  /// unit-weight threshold shapes are multiplied by these.
  double weight_scale_f = 0.0;
  double weight_scale_g = 0.0;
  double threshold_f = 0.0;
  double threshold_g = 0.0;
  /// margin_f > threshold_f, margin_g > threshold_g, sufficient_ratio > sufficient_threshold.
  std::array<bool, 3> conditions_hold{};

  bool all_hold() const { return conditions_hold[0] && conditions_hold[1] && conditions_hold[2]; }
};

nlohmann::json to_json(const ConditionReport& r);

/// Precomputes everything that does not depend on the probe z.
class TheoryEvaluator {
 public:
  TheoryEvaluator(const Dataset& ds, std::vector<double> weights_f, double gamma);
  TheoryEvaluator(const Dataset& ds, const AdvSet& adv, std::vector<double> weights_f,
                  std::vector<double> weights_g, double gamma);

  double f_hat(std::span<const double> z) const;
  double g_hat(std::span<const double> z) const;
  double sufficient_ratio(std::span<const double> z) const;
  double label_bias_term(std::span<const double> z) const;
  bool has_g() const { return has_g_; }

 private:
  void check(std::span<const double> z) const;
  std::vector<double> inner_products(std::span<const double> z) const;

  const Dataset* ds_;
  std::size_t N_, d_, Ng_ = 0;
  double gamma_;
  bool has_g_ = false;
  std::vector<double> wf_, wg_;
  std::vector<double> sq_;       // |x_n|^2
  mutable std::once_flag lambda_once_;
  mutable std::vector<double> lambda_;  // N x N, lambda(x_n, x_k), built on first use
  std::vector<double> P_;        // Ng x d, g inputs
  std::vector<double> sqp_;      // |p_j|^2
  std::vector<double> M_;        // Ng x N, y_k Phi(x_{n_j}, x_k) w^f_k
  std::vector<double> ygw_;      // y^adv_j w^g_j
};

/// Builds the full report at z. Checks that trace_f produced adv and trace_g
/// was trained on it.
ConditionReport evaluate_conditions(std::span<const double> z, const Dataset& ds, const AdvSet& adv,
                                    const TrainTrace& trace_f, const TrainTrace& trace_g,
                                    const Thresholds& thresholds = {});

/// Same as evaluate_conditions with a prebuilt evaluator.
ConditionReport evaluate_conditions(std::span<const double> z, const TheoryEvaluator& ev, const Dataset& ds,
                                    const AdvSet& adv, const TrainTrace& trace_f, const TrainTrace& trace_g,
                                    const Thresholds& thresholds = {});

/// One row per report: index, f_hat, g_hat, margins, ratio and flags.
std::string condition_reports_csv(std::span<const ConditionReport> reports);

/// d^2 ((1/N) sum_n (w^f_n + w^g_n))^2, with the two means taken separately
/// when skipped samples make the traces differ in length.
double width_diagnostic(const TrainTrace& trace_f, const TrainTrace& trace_g, std::size_t d);

}  // namespace plab
