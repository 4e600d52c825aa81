#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "plab/datasets.hpp"
#include "plab/trainer.hpp"

namespace plab {

/// Empirical coverage of a high-probability bound.
struct CoverageResult {
  std::string lemma_id;
  std::uint64_t trials = 0;
  std::uint64_t failures = 0;
  double delta = 0.0;
  double bound = 0.0;  // the bound value compared against (fixed across trials)
  nlohmann::json params = nlohmann::json::object();

  double rate() const { return trials == 0 ? 0.0 : static_cast<double>(failures) / static_cast<double>(trials); }
  /// 3 binomial standard errors at rate delta.
  double slack() const;
  /// failures / trials <= delta + slack.
  bool pass() const;
};

nlohmann::json to_json(const CoverageResult& r);

/// Trials per independently seeded block.
inline constexpr std::uint64_t kTrialBlock = 256;

/// sqrt(2 sigma^2 ln(2m / delta)).
double gaussian_max_bound(std::size_t m, double sigma2, double delta);

/// max(16 sigma^2 ln(2/delta), sqrt(128 m sigma^4 ln(2/delta))).
double subexp_bound(std::size_t m, double sigma2, double delta);

/// sqrt(2 ln(2/delta) sum s^2).
double hoeffding_bound(std::span<const double> s, double delta);

/// Number of small instances allowed: ceil(eta sqrt(m)), required in [1, m-1].
std::size_t small_count_limit(std::size_t m, double eta);

/// (k+1)/m - sqrt(-ln(delta) / (2m)) with k = small_count_limit(m, eta).
/// Throws unless delta lies in the admissible window (equivalently q > 0).
double small_count_q(std::size_t m, double eta, double delta);

/// sqrt(-(pi sigma^2 / 2) ln(1 - q^2)).
double small_count_threshold(std::size_t m, double sigma2, double eta, double delta);

/// C_thr(z, delta) = sqrt(-pi (|z|^2/d + 1) ln(1 - q^2)).
double c_thr(double z_sq_norm, std::size_t d, std::size_t m, double eta, double delta);

/// max_i |X_i| against gaussian_max_bound, X_i ~ N(0, sigma2).
CoverageResult check_gaussian_max(std::size_t m, double sigma2, double delta, std::uint64_t trials,
                                  std::uint64_t seed);

enum class SubexpY {
  derivative_square,  // Y_i = phi'(G_i)^2, G_i ~ N(0, 1)
  uniform,            // Y_i ~ U[gamma^2, 1]
};

/// |sum X_i^2 Y_i - sigma2 sum E[Y_i]| against subexp_bound.
CoverageResult check_subexp(std::size_t m, double sigma2, double gamma, double delta, std::uint64_t trials,
                            std::uint64_t seed, SubexpY mode = SubexpY::derivative_square);

/// Count of |X_i| below small_count_threshold against small_count_limit.
CoverageResult check_small_count(std::size_t m, double sigma2, double eta, double delta, std::uint64_t trials,
                                 std::uint64_t seed);

/// |sum s_n X_n| with Rademacher X_n against hoeffding_bound. An exact 0 = 0 is
/// not a failure.
CoverageResult check_hoeffding(std::span<const double> s, double delta, std::uint64_t trials, std::uint64_t seed);

struct LazyProbeReport {
  std::size_t flips = 0;
  std::size_t small_set_size = 0;      // ceil(eta sqrt(m))
  bool flips_within_small_set = true;  // every flipped unit is among the smallest |h_i(z)| at t = 0
  double c_thr = 0.0;
  double drift_bound = 0.0;  // (1/N) sqrt((2/m) ln(2m/delta)) sum |<x_n,z> + 1| w_n
  bool drift_below_threshold = false;  // drift_bound < c_thr / sqrt(2)
  double width_lhs = 0.0;              // m
  double width_rhs = 0.0;              // 4 ln(2m/delta) (sum (|<x_n,z>| + 1) w_n)^2 / (N^2 c_thr^2)
  bool width_holds = false;
};

struct LazyReport {
  std::size_t m = 0;
  double gamma = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  bool constant_derivative = false;  // gamma == 1: flips do not change phi'
  std::vector<LazyProbeReport> probes;

  /// Flipped units over all probes divided by (m * probes).
  double flip_fraction() const;
};

nlohmann::json to_json(const LazyReport& r);

/// Flip counts and the lazy-training inequalities at every probe of the trace.
LazyReport lazy_diagnostic(const TrainTrace& trace, double eta, double delta);

}  // namespace plab
