#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace plab {

enum class PhiMethod { monte_carlo, closed_form };

std::string_view to_string(PhiMethod method) noexcept;

/// Phi(z1, z2) = E[phi'(<v, z1> + a) phi'(<v, z2> + a)], v ~ N(0, I/d), a ~ N(0, 1).
struct PhiEstimate {
  double value = 0.0;
  double std_error = 0.0;  // 0 for the closed form
  PhiMethod method = PhiMethod::closed_form;
  std::uint64_t samples = 0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const { return lo <= x && x <= hi; }
};

/// Samples per independently seeded block in phi_mc.
inline constexpr std::uint64_t kPhiBlock = 4096;

/// Monte Carlo estimate from literal draws of (v, a).
PhiEstimate phi_mc(std::span<const double> z1, std::span<const double> z2, double gamma, std::size_t d,
                   std::uint64_t n_samples, std::uint64_t seed);

/// Same draws evaluated for several slopes at once.
std::vector<PhiEstimate> phi_mc(std::span<const double> z1, std::span<const double> z2,
                                std::span<const double> gammas, std::size_t d, std::uint64_t n_samples,
                                std::uint64_t seed);

/// Correlation of the two pre-activations:
/// (<z1,z2>/d + 1) / sqrt((|z1|^2/d + 1)(|z2|^2/d + 1)).
double preact_correlation(double ip, double sq1, double sq2, std::size_t d);

/// gamma + (1 - gamma)^2 (1/4 + asin(rho) / (2 pi)) from inner-product statistics.
/// rho is clamped to [-1, 1]; overshooting by more than 1e-9 throws.
double phi_closed_from_stats(double ip, double sq1, double sq2, double gamma, std::size_t d);

PhiEstimate phi_closed(std::span<const double> z1, std::span<const double> z2, double gamma, std::size_t d);

/// lambda(z1, z2) = 1 - sqrt((e / 2pi) * num / den) with
///   num = |z1|^2 |z2|^2 - <z1,z2>^2 + d |z1 - z2|^2
///   den = |z1|^2 |z2|^2 + <z1,z2>^2 + d |z1 + z2|^2 + 2 d^2.
double lambda_factor(std::span<const double> z1, std::span<const double> z2, std::size_t d);

/// (1+gamma)^2/4 -+ (1+gamma)(1-gamma)/4 * lambda(z1, z2). Rejects z1 == z2.
Interval phi_bound(std::span<const double> z1, std::span<const double> z2, double gamma, std::size_t d);

}  // namespace plab
