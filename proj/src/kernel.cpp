#include "plab/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "plab/error.hpp"
#include "plab/rng.hpp"
#include "plab/simd.hpp"

namespace plab {

std::string_view to_string(PhiMethod method) noexcept {
  return method == PhiMethod::monte_carlo ? "monte_carlo" : "closed_form";
}

namespace {

void check_pair(std::span<const double> z1, std::span<const double> z2, std::size_t d) {
  require(d >= 1, ErrorKind::invalid_argument, "Phi: d must be positive");
  require(z1.size() == d && z2.size() == d, ErrorKind::dimension_mismatch,
          "Phi: inputs must have length d = " + std::to_string(d));
}

void check_gamma(double gamma) {
  require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::invalid_argument, "Phi: gamma must be in [0, 1]");
}

}  // namespace

std::vector<PhiEstimate> phi_mc(std::span<const double> z1, std::span<const double> z2,
                                std::span<const double> gammas, std::size_t d, std::uint64_t n_samples,
                                std::uint64_t seed) {
  check_pair(z1, z2, d);
  require(n_samples >= 1, ErrorKind::invalid_argument, "phi_mc: n_samples must be positive");
  for (double g : gammas) check_gamma(g);

  // phi'(u) phi'(w) takes the value 1, gamma or gamma^2 depending on how many
  // of u, w are positive, so the three counts determine every estimate.
  std::uint64_t count[3] = {0, 0, 0};  // index = number of active units
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  const std::uint64_t blocks = (n_samples + kPhiBlock - 1) / kPhiBlock;
  for (std::uint64_t b = 0; b < blocks; ++b) {
    Rng rng(derive_seed(seed, b));
    const std::uint64_t len = std::min(kPhiBlock, n_samples - b * kPhiBlock);
    for (std::uint64_t s = 0; s < len; ++s) {
      double u = 0.0, w = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double v = sd * rng.normal();
        u += v * z1[j];
        w += v * z2[j];
      }
      const double a = rng.normal();
      ++count[(u + a > 0.0) + (w + a > 0.0)];
    }
  }

  std::vector<PhiEstimate> out;
  const double n = static_cast<double>(n_samples);
  for (double g : gammas) {
    const double val[3] = {g * g, g, 1.0};
    double mean = 0.0;
    for (int k = 0; k < 3; ++k) mean += static_cast<double>(count[k]) * val[k];
    mean /= n;
    double ss = 0.0;
    for (int k = 0; k < 3; ++k) ss += static_cast<double>(count[k]) * (val[k] - mean) * (val[k] - mean);
    const double var = n_samples > 1 ? ss / (n - 1.0) : 0.0;
    out.push_back({mean, std::sqrt(var / n), PhiMethod::monte_carlo, n_samples});
  }
  return out;
}

PhiEstimate phi_mc(std::span<const double> z1, std::span<const double> z2, double gamma, std::size_t d,
                   std::uint64_t n_samples, std::uint64_t seed) {
  const double g[1] = {gamma};
  return phi_mc(z1, z2, std::span<const double>(g), d, n_samples, seed).front();
}

double preact_correlation(double ip, double sq1, double sq2, std::size_t d) {
  const double dd = static_cast<double>(d);
  return (ip / dd + 1.0) / std::sqrt((sq1 / dd + 1.0) * (sq2 / dd + 1.0));
}

double phi_closed_from_stats(double ip, double sq1, double sq2, double gamma, std::size_t d) {
  double rho = preact_correlation(ip, sq1, sq2, d);
  require(std::isfinite(rho), ErrorKind::non_finite, "phi_closed: non-finite correlation");
  require(std::abs(rho) <= 1.0 + 1e-9, ErrorKind::non_finite,
          "phi_closed: correlation " + std::to_string(rho) + " outside [-1, 1]");
  rho = std::clamp(rho, -1.0, 1.0);
  const double c = 1.0 - gamma;
  return gamma + c * c * (0.25 + std::asin(rho) / (2.0 * std::numbers::pi));
}

PhiEstimate phi_closed(std::span<const double> z1, std::span<const double> z2, double gamma, std::size_t d) {
  check_pair(z1, z2, d);
  check_gamma(gamma);
  const double v = phi_closed_from_stats(simd::dot(z1, z2), simd::dot(z1, z1), simd::dot(z2, z2), gamma, d);
  return {v, 0.0, PhiMethod::closed_form, 0};
}

double lambda_factor(std::span<const double> z1, std::span<const double> z2, std::size_t d) {
  check_pair(z1, z2, d);
  double s1 = 0.0, s2 = 0.0, ip = 0.0, diff = 0.0, sum = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    s1 += z1[j] * z1[j];
    s2 += z2[j] * z2[j];
    ip += z1[j] * z2[j];
    diff += (z1[j] - z2[j]) * (z1[j] - z2[j]);
    sum += (z1[j] + z2[j]) * (z1[j] + z2[j]);
  }
  const double dd = static_cast<double>(d);
  const double num = std::max(0.0, s1 * s2 - ip * ip) + dd * diff;
  const double den = s1 * s2 + ip * ip + dd * sum + 2.0 * dd * dd;
  return 1.0 - std::sqrt(std::numbers::e / (2.0 * std::numbers::pi) * num / den);
}

Interval phi_bound(std::span<const double> z1, std::span<const double> z2, double gamma, std::size_t d) {
  check_pair(z1, z2, d);
  check_gamma(gamma);
  require(!std::equal(z1.begin(), z1.end(), z2.begin()), ErrorKind::invalid_argument,
          "phi_bound: the bound requires z1 != z2");
  const double center = (1.0 + gamma) * (1.0 + gamma) / 4.0;
  const double half = (1.0 + gamma) * (1.0 - gamma) / 4.0 * lambda_factor(z1, z2, d);
  return {center - half, center + half};
}

}  // namespace plab
