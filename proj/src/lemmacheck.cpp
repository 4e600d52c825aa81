#include "plab/lemmacheck.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "plab/error.hpp"
#include "plab/network.hpp"
#include "plab/rng.hpp"

namespace plab {

double CoverageResult::slack() const {
  if (trials == 0) return 0.0;
  return 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(trials));
}

bool CoverageResult::pass() const { return rate() <= delta + slack(); }

nlohmann::json to_json(const CoverageResult& r) {
  return {{"lemma_id", r.lemma_id}, {"trials", r.trials}, {"failures", r.failures},
          {"rate", r.rate()},       {"delta", r.delta},   {"slack", r.slack()},
          {"bound", r.bound},       {"pass", r.pass()},   {"params", r.params}};
}

namespace {

void check_delta(double delta) {
  require(delta > 0.0 && delta < 1.0, ErrorKind::invalid_argument, "delta must be in (0, 1)");
}

void check_sigma2(double sigma2) {
  require(sigma2 > 0.0 && std::isfinite(sigma2), ErrorKind::invalid_argument, "sigma2 must be positive");
}

// Runs `trial(rng)` (true = failure) over seeded blocks.
template <class F>
std::uint64_t count_failures(std::uint64_t trials, std::uint64_t seed, F&& trial) {
  std::uint64_t failures = 0;
  const std::uint64_t blocks = (trials + kTrialBlock - 1) / kTrialBlock;
  for (std::uint64_t b = 0; b < blocks; ++b) {
    Rng rng(derive_seed(seed, b));
    const std::uint64_t len = std::min(kTrialBlock, trials - b * kTrialBlock);
    for (std::uint64_t t = 0; t < len; ++t) failures += trial(rng) ? 1 : 0;
  }
  return failures;
}

}  // namespace

double gaussian_max_bound(std::size_t m, double sigma2, double delta) {
  return std::sqrt(2.0 * sigma2 * std::log(2.0 * static_cast<double>(m) / delta));
}

double subexp_bound(std::size_t m, double sigma2, double delta) {
  const double l = std::log(2.0 / delta);
  return std::max(16.0 * sigma2 * l, std::sqrt(128.0 * static_cast<double>(m) * sigma2 * sigma2 * l));
}

double hoeffding_bound(std::span<const double> s, double delta) {
  double ss = 0.0;
  for (double v : s) ss += v * v;
  return std::sqrt(2.0 * std::log(2.0 / delta) * ss);
}

std::size_t small_count_limit(std::size_t m, double eta) {
  require(eta > 0.0 && std::isfinite(eta), ErrorKind::invalid_argument, "eta must be positive");
  const double k = std::ceil(eta * std::sqrt(static_cast<double>(m)));
  require(k >= 1.0 && k <= static_cast<double>(m) - 1.0, ErrorKind::invalid_argument,
          "ceil(eta sqrt(m)) must lie in [1, m-1]");
  return static_cast<std::size_t>(k);
}

double small_count_q(std::size_t m, double eta, double delta) {
  check_delta(delta);
  const std::size_t k = small_count_limit(m, eta);
  const double mm = static_cast<double>(m);
  const double kk = static_cast<double>(k);
  const double floor_delta = std::exp(-2.0 * (kk + 1.0) * (kk + 1.0) / mm);
  require(delta > floor_delta, ErrorKind::invalid_argument,
          "delta = " + std::to_string(delta) + " is not above exp(-2(k+1)^2/m) = " + std::to_string(floor_delta));
  const double q = (kk + 1.0) / mm - std::sqrt(-std::log(delta) / (2.0 * mm));
  require(q > 0.0 && q < 1.0, ErrorKind::invalid_argument, "small-count threshold is undefined for these parameters");
  return q;
}

double small_count_threshold(std::size_t m, double sigma2, double eta, double delta) {
  check_sigma2(sigma2);
  const double q = small_count_q(m, eta, delta);
  return std::sqrt(-(std::numbers::pi * sigma2 / 2.0) * std::log1p(-q * q));
}

double c_thr(double z_sq_norm, std::size_t d, std::size_t m, double eta, double delta) {
  require(d >= 1, ErrorKind::invalid_argument, "C_thr: d must be positive");
  const double q = small_count_q(m, eta, delta);
  return std::sqrt(-std::numbers::pi * (z_sq_norm / static_cast<double>(d) + 1.0) * std::log1p(-q * q));
}

CoverageResult check_gaussian_max(std::size_t m, double sigma2, double delta, std::uint64_t trials,
                                  std::uint64_t seed) {
  check_delta(delta);
  check_sigma2(sigma2);
  require(m >= 1, ErrorKind::invalid_argument, "check_gaussian_max: m must be positive");
  CoverageResult r{"gaussian_max", trials, 0, delta, gaussian_max_bound(m, sigma2, delta),
                   {{"m", m}, {"sigma2", sigma2}, {"seed", seed}}};
  const double sd = std::sqrt(sigma2);
  r.failures = count_failures(trials, seed, [&](Rng& rng) {
    double mx = 0.0;
    for (std::size_t i = 0; i < m; ++i) mx = std::max(mx, std::abs(sd * rng.normal()));
    return mx >= r.bound;
  });
  return r;
}

CoverageResult check_subexp(std::size_t m, double sigma2, double gamma, double delta, std::uint64_t trials,
                            std::uint64_t seed, SubexpY mode) {
  check_delta(delta);
  check_sigma2(sigma2);
  require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::invalid_argument, "check_subexp: gamma must be in [0, 1]");
  CoverageResult r{"subexp", trials, 0, delta, subexp_bound(m, sigma2, delta),
                   {{"m", m},
                    {"sigma2", sigma2},
                    {"gamma", gamma},
                    {"y_mode", mode == SubexpY::uniform ? "uniform" : "derivative_square"},
                    {"seed", seed}}};
  const double sd = std::sqrt(sigma2);
  const double g2 = gamma * gamma;
  const double ey = (1.0 + g2) / 2.0;  // same mean in both modes
  const double centre = sigma2 * static_cast<double>(m) * ey;
  r.failures = count_failures(trials, seed, [&](Rng& rng) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double x = sd * rng.normal();
      const double y = mode == SubexpY::uniform ? rng.uniform(g2, 1.0) : (rng.normal() > 0.0 ? 1.0 : g2);
      s += x * x * y;
    }
    return std::abs(s - centre) >= r.bound;
  });
  return r;
}

CoverageResult check_small_count(std::size_t m, double sigma2, double eta, double delta, std::uint64_t trials,
                                 std::uint64_t seed) {
  const double thr = small_count_threshold(m, sigma2, eta, delta);
  const std::size_t k = small_count_limit(m, eta);
  CoverageResult r{"small_count", trials, 0, delta, thr,
                   {{"m", m}, {"sigma2", sigma2}, {"eta", eta}, {"limit", k}, {"seed", seed}}};
  const double sd = std::sqrt(sigma2);
  r.failures = count_failures(trials, seed, [&](Rng& rng) {
    std::size_t c = 0;
    for (std::size_t i = 0; i < m; ++i) c += std::abs(sd * rng.normal()) < thr;
    return c > k;
  });
  return r;
}

CoverageResult check_hoeffding(std::span<const double> s, double delta, std::uint64_t trials, std::uint64_t seed) {
  check_delta(delta);
  CoverageResult r{"hoeffding", trials, 0, delta, hoeffding_bound(s, delta), {{"n", s.size()}, {"seed", seed}}};
  r.failures = count_failures(trials, seed, [&](Rng& rng) {
    double sum = 0.0;
    for (double v : s) sum += v * rng.sign();
    const double a = std::abs(sum);
    return a > r.bound || (a == r.bound && a > 0.0);
  });
  return r;
}

double LazyReport::flip_fraction() const {
  if (probes.empty() || m == 0) return 0.0;
  std::size_t f = 0;
  for (const auto& p : probes) f += p.flips;
  return static_cast<double>(f) / (static_cast<double>(m) * static_cast<double>(probes.size()));
}

nlohmann::json to_json(const LazyReport& r) {
  nlohmann::json probes = nlohmann::json::array();
  for (const auto& p : r.probes) {
    probes.push_back({{"flips", p.flips},
                      {"small_set_size", p.small_set_size},
                      {"flips_within_small_set", p.flips_within_small_set},
                      {"c_thr", p.c_thr},
                      {"drift_bound", p.drift_bound},
                      {"drift_below_threshold", p.drift_below_threshold},
                      {"width_lhs", p.width_lhs},
                      {"width_rhs", p.width_rhs},
                      {"width_holds", p.width_holds}});
  }
  nlohmann::json j = {{"m", r.m},         {"gamma", r.gamma},
                      {"eta", r.eta},     {"delta", r.delta},
                      {"flip_fraction", r.flip_fraction()},
                      {"probes", probes}};
  if (r.constant_derivative) j["note"] = "gamma = 1: phi' is constant, flips do not affect the dynamics";
  return j;
}

LazyReport lazy_diagnostic(const TrainTrace& trace, double eta, double delta) {
  const TwoLayerNet& net = trace.initial_net;
  LazyReport rep;
  rep.m = net.m;
  rep.gamma = net.gamma;
  rep.eta = eta;
  rep.delta = delta;
  rep.constant_derivative = net.gamma == 1.0;
  require(!trace.probes.empty(), ErrorKind::invalid_argument, "lazy_diagnostic: trace has no probe data");
  const std::size_t k = small_count_limit(net.m, eta);
  const double m = static_cast<double>(net.m);
  const double N = static_cast<double>(trace.n_samples);
  const double log_term = std::log(2.0 * m / delta);
  for (const auto& p : trace.probes) {
    require(p.initial.size() == net.m && p.final.size() == net.m, ErrorKind::format,
            "lazy_diagnostic: probe sign vectors have the wrong length");
    LazyProbeReport r;
    r.small_set_size = k;
    const auto h0 = pre_activations(net, p.z);
    std::vector<std::size_t> order(net.m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return std::abs(h0[i]) < std::abs(h0[j]); });
    std::vector<char> in_small(net.m, 0);
    for (std::size_t i = 0; i < k; ++i) in_small[order[i]] = 1;
    for (std::size_t i = 0; i < net.m; ++i) {
      if (p.initial[i] != p.final[i]) {
        ++r.flips;
        if (!in_small[i]) r.flips_within_small_set = false;
      }
    }
    double zz = 0.0;
    for (double v : p.z) zz += v * v;
    r.c_thr = c_thr(zz, net.d, net.m, eta, delta);
    r.drift_bound = N > 0 ? std::sqrt(2.0 / m * log_term) * p.drift_sum / N : 0.0;
    r.drift_below_threshold = r.drift_bound < r.c_thr / std::sqrt(2.0);
    r.width_lhs = m;
    r.width_rhs = N > 0 ? 4.0 * log_term * p.width_sum * p.width_sum / (N * N * r.c_thr * r.c_thr) : 0.0;
    r.width_holds = r.width_lhs > r.width_rhs;
    rep.probes.push_back(r);
  }
  return rep;
}

}  // namespace plab
