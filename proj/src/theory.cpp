#include "plab/theory.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "plab/error.hpp"
#include "plab/kernel.hpp"
#include "plab/simd.hpp"

namespace plab {

double cosine(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), ErrorKind::dimension_mismatch, "cosine: length mismatch");
  const double uu = simd::dot(u, u), vv = simd::dot(v, v);
  require(uu > 0.0 && vv > 0.0, ErrorKind::invalid_argument, "cosine: zero vector");
  return std::clamp(simd::dot(u, v) / std::sqrt(uu * vv), -1.0, 1.0);
}

namespace {

double trace_gamma(const TrainTrace& t) { return t.initial_net.gamma; }

void check_weights(const Dataset& ds, std::span<const double> w, const char* what) {
  require(w.size() == ds.size(), ErrorKind::dimension_mismatch,
          std::string(what) + ": need one weight per sample");
}

}  // namespace

std::vector<double> predicted_direction(const TrainTrace& trace_f, const Dataset& ds, std::size_t n) {
  require(n < ds.size(), ErrorKind::invalid_argument, "predicted_direction: index out of range");
  require(trace_f.n_samples == ds.size(), ErrorKind::provenance,
          "predicted_direction: trace was not trained on this dataset");
  const std::size_t N = ds.size(), d = ds.dim();
  const double gamma = trace_gamma(trace_f);
  const auto xn = ds.row(n);
  const double sqn = simd::dot(xn, xn);
  std::vector<double> out(d, 0.0);
  for (std::size_t k = 0; k < N; ++k) {
    const auto xk = ds.row(k);
    const double phi = phi_closed_from_stats(simd::dot(xn, xk), sqn, simd::dot(xk, xk), gamma, d);
    simd::axpy(ds.label(k) * phi * trace_f.integral_weights[k] / static_cast<double>(N), xk, out);
  }
  return out;
}

std::vector<double> predicted_directions(const TrainTrace& trace_f, const Dataset& ds) {
  require(trace_f.n_samples == ds.size(), ErrorKind::provenance,
          "predicted_directions: trace was not trained on this dataset");
  const std::size_t N = ds.size(), d = ds.dim();
  const double gamma = trace_gamma(trace_f);
  std::vector<double> XT(d * N);
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t j = 0; j < d; ++j) XT[j * N + n] = ds.row(n)[j];
  std::vector<double> G(N * N);
  simd::gemm_tn(N, N, d, 1.0, XT.data(), N, XT.data(), N, 0.0, G.data(), N);
  // Coefficients stored transposed (k x n) so that out = C^T X is one gemm_tn.
  std::vector<double> CT(N * N);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t k = 0; k < N; ++k) {
      const double phi = phi_closed_from_stats(G[n * N + k], G[n * N + n], G[k * N + k], gamma, d);
      CT[k * N + n] = ds.label(k) * phi * trace_f.integral_weights[k] / static_cast<double>(N);
    }
  }
  std::vector<double> out(N * d);
  simd::gemm_tn(N, d, N, 1.0, CT.data(), N, ds.features().data(), d, 0.0, out.data(), d);
  return out;
}

double f_hat(std::span<const double> z, const Dataset& ds, std::span<const double> weights_f, double gamma) {
  return TheoryEvaluator(ds, std::vector<double>(weights_f.begin(), weights_f.end()), gamma).f_hat(z);
}

double g_hat(std::span<const double> z, const Dataset& ds, const AdvSet& adv, std::span<const double> weights_f,
             std::span<const double> weights_g, double gamma) {
  return TheoryEvaluator(ds, adv, std::vector<double>(weights_f.begin(), weights_f.end()),
                         std::vector<double>(weights_g.begin(), weights_g.end()), gamma)
      .g_hat(z);
}

double sufficient_ratio(std::span<const double> z, const Dataset& ds, std::span<const double> weights_f) {
  return TheoryEvaluator(ds, std::vector<double>(weights_f.begin(), weights_f.end()), 0.0).sufficient_ratio(z);
}

TheoryEvaluator::TheoryEvaluator(const Dataset& ds, std::vector<double> weights_f, double gamma)
    : ds_(&ds), N_(ds.size()), d_(ds.dim()), gamma_(gamma), wf_(std::move(weights_f)) {
  require(!ds.empty(), ErrorKind::invalid_argument, "theory: empty dataset");
  require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::invalid_argument, "theory: gamma must be in [0, 1]");
  check_weights(ds, wf_, "theory");
  sq_.resize(N_);
  for (std::size_t n = 0; n < N_; ++n) sq_[n] = simd::dot(ds.row(n), ds.row(n));
}

TheoryEvaluator::TheoryEvaluator(const Dataset& ds, const AdvSet& adv, std::vector<double> weights_f,
                                 std::vector<double> weights_g, double gamma)
    : TheoryEvaluator(ds, std::move(weights_f), gamma) {
  require(adv.n == N_ && adv.d == d_, ErrorKind::provenance, "theory: adversarial set does not match dataset");
  require(std::equal(adv.y.begin(), adv.y.end(), ds.labels().begin()), ErrorKind::provenance,
          "theory: adversarial set labels do not match dataset");
  Ng_ = adv.n_kept();
  require(weights_g.size() == Ng_, ErrorKind::dimension_mismatch,
          "theory: need one g weight per kept adversarial sample");
  require(Ng_ > 0, ErrorKind::invalid_argument, "theory: adversarial set is empty");
  has_g_ = true;
  wg_ = std::move(weights_g);
  P_.resize(Ng_ * d_);
  sqp_.resize(Ng_);
  M_.resize(Ng_ * N_);
  ygw_.resize(Ng_);
  for (std::size_t j = 0; j < Ng_; ++j) {
    const auto p = adv.g_input(j, ds);
    std::copy(p.begin(), p.end(), P_.begin() + j * d_);
    sqp_[j] = simd::dot(p, p);
    ygw_[j] = adv.y_adv[adv.kept[j]] * wg_[j];
    const std::size_t n = adv.kept[j];
    const auto xn = ds.row(n);
    for (std::size_t k = 0; k < N_; ++k) {
      const double phi = phi_closed_from_stats(simd::dot(xn, ds.row(k)), sq_[n], sq_[k], gamma_, d_);
      M_[j * N_ + k] = ds.label(k) * phi * wf_[k];
    }
  }
}

void TheoryEvaluator::check(std::span<const double> z) const {
  require(z.size() == d_, ErrorKind::dimension_mismatch, "theory: probe has the wrong dimension");
}

std::vector<double> TheoryEvaluator::inner_products(std::span<const double> z) const {
  std::vector<double> t(N_);
  for (std::size_t n = 0; n < N_; ++n) t[n] = simd::dot(ds_->row(n), z);
  return t;
}

double TheoryEvaluator::f_hat(std::span<const double> z) const {
  check(z);
  const double sqz = simd::dot(z, z);
  double s = 0.0;
  for (std::size_t n = 0; n < N_; ++n) {
    const double ip = simd::dot(ds_->row(n), z);
    s += ds_->label(n) * phi_closed_from_stats(ip, sq_[n], sqz, gamma_, d_) * ip * wf_[n];
  }
  return s / static_cast<double>(N_);
}

double TheoryEvaluator::g_hat(std::span<const double> z) const {
  require(has_g_, ErrorKind::invalid_argument, "theory: evaluator has no g side");
  check(z);
  const auto t = inner_products(z);
  const double sqz = simd::dot(z, z);
  double s = 0.0;
  for (std::size_t j = 0; j < Ng_; ++j) {
    const std::span<const double> p(P_.data() + j * d_, d_);
    const double inner = simd::dot(std::span<const double>(M_.data() + j * N_, N_), t);
    s += phi_closed_from_stats(simd::dot(p, z), sqp_[j], sqz, gamma_, d_) * wg_[j] * inner;
  }
  return s / (static_cast<double>(N_) * static_cast<double>(Ng_));
}

double TheoryEvaluator::label_bias_term(std::span<const double> z) const {
  require(has_g_, ErrorKind::invalid_argument, "theory: evaluator has no g side");
  check(z);
  const double sqz = simd::dot(z, z);
  double s = 0.0;
  for (std::size_t j = 0; j < Ng_; ++j) {
    const std::span<const double> p(P_.data() + j * d_, d_);
    s += ygw_[j] * phi_closed_from_stats(simd::dot(p, z), sqp_[j], sqz, gamma_, d_);
  }
  return std::abs(s / static_cast<double>(Ng_));
}

double TheoryEvaluator::sufficient_ratio(std::span<const double> z) const {
  check(z);
  std::call_once(lambda_once_, [this] {
    auto& lam = lambda_;
    lam.resize(N_ * N_);
    for (std::size_t n = 0; n < N_; ++n) {
      for (std::size_t k = n; k < N_; ++k) {
        const double l = lambda_factor(ds_->row(n), ds_->row(k), d_);
        lam[n * N_ + k] = l;
        lam[k * N_ + n] = l;
      }
    }
  });
  const auto t = inner_products(z);
  double num = 0.0;
  std::vector<double> a(N_);
  for (std::size_t n = 0; n < N_; ++n) {
    num += ds_->label(n) * t[n] * wf_[n];
    a[n] = std::abs(t[n]) * wf_[n];
  }
  double den = 0.0;
  for (std::size_t n = 0; n < N_; ++n) den += lambda_factor(ds_->row(n), z, d_) * a[n];
  for (std::size_t k = 0; k < N_; ++k) {
    den = std::max(den, simd::dot(std::span<const double>(lambda_.data() + k * N_, N_), a));
  }
  return den > 0.0 ? std::abs(num) / den : 0.0;
}

ConditionReport evaluate_conditions(std::span<const double> z, const Dataset& ds, const AdvSet& adv,
                                    const TrainTrace& trace_f, const TrainTrace& trace_g,
                                    const Thresholds& thresholds) {
  const TheoryEvaluator ev(ds, adv, trace_f.integral_weights, trace_g.integral_weights, trace_f.initial_net.gamma);
  return evaluate_conditions(z, ev, ds, adv, trace_f, trace_g, thresholds);
}

ConditionReport evaluate_conditions(std::span<const double> z, const TheoryEvaluator& ev, const Dataset& ds,
                                    const AdvSet& adv, const TrainTrace& trace_f, const TrainTrace& trace_g,
                                    const Thresholds& thresholds) {
  require(adv.source_net == net_fingerprint(trace_f.final_net), ErrorKind::provenance,
          "evaluate_conditions: adversarial set was not built from trace_f");
  require(trace_g.n_samples == adv.n_kept(), ErrorKind::provenance,
          "evaluate_conditions: trace_g was not trained on the adversarial set");
  require(trace_f.flow_time > 0.0 && trace_g.flow_time > 0.0, ErrorKind::invalid_argument,
          "evaluate_conditions: training times must be positive");
  require(adv.eps > 0.0, ErrorKind::invalid_argument, "evaluate_conditions: eps must be positive");

  const double gamma = trace_f.initial_net.gamma;
  const std::size_t N = ds.size(), d = ds.dim();
  ConditionReport r;
  r.z.assign(z.begin(), z.end());
  r.scenario = adv.scenario;
  r.f_hat = ev.f_hat(z);
  r.g_hat = ev.g_hat(z);
  r.margin_f = std::abs(r.f_hat);
  r.margin_g = std::abs(r.g_hat);
  const auto sgn = [](double v) { return (v > 0) - (v < 0); };
  r.signs_agree = sgn(r.f_hat) == sgn(r.g_hat);
  r.undetermined = r.f_hat == 0.0 || r.g_hat == 0.0;
  r.sufficient_ratio = ev.sufficient_ratio(z);
  r.sufficient_threshold = sufficient_threshold(gamma);
  r.width_diag = width_diagnostic(trace_f, trace_g, d);
  r.label_bias_term = ev.label_bias_term(z);
  r.thresholds_used = thresholds;

  const double tf = trace_f.flow_time, tg = trace_g.flow_time;
  const double nn = static_cast<double>(N);
  double sample_term = 1.0 / std::sqrt(nn);
  if (adv.scenario == Scenario::B) {
    double s = 0.0;
    for (std::size_t n = 0; n < N; ++n) {
      const double v = simd::dot(ds.row(n), z) + 1.0;
      s += v * v;
    }
    sample_term = std::sqrt(s) / nn;
  }
  // f_hat and g_hat carry the integral weights; the threshold shapes are for unit
  // weights, so they are rescaled by the mean weights (exact for identity loss).
  const auto mean = [](const std::vector<double>& w) {
    double s = 0.0;
    for (double v : w) s += v;
    return w.empty() ? 0.0 : s / static_cast<double>(w.size());
  };
  r.weight_scale_f = mean(trace_f.integral_weights);
  r.weight_scale_g = r.weight_scale_f * mean(trace_g.integral_weights);
  r.threshold_f = r.weight_scale_f * thresholds.c1 * (1.0 + 1.0 / tf);
  r.threshold_g = r.weight_scale_g * thresholds.c2 *
                  (1.0 / tf + std::sqrt(static_cast<double>(d)) / adv.eps * (1.0 / tg + sample_term));
  r.conditions_hold = {r.margin_f > r.threshold_f, r.margin_g > r.threshold_g,
                       r.sufficient_ratio > r.sufficient_threshold};
  // The certificate is a theorem: it must never contradict the computed signs.
  require(!r.conditions_hold[2] || r.signs_agree, ErrorKind::non_finite,
          "evaluate_conditions: sufficient condition holds but signs disagree");
  return r;
}

nlohmann::json to_json(const ConditionReport& r) {
  return {
      {"z", r.z},
      {"scenario", to_string(r.scenario)},
      {"f_hat", r.f_hat},
      {"g_hat", r.g_hat},
      {"margin_f", r.margin_f},
      {"margin_g", r.margin_g},
      {"signs_agree", r.signs_agree},
      {"undetermined", r.undetermined},
      {"sufficient_ratio", r.sufficient_ratio},
      {"sufficient_threshold", r.sufficient_threshold},
      {"width_diag", r.width_diag},
      {"label_bias_term", r.label_bias_term},
      {"thresholds_used", {{"c1", r.thresholds_used.c1}, {"c2", r.thresholds_used.c2}}},
      {"threshold_f", r.threshold_f},
      {"threshold_g", r.threshold_g},
      {"weight_scale_f", r.weight_scale_f},
      {"weight_scale_g", r.weight_scale_g},
      {"conditions_hold", r.conditions_hold},
      {"delta", "enters only through polylog factors absorbed into c1, c2"},
  };
}

std::string condition_reports_csv(std::span<const ConditionReport> reports) {
  std::string out =
      "index,f_hat,g_hat,margin_f,margin_g,threshold_f,threshold_g,sufficient_ratio,signs_agree,undetermined,"
      "cond1,cond2,cond3\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out += fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{},{},{},{},{}\n", i, r.f_hat,
                       r.g_hat, r.margin_f, r.margin_g, r.threshold_f, r.threshold_g, r.sufficient_ratio,
                       int(r.signs_agree), int(r.undetermined), int(r.conditions_hold[0]),
                       int(r.conditions_hold[1]), int(r.conditions_hold[2]));
  }
  return out;
}

double width_diagnostic(const TrainTrace& trace_f, const TrainTrace& trace_g, std::size_t d) {
  const auto mean = [](const std::vector<double>& w) {
    double s = 0.0;
    for (double v : w) s += v;
    return w.empty() ? 0.0 : s / static_cast<double>(w.size());
  };
  const double dd = static_cast<double>(d);
  const double s = mean(trace_f.integral_weights) + mean(trace_g.integral_weights);
  return dd * dd * s * s;
}

}  // namespace plab
