#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "plab/error.hpp"
#include "plab/kernel.hpp"
#include "plab/theory.hpp"
#include "generators.hpp"
#include "test_util.hpp"

using namespace plab;
using plab::testing::Instance;
using plab::testing::normal_vector;
using plab::testing::random_instance;

namespace {

oracle::PhiFn closed(double gamma, std::size_t d) {
  return [=](std::span<const double> a, std::span<const double> b) { return phi_closed(a, b, gamma, d).value; };
}

}  // namespace

TEST(Theory, CosineBasics) {
  const std::vector<double> a{1, 0}, b{0, 2}, c{-3, 0}, zero{0, 0};
  EXPECT_DOUBLE_EQ(cosine(a, b), 0.0);
  EXPECT_DOUBLE_EQ(cosine(a, c), -1.0);
  EXPECT_THROW(cosine(a, zero), Error);
}

TEST(Theory, FHatAndGHatMatchNaiveSums) {
  Rng gen(11);
  for (int t = 0; t < 300; ++t) {
    const Scenario sc = t % 2 ? Scenario::A : Scenario::B;
    const Instance in = random_instance(gen, 8, 4, sc);
    const auto phi = closed(in.gamma, in.ds.dim());
    const double f0 = oracle::f_hat_naive(in.z, in.ds, in.wf, phi);
    const double g0 = oracle::g_hat_naive(in.z, in.ds, in.adv, in.wf, in.wg, phi);
    EXPECT_NEAR(f_hat(in.z, in.ds, in.wf, in.gamma), f0, 1e-12 * std::max(1.0, std::abs(f0)));
    EXPECT_NEAR(g_hat(in.z, in.ds, in.adv, in.wf, in.wg, in.gamma), g0, 1e-12 * std::max(1.0, std::abs(g0)));
    const TheoryEvaluator ev(in.ds, in.adv, in.wf, in.wg, in.gamma);
    EXPECT_NEAR(ev.f_hat(in.z), f0, 1e-12 * std::max(1.0, std::abs(f0)));
    EXPECT_NEAR(ev.g_hat(in.z), g0, 1e-12 * std::max(1.0, std::abs(g0)));
    const double r0 = oracle::sufficient_ratio_naive(in.z, in.ds, in.wf);
    EXPECT_NEAR(ev.sufficient_ratio(in.z), r0, 1e-12 * std::max(1.0, r0));
  }
}

TEST(Theory, ZeroProbeGivesZero) {
  Rng gen(12);
  const Instance in = random_instance(gen, 5, 3, Scenario::A);
  const std::vector<double> z(in.ds.dim(), 0.0);
  EXPECT_EQ(f_hat(z, in.ds, in.wf, in.gamma), 0.0);
  EXPECT_EQ(g_hat(z, in.ds, in.adv, in.wf, in.wg, in.gamma), 0.0);
  EXPECT_EQ(sufficient_ratio(z, in.ds, in.wf), 0.0);
}

// Property: a certified ratio implies sign agreement of f_hat and both g_hat variants.
TEST(Theory, SufficientConditionIsSound) {
  Rng gen(13);
  int certified = 0;
  for (int t = 0; t < 2000; ++t) {
    Instance in = random_instance(gen, 8, 4, Scenario::A);
    if (t % 3 == 0) {
      // bias z toward the class direction so that certificates fire often
      for (std::size_t n = 0; n < in.ds.size(); ++n)
        for (std::size_t j = 0; j < in.ds.dim(); ++j) in.z[j] += 0.5 * in.ds.label(n) * in.ds.row(n)[j];
    }
    const double r = sufficient_ratio(in.z, in.ds, in.wf);
    if (!(r > sufficient_threshold(in.gamma))) continue;
    ++certified;
    const double f = f_hat(in.z, in.ds, in.wf, in.gamma);
    const double ga = g_hat(in.z, in.ds, in.adv, in.wf, in.wg, in.gamma);
    AdvSet b = in.adv;
    b.scenario = Scenario::B;
    const double gb = g_hat(in.z, in.ds, b, in.wf, in.wg, in.gamma);
    EXPECT_EQ(std::signbit(f), std::signbit(ga));
    EXPECT_EQ(std::signbit(f), std::signbit(gb));
    EXPECT_NE(f, 0.0);
  }
  EXPECT_GT(certified, 100);
}

TEST(Theory, AlignedProbeRatioAtLeastOne) {
  // <x_n, z> = y_n c: two orthogonal samples and z = x_1 - x_2
  const Dataset ds = make_dataset(2, {1.0, 0.0, 0.0, 1.0}, {1, -1});
  const std::vector<double> z{1.0, -1.0}, w{0.7, 2.0};
  EXPECT_GE(sufficient_ratio(z, ds, w), 1.0);
}

TEST(Theory, ThresholdLimit) {
  EXPECT_DOUBLE_EQ(sufficient_threshold(0.0), 1.0);
  EXPECT_DOUBLE_EQ(sufficient_threshold(1.0), 0.0);
  EXPECT_NEAR(sufficient_threshold(0.5), 1.0 / 3.0, 1e-15);
}

TEST(Theory, PredictedDirectionMatchesDefinition) {
  const Dataset ds = gen_shifted_gaussian(10, 3, 0.4, 1);
  TrainOptions o;
  o.steps = 5;
  const TrainTrace tr = train(init_net(8, 3, 0.2, 1), ds, o);
  const auto all = predicted_directions(tr, ds);
  for (std::size_t n = 0; n < ds.size(); ++n) {
    std::vector<double> ref(3, 0.0);
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const double c = ds.label(k) * phi_closed(ds.row(n), ds.row(k), 0.2, 3).value * tr.integral_weights[k] / 10.0;
      for (std::size_t j = 0; j < 3; ++j) ref[j] += c * ds.row(k)[j];
    }
    const auto one = predicted_direction(tr, ds, n);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(one[j], ref[j], 1e-12);
      EXPECT_NEAR(all[n * 3 + j], ref[j], 1e-12);
    }
  }
  EXPECT_THROW(predicted_direction(tr, ds, 10), Error);
}

TEST(Theory, WidthDiagnostic) {
  TrainTrace f, g;
  f.integral_weights.assign(4, 5.0);
  g.integral_weights.assign(4, 5.0);
  f.n_samples = g.n_samples = 4;
  EXPECT_NEAR(width_diagnostic(f, g, 10), 1e4, 1e-9);
}

TEST(Theory, EvaluateConditionsEndToEnd) {
  const Dataset ds = gen_shifted_gaussian(20, 4, 0.5, 2);
  TrainOptions o;
  o.steps = 10;
  const TrainTrace tf = train(init_net(16, 4, 0.0, 1), ds, o);
  const auto y_adv = sample_target_labels(20, TargetMode::uniform, ds.labels(), 3);
  const auto [adv, gtrain] = build_adv_set(tf.final_net, tf, ds, y_adv, 0.3, Scenario::A, LossKind::identity);
  const TrainTrace tg = train(init_net(16, 4, 0.0, 2), gtrain, o);
  const std::vector<double> z{1.0, 1.0, 1.0, 1.0};
  const ConditionReport r = evaluate_conditions(z, ds, adv, tf, tg, Thresholds{2.0, 3.0});
  EXPECT_NEAR(r.f_hat, f_hat(z, ds, tf.integral_weights, 0.0), 1e-12);
  EXPECT_NEAR(r.g_hat, g_hat(z, ds, adv, tf.integral_weights, tg.integral_weights, 0.0), 1e-12);
  EXPECT_EQ(r.margin_f, std::abs(r.f_hat));
  EXPECT_EQ(r.signs_agree, std::signbit(r.f_hat) == std::signbit(r.g_hat));
  EXPECT_EQ(r.conditions_hold[0], r.margin_f > r.threshold_f);
  EXPECT_EQ(r.conditions_hold[1], r.margin_g > r.threshold_g);
  EXPECT_EQ(r.conditions_hold[2], r.sufficient_ratio > r.sufficient_threshold);
  EXPECT_NEAR(r.threshold_f, r.weight_scale_f * 2.0 * (1.0 + 1.0 / tf.flow_time), 1e-12);
  EXPECT_NEAR(r.weight_scale_f, 1.0, 1e-12);
  const auto j = to_json(r);
  EXPECT_TRUE(j.contains("sufficient_ratio"));
  const std::string csv = condition_reports_csv(std::span(&r, 1));
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);

  TrainTrace other = tf;
  other.final_net.V[0] += 1.0;
  EXPECT_THROW(evaluate_conditions(z, ds, adv, other, tg), Error);
}
