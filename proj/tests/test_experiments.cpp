#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "oracles.hpp"
#include "plab/error.hpp"
#include "plab/experiments.hpp"
#include "plab/kernel.hpp"
#include "test_util.hpp"

using namespace plab;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.d = 5;
  c.n = 40;
  c.n_test = 60;
  c.m = 30;
  c.steps_f = 30;
  c.steps_g = 30;
  c.step_size_f = {0.5};
  c.step_size_g = {0.5};
  c.eps = 0.5;
  c.shift = 0.5;
  c.n_probes = 4;
  return c;
}

}  // namespace

TEST(Config, TextRoundTrip) {
  ExperimentConfig c = small_config();
  c.seed_f = 17;
  c.eps_per_coord = 0.002;
  c.scenario = Scenario::B;
  c.optimizer = OptimizerKind::momentum;
  c.step_size_f = {1.0, 0.1};
  c.out_dir = "somewhere";
  const ExperimentConfig back = parse_config(config_text(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(config_text(back), config_text(c));
  for (const auto& k : config_keys()) EXPECT_EQ(get_config_value(back, k), get_config_value(c, k)) << k;
}

TEST(Config, ParseCommentsAndErrors) {
  const ExperimentConfig c = parse_config("# comment\nm = 7\n\n  d=3  # trailing\n");
  EXPECT_EQ(c.m, 7u);
  EXPECT_EQ(c.d, 3u);
  EXPECT_THROW(parse_config("bogus = 1\n"), Error);
  EXPECT_THROW(parse_config("m = seven\n"), Error);
  EXPECT_THROW(parse_config("m 7\n"), Error);
  ExperimentConfig x;
  EXPECT_THROW(set_config_value(x, "step_size_f", "0.1,-1"), Error);
  EXPECT_THROW(set_config_value(x, "scenario", "c"), Error);
}

TEST(Config, HashIgnoresOutDir) {
  ExperimentConfig a = small_config(), b = small_config();
  a.out_dir = "x";
  b.out_dir = "y";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.m += 1;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_EQ(config_json(a)["m"], "30");
}

TEST(Config, EffectiveEps) {
  ExperimentConfig c;
  c.d = 100;
  c.eps = 0.5;
  EXPECT_DOUBLE_EQ(c.effective_eps(), 0.5);
  c.eps_per_coord = 0.001;
  EXPECT_NEAR(c.effective_eps(), 0.01, 1e-15);
}

TEST(Config, SeedsDeriveUnlessSet) {
  ExperimentConfig c;
  c.seed = 5;
  const RunSeeds s0 = run_seeds(c, 0), s1 = run_seeds(c, 1);
  EXPECT_EQ(s0.data, derive_seed(5, "data"));
  EXPECT_NE(s0.data, s0.net_f);
  EXPECT_NE(s0.data, s1.data);
  c.seed_data = 99;
  EXPECT_EQ(run_seeds(c, 0).data, 99u);
}

TEST(Experiments, RunIsDeterministic) {
  const ExperimentConfig c = small_config();
  const RunResult a = run_once(c), b = run_once(c);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.mode, "theory");
  EXPECT_GT(a.acc_f_train, 0.5);
  EXPECT_GE(a.mean_cosine, -1.0);
  EXPECT_LE(a.mean_cosine, 1.0);
}

TEST(Experiments, LabelFreeDataGivesChance) {
  ExperimentConfig c = small_config();
  c.dataset = "zero_mean_gaussian";
  c.steps_g = 0;
  c.n = 4000;
  c.trainer_path = TrainerPath::primal;
  const RunResult r = run_once(c, RunOptions{.step_size_f = {}, .step_size_g = {}, .train_g = true, .cosines = false});
  EXPECT_NEAR(r.acc_g_clean, 0.5, 5 * std::sqrt(0.25 / 4000));
}

TEST(Experiments, SingleValueSweepEqualsRunOnce) {
  const ExperimentConfig c = small_config();
  const SweepTable t = sweep(c, SweepAxis::m, {30.0}, 1, 1);
  ASSERT_EQ(t.best.size(), 1u);
  EXPECT_EQ(t.best[0].result, run_once(c));
}

TEST(Experiments, JobsDoNotChangeResults) {
  ExperimentConfig c = small_config();
  c.step_size_f = {0.5, 0.1};
  const SweepTable a = sweep(c, SweepAxis::d, {3.0, 5.0}, 2, 1);
  const SweepTable b = sweep(c, SweepAxis::d, {3.0, 5.0}, 2, 4);
  EXPECT_EQ(sweep_csv(a, true), sweep_csv(b, true));
  EXPECT_EQ(sweep_csv(a, false), sweep_csv(b, false));
  EXPECT_EQ(sweep_svg(a, "t", "h"), sweep_svg(b, "t", "h"));
  EXPECT_EQ(a.raw.size(), 8u);
  EXPECT_EQ(a.best.size(), 4u);
}

TEST(Experiments, BestOfIsPerMetricMaximum) {
  ExperimentConfig c = small_config();
  c.step_size_f = {0.5, 0.05};
  c.step_size_g = {0.5, 0.05};
  const SweepTable t = sweep(c, SweepAxis::m, {30.0}, 1, 2);
  ASSERT_EQ(t.raw.size(), 4u);
  double acc = 0, agree = 0;
  for (const auto& r : t.raw) {
    acc = std::max(acc, r.result.acc_g_clean);
    agree = std::max(agree, r.result.agreement_test);
  }
  EXPECT_EQ(t.best[0].result.acc_g_clean, acc);
  EXPECT_EQ(t.best[0].result.agreement_test, agree);
}

TEST(Experiments, AxisApplication) {
  const ExperimentConfig c = small_config();
  EXPECT_EQ(apply_axis(c, SweepAxis::m, 64).m, 64u);
  EXPECT_EQ(apply_axis(c, SweepAxis::N, 10).n, 10u);
  const ExperimentConfig t = apply_axis(c, SweepAxis::T_f, 3.0);
  EXPECT_EQ(t.steps_f, 3u);
  EXPECT_EQ(apply_axis(c, SweepAxis::T_g, 7).steps_g, 7u);
  ExperimentConfig pc = c;
  pc.eps_per_coord = 0.1;
  EXPECT_DOUBLE_EQ(apply_axis(pc, SweepAxis::eps, 0.3).effective_eps(), 0.3);
  EXPECT_THROW(apply_axis(c, SweepAxis::m, 2.5), Error);
  EXPECT_EQ(parse_axis("T_g"), SweepAxis::T_g);
  EXPECT_THROW(parse_axis("width"), Error);
}

TEST(Experiments, EmptyTableCsvIsHeaderOnly) {
  SweepTable t;
  EXPECT_EQ(sweep_csv(t, false),
            "axis,value,seed,step_size_f,step_size_g,acc_f_train,acc_g_clean,agreement_test,mean_cosine,width_diag,"
            "skipped,mode\n");
}

TEST(Experiments, ParallelMapKeepsOrderAndPropagates) {
  const auto v = parallel_map<int>(100, 8, [](std::size_t i) { return static_cast<int>(i * i); });
  for (int i = 0; i < 100; ++i) EXPECT_EQ(v[i], i * i);
  EXPECT_THROW(parallel_map<int>(10, 3,
                                 [](std::size_t i) -> int {
                                   if (i == 7) throw std::runtime_error("x");
                                   return 0;
                                 }),
               std::runtime_error);
}

// Recomputes the theory quantities of a tiny run from its saved artifacts.
TEST(Experiments, MicroRunRecomputedFromArtifacts) {
  plab::testing::TempDir dir;
  ExperimentConfig c;
  c.d = 2;
  c.n = 2;
  c.n_test = 4;
  c.m = 8;
  c.steps_f = c.steps_g = 3;
  c.step_size_f = c.step_size_g = {0.5};
  c.eps = 0.2;
  c.n_probes = 2;
  const RunArtifacts a = run_full(c);
  save_trace(a.trace_f, dir / "tf.bin");
  save_adv_set(a.adv, dir / "adv.bin");
  save_dataset(a.train, dir / "train.bin");
  const TrainTrace tf = load_trace(dir / "tf.bin");
  const AdvSet adv = load_adv_set(dir / "adv.bin");
  const Dataset ds = load_dataset(dir / "train.bin");
  for (double w : tf.integral_weights) EXPECT_NEAR(w, 1.5, 1e-12);
  const auto phi = [&](std::span<const double> x, std::span<const double> y) { return phi_closed(x, y, 0.0, 2).value; };
  for (std::size_t j = 0; j < adv.n_kept(); ++j) {
    const std::size_t n = adv.kept[j];
    const auto g = input_gradient(tf.final_net, ds.row(n));
    const double gn = std::hypot(g[0], g[1]);
    for (std::size_t i = 0; i < 2; ++i) EXPECT_NEAR(adv.r[j * 2 + i], adv.y_adv[n] * 0.2 * g[i] / gn, 1e-12);
    // predicted direction by hand against the stored cosine
    std::vector<double> p(2, 0.0);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < 2; ++i) p[i] += ds.label(k) * phi(ds.row(n), ds.row(k)) * 1.5 * ds.row(k)[i] / 2.0;
    const double ry0 = adv.r[j * 2] * adv.y_adv[n], ry1 = adv.r[j * 2 + 1] * adv.y_adv[n];
    const double cs = (ry0 * p[0] + ry1 * p[1]) / (std::hypot(ry0, ry1) * std::hypot(p[0], p[1]));
    EXPECT_NEAR(a.cosines[j], cs, 1e-12);
  }
  const std::vector<double> z{0.3, -0.7};
  EXPECT_NEAR(f_hat(z, ds, tf.integral_weights, 0.0), oracle::f_hat_naive(z, ds, tf.integral_weights, phi), 1e-14);
}

TEST(Experiments, MapOnSymmetricData) {
  ExperimentConfig c = small_config();
  c.grid = 5;
  const MapResult m = prediction_map(c, 5, 2);
  ASSERT_EQ(m.cells.size(), 25u);
  ASSERT_EQ(m.axis.size(), 5u);
  EXPECT_EQ(m.axis[2], 0.0);
  // center cell is z = 0: both surrogates vanish and no condition can hold
  EXPECT_EQ(m.cells[12].fhat, 0.0);
  EXPECT_EQ(m.cells[12].ghat, 0.0);
  EXPECT_FALSE(m.cells[12].cond1 || m.cells[12].cond2 || m.cells[12].cond3);
  const std::string csv = map_csv(m);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "s,t,f_sign,g_sign,fhat,ghat,cond1,cond2,cond3");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 26);
  const std::string svg = map_svg(m, "abc");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("abc"), std::string::npos);
  EXPECT_EQ(map_json(m)["grid"], 5);
  EXPECT_EQ(prediction_map(c, 5, 1).cells.size(), 25u);
  EXPECT_EQ(map_csv(prediction_map(c, 5, 1)), csv);
}

TEST(Experiments, MapRejectsCollinearMeans) {
  ExperimentConfig c = small_config();
  c.d = 1;
  EXPECT_THROW(prediction_map(c, 3, 1), Error);
}
