// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>

#include "generators.hpp"
#include "oracles.hpp"
#include "plab/cli.hpp"
#include "plab/container.hpp"
#include "plab/experiments.hpp"
#include "plab/kernel.hpp"
#include "plab/lemmacheck.hpp"
#include "plab/network.hpp"
#include "plab/theory.hpp"
#include "test_util.hpp"

using namespace plab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::size_t g_jobs = 1;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string join(const std::vector<double>& v, int digits = 4) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt::format("{:.{}f}", v[i], digits);
  return s;
}

/// Adjacent decreases in a sequence.
int inversions(const std::vector<double>& v) {
  int k = 0;
  for (std::size_t i = 1; i < v.size(); ++i) k += v[i] < v[i - 1];
  return k;
}

ExperimentConfig base_config() {
  ExperimentConfig c;  // shifted Gaussian, shift 0.3, d 100, N 1000, m 100, gamma 0, identity, scenario A
  c.optimizer = OptimizerKind::plain;
  return c;
}

// ---------------------------------------------------------------- 1

Verdict kernel_exactness() {
  const std::size_t dims[] = {2, 10, 100};
  const std::vector<double> gammas{0.0, 0.1, 0.5};
  const std::size_t pairs = 1000;
  struct PairOut {
    int agree = 0, in_bound = 0, in_range = 0;
  };
  const auto out = parallel_map<PairOut>(pairs, g_jobs, [&](std::size_t p) {
    Rng gen(derive_seed(1, p));
    const std::size_t d = dims[p % 3];
    const auto z1 = testing::normal_vector(gen, d, std::exp(gen.uniform(-2, 2)));
    const auto z2 = testing::normal_vector(gen, d, std::exp(gen.uniform(-2, 2)));
    const auto mc = phi_mc(z1, z2, gammas, d, 100000, derive_seed(2, p));
    PairOut o;
    for (std::size_t k = 0; k < gammas.size(); ++k) {
      const double g = gammas[k];
      const double cf = phi_closed(z1, z2, g, d).value;
      o.agree += std::abs(cf - mc[k].value) <= 4.0 * mc[k].std_error;
      o.in_bound += phi_bound(z1, z2, g, d).contains(cf);
      o.in_range += cf > g * (1 + g) / 2 && cf <= (1 + g) / 2;
    }
    return o;
  });
  int agree = 0, bound = 0, range = 0;
  for (const auto& o : out) {
    agree += o.agree;
    bound += o.in_bound;
    range += o.in_range;
  }
  const int total = static_cast<int>(pairs * gammas.size());
  const double frac = static_cast<double>(agree) / total;
  return {frac >= 0.99 && bound == total && range == total,
          fmt::format("MC agreement {}/{} ({:.4f}), bound interval {}/{}, range {}/{}", agree, total, frac, bound,
                      total, range, total)};
}

// ---------------------------------------------------------------- 2

/// Max-norm error relative to the max-norm of the gradient, floored at 1e-8.
double max_rel(const std::vector<double>& analytic, const std::vector<double>& fd) {
  double num = 0, den = 1e-8;
  for (std::size_t i = 0; i < fd.size(); ++i) {
    num = std::max(num, std::abs(analytic[i] - fd[i]));
    den = std::max(den, std::max(std::abs(analytic[i]), std::abs(fd[i])));
  }
  return num / den;
}

Verdict gradient_correctness() {
  Rng gen(3);
  const double h = 1e-6;
  int points = 0, attempts = 0;
  double worst = 0;
  while (points < 100) {
    ++attempts;
    const std::size_t m = 2 + gen.next_u64() % 40, d = 1 + gen.next_u64() % 16, n = 1 + gen.next_u64() % 8;
    const double gamma = gen.uniform() < 0.3 ? 0.0 : gen.uniform();
    const LossKind loss = static_cast<LossKind>(gen.next_u64() % 3);
    const TwoLayerNet net = init_net(m, d, gamma, gen.next_u64());
    const Dataset ds = gen_shifted_gaussian(2 * n, d, 0.3, gen.next_u64());
    const auto z = testing::normal_vector(gen, d);
    bool kink = false;
    for (std::size_t k = 0; k <= ds.size() && !kink; ++k)
      for (double v : pre_activations(net, k < ds.size() ? ds.row(k) : std::span<const double>(z)))
        kink = kink || std::abs(v) < 1e-3;
    if (kink) continue;
    ++points;
    const ParamGradient g = loss_gradient(net, ds, loss);
    std::vector<double> fdv(net.V.size()), fda(net.a.size()), fdz(d);
    for (std::size_t p = 0; p < net.V.size(); ++p) {
      TwoLayerNet hi = net, lo = net;
      hi.V[p] += h;
      lo.V[p] -= h;
      fdv[p] = (mean_loss(hi, ds, loss) - mean_loss(lo, ds, loss)) / (2 * h);
    }
    for (std::size_t p = 0; p < net.a.size(); ++p) {
      TwoLayerNet hi = net, lo = net;
      hi.a[p] += h;
      lo.a[p] -= h;
      fda[p] = (mean_loss(hi, ds, loss) - mean_loss(lo, ds, loss)) / (2 * h);
    }
    for (std::size_t j = 0; j < d; ++j) {
      auto hi = z, lo = z;
      hi[j] += h;
      lo[j] -= h;
      fdz[j] = (forward(net, hi) - forward(net, lo)) / (2 * h);
    }
    std::vector<double> analytic = g.V, numeric = fdv;
    analytic.insert(analytic.end(), g.a.begin(), g.a.end());
    numeric.insert(numeric.end(), fda.begin(), fda.end());
    worst = std::max({worst, max_rel(analytic, numeric), max_rel(input_gradient(net, z), fdz)});
  }
  return {worst <= 1e-4, fmt::format("{} kink-free points ({} drawn), worst relative error {:.2e}", points, attempts,
                                     worst)};
}

// ---------------------------------------------------------------- 3

Verdict brute_force() {
  Rng gen(4);
  double worst = 0;
  for (int t = 0; t < 1000; ++t) {
    const testing::Instance in = testing::random_instance(gen, 8, 4, Scenario::A);
    const std::size_t d = in.ds.dim();
    const auto phi = [&](std::span<const double> a, std::span<const double> b) {
      return phi_closed(a, b, in.gamma, d).value;
    };
    AdvSet b = in.adv;
    b.scenario = Scenario::B;
    const auto rel = [](double x, double y) { return std::abs(x - y) / std::max(1.0, std::abs(y)); };
    worst = std::max(worst, rel(f_hat(in.z, in.ds, in.wf, in.gamma), oracle::f_hat_naive(in.z, in.ds, in.wf, phi)));
    worst = std::max(worst, rel(g_hat(in.z, in.ds, in.adv, in.wf, in.wg, in.gamma),
                                oracle::g_hat_naive(in.z, in.ds, in.adv, in.wf, in.wg, phi)));
    worst = std::max(worst, rel(g_hat(in.z, in.ds, b, in.wf, in.wg, in.gamma),
                                oracle::g_hat_naive(in.z, in.ds, b, in.wf, in.wg, phi)));
  }
  return {worst <= 1e-12, fmt::format("1000 instances, worst deviation {:.2e}", worst)};
}

// ---------------------------------------------------------------- 4

Verdict direction() {
  ExperimentConfig c = base_config();
  c.n = 200;
  c.steps_f = 20;
  c.step_size_f = {0.1};
  const std::vector<double> ms{64, 256, 1024, 4096};
  const SweepTable tm = cosine_study(c, SweepAxis::m, ms, 5, g_jobs);
  const auto cm = median_by_value(tm, ms, &RunResult::mean_cosine);
  ExperimentConfig cd = c;
  cd.m = 1024;
  cd.eps_per_coord = 0.001;
  const std::vector<double> ds{10, 100, 1000};
  const SweepTable td = cosine_study(cd, SweepAxis::d, ds, 5, g_jobs);
  const auto cdv = median_by_value(td, ds, &RunResult::mean_cosine);
  const bool m_trend = inversions(cm) <= 1;
  const double gain = cm.back() - cm.front();
  const bool d_trend = inversions(cdv) == 0;
  return {m_trend && gain >= 0.1 && d_trend,
          fmt::format("m {{64,256,1024,4096}}: {} (inversions {}, gain {:.4f}, need >= 0.1); d {{10,100,1000}}: {} "
                      "(inversions {})",
                      join(cm), inversions(cm), gain, join(cdv), inversions(cdv))};
}

// ---------------------------------------------------------------- 5

Verdict perturbation_learning() {
  ExperimentConfig c = base_config();
  c.step_size_f = {1.0, 0.1};
  c.step_size_g = {1.0, 0.1};
  const std::vector<double> v{100};
  const auto main_acc = median_by_value(sweep(c, SweepAxis::m, v, 5, g_jobs), v, &RunResult::acc_g_clean)[0];
  ExperimentConfig z = c;
  z.eps = 0.0;
  const auto ctrl = median_by_value(sweep(z, SweepAxis::m, v, 5, g_jobs), v, &RunResult::acc_g_clean)[0];
  const double se = std::sqrt(0.25 / static_cast<double>(c.n));
  return {main_acc >= 0.75 && std::abs(ctrl - 0.5) <= 3 * se,
          fmt::format("median acc_g_clean {:.4f} (need >= 0.75); eps=0 control {:.4f} (need |x-0.5| <= {:.4f})",
                      main_acc, ctrl, 3 * se)};
}

// ---------------------------------------------------------------- 6

Verdict sufficient_soundness() {
  struct Out {
    bool certified = false, violated = false;
  };
  const std::size_t n = 10000;
  const auto out = parallel_map<Out>(n, g_jobs, [](std::size_t t) {
    Rng gen(derive_seed(6, t));
    testing::Instance in = testing::random_instance(gen, 20, 10, Scenario::A);
    if (t % 2 == 0) {
      // tilt z toward the class direction so that certificates are common
      const double s = gen.uniform(0.0, 1.0);
      for (std::size_t k = 0; k < in.ds.size(); ++k)
        for (std::size_t j = 0; j < in.ds.dim(); ++j) in.z[j] += s * in.ds.label(k) * in.ds.row(k)[j];
    }
    Out o;
    const TheoryEvaluator ev(in.ds, in.adv, in.wf, in.wg, in.gamma);
    if (!(ev.sufficient_ratio(in.z) > sufficient_threshold(in.gamma))) return o;
    o.certified = true;
    AdvSet b = in.adv;
    b.scenario = Scenario::B;
    const TheoryEvaluator evb(in.ds, b, in.wf, in.wg, in.gamma);
    const double f = ev.f_hat(in.z), ga = ev.g_hat(in.z), gb = evb.g_hat(in.z);
    const auto sgn = [](double x) { return (x > 0) - (x < 0); };
    o.violated = sgn(f) == 0 || sgn(f) != sgn(ga) || sgn(f) != sgn(gb);
    return o;
  });
  std::size_t cert = 0, viol = 0;
  for (const auto& o : out) {
    cert += o.certified;
    viol += o.violated;
  }
  return {viol == 0 && cert > 0,
          fmt::format("{} instances, {} certified, {} violations", n, cert, viol)};
}

// ---------------------------------------------------------------- 7

Verdict condition_map() {
  ExperimentConfig c = base_config();
  c.steps_f = c.steps_g = 100;
  c.step_size_f = c.step_size_g = {1.0};
  c.eps_per_coord = 0.001;
  const MapResult m = prediction_map(c, 41, g_jobs);
  std::size_t c3 = 0, c3_agree = 0, determined = 0;
  for (const auto& cell : m.cells) {
    if (cell.f_sign == 0 || cell.g_sign == 0) continue;
    ++determined;
    if (cell.cond3) {
      ++c3;
      c3_agree += cell.f_sign == cell.g_sign;
    }
  }
  const double frac = m.agreement_all_hold();
  return {m.cells_all_hold > 0 && frac >= 0.95,
          fmt::format("cells with all three conditions {} of {} (agreement {:.4f}, need >= 0.95 on a nonempty set); "
                      "certificate-only cells {} (agreement {:.4f}); overall agreement {:.4f}",
                      m.cells_all_hold, determined, frac, c3, c3 ? double(c3_agree) / c3 : 0.0,
                      double(m.cells_agree) / std::max<std::size_t>(determined, 1))};
}

// ---------------------------------------------------------------- 8

Verdict lazy_training() {
  ExperimentConfig c = base_config();
  c.steps_f = 1000;
  c.step_size_f = {0.1};
  c.n_probes = 10;
  const std::vector<std::size_t> widths{100, 10000};
  const auto frac = parallel_map<double>(10, std::min<std::size_t>(g_jobs, 5), [&](std::size_t k) {
    ExperimentConfig cc = c;
    cc.m = widths[k / 5];
    const RunArtifacts a = run_full(cc, RunOptions{.rep = k % 5, .step_size_f = {}, .step_size_g = {}, .train_g = false,
                                                   .cosines = false});
    return lazy_diagnostic(a.trace_f, 2.0, 0.1).flip_fraction();
  });
  const std::vector<double> small(frac.begin(), frac.begin() + 5), wide(frac.begin() + 5, frac.end());
  const double ms = median(small), mw = median(wide);
  return {mw < ms, fmt::format("median flip fraction m=100: {:.4f} [{}], m=10000: {:.4f} [{}]", ms, join(small), mw,
                               join(wide))};
}

// ---------------------------------------------------------------- 9

Verdict lemma_suite(const fs::path& work) {
  std::ostringstream out, err;
  const int code = run_cli({"lemma-check", "--out", (work / "lemma").string(), "--delta", "0.1", "--trials", "10000",
                            "--jobs", std::to_string(g_jobs)},
                           out, err);
  const auto j = read_json(work / "lemma" / "lemma_check.json");
  std::string detail;
  std::set<std::string> ids;
  for (const auto& r : j.at("results")) {
    ids.insert(r.at("lemma_id").get<std::string>());
    detail += fmt::format("{}{} {}/{}", detail.empty() ? "" : ", ", r.at("lemma_id").get<std::string>(),
                          r.at("failures").get<std::uint64_t>(), r.at("trials").get<std::uint64_t>());
  }
  const bool all = j.at("all_pass").get<bool>() && ids.size() == 4 && code == kExitOk;
  return {all, "failures/trials: " + detail};
}

// ---------------------------------------------------------------- 10

Verdict scenario_contrast() {
  ExperimentConfig c = base_config();
  c.scenario = Scenario::B;
  c.eps_per_coord = 0.01;
  c.steps_f = c.steps_g = 100;
  c.step_size_f = c.step_size_g = {1.0};
  const std::vector<double> ns{500, 5000};
  const SweepTable t = sweep(c, SweepAxis::N, ns, 5, g_jobs);
  const auto a = median_by_value(t, ns, &RunResult::agreement_test);
  return {a[1] > a[0], fmt::format("median agreement N=500: {:.4f}, N=5000: {:.4f}", a[0], a[1])};
}

// ---------------------------------------------------------------- 11

Verdict determinism(const fs::path& work) {
  const std::vector<std::string> small{"--d", "20", "--n", "60", "--n-test", "60", "--m", "32", "--steps-f", "50",
                                       "--steps-g", "50", "--step-size-f", "1,0.1", "--step-size-g", "1,0.1"};
  struct Run {
    std::string name;
    std::vector<std::string> args;
  };
  const std::string j = std::to_string(g_jobs);
  std::vector<Run> runs{
      {"sweep", {"sweep", "--axis", "m", "--values", "16,64", "--seeds", "3", "--jobs", j}},
      {"cosine", {"cosine", "--axis", "d", "--values", "10,40", "--seeds", "2", "--jobs", j}},
      {"map", {"map", "--grid", "15", "--jobs", j}},
      {"verify-pl", {"verify-pl"}},
  };
  std::string detail;
  bool all = true;
  for (auto& r : runs) {
    r.args.insert(r.args.end(), small.begin(), small.end());
    const fs::path a = work / (r.name + "_a"), b = work / (r.name + "_b");
    auto args = r.args;
    args.insert(args.end(), {"--out", a.string()});
    std::ostringstream out, err;
    const int c1 = run_cli(args, out, err);
    const int c2 = run_cli({"replay", "--manifest", (a / "manifest.json").string(), "--out", b.string()}, out, err);
    std::size_t files = 0, same = 0;
    const auto manifest = read_json(a / "manifest.json");
    for (const auto& [name, sha] : manifest.at("artifacts").items()) {
      ++files;
      same += fs::exists(b / name) && read_file_bytes(a / name) == read_file_bytes(b / name);
    }
    const bool ok = c1 == kExitOk && c2 == kExitOk && files > 0 && same == files;
    all = all && ok;
    detail += fmt::format("{}{} {}/{}", detail.empty() ? "" : ", ", r.name, same, files);
  }
  return {all, "byte-identical artifacts after replay: " + detail};
}

struct Criterion {
  int id;
  std::string name;
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance suite"};
  std::vector<int> only;
  std::string work_dir;
  g_jobs = std::max(1u, std::thread::hardware_concurrency());
  app.add_option("--only", only, "criterion numbers to run")->delimiter(',');
  app.add_option("--jobs", g_jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--work-dir", work_dir, "directory for CLI artifacts (default: a temporary directory)");
  CLI11_PARSE(app, argc, argv);

  std::optional<testing::TempDir> tmp;
  fs::path work;
  if (work_dir.empty()) {
    tmp.emplace();
    work = tmp->path();
  } else {
    work = work_dir;
    fs::create_directories(work);
  }

  const std::vector<Criterion> criteria{
      {1, "kernel exactness", kernel_exactness},
      {2, "gradient correctness", gradient_correctness},
      {3, "brute-force equivalence", brute_force},
      {4, "perturbation direction", direction},
      {5, "perturbation learning (scenario A)", perturbation_learning},
      {6, "sufficient-condition soundness", sufficient_soundness},
      {7, "condition-vs-outcome map", condition_map},
      {8, "lazy training", lazy_training},
      {9, "lemma coverage", [&] { return lemma_suite(work); }},
      {10, "scenario contrast", scenario_contrast},
      {11, "determinism", [&] { return determinism(work); }},
  };

  const auto t0 = std::chrono::steady_clock::now();
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto s = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - s).count();
    failed += !v.pass;
    std::cout << fmt::format("{} {:>2} {}: {} [{:.1f}s]", v.pass ? "PASS" : "FAIL", c.id, c.name, v.detail, secs)
              << std::endl;
  }
  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << fmt::format("{} failed, total {:.1f}s", failed, total) << std::endl;
  return failed == 0 ? 0 : 1;
}
