#include "plab/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "plab/container.hpp"
#include "plab/emit.hpp"
#include "plab/error.hpp"
#include "plab/rng.hpp"
#include "plab/simd.hpp"

namespace plab {

// ---------------------------------------------------------------- config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  require(ec == std::errc() && p == end && std::isfinite(out), ErrorKind::invalid_argument,
          "config: '" + key + "' expects a finite number, got '" + v + "'");
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  require(ec == std::errc() && p == end, ErrorKind::invalid_argument,
          "config: '" + key + "' expects a nonnegative integer, got '" + v + "'");
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  require(ec == std::errc() && p == end, ErrorKind::invalid_argument,
          "config: '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  require(!out.empty(), ErrorKind::invalid_argument, "config: '" + key + "' needs at least one value");
  for (double x : out) require(x > 0.0, ErrorKind::invalid_argument, "config: '" + key + "' values must be positive");
  return out;
}

std::string list_str(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + fmt_g17(v[i]);
  return out;
}

template <class T>
std::string opt_str(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>) return fmt_g17(*v);
  else return std::to_string(*v);
}

struct KeyDef {
  std::string name;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define PLAB_SIZE(field)                                                                          \
  KeyDef {                                                                                        \
    #field, [](ExperimentConfig& c, const std::string& v) { c.field = to_u64(#field, v); },       \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                         \
  }
#define PLAB_REAL(field)                                                                          \
  KeyDef {                                                                                        \
    #field, [](ExperimentConfig& c, const std::string& v) { c.field = to_double(#field, v); },    \
        [](const ExperimentConfig& c) { return fmt_g17(c.field); }                                \
  }
#define PLAB_TEXT(field)                                                                          \
  KeyDef {                                                                                        \
    #field, [](ExperimentConfig& c, const std::string& v) { c.field = v; },                       \
        [](const ExperimentConfig& c) { return c.field; }                                         \
  }
#define PLAB_SEED(field)                                                                          \
  KeyDef {                                                                                        \
    #field,                                                                                       \
        [](ExperimentConfig& c, const std::string& v) {                                           \
          if (v.empty()) c.field.reset();                                                         \
          else c.field = to_u64(#field, v);                                                       \
        },                                                                                        \
        [](const ExperimentConfig& c) { return opt_str(c.field); }                                \
  }

const std::vector<KeyDef>& key_defs() {
  static const std::vector<KeyDef> defs = {
      PLAB_TEXT(dataset),
      PLAB_REAL(shift),
      PLAB_SIZE(d),
      PLAB_SIZE(n),
      PLAB_SIZE(n_test),
      PLAB_TEXT(images),
      PLAB_TEXT(labels),
      PLAB_TEXT(test_images),
      PLAB_TEXT(test_labels),
      {"class_pos", [](ExperimentConfig& c, const std::string& v) { c.class_pos = to_int("class_pos", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.class_pos); }},
      {"class_neg", [](ExperimentConfig& c, const std::string& v) { c.class_neg = to_int("class_neg", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.class_neg); }},
      PLAB_REAL(pixel_scale),
      PLAB_SIZE(m),
      PLAB_SIZE(m_g),
      PLAB_REAL(gamma),
      {"loss", [](ExperimentConfig& c, const std::string& v) { c.loss = parse_loss(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.loss)); }},
      PLAB_SIZE(steps_f),
      PLAB_SIZE(steps_g),
      {"step_size_f", [](ExperimentConfig& c, const std::string& v) { c.step_size_f = to_list("step_size_f", v); },
       [](const ExperimentConfig& c) { return list_str(c.step_size_f); }},
      {"step_size_g", [](ExperimentConfig& c, const std::string& v) { c.step_size_g = to_list("step_size_g", v); },
       [](const ExperimentConfig& c) { return list_str(c.step_size_g); }},
      {"optimizer", [](ExperimentConfig& c, const std::string& v) { c.optimizer = parse_optimizer(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.optimizer)); }},
      PLAB_REAL(momentum),
      {"trainer_path", [](ExperimentConfig& c, const std::string& v) { c.trainer_path = parse_trainer_path(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.trainer_path)); }},
      PLAB_REAL(eps),
      {"eps_per_coord",
       [](ExperimentConfig& c, const std::string& v) {
         if (v.empty()) c.eps_per_coord.reset();
         else c.eps_per_coord = to_double("eps_per_coord", v);
       },
       [](const ExperimentConfig& c) { return opt_str(c.eps_per_coord); }},
      {"scenario", [](ExperimentConfig& c, const std::string& v) { c.scenario = parse_scenario(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.scenario)); }},
      {"target_mode", [](ExperimentConfig& c, const std::string& v) { c.target_mode = parse_target_mode(v); },
       [](const ExperimentConfig& c) { return std::string(to_string(c.target_mode)); }},
      {"degenerate",
       [](ExperimentConfig& c, const std::string& v) {
         require(v == "skip" || v == "strict", ErrorKind::invalid_argument,
                 "config: 'degenerate' must be skip or strict");
         c.degenerate = v == "skip" ? DegeneratePolicy::skip : DegeneratePolicy::strict;
       },
       [](const ExperimentConfig& c) {
         return std::string(c.degenerate == DegeneratePolicy::skip ? "skip" : "strict");
       }},
      {"seed", [](ExperimentConfig& c, const std::string& v) { c.seed = to_u64("seed", v); },
       [](const ExperimentConfig& c) { return std::to_string(c.seed); }},
      PLAB_SEED(seed_data),
      PLAB_SEED(seed_f),
      PLAB_SEED(seed_g),
      PLAB_SEED(seed_labels),
      PLAB_SIZE(n_probes),
      PLAB_REAL(c1),
      PLAB_REAL(c2),
      PLAB_REAL(eta),
      PLAB_REAL(delta),
      PLAB_SIZE(grid),
      PLAB_REAL(map_extent),
      PLAB_TEXT(out_dir),
  };
  return defs;
}

#undef PLAB_SIZE
#undef PLAB_REAL
#undef PLAB_TEXT
#undef PLAB_SEED

const KeyDef& find_key(const std::string& key) {
  for (const auto& k : key_defs())
    if (k.name == key) return k;
  fail(ErrorKind::invalid_argument, "config: unknown key '" + key + "'");
}

}  // namespace

double ExperimentConfig::effective_eps() const {
  return eps_per_coord ? eps_from_per_coordinate(*eps_per_coord, d) : eps;
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& def : key_defs()) k.push_back(def.name);
    return k;
  }();
  return keys;
}

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  find_key(key).set(cfg, trim(value));
}

std::string get_config_value(const ExperimentConfig& cfg, const std::string& key) { return find_key(key).get(cfg); }

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    require(eq != std::string::npos, ErrorKind::format,
            "config line " + std::to_string(lineno) + ": expected 'key = value'");
    set_config_value(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_config(std::string(bytes.begin(), bytes.end()));
}

std::string config_text(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& k : key_defs()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

nlohmann::json config_json(const ExperimentConfig& cfg) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& k : key_defs()) j[k.name] = k.get(cfg);
  return j;
}

std::string config_hash(const ExperimentConfig& cfg) {
  ExperimentConfig c = cfg;
  c.out_dir.clear();
  return sha256_hex(config_text(c));
}

RunSeeds run_seeds(const ExperimentConfig& cfg, std::uint64_t rep) {
  const auto pick = [&](const std::optional<std::uint64_t>& explicit_seed, std::string_view tag) {
    const std::uint64_t base = explicit_seed ? *explicit_seed : derive_seed(cfg.seed, tag);
    return rep == 0 ? base : derive_seed(base, rep);
  };
  return {pick(cfg.seed_data, "data"), pick(cfg.seed_f, "net_f"), pick(cfg.seed_g, "net_g"),
          pick(cfg.seed_labels, "labels")};
}

// ---------------------------------------------------------------- runs

nlohmann::json to_json(const RunResult& r) {
  return {{"seed", r.seed},
          {"step_size_f", r.step_size_f},
          {"step_size_g", r.step_size_g},
          {"acc_f_train", r.acc_f_train},
          {"acc_g_clean", r.acc_g_clean},
          {"agreement_test", r.agreement_test},
          {"undetermined_test", r.undetermined_test},
          {"mean_cosine", r.mean_cosine},
          {"skipped_samples", r.skipped_samples},
          {"width_diag", r.width_diag},
          {"mode", r.mode}};
}

Dataset make_train_data(const ExperimentConfig& cfg, std::uint64_t rep) {
  const RunSeeds s = run_seeds(cfg, rep);
  if (cfg.dataset == "shifted_gaussian") return gen_shifted_gaussian(cfg.n, cfg.d, cfg.shift, s.data);
  if (cfg.dataset == "zero_mean_gaussian") return gen_zero_mean_gaussian(cfg.n, cfg.d, s.data);
  require(cfg.dataset == "idx", ErrorKind::invalid_argument, "config: unknown dataset '" + cfg.dataset + "'");
  DatasetMeta meta;
  meta.source = "idx";
  meta.images_path = cfg.images;
  meta.labels_path = cfg.labels;
  meta.test_images_path = cfg.test_images;
  meta.test_labels_path = cfg.test_labels;
  meta.class_pos = cfg.class_pos;
  meta.class_neg = cfg.class_neg;
  meta.pixel_scale = cfg.pixel_scale;
  Dataset ds = regenerate(meta);
  require(ds.dim() == cfg.d, ErrorKind::invalid_argument,
          "config: d = " + std::to_string(cfg.d) + " but the idx images have " + std::to_string(ds.dim()) + " pixels");
  return ds;
}

Dataset make_test_data(const ExperimentConfig& cfg, const Dataset& train, std::uint64_t rep) {
  if (train.meta().synthetic()) return holdout(train.meta(), cfg.n_test, run_seeds(cfg, rep).data);
  return holdout(train.meta(), cfg.n_test);
}

std::vector<std::vector<double>> probe_points(const ExperimentConfig& cfg, const Dataset& test) {
  std::vector<std::vector<double>> out;
  for (std::size_t i = 0; i < std::min(cfg.n_probes, test.size()); ++i) {
    out.emplace_back(test.row(i).begin(), test.row(i).end());
  }
  return out;
}

namespace {

TrainOptions base_options(const ExperimentConfig& cfg) {
  TrainOptions o;
  o.loss = cfg.loss;
  o.optimizer = cfg.optimizer;
  o.momentum = cfg.momentum;
  o.path = cfg.trainer_path;
  return o;
}

double agreement(const TwoLayerNet& f, const TwoLayerNet& g, const Dataset& test, std::size_t& undetermined) {
  undetermined = 0;
  std::size_t agree = 0, counted = 0;
  const auto fv = forward_batch(f, test);
  const auto gv = forward_batch(g, test);
  for (std::size_t i = 0; i < test.size(); ++i) {
    if (fv[i] == 0.0 || gv[i] == 0.0) {
      ++undetermined;
      continue;
    }
    ++counted;
    agree += (fv[i] > 0) == (gv[i] > 0);
  }
  return counted == 0 ? 0.0 : static_cast<double>(agree) / static_cast<double>(counted);
}

}  // namespace

TrainOptions train_options_f(const ExperimentConfig& cfg, double step_size) {
  TrainOptions o = base_options(cfg);
  o.steps = cfg.steps_f;
  o.step_size = step_size;
  return o;
}

TrainOptions train_options_g(const ExperimentConfig& cfg, double step_size) {
  TrainOptions o = base_options(cfg);
  o.steps = cfg.steps_g;
  o.step_size = step_size;
  return o;
}

RunArtifacts run_full(const ExperimentConfig& cfg, const RunOptions& opts) {
  require(!cfg.step_size_f.empty() && !cfg.step_size_g.empty(), ErrorKind::invalid_argument,
          "config: step sizes missing");
  const RunSeeds seeds = run_seeds(cfg, opts.rep);
  RunArtifacts a;
  a.train = make_train_data(cfg, opts.rep);
  a.test = make_test_data(cfg, a.train, opts.rep);
  const auto probes = probe_points(cfg, a.test);
  const std::size_t d = a.train.dim();
  const double sf = opts.step_size_f.value_or(cfg.step_size_f.front());
  const double sg = opts.step_size_g.value_or(cfg.step_size_g.front());

  a.f0 = init_net(cfg.m, d, cfg.gamma, seeds.net_f);
  a.trace_f = train(a.f0, a.train, train_options_f(cfg, sf), probes);
  const TwoLayerNet& f = a.trace_f.final_net;

  const auto y_adv = sample_target_labels(a.train.size(), cfg.target_mode, a.train.labels(), seeds.labels);
  const double eps = cfg.effective_eps();
  std::tie(a.adv, a.g_train) =
      build_adv_set(f, a.trace_f, a.train, y_adv, eps, cfg.scenario, cfg.loss, cfg.degenerate);

  RunResult& r = a.result;
  r.seed = opts.rep;
  r.step_size_f = sf;
  r.step_size_g = sg;
  r.mode = cfg.optimizer == OptimizerKind::plain ? "theory" : "figure";
  r.skipped_samples = a.adv.n_skipped();
  r.acc_f_train = accuracy(f, a.train);

  if (opts.cosines && cfg.steps_f > 0 && a.adv.n_kept() > 0) {
    const auto pred = predicted_directions(a.trace_f, a.train);
    double sum = 0.0;
    for (std::size_t j = 0; j < a.adv.n_kept(); ++j) {
      const std::size_t n = a.adv.kept[j];
      std::vector<double> v;
      if (eps > 0.0) {
        const auto rj = a.adv.perturbation(j);
        v.assign(rj.begin(), rj.end());
        for (auto& x : v) x *= a.adv.y_adv[n];
      } else {
        v = input_gradient(f, a.train.row(n));
      }
      const std::span<const double> p(pred.data() + n * d, d);
      const double c = cosine(v, p);
      a.cosines.push_back(c);
      sum += c;
    }
    r.mean_cosine = sum / static_cast<double>(a.cosines.size());
  }

  if (opts.train_g) {
    require(a.g_train.size() > 0, ErrorKind::degenerate_gradient, "run: every perturbation was degenerate");
    a.g0 = init_net(cfg.width_g(), d, cfg.gamma, seeds.net_g);
    a.trace_g = train(a.g0, a.g_train, train_options_g(cfg, sg), probes);
    const TwoLayerNet& g = a.trace_g.final_net;
    r.acc_g_clean = accuracy(g, a.train);
    r.agreement_test = agreement(f, g, a.test, r.undetermined_test);
    r.width_diag = width_diagnostic(a.trace_f, a.trace_g, d);
  }
  return a;
}

RunResult run_once(const ExperimentConfig& cfg, const RunOptions& opts) { return run_full(cfg, opts).result; }

// ---------------------------------------------------------------- sweeps

std::string_view to_string(SweepAxis axis) noexcept {
  switch (axis) {
    case SweepAxis::d: return "d";
    case SweepAxis::m: return "m";
    case SweepAxis::N: return "N";
    case SweepAxis::eps: return "eps";
    case SweepAxis::T_f: return "T_f";
    case SweepAxis::T_g: return "T_g";
  }
  return "m";
}

SweepAxis parse_axis(std::string_view name) {
  for (SweepAxis a : {SweepAxis::d, SweepAxis::m, SweepAxis::N, SweepAxis::eps, SweepAxis::T_f, SweepAxis::T_g}) {
    if (to_string(a) == name) return a;
  }
  fail(ErrorKind::invalid_argument, "unknown sweep axis '" + std::string(name) + "' (d, m, N, eps, T_f, T_g)");
}

ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, double value) {
  require(value > 0.0 && std::isfinite(value), ErrorKind::invalid_argument, "sweep: axis values must be positive");
  const auto count = [&] {
    require(value == std::floor(value) && value < 1e15, ErrorKind::invalid_argument,
            "sweep: axis " + std::string(to_string(axis)) + " needs integer values");
    return static_cast<std::size_t>(value);
  };
  ExperimentConfig c = cfg;
  switch (axis) {
    case SweepAxis::d: c.d = count(); break;
    case SweepAxis::m: c.m = count(); break;
    case SweepAxis::N: c.n = count(); break;
    case SweepAxis::eps:
      c.eps = value;
      c.eps_per_coord.reset();
      break;
    case SweepAxis::T_f: c.steps_f = count(); break;
    case SweepAxis::T_g: c.steps_g = count(); break;
  }
  return c;
}

namespace {

void check_values(const std::vector<double>& values) {
  require(!values.empty(), ErrorKind::invalid_argument, "sweep: no axis values");
  for (std::size_t i = 1; i < values.size(); ++i) {
    require(values[i] > values[i - 1], ErrorKind::invalid_argument, "sweep: axis values must be increasing");
  }
}

struct Job {
  double value;
  std::uint64_t seed;
  double sf, sg;
};

// Collapses consecutive rows with equal (value, seed): per-metric max, step
// sizes taken from the row maximizing `key`.
std::vector<SweepRow> best_of(const std::vector<SweepRow>& raw, double RunResult::*key) {
  std::vector<SweepRow> out;
  for (std::size_t i = 0; i < raw.size();) {
    std::size_t j = i;
    SweepRow best = raw[i];
    std::size_t arg = i;
    while (j < raw.size() && raw[j].value == raw[i].value && raw[j].result.seed == raw[i].result.seed) {
      const RunResult& r = raw[j].result;
      if (r.*key > raw[arg].result.*key) arg = j;
      best.result.acc_f_train = std::max(best.result.acc_f_train, r.acc_f_train);
      best.result.acc_g_clean = std::max(best.result.acc_g_clean, r.acc_g_clean);
      best.result.agreement_test = std::max(best.result.agreement_test, r.agreement_test);
      best.result.mean_cosine = std::max(best.result.mean_cosine, r.mean_cosine);
      ++j;
    }
    best.result.step_size_f = raw[arg].result.step_size_f;
    best.result.step_size_g = raw[arg].result.step_size_g;
    best.result.width_diag = raw[arg].result.width_diag;
    best.result.skipped_samples = raw[arg].result.skipped_samples;
    best.result.undetermined_test = raw[arg].result.undetermined_test;
    out.push_back(best);
    i = j;
  }
  return out;
}

SweepTable run_table(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                     std::size_t seeds_per_point, std::size_t jobs, bool with_g) {
  check_values(values);
  require(seeds_per_point >= 1, ErrorKind::invalid_argument, "sweep: need at least one seed per point");
  std::vector<Job> work;
  for (double v : values)
    for (std::uint64_t s = 0; s < seeds_per_point; ++s)
      for (double sf : cfg.step_size_f)
        if (with_g) {
          for (double sg : cfg.step_size_g) work.push_back({v, s, sf, sg});
        } else {
          work.push_back({v, s, sf, cfg.step_size_g.front()});
        }
  SweepTable t;
  t.axis = axis;
  const std::function<SweepRow(std::size_t)> fn = [&](std::size_t i) {
    const Job& job = work[i];
    const ExperimentConfig c = apply_axis(cfg, axis, job.value);
    RunOptions o;
    o.rep = job.seed;
    o.step_size_f = job.sf;
    o.step_size_g = job.sg;
    o.train_g = with_g;
    return SweepRow{job.value, run_once(c, o)};
  };
  t.raw = parallel_map<SweepRow>(work.size(), jobs, fn);
  t.best = best_of(t.raw, with_g ? &RunResult::acc_g_clean : &RunResult::mean_cosine);
  return t;
}

}  // namespace

SweepTable sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                 std::size_t seeds_per_point, std::size_t jobs) {
  return run_table(cfg, axis, values, seeds_per_point, jobs, true);
}

SweepTable cosine_study(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                        std::size_t seeds_per_point, std::size_t jobs) {
  require(axis != SweepAxis::T_g, ErrorKind::invalid_argument, "cosine study: T_g does not affect f");
  return run_table(cfg, axis, values, seeds_per_point, jobs, false);
}

std::vector<double> median_by_value(const SweepTable& t, const std::vector<double>& values,
                                    double RunResult::*metric) {
  std::vector<double> out;
  for (double v : values) {
    std::vector<double> xs;
    for (const auto& row : t.best)
      if (row.value == v) xs.push_back(row.result.*metric);
    if (xs.empty()) {
      out.push_back(std::nan(""));
      continue;
    }
    std::sort(xs.begin(), xs.end());
    const std::size_t k = xs.size();
    out.push_back(k % 2 ? xs[k / 2] : 0.5 * (xs[k / 2 - 1] + xs[k / 2]));
  }
  return out;
}

std::string sweep_csv(const SweepTable& t, bool raw) {
  std::string out =
      "axis,value,seed,step_size_f,step_size_g,acc_f_train,acc_g_clean,agreement_test,mean_cosine,width_diag,skipped,"
      "mode\n";
  for (const auto& row : raw ? t.raw : t.best) {
    const RunResult& r = row.result;
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", to_string(t.axis), fmt_g17(row.value), r.seed,
                       fmt_g17(r.step_size_f), fmt_g17(r.step_size_g), fmt_g17(r.acc_f_train),
                       fmt_g17(r.acc_g_clean), fmt_g17(r.agreement_test), fmt_g17(r.mean_cosine),
                       fmt_g17(r.width_diag), r.skipped_samples, r.mode);
  }
  return out;
}

namespace {

std::vector<double> unique_values(const SweepTable& t) {
  std::vector<double> v;
  for (const auto& row : t.best)
    if (v.empty() || v.back() != row.value) v.push_back(row.value);
  return v;
}

bool wants_log(const std::vector<double>& v) { return v.size() >= 3 && v.front() > 0 && v.back() / v.front() >= 50; }

}  // namespace

std::string sweep_svg(const SweepTable& t, const std::string& title, const std::string& cfg_hash) {
  const auto values = unique_values(t);
  std::vector<Series> s = {
      {"acc f (train)", "#1f77b4", values, median_by_value(t, values, &RunResult::acc_f_train)},
      {"acc g (clean)", "#ff7f0e", values, median_by_value(t, values, &RunResult::acc_g_clean)},
      {"agreement (test)", "#2ca02c", values, median_by_value(t, values, &RunResult::agreement_test)},
  };
  return line_chart(title, to_string(t.axis), s, wants_log(values), true, "config " + cfg_hash);
}

std::string cosine_svg(const SweepTable& t, const std::string& title, const std::string& cfg_hash) {
  const auto values = unique_values(t);
  std::vector<Series> s = {
      {"acc f (train)", "#1f77b4", values, median_by_value(t, values, &RunResult::acc_f_train)},
      {"mean cosine", "#d62728", values, median_by_value(t, values, &RunResult::mean_cosine)},
  };
  return line_chart(title, to_string(t.axis), s, wants_log(values), true, "config " + cfg_hash);
}

// ---------------------------------------------------------------- map

namespace {

std::vector<double> class_mean(const Dataset& ds, int label) {
  std::vector<double> mu(ds.dim(), 0.0);
  std::size_t count = 0;
  for (std::size_t n = 0; n < ds.size(); ++n) {
    if (ds.label(n) != label) continue;
    simd::axpy(1.0, ds.row(n), mu);
    ++count;
  }
  require(count > 0, ErrorKind::invalid_argument, "map: a class has no samples");
  for (auto& v : mu) v /= static_cast<double>(count);
  return mu;
}

int sgn(double v) { return (v > 0) - (v < 0); }

}  // namespace

MapResult prediction_map(const ExperimentConfig& cfg, std::size_t grid, std::size_t jobs) {
  return prediction_map(cfg, run_full(cfg), grid, jobs);
}

MapResult prediction_map(const ExperimentConfig& cfg, const RunArtifacts& run, std::size_t grid, std::size_t jobs) {
  require(grid >= 2, ErrorKind::invalid_argument, "map: grid resolution must be at least 2");
  const Dataset& ds = run.train;
  const std::size_t d = ds.dim();
  auto up = class_mean(ds, 1), um = class_mean(ds, -1);
  const double np = std::sqrt(simd::dot(up, up)), nm = std::sqrt(simd::dot(um, um));
  require(np > 0.0 && nm > 0.0, ErrorKind::invalid_argument, "map: degenerate (zero) class mean");
  for (auto& v : up) v /= np;
  for (auto& v : um) v /= nm;
  const double c = simd::dot(up, um);
  require(std::abs(c) < 1.0 - 1e-12, ErrorKind::invalid_argument, "map: class means are collinear");

  MapResult m;
  m.grid = grid;
  m.run = run.result;
  // Least-squares plane coordinates of every sample.
  const double det = 1.0 - c * c;
  double reach = 0.0;
  for (std::size_t n = 0; n < ds.size(); ++n) {
    const double a = simd::dot(ds.row(n), up), b = simd::dot(ds.row(n), um);
    const double s = (a - c * b) / det, t = (b - c * a) / det;
    m.sample_s.push_back(s);
    m.sample_t.push_back(t);
    m.sample_y.push_back(static_cast<std::int8_t>(ds.label(n)));
    reach = std::max({reach, std::abs(s), std::abs(t)});
  }
  m.extent = cfg.map_extent > 0.0 ? cfg.map_extent : 1.1 * reach;
  for (std::size_t i = 0; i < grid; ++i) {
    m.axis.push_back(-m.extent + 2.0 * m.extent * static_cast<double>(i) / static_cast<double>(grid - 1));
  }

  const TheoryEvaluator ev(ds, run.adv, run.trace_f.integral_weights, run.trace_g.integral_weights,
                           run.trace_f.initial_net.gamma);
  const Thresholds th{cfg.c1, cfg.c2};
  const std::function<std::vector<MapCell>(std::size_t)> row_fn = [&](std::size_t ti) {
    std::vector<MapCell> row;
    std::vector<double> z(d);
    for (std::size_t si = 0; si < grid; ++si) {
      for (std::size_t j = 0; j < d; ++j) z[j] = m.axis[si] * up[j] + m.axis[ti] * um[j];
      const ConditionReport r = evaluate_conditions(z, ev, ds, run.adv, run.trace_f, run.trace_g, th);
      MapCell cell;
      cell.s = m.axis[si];
      cell.t = m.axis[ti];
      cell.f_sign = sgn(forward(run.trace_f.final_net, z));
      cell.g_sign = sgn(forward(run.trace_g.final_net, z));
      cell.fhat = r.f_hat;
      cell.ghat = r.g_hat;
      cell.cond1 = r.conditions_hold[0];
      cell.cond2 = r.conditions_hold[1];
      cell.cond3 = r.conditions_hold[2];
      row.push_back(cell);
    }
    return row;
  };
  for (auto& row : parallel_map<std::vector<MapCell>>(grid, jobs, row_fn)) {
    for (auto& cell : row) m.cells.push_back(cell);
  }
  for (const auto& cell : m.cells) {
    if (cell.f_sign == 0 || cell.g_sign == 0) {
      ++m.cells_undetermined;
      continue;
    }
    const bool agree = cell.f_sign == cell.g_sign;
    m.cells_agree += agree;
    if (cell.cond1 && cell.cond2 && cell.cond3) {
      ++m.cells_all_hold;
      m.cells_all_hold_agree += agree;
    }
  }
  return m;
}

std::string map_csv(const MapResult& m) {
  std::string out = "s,t,f_sign,g_sign,fhat,ghat,cond1,cond2,cond3\n";
  for (const auto& c : m.cells) {
    out += fmt::format("{},{},{},{},{},{},{},{},{}\n", fmt_g17(c.s), fmt_g17(c.t), c.f_sign, c.g_sign, fmt_g17(c.fhat),
                       fmt_g17(c.ghat), int(c.cond1), int(c.cond2), int(c.cond3));
  }
  return out;
}

namespace {

// Marching squares on a grid x grid field; returns segments in grid index units.
std::vector<std::array<double, 4>> contour(const std::vector<double>& f, std::size_t n) {
  std::vector<std::array<double, 4>> segs;
  const auto at = [&](std::size_t i, std::size_t j) { return f[j * n + i]; };
  const auto cross = [](double a, double b) { return a / (a - b); };
  for (std::size_t j = 0; j + 1 < n; ++j) {
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const double v[4] = {at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
      const double px[4] = {0, 1, 1, 0}, py[4] = {0, 0, 1, 1};
      std::vector<std::pair<double, double>> pts;
      for (int e = 0; e < 4; ++e) {
        const double a = v[e], b = v[(e + 1) % 4];
        if ((a > 0) == (b > 0)) continue;
        const double u = (a == b) ? 0.5 : cross(a, b);
        pts.push_back({i + px[e] + u * (px[(e + 1) % 4] - px[e]), j + py[e] + u * (py[(e + 1) % 4] - py[e])});
      }
      if (pts.size() == 2) {
        segs.push_back({pts[0].first, pts[0].second, pts[1].first, pts[1].second});
      } else if (pts.size() == 4) {
        const double centre = (v[0] + v[1] + v[2] + v[3]) / 4.0;
        // Edge k joins corners k and k+1; pair edges so the centre's side stays connected.
        if ((centre > 0) == (v[0] > 0)) {
          segs.push_back({pts[0].first, pts[0].second, pts[1].first, pts[1].second});
          segs.push_back({pts[2].first, pts[2].second, pts[3].first, pts[3].second});
        } else {
          segs.push_back({pts[0].first, pts[0].second, pts[3].first, pts[3].second});
          segs.push_back({pts[1].first, pts[1].second, pts[2].first, pts[2].second});
        }
      }
    }
  }
  return segs;
}

}  // namespace

std::string map_svg(const MapResult& m, const std::string& cfg_hash) {
  constexpr double S = 560, L = 60, T = 40;
  Svg svg(L + S + 170, T + S + 50);
  svg.comment("config " + cfg_hash);
  svg.text(L + S / 2, 24, "sign agreement of f and g on span(u+, u-)", 14, "middle");
  const std::size_t n = m.grid;
  const double cell = S / static_cast<double>(n);
  const auto X = [&](double gi) { return L + (gi + 0.5) * cell; };
  const auto Y = [&](double gj) { return T + S - (gj + 0.5) * cell; };
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const MapCell& c = m.cells[j * n + i];
      const bool consistent = c.f_sign == c.g_sign;
      svg.rect(L + i * cell, T + S - (j + 1) * cell, cell, cell, consistent ? "#d0d0d0" : "#7fcf7f");
    }
  }
  std::vector<double> fh, gh;
  for (const auto& c : m.cells) {
    fh.push_back(c.fhat);
    gh.push_back(c.ghat);
  }
  for (const auto& s : contour(fh, n)) svg.line(X(s[0]), Y(s[1]), X(s[2]), Y(s[3]), "#d62728", 2.0);
  for (const auto& s : contour(gh, n)) svg.line(X(s[0]), Y(s[1]), X(s[2]), Y(s[3]), "black", 2.0, true);
  const double span = 2.0 * m.extent;
  for (std::size_t k = 0; k < m.sample_s.size(); ++k) {
    const double gi = (m.sample_s[k] + m.extent) / span * static_cast<double>(n - 1);
    const double gj = (m.sample_t[k] + m.extent) / span * static_cast<double>(n - 1);
    if (gi < -0.5 || gj < -0.5 || gi > n - 0.5 || gj > n - 0.5) continue;
    svg.circle(X(gi), Y(gj), 1.6, m.sample_y[k] > 0 ? "#1f77b4" : "#ff7f0e");
  }
  svg.rect(L, T, S, S, "none", "black");
  svg.text(L + S / 2, T + S + 32, fmt::format("s (u+), range +-{:.4g}", m.extent), 12, "middle");
  svg.text(18, T + S / 2, "t (u-)", 12, "middle");
  double ly = T + 10;
  const auto legend = [&](std::string_view color, std::string_view label, bool box, bool dashed) {
    if (box) svg.rect(L + S + 14, ly - 8, 14, 10, color);
    else svg.line(L + S + 12, ly - 3, L + S + 32, ly - 3, color, 2.0, dashed);
    svg.text(L + S + 38, ly, label, 11);
    ly += 18;
  };
  legend("#d0d0d0", "sgn f = sgn g", true, false);
  legend("#7fcf7f", "sgn f != sgn g", true, false);
  legend("#d62728", "f_hat = 0", false, false);
  legend("black", "g_hat = 0", false, true);
  legend("#1f77b4", "y = +1 samples", true, false);
  legend("#ff7f0e", "y = -1 samples", true, false);
  return svg.str();
}

nlohmann::json map_json(const MapResult& m) {
  return {{"grid", m.grid},
          {"extent", m.extent},
          {"cells", m.cells.size()},
          {"cells_agree", m.cells_agree},
          {"cells_undetermined", m.cells_undetermined},
          {"cells_all_conditions", m.cells_all_hold},
          {"cells_all_conditions_agree", m.cells_all_hold_agree},
          {"agreement_all_conditions", m.agreement_all_hold()},
          {"run", to_json(m.run)}};
}

}  // namespace plab
