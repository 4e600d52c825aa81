#include "plab/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "plab/container.hpp"
#include "plab/emit.hpp"
#include "plab/error.hpp"
#include "plab/experiments.hpp"
#include "plab/kernel.hpp"
#include "plab/lemmacheck.hpp"
#include "plab/rng.hpp"
#include "plab/simd.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace plab {
namespace {

const char* const kManifest = "manifest.json";

/// Signals a failed statistical check or replay comparison (exit code 1).
struct CheckFailed {
  json report;
};

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      require(used == item.size(), ErrorKind::invalid_argument, "");
    } catch (const std::exception&) {
      fail(ErrorKind::invalid_argument, what + ": cannot parse '" + item + "'");
    }
  }
  require(!out.empty(), ErrorKind::invalid_argument, what + ": empty list");
  return out;
}

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

/// Options shared by every subcommand.
struct Common {
  std::string config_path;
  std::string out_dir;
  std::size_t jobs = 1;
  std::vector<std::string> formats;
  std::string isa;
  int verbose = 0;
  std::vector<std::pair<std::string, CLI::Option*>> key_opts;
  std::map<std::string, std::string> key_values;
};

void add_common(CLI::App* sub, Common& c, bool with_config) {
  sub->add_option("--out", c.out_dir, "output directory (default: $PLAB_OUT_DIR or plab_out)");
  sub->add_option("--jobs", c.jobs, "worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--format", c.formats, "csv, json and/or svg (default: all)")
      ->check(CLI::IsMember({"csv", "json", "svg"}))
      ->delimiter(',');
  sub->add_option("--isa", c.isa, "force the kernel ISA")->check(CLI::IsMember({"scalar", "avx2"}));
  sub->add_flag("-v,--verbose", c.verbose, "progress on stderr");
  if (!with_config) return;
  sub->add_option("--config", c.config_path, "flat key = value config file");
  for (const auto& key : config_keys()) {
    if (key == "out_dir") continue;
    const std::string names = dashed(key) == key ? "--" + key : "--" + dashed(key) + ",--" + key;
    c.key_opts.emplace_back(key, sub->add_option(names, c.key_values[key], "config key " + key));
  }
}

class Session {
 public:
  Session(std::string command, std::vector<std::string> argv, Common& common, std::ostream& err)
      : command_(std::move(command)), argv_(std::move(argv)), c_(common), err_(err) {}

  ExperimentConfig config() {
    ExperimentConfig cfg;
    if (!c_.config_path.empty()) {
      add_input("config", c_.config_path);
      cfg = load_config(c_.config_path);
    }
    for (const auto& [key, opt] : c_.key_opts) {
      if (opt->count() > 0) set_config_value(cfg, key, c_.key_values[key]);
    }
    cfg.out_dir = dir().string();
    cfg_ = cfg;
    return cfg;
  }

  fs::path dir() const {
    if (!c_.out_dir.empty()) return c_.out_dir;
    if (const char* env = std::getenv("PLAB_OUT_DIR"); env != nullptr && *env != '\0') return env;
    return "plab_out";
  }

  bool wants(std::string_view format) const {
    return c_.formats.empty() || std::find(c_.formats.begin(), c_.formats.end(), format) != c_.formats.end();
  }

  std::size_t jobs() const { return c_.jobs; }

  void log(const std::string& msg) const {
    if (c_.verbose > 0) err_ << "[" << command_ << "] " << msg << "\n";
  }

  void add_input(const std::string& name, const fs::path& path) {
    inputs_[name] = {path.string(), sha256_file(path)};
  }

  void text(const std::string& name, const std::string& content) {
    prepare();
    write_text_file(dir() / name, content);
    record(name);
  }

  /// Records a file written by a save_* function together with its sidecar.
  void saved(const std::string& name) {
    record(name);
    if (fs::exists(sidecar_path(dir() / name))) record(sidecar_path(name).string());
  }

  fs::path path(const std::string& name) {
    prepare();
    return dir() / name;
  }

  void finish(json& summary) {
    prepare();
    if (cfg_) summary["config_hash"] = config_hash(*cfg_);
    if (wants("json")) text("summary.json", summary.dump(2) + "\n");
    json m;
    m["subcommand"] = command_;
    m["argv"] = argv_;
    m["isa"] = std::string(simd::to_string(simd::active_isa()));
    if (cfg_) {
      m["config"] = config_json(*cfg_);
      m["config_hash"] = config_hash(*cfg_);
      write_text_file(dir() / "config.txt", config_text(*cfg_));
    }
    json in = json::object();
    for (const auto& [k, v] : inputs_) in[k] = {{"path", v.first}, {"sha256", v.second}};
    m["inputs"] = in;
    json arts = json::object();
    for (const auto& name : artifacts_) arts[name] = sha256_file(dir() / name);
    m["artifacts"] = arts;
    write_json(dir() / kManifest, m);
  }

 private:
  void prepare() {
    if (!prepared_) {
      fs::create_directories(dir());
      prepared_ = true;
    }
  }

  void record(const std::string& name) {
    if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) artifacts_.push_back(name);
  }

  std::string command_;
  std::vector<std::string> argv_;
  Common& c_;
  std::ostream& err_;
  std::optional<ExperimentConfig> cfg_;
  std::map<std::string, std::pair<std::string, std::string>> inputs_;
  std::vector<std::string> artifacts_;
  bool prepared_ = false;
};

std::string loss_csv(const TrainTrace& t) {
  std::string out = "step,loss\n";
  for (std::size_t i = 0; i < t.loss_history.size(); ++i) out += fmt::format("{},{}\n", i, fmt_g17(t.loss_history[i]));
  return out;
}

json trace_summary(const TrainTrace& t, const Dataset& ds, double eta, double delta) {
  json j = {{"steps", t.steps},
            {"step_size", t.step_size},
            {"flow_time", t.flow_time},
            {"optimizer", std::string(to_string(t.optimizer))},
            {"path", std::string(to_string(t.path_used))},
            {"loss_initial", t.loss_history.front()},
            {"loss_final", t.loss_history.back()},
            {"accuracy", accuracy(t.final_net, ds)}};
  if (!t.probes.empty()) {
    const LazyReport lazy = lazy_diagnostic(t, eta, delta);
    j["flip_fraction"] = lazy.flip_fraction();
  }
  return j;
}

// ---------------------------------------------------------------- subcommands

json cmd_gen_data(Session& s) {
  const ExperimentConfig cfg = s.config();
  const Dataset train = make_train_data(cfg, 0);
  const Dataset test = make_test_data(cfg, train, 0);
  save_dataset(train, s.path("train.plab"));
  s.saved("train.plab");
  save_dataset(test, s.path("test.plab"));
  s.saved("test.plab");
  json train_meta, test_meta;
  to_json(train_meta, train.meta());
  to_json(test_meta, test.meta());
  return {{"train", train_meta}, {"test", test_meta}};
}

struct Loaded {
  Dataset train;
  Dataset probes_from;
};

Loaded data_for(Session& s, const ExperimentConfig& cfg, const std::string& data_path) {
  Loaded l;
  if (data_path.empty()) {
    l.train = make_train_data(cfg, 0);
    l.probes_from = make_test_data(cfg, l.train, 0);
    return l;
  }
  s.add_input("data", data_path);
  l.train = load_dataset(data_path);
  l.probes_from = l.train.meta().synthetic() ? holdout(l.train.meta(), cfg.n_test, l.train.meta().seed) : l.train;
  return l;
}

json cmd_train(Session& s, const std::string& data_path) {
  const ExperimentConfig cfg = s.config();
  const Loaded l = data_for(s, cfg, data_path);
  const RunSeeds seeds = run_seeds(cfg, 0);
  const TwoLayerNet f0 = init_net(cfg.m, l.train.dim(), cfg.gamma, seeds.net_f);
  s.log("training f");
  const TrainTrace trace = train(f0, l.train, train_options_f(cfg, cfg.step_size_f.front()), probe_points(cfg, l.probes_from));
  save_net(f0, s.path("net_f0.plab"));
  s.saved("net_f0.plab");
  save_net(trace.final_net, s.path("net_f.plab"));
  s.saved("net_f.plab");
  save_trace(trace, s.path("trace_f.plab"));
  s.saved("trace_f.plab");
  if (s.wants("csv")) s.text("loss_f.csv", loss_csv(trace));
  return {{"f", trace_summary(trace, l.train, cfg.eta, cfg.delta)}};
}

json cmd_perturb(Session& s, const std::string& data_path, const std::string& trace_path) {
  const ExperimentConfig cfg = s.config();
  const Loaded l = data_for(s, cfg, data_path);
  TrainTrace trace;
  if (!trace_path.empty()) {
    require(!data_path.empty(), ErrorKind::invalid_argument, "perturb: --trace needs --data");
    s.add_input("trace", trace_path);
    trace = load_trace(trace_path);
  } else {
    const TwoLayerNet f0 = init_net(cfg.m, l.train.dim(), cfg.gamma, run_seeds(cfg, 0).net_f);
    s.log("training f");
    trace = train(f0, l.train, train_options_f(cfg, cfg.step_size_f.front()));
  }
  const auto y_adv = sample_target_labels(l.train.size(), cfg.target_mode, l.train.labels(), run_seeds(cfg, 0).labels);
  const auto [adv, g_train] = build_adv_set(trace.final_net, trace, l.train, y_adv, cfg.effective_eps(), cfg.scenario,
                                            cfg.loss, cfg.degenerate);
  save_adv_set(adv, s.path("adv.plab"));
  s.saved("adv.plab");
  save_dataset(g_train, s.path("g_train.plab"));
  s.saved("g_train.plab");
  if (s.wants("csv")) s.text("adv.csv", adv_set_csv(adv));
  return {{"n", adv.n},
          {"kept", adv.n_kept()},
          {"skipped", adv.n_skipped()},
          {"eps", adv.eps},
          {"scenario", std::string(to_string(adv.scenario))},
          {"source_net", adv.source_net}};
}

struct PhiArgs {
  std::string z1, z2;
  std::size_t d = 0;
  std::vector<double> gammas{0.0};
  std::uint64_t samples = 100000;
  std::uint64_t seed = 0;
};

json cmd_phi(Session& s, const PhiArgs& a) {
  std::vector<double> z1, z2;
  if (!a.z1.empty() || !a.z2.empty()) {
    require(!a.z1.empty() && !a.z2.empty(), ErrorKind::invalid_argument, "phi: give both --z1 and --z2");
    z1 = parse_list(a.z1, "--z1");
    z2 = parse_list(a.z2, "--z2");
  } else {
    require(a.d > 0, ErrorKind::invalid_argument, "phi: give --z1/--z2 or --d for random points");
    Rng rng(derive_seed(a.seed, "points"));
    for (std::size_t i = 0; i < a.d; ++i) z1.push_back(rng.normal());
    for (std::size_t i = 0; i < a.d; ++i) z2.push_back(rng.normal());
  }
  require(z1.size() == z2.size(), ErrorKind::dimension_mismatch, "phi: z1 and z2 differ in length");
  const std::size_t d = z1.size();
  std::vector<PhiEstimate> mc;
  if (a.samples > 0) mc = phi_mc(z1, z2, a.gammas, d, a.samples, a.seed);
  const bool same = z1 == z2;
  json rows = json::array();
  for (std::size_t k = 0; k < a.gammas.size(); ++k) {
    const double g = a.gammas[k];
    json r = {{"gamma", g}, {"closed", phi_closed(z1, z2, g, d).value}};
    if (!mc.empty()) {
      r["mc"] = mc[k].value;
      r["stderr"] = mc[k].std_error;
      r["samples"] = mc[k].samples;
    }
    if (!same) {
      const Interval iv = phi_bound(z1, z2, g, d);
      r["interval"] = {iv.lo, iv.hi};
      r["in_interval"] = iv.contains(r["closed"].get<double>());
    }
    rows.push_back(r);
  }
  json out = {{"d", d}, {"lambda", same ? json(nullptr) : json(lambda_factor(z1, z2, d))}, {"results", rows}};
  if (s.wants("json")) s.text("phi.json", out.dump(2) + "\n");
  return out;
}

json cmd_verify_direction(Session& s) {
  const ExperimentConfig cfg = s.config();
  RunOptions o;
  o.train_g = false;
  s.log("training f");
  const RunArtifacts a = run_full(cfg, o);
  if (s.wants("csv")) {
    std::string csv = "index,y,y_adv,grad_norm,cosine\n";
    for (std::size_t j = 0; j < a.cosines.size(); ++j) {
      const std::size_t n = a.adv.kept[j];
      csv += fmt::format("{},{},{},{},{}\n", n, int(a.adv.y[n]), int(a.adv.y_adv[n]), fmt_g17(a.adv.grad_norm[n]),
                         fmt_g17(a.cosines[j]));
    }
    s.text("direction.csv", csv);
  }
  std::vector<double> c = a.cosines;
  std::sort(c.begin(), c.end());
  json out = {{"mode", a.result.mode},
              {"acc_f_train", a.result.acc_f_train},
              {"skipped_samples", a.result.skipped_samples},
              {"mean_cosine", a.result.mean_cosine}};
  if (!c.empty()) {
    out["min_cosine"] = c.front();
    out["median_cosine"] = c[c.size() / 2];
    out["max_cosine"] = c.back();
  }
  return out;
}

json cmd_verify_pl(Session& s) {
  const ExperimentConfig cfg = s.config();
  s.log("training f and g");
  const RunArtifacts a = run_full(cfg);
  const TheoryEvaluator ev(a.train, a.adv, a.trace_f.integral_weights, a.trace_g.integral_weights, cfg.gamma);
  const Thresholds th{cfg.c1, cfg.c2};
  s.log("evaluating conditions");
  const std::function<ConditionReport(std::size_t)> fn = [&](std::size_t i) {
    return evaluate_conditions(a.test.row(i), ev, a.train, a.adv, a.trace_f, a.trace_g, th);
  };
  const auto reports = parallel_map<ConditionReport>(a.test.size(), s.jobs(), fn);
  std::size_t hold = 0, hold_agree = 0, certified = 0, surrogate_agree = 0, undetermined = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    const double fv = forward(a.trace_f.final_net, a.test.row(i));
    const double gv = forward(a.trace_g.final_net, a.test.row(i));
    certified += r.conditions_hold[2];
    surrogate_agree += r.signs_agree;
    undetermined += r.undetermined;
    if (r.all_hold()) {
      ++hold;
      hold_agree += (fv > 0) == (gv > 0) && fv != 0.0 && gv != 0.0;
    }
  }
  if (s.wants("csv")) s.text("conditions.csv", condition_reports_csv(reports));
  return {{"run", to_json(a.result)},
          {"probes", reports.size()},
          {"scenario", std::string(to_string(cfg.scenario))},
          {"surrogate_signs_agree", surrogate_agree},
          {"surrogate_undetermined", undetermined},
          {"certified_agreement", certified},
          {"all_conditions", hold},
          {"all_conditions_empirical_agree", hold_agree},
          {"thresholds", {{"c1", cfg.c1}, {"c2", cfg.c2}}},
          {"delta", cfg.delta},
          {"lazy_f", to_json(lazy_diagnostic(a.trace_f, cfg.eta, cfg.delta))},
          {"lazy_g", to_json(lazy_diagnostic(a.trace_g, cfg.eta, cfg.delta))}};
}

struct SweepArgs {
  std::string axis;
  std::string values;
  std::size_t seeds = 5;
};

json table_summary(const SweepTable& t, const std::vector<double>& values) {
  json rows = json::array();
  const auto acc_f = median_by_value(t, values, &RunResult::acc_f_train);
  const auto acc_g = median_by_value(t, values, &RunResult::acc_g_clean);
  const auto agree = median_by_value(t, values, &RunResult::agreement_test);
  const auto cosv = median_by_value(t, values, &RunResult::mean_cosine);
  for (std::size_t i = 0; i < values.size(); ++i) {
    rows.push_back({{"value", values[i]},
                    {"acc_f_train", acc_f[i]},
                    {"acc_g_clean", acc_g[i]},
                    {"agreement_test", agree[i]},
                    {"mean_cosine", cosv[i]}});
  }
  return {{"axis", std::string(to_string(t.axis))}, {"median_by_value", rows}};
}

json cmd_sweep(Session& s, const SweepArgs& a, bool cosine) {
  const ExperimentConfig cfg = s.config();
  const SweepAxis axis = parse_axis(a.axis);
  const auto values = parse_list(a.values, "--values");
  s.log(fmt::format("{} points x {} seeds", values.size(), a.seeds));
  const SweepTable t = cosine ? cosine_study(cfg, axis, values, a.seeds, s.jobs())
                              : sweep(cfg, axis, values, a.seeds, s.jobs());
  const std::string stem = cosine ? "cosine" : "sweep";
  const std::string hash = config_hash(cfg);
  if (s.wants("csv")) {
    s.text(stem + ".csv", sweep_csv(t, false));
    s.text(stem + "_raw.csv", sweep_csv(t, true));
  }
  if (s.wants("svg")) {
    const std::string title = fmt::format("{} over {} (median of {} seeds)", cosine ? "alignment" : "accuracy",
                                          to_string(axis), a.seeds);
    s.text(stem + ".svg", cosine ? cosine_svg(t, title, hash) : sweep_svg(t, title, hash));
  }
  return table_summary(t, values);
}

json cmd_map(Session& s) {
  const ExperimentConfig cfg = s.config();
  s.log("training f and g");
  const RunArtifacts run = run_full(cfg);
  s.log(fmt::format("evaluating a {0}x{0} grid", cfg.grid));
  const MapResult m = prediction_map(cfg, run, cfg.grid, s.jobs());
  json j = map_json(m);
  j["config_hash"] = config_hash(cfg);
  if (s.wants("csv")) s.text("map.csv", map_csv(m));
  if (s.wants("svg")) s.text("map.svg", map_svg(m, config_hash(cfg)));
  if (s.wants("json")) s.text("map.json", j.dump(2) + "\n");
  return j;
}

struct LemmaArgs {
  double delta = 0.1;
  std::uint64_t trials = 10000;
  std::uint64_t seed = 0;
  std::vector<std::string> lemmas;
};

json cmd_lemma_check(Session& s, const LemmaArgs& a) {
  const auto want = [&](const std::string& id) {
    return a.lemmas.empty() || std::find(a.lemmas.begin(), a.lemmas.end(), id) != a.lemmas.end();
  };
  std::vector<CoverageResult> results;
  std::uint64_t k = 0;
  const auto seed = [&] { return derive_seed(a.seed, k++); };
  if (want("gaussian_max")) results.push_back(check_gaussian_max(100, 1.0, a.delta, a.trials, seed()));
  else k++;
  if (want("subexp")) {
    results.push_back(check_subexp(1000, 1.0, 0.0, a.delta, a.trials, seed(), SubexpY::derivative_square));
    results.push_back(check_subexp(1000, 1.0, 0.0, a.delta, a.trials, seed(), SubexpY::uniform));
    results.push_back(check_subexp(1000, 1.0, 0.5, a.delta, a.trials, seed(), SubexpY::derivative_square));
  } else {
    k += 3;
  }
  if (want("small_count")) results.push_back(check_small_count(400, 1.0, 2.0, a.delta, a.trials, seed()));
  else k++;
  if (want("hoeffding")) {
    const std::vector<double> ones(100, 1.0);
    results.push_back(check_hoeffding(ones, a.delta, a.trials, seed()));
  }
  json rows = json::array();
  bool all = true;
  for (const auto& r : results) {
    rows.push_back(to_json(r));
    all = all && r.pass();
  }
  json out = {{"delta", a.delta}, {"trials", a.trials}, {"results", rows}, {"all_pass", all}};
  if (s.wants("json")) s.text("lemma_check.json", out.dump(2) + "\n");
  return out;
}

// ---------------------------------------------------------------- replay

json cmd_replay(const std::string& manifest_path, const std::string& new_out, std::ostream& out, std::ostream& err) {
  const json m = read_json(manifest_path);
  const fs::path old_dir = fs::path(manifest_path).parent_path();
  const std::string sub = m.at("subcommand").get<std::string>();
  require(sub != "replay", ErrorKind::invalid_argument, "replay: cannot replay a replay manifest");
  for (const auto& [name, rec] : m.at("inputs").items()) {
    if (name == "config") continue;
    const std::string p = rec.at("path").get<std::string>();
    require(fs::exists(p) && sha256_file(p) == rec.at("sha256").get<std::string>(), ErrorKind::provenance,
            "replay: input '" + name + "' (" + p + ") is missing or changed");
  }
  // Recorded argv minus the options the replay controls.
  std::vector<std::string> args{sub};
  const auto argv = m.at("argv").get<std::vector<std::string>>();
  for (std::size_t i = 0; i < argv.size(); ++i) {
    const std::string& a = argv[i];
    const bool with_value = a == "--out" || a == "--config" || a == "--isa";
    if (with_value) {
      ++i;
      continue;
    }
    if (a.rfind("--out=", 0) == 0 || a.rfind("--config=", 0) == 0 || a.rfind("--isa=", 0) == 0) continue;
    args.push_back(a);
  }
  if (m.contains("config")) {
    args.push_back("--config");
    args.push_back((old_dir / "config.txt").string());
  }
  args.push_back("--out");
  args.push_back(new_out);
  args.push_back("--isa");
  args.push_back(m.at("isa").get<std::string>());

  std::ostringstream sink;
  const int code = run_cli(args, sink, err);
  json report = {{"subcommand", sub}, {"exit_code", code}, {"artifacts", json::array()}};
  bool identical = code == kExitOk || code == kExitValidation;
  for (const auto& [name, sha] : m.at("artifacts").items()) {
    const fs::path p = fs::path(new_out) / name;
    const std::string now = fs::exists(p) ? sha256_file(p) : std::string();
    const bool same = now == sha.get<std::string>();
    identical = identical && same;
    report["artifacts"].push_back({{"name", name}, {"identical", same}});
  }
  report["identical"] = identical;
  out << report.dump(2) << "\n";
  if (!identical) throw CheckFailed{report};
  return report;
}

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument:
    case ErrorKind::dimension_mismatch:
    case ErrorKind::format:
    case ErrorKind::provenance: return kExitValidation;
    default: return kExitRuntime;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Perturbation-learning lab: train, perturb, verify and sweep two-layer networks.", "plab"};
  app.require_subcommand(1);

  Common c;
  std::string data_path, trace_path, manifest_path;
  PhiArgs phi;
  SweepArgs sw;
  LemmaArgs lemma;

  auto* gen = app.add_subcommand("gen-data", "generate train/test datasets from a config");
  add_common(gen, c, true);
  auto* tr = app.add_subcommand("train", "train f and save the net and trace");
  add_common(tr, c, true);
  tr->add_option("--data", data_path, "dataset container (default: generate from config)");
  auto* pe = app.add_subcommand("perturb", "build the adversarial training set");
  add_common(pe, c, true);
  pe->add_option("--data", data_path, "dataset container");
  pe->add_option("--trace", trace_path, "trace of a trained f (requires --data)");
  auto* ph = app.add_subcommand("phi", "evaluate the Phi kernel (closed form, Monte Carlo, bounds)");
  add_common(ph, c, false);
  ph->add_option("--z1", phi.z1, "comma-separated point");
  ph->add_option("--z2", phi.z2, "comma-separated point");
  ph->add_option("--d", phi.d, "draw random standard normal points of this dimension");
  ph->add_option("--gamma", phi.gammas, "slopes")->delimiter(',');
  ph->add_option("--samples", phi.samples, "Monte Carlo samples (0: closed form only)");
  ph->add_option("--seed", phi.seed, "seed for sampling");
  auto* vd = app.add_subcommand("verify-direction", "compare perturbations with the predicted direction");
  add_common(vd, c, true);
  auto* vp = app.add_subcommand("verify-pl", "train f and g and evaluate the agreement conditions on test points");
  add_common(vp, c, true);
  auto* swp = app.add_subcommand("sweep", "accuracy and agreement over one axis");
  add_common(swp, c, true);
  auto* cos = app.add_subcommand("cosine", "perturbation alignment over one axis");
  add_common(cos, c, true);
  for (auto* sub : {swp, cos}) {
    sub->add_option("--axis", sw.axis, "d, m, N, eps, T_f or T_g")->required();
    sub->add_option("--values", sw.values, "comma-separated increasing values")->required();
    sub->add_option("--seeds", sw.seeds, "replicates per value")->check(CLI::PositiveNumber);
  }
  auto* mp = app.add_subcommand("map", "sign agreement map on the plane of the class means");
  add_common(mp, c, true);
  auto* lc = app.add_subcommand("lemma-check", "coverage of the concentration bounds");
  add_common(lc, c, false);
  lc->add_option("--delta", lemma.delta, "confidence level")->check(CLI::Range(0.0, 1.0));
  lc->add_option("--trials", lemma.trials, "trials per check")->check(CLI::PositiveNumber);
  lc->add_option("--seed", lemma.seed, "base seed");
  lc->add_option("--lemma", lemma.lemmas, "subset of gaussian_max, subexp, small_count, hoeffding")
      ->check(CLI::IsMember({"gaussian_max", "subexp", "small_count", "hoeffding"}))
      ->delimiter(',');
  auto* rp = app.add_subcommand("replay", "re-run a manifest into a new directory and compare outputs");
  rp->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
  rp->add_option("--out", c.out_dir, "new output directory")->required();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n\n" << app.help();
    return kExitValidation;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string name = sub->get_name();
  const simd::Isa previous_isa = simd::active_isa();
  struct IsaGuard {
    simd::Isa isa;
    ~IsaGuard() { simd::set_isa(isa); }
  } guard{previous_isa};

  try {
    if (!c.isa.empty()) simd::set_isa(simd::parse_isa(c.isa));
    if (name == "replay") {
      cmd_replay(manifest_path, c.out_dir, out, err);
      return kExitOk;
    }
    Session s(name, std::vector<std::string>(args.begin() + 1, args.end()), c, err);
    json summary;
    if (name == "gen-data") summary = cmd_gen_data(s);
    else if (name == "train") summary = cmd_train(s, data_path);
    else if (name == "perturb") summary = cmd_perturb(s, data_path, trace_path);
    else if (name == "phi") summary = cmd_phi(s, phi);
    else if (name == "verify-direction") summary = cmd_verify_direction(s);
    else if (name == "verify-pl") summary = cmd_verify_pl(s);
    else if (name == "sweep") summary = cmd_sweep(s, sw, false);
    else if (name == "cosine") summary = cmd_sweep(s, sw, true);
    else if (name == "map") summary = cmd_map(s);
    else if (name == "lemma-check") summary = cmd_lemma_check(s, lemma);
    summary["command"] = name;
    s.finish(summary);
    out << summary.dump(2) << "\n";
    if (name == "lemma-check" && !summary["all_pass"].get<bool>()) return kExitValidation;
    return kExitOk;
  } catch (const CheckFailed&) {
    return kExitValidation;
  } catch (const Error& e) {
    err << "plab " << name << ": " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "plab " << name << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace plab
