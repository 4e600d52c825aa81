#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plab/datasets.hpp"
#include "plab/network.hpp"
#include "plab/perturbation.hpp"
#include "plab/theory.hpp"
#include "plab/trainer.hpp"

namespace plab {

/// Every knob of one perturbation-learning run. Serialized as flat
/// `key = value` lines; `#` starts a comment.
struct ExperimentConfig {
  // data
  std::string dataset = "shifted_gaussian";  // shifted_gaussian | zero_mean_gaussian | idx
  double shift = 0.3;
  std::size_t d = 100;
  std::size_t n = 1000;
  std::size_t n_test = 1000;
  std::string images, labels, test_images, test_labels;
  int class_pos = 1;
  int class_neg = 2;
  double pixel_scale = 1.0;
  // networks
  std::size_t m = 100;
  std::size_t m_g = 0;  // 0: same as m
  double gamma = 0.0;
  // training
  LossKind loss = LossKind::identity;
  std::size_t steps_f = 1000;
  std::size_t steps_g = 1000;
  std::vector<double> step_size_f{0.1};
  std::vector<double> step_size_g{0.1};
  OptimizerKind optimizer = OptimizerKind::plain;
  double momentum = 0.9;
  TrainerPath trainer_path = TrainerPath::automatic;
  // perturbation
  double eps = 0.01;
  std::optional<double> eps_per_coord;  // when set, eps = sqrt(d c^2)
  Scenario scenario = Scenario::A;
  TargetMode target_mode = TargetMode::uniform;
  DegeneratePolicy degenerate = DegeneratePolicy::skip;
  // seeds; unset ones derive from `seed`
  std::uint64_t seed = 0;
  std::optional<std::uint64_t> seed_data, seed_f, seed_g, seed_labels;
  // diagnostics
  std::size_t n_probes = 10;
  double c1 = 1.0;
  double c2 = 1.0;
  double eta = 1.0;
  double delta = 0.1;
  std::size_t grid = 41;
  double map_extent = 0.0;  // 0: fitted to the sample projections
  // output (not part of the hash)
  std::string out_dir;

  double effective_eps() const;
  std::size_t width_g() const { return m_g == 0 ? m : m_g; }

  bool operator==(const ExperimentConfig&) const = default;
};

/// Keys accepted by set_config_value, in canonical order.
const std::vector<std::string>& config_keys();

/// Assigns one key; throws on an unknown key or a malformed value.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const ExperimentConfig& cfg, const std::string& key);

ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text: every key in canonical order, `key = value` per line.
std::string config_text(const ExperimentConfig& cfg);
nlohmann::json config_json(const ExperimentConfig& cfg);

/// SHA-256 of the canonical text without out_dir.
std::string config_hash(const ExperimentConfig& cfg);

/// Seeds actually used by replicate `rep` (0 for single runs).
struct RunSeeds {
  std::uint64_t data, net_f, net_g, labels;
};
RunSeeds run_seeds(const ExperimentConfig& cfg, std::uint64_t rep);

struct RunResult {
  std::uint64_t seed = 0;  // replicate index
  double step_size_f = 0.0;
  double step_size_g = 0.0;
  double acc_f_train = 0.0;
  double acc_g_clean = 0.0;
  double agreement_test = 0.0;
  std::size_t undetermined_test = 0;
  double mean_cosine = 0.0;
  std::size_t skipped_samples = 0;
  double width_diag = 0.0;
  std::string mode;  // theory | figure

  bool operator==(const RunResult&) const = default;
};

nlohmann::json to_json(const RunResult& r);

/// Everything produced by one run, for callers that persist artifacts.
struct RunArtifacts {
  Dataset train;
  Dataset test;
  TwoLayerNet f0;
  TwoLayerNet g0;
  TrainTrace trace_f;
  TrainTrace trace_g;
  AdvSet adv;
  Dataset g_train;
  std::vector<double> cosines;  // per kept sample
  RunResult result;
};

struct RunOptions {
  std::uint64_t rep = 0;
  std::optional<double> step_size_f;  // default: first of cfg.step_size_f
  std::optional<double> step_size_g;
  bool train_g = true;
  bool cosines = true;
};

Dataset make_train_data(const ExperimentConfig& cfg, std::uint64_t rep);
Dataset make_test_data(const ExperimentConfig& cfg, const Dataset& train, std::uint64_t rep);

/// The first n_probes rows of the test set (or fewer if it is smaller).
std::vector<std::vector<double>> probe_points(const ExperimentConfig& cfg, const Dataset& test);

TrainOptions train_options_f(const ExperimentConfig& cfg, double step_size);
TrainOptions train_options_g(const ExperimentConfig& cfg, double step_size);

/// Train f -> perturb -> train g -> evaluate.
RunArtifacts run_full(const ExperimentConfig& cfg, const RunOptions& opts = {});
RunResult run_once(const ExperimentConfig& cfg, const RunOptions& opts = {});

/// Runs fn(0..count-1) on up to `jobs` threads; results keep index order.
template <class T>
std::vector<T> parallel_map(std::size_t count, std::size_t jobs, const std::function<T(std::size_t)>& fn);

enum class SweepAxis { d, m, N, eps, T_f, T_g };
std::string_view to_string(SweepAxis axis) noexcept;
SweepAxis parse_axis(std::string_view name);

/// Config for one sweep point.
ExperimentConfig apply_axis(const ExperimentConfig& cfg, SweepAxis axis, double value);

struct SweepRow {
  double value = 0.0;
  RunResult result;
};

struct SweepTable {
  SweepAxis axis = SweepAxis::m;
  std::vector<SweepRow> raw;   // every (value, seed, step_size_f, step_size_g)
  std::vector<SweepRow> best;  // per (value, seed): per-metric maximum over step sizes
};

SweepTable sweep(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                 std::size_t seeds_per_point, std::size_t jobs = 1);

/// Trains only f; acc_f_train and mean cosine per (value, seed), best over step_size_f.
SweepTable cosine_study(const ExperimentConfig& cfg, SweepAxis axis, const std::vector<double>& values,
                        std::size_t seeds_per_point, std::size_t jobs = 1);

/// Per value, the median over seeds of one metric of the best rows.
std::vector<double> median_by_value(const SweepTable& t, const std::vector<double>& values,
                                    double RunResult::*metric);

std::string sweep_csv(const SweepTable& t, bool raw);
std::string sweep_svg(const SweepTable& t, const std::string& title, const std::string& cfg_hash);
std::string cosine_svg(const SweepTable& t, const std::string& title, const std::string& cfg_hash);

struct MapCell {
  double s = 0.0, t = 0.0;
  int f_sign = 0, g_sign = 0;
  double fhat = 0.0, ghat = 0.0;
  bool cond1 = false, cond2 = false, cond3 = false;
};

struct MapResult {
  std::size_t grid = 0;
  double extent = 0.0;
  std::vector<double> axis;  // grid coordinates, shared by s and t
  std::vector<MapCell> cells;  // row-major: t outer, s inner
  std::vector<double> sample_s, sample_t;
  std::vector<std::int8_t> sample_y;
  std::size_t cells_all_hold = 0;
  std::size_t cells_all_hold_agree = 0;
  std::size_t cells_agree = 0;
  std::size_t cells_undetermined = 0;
  RunResult run;

  double agreement_all_hold() const {
    return cells_all_hold == 0 ? 0.0 : static_cast<double>(cells_all_hold_agree) / static_cast<double>(cells_all_hold);
  }
};

/// z = s u_plus + t u_minus with u_pm the normalized class means.
MapResult prediction_map(const ExperimentConfig& cfg, std::size_t grid, std::size_t jobs = 1);
MapResult prediction_map(const ExperimentConfig& cfg, const RunArtifacts& run, std::size_t grid,
                         std::size_t jobs = 1);

std::string map_csv(const MapResult& m);
std::string map_svg(const MapResult& m, const std::string& cfg_hash);
nlohmann::json map_json(const MapResult& m);

}  // namespace plab

#include "plab/detail/parallel.hpp"
