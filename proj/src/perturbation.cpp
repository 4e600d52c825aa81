#include "plab/perturbation.hpp"

#include <cmath>

#include <fmt/format.h>

#include "plab/container.hpp"
#include "plab/error.hpp"
#include "plab/rng.hpp"
#include "plab/simd.hpp"

namespace plab {

std::string_view to_string(Scenario s) noexcept { return s == Scenario::A ? "a" : "b"; }

Scenario parse_scenario(std::string_view name) {
  if (name == "a" || name == "A") return Scenario::A;
  if (name == "b" || name == "B") return Scenario::B;
  fail(ErrorKind::invalid_argument, "unknown scenario '" + std::string(name) + "'");
}

std::string_view to_string(TargetMode mode) noexcept {
  return mode == TargetMode::flip ? "flip" : "uniform";
}

TargetMode parse_target_mode(std::string_view name) {
  if (name == "uniform") return TargetMode::uniform;
  if (name == "flip") return TargetMode::flip;
  fail(ErrorKind::invalid_argument, "unknown target-label mode '" + std::string(name) + "'");
}

double eps_from_per_coordinate(double c, std::size_t d) {
  require(std::isfinite(c), ErrorKind::invalid_argument, "per-coordinate eps must be finite");
  return std::sqrt(static_cast<double>(d) * c * c);
}

std::vector<double> AdvSet::g_input(std::size_t j, const Dataset& clean) const {
  require(j < kept.size(), ErrorKind::invalid_argument, "adv sample index out of range");
  std::vector<double> p(perturbation(j).begin(), perturbation(j).end());
  if (scenario == Scenario::B) {
    const auto x = clean.row(kept[j]);
    for (std::size_t i = 0; i < d; ++i) p[i] += x[i];
  }
  return p;
}

std::vector<std::int8_t> sample_target_labels(std::size_t n, TargetMode mode,
                                              std::span<const std::int8_t> clean_labels,
                                              std::uint64_t seed) {
  require(n >= 1, ErrorKind::invalid_argument, "sample_target_labels: N must be positive");
  std::vector<std::int8_t> out(n);
  if (mode == TargetMode::flip) {
    require(clean_labels.size() == n, ErrorKind::invalid_argument,
            "sample_target_labels: flip mode needs the N clean labels");
    for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<std::int8_t>(-clean_labels[i]);
    return out;
  }
  Rng rng(derive_seed(seed, "target_labels"));
  for (auto& y : out) y = static_cast<std::int8_t>(rng.sign());
  return out;
}

namespace {

// Returns r and the norm of grad_x f.
std::pair<std::vector<double>, double> perturb(const TwoLayerNet& net, std::span<const double> x,
                                               int y_adv, double eps, LossKind loss) {
  require(x.size() == net.d, ErrorKind::dimension_mismatch, "make_perturbation: dimension mismatch");
  require(y_adv == 1 || y_adv == -1, ErrorKind::invalid_argument, "make_perturbation: label must be +-1");
  require(eps > 0.0 && std::isfinite(eps), ErrorKind::invalid_argument,
          "make_perturbation: eps must be positive");
  std::vector<double> g = input_gradient(net, x);
  const double gnorm = std::sqrt(simd::dot(g, g));
  const double lp = loss_and_deriv(loss, -y_adv * forward(net, x)).second;
  if (!(gnorm > 0.0) || !std::isfinite(gnorm) || !(lp > 0.0)) {
    throw DegenerateGradient(0, "make_perturbation: input gradient of the loss vanishes");
  }
  // -grad_x l(-y f) = y l' grad_x f; l' > 0 only rescales.
  const double c = y_adv * eps / gnorm;
  for (auto& v : g) v *= c;
  return {std::move(g), gnorm};
}

}  // namespace

std::vector<double> make_perturbation(const TwoLayerNet& net, std::span<const double> x, int y_adv,
                                      double eps, LossKind loss) {
  return perturb(net, x, y_adv, eps, loss).first;
}

std::pair<AdvSet, Dataset> build_adv_set(const TwoLayerNet& net_f, const TrainTrace& trace_f,
                                         const Dataset& clean, std::span<const std::int8_t> y_adv,
                                         double eps, Scenario scenario, LossKind loss,
                                         DegeneratePolicy policy) {
  require(trace_f.final_net == net_f, ErrorKind::provenance,
          "build_adv_set: net_f is not the final net of trace_f");
  require(trace_f.n_samples == clean.size(), ErrorKind::provenance,
          "build_adv_set: trace_f was not trained on this dataset");
  require(y_adv.size() == clean.size(), ErrorKind::dimension_mismatch,
          "build_adv_set: need one target label per sample");
  require(eps >= 0.0 && std::isfinite(eps), ErrorKind::invalid_argument,
          "build_adv_set: eps must be nonnegative");
  require(clean.dim() == net_f.d, ErrorKind::dimension_mismatch, "build_adv_set: dimension mismatch");

  const std::size_t N = clean.size(), d = clean.dim();
  AdvSet adv;
  adv.n = N;
  adv.d = d;
  adv.eps = eps;
  adv.scenario = scenario;
  adv.y.assign(clean.labels().begin(), clean.labels().end());
  adv.y_adv.assign(y_adv.begin(), y_adv.end());
  adv.grad_norm.assign(N, 0.0);
  adv.skipped.assign(N, 0);
  adv.source_net = net_fingerprint(net_f);
  adv.r.reserve(N * d);

  for (std::size_t n = 0; n < N; ++n) {
    const auto x = clean.row(n);
    if (eps == 0.0) {
      const auto g = input_gradient(net_f, x);
      adv.grad_norm[n] = std::sqrt(simd::dot(g, g));
      adv.kept.push_back(n);
      adv.r.insert(adv.r.end(), d, 0.0);
      continue;
    }
    try {
      auto [r, gnorm] = perturb(net_f, x, y_adv[n], eps, loss);
      adv.grad_norm[n] = gnorm;
      adv.kept.push_back(n);
      adv.r.insert(adv.r.end(), r.begin(), r.end());
    } catch (const DegenerateGradient&) {
      if (policy == DegeneratePolicy::strict) {
        throw DegenerateGradient(n, "build_adv_set: degenerate input gradient at sample " + std::to_string(n));
      }
      adv.skipped[n] = 1;
    }
  }

  std::vector<double> xg;
  std::vector<std::int8_t> yg;
  xg.reserve(adv.n_kept() * d);
  yg.reserve(adv.n_kept());
  for (std::size_t j = 0; j < adv.n_kept(); ++j) {
    const auto p = adv.g_input(j, clean);
    xg.insert(xg.end(), p.begin(), p.end());
    yg.push_back(adv.y_adv[adv.kept[j]]);
  }
  nlohmann::json prov = {{"kind", "adversarial"},
                         {"scenario", to_string(scenario)},
                         {"eps", eps},
                         {"source_net", adv.source_net},
                         {"skipped", adv.n_skipped()}};
  Dataset g_train = make_dataset(d, std::move(xg), std::move(yg), std::move(prov));
  return {std::move(adv), std::move(g_train)};
}

std::string adv_set_csv(const AdvSet& adv) {
  std::string out = "index,y,y_adv,eps,grad_norm,skipped_flag\n";
  for (std::size_t n = 0; n < adv.n; ++n) {
    out += fmt::format("{},{},{},{:.17g},{:.17g},{}\n", n, adv.y[n], adv.y_adv[n], adv.eps,
                       adv.grad_norm[n], adv.skipped[n]);
  }
  return out;
}

void save_adv_set(const AdvSet& adv, const std::filesystem::path& path) {
  Container c;
  c.add("r", adv.n_kept(), adv.d, adv.r);
  c.add("y", adv.n, 1, adv.y);
  c.add("y_adv", adv.n, 1, adv.y_adv);
  c.add("grad_norm", adv.n, 1, adv.grad_norm);
  c.add("skipped", adv.n, 1, adv.skipped);
  c.write(path);
  const nlohmann::json meta = {{"kind", "adv_set"},   {"n", adv.n},
                               {"d", adv.d},          {"eps", adv.eps},
                               {"scenario", to_string(adv.scenario)},
                               {"source_net", adv.source_net},
                               {"n_skipped", adv.n_skipped()}};
  write_json(sidecar_path(path), meta);
}

AdvSet load_adv_set(const std::filesystem::path& path) {
  const Container c = Container::read(path);
  const auto meta = read_json(sidecar_path(path));
  AdvSet adv;
  adv.n = meta.at("n").get<std::size_t>();
  adv.d = meta.at("d").get<std::size_t>();
  adv.eps = meta.at("eps").get<double>();
  adv.scenario = parse_scenario(meta.at("scenario").get<std::string>());
  adv.source_net = meta.at("source_net").get<std::string>();
  adv.y = c.i8("y", adv.n, 1);
  adv.y_adv = c.i8("y_adv", adv.n, 1);
  adv.grad_norm = c.f64("grad_norm", adv.n, 1);
  adv.skipped = c.i8("skipped", adv.n, 1);
  for (std::size_t n = 0; n < adv.n; ++n) {
    if (!adv.skipped[n]) adv.kept.push_back(n);
  }
  adv.r = c.f64("r");
  require(adv.r.size() == adv.n_kept() * adv.d, ErrorKind::format, "adv set: perturbation block has wrong shape");
  return adv;
}

}  // namespace plab
