#include "plab/network.hpp"

#include <cmath>
#include <cstring>
#include <limits>

#include "plab/container.hpp"
#include "plab/error.hpp"
#include "plab/rng.hpp"
#include "plab/simd.hpp"

namespace plab {

std::string_view to_string(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::identity: return "identity";
    case LossKind::exponential: return "exponential";
    case LossKind::logistic: return "logistic";
  }
  return "identity";
}

LossKind parse_loss(std::string_view name) {
  if (name == "identity") return LossKind::identity;
  if (name == "exponential") return LossKind::exponential;
  if (name == "logistic") return LossKind::logistic;
  fail(ErrorKind::invalid_argument, "unknown loss '" + std::string(name) + "'");
}

std::pair<double, double> loss_and_deriv(LossKind kind, double margin) {
  switch (kind) {
    case LossKind::identity:
      return {margin, 1.0};
    case LossKind::exponential: {
      static const double kMaxExp = std::log(std::numeric_limits<double>::max());
      if (!(margin <= kMaxExp)) {
        throw Error(ErrorKind::non_finite, "exponential loss overflows at margin " + std::to_string(margin));
      }
      const double e = std::exp(margin);
      return {e, e};
    }
    case LossKind::logistic: {
      if (margin >= 0.0) {
        const double t = std::exp(-margin);
        return {margin + std::log1p(t), 1.0 / (1.0 + t)};
      }
      const double t = std::exp(margin);
      return {std::log1p(t), t / (1.0 + t)};
    }
  }
  return {margin, 1.0};
}

void TwoLayerNet::validate() const {
  require(m >= 1 && d >= 1, ErrorKind::invalid_argument, "net: m and d must be >= 1");
  require(V.size() == m * d && a.size() == m && alpha.size() == m, ErrorKind::dimension_mismatch,
          "net: parameter shapes do not match m and d");
  require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::invalid_argument, "net: gamma must be in [0, 1]");
}

TwoLayerNet init_net(std::size_t m, std::size_t d, double gamma, std::uint64_t seed) {
  require(m >= 1 && d >= 1, ErrorKind::invalid_argument, "init_net: m and d must be >= 1");
  require(gamma >= 0.0 && gamma <= 1.0, ErrorKind::invalid_argument, "init_net: gamma must be in [0, 1]");
  TwoLayerNet net;
  net.m = m;
  net.d = d;
  net.gamma = gamma;
  net.V.resize(m * d);
  net.a.resize(m);
  net.alpha.resize(m);
  Rng rv(derive_seed(seed, "V"));
  Rng ra(derive_seed(seed, "a"));
  Rng ralpha(derive_seed(seed, "alpha"));
  const double sv = 1.0 / std::sqrt(static_cast<double>(d));
  const double salpha = 1.0 / std::sqrt(static_cast<double>(m));
  for (auto& v : net.V) v = sv * rv.normal();
  for (auto& v : net.a) v = ra.normal();
  for (auto& v : net.alpha) v = salpha * ralpha.normal();
  return net;
}

std::vector<double> pre_activations(const TwoLayerNet& net, std::span<const double> z) {
  require(z.size() == net.d, ErrorKind::dimension_mismatch,
          "net: input has length " + std::to_string(z.size()) + ", expected " + std::to_string(net.d));
  std::vector<double> h(net.m);
  for (std::size_t i = 0; i < net.m; ++i) h[i] = simd::dot(net.hidden(i), z) + net.a[i];
  return h;
}

double forward(const TwoLayerNet& net, std::span<const double> z) {
  const auto h = pre_activations(net, z);
  double out = 0.0;
  for (std::size_t i = 0; i < net.m; ++i) out += net.alpha[i] * activation(h[i], net.gamma);
  return out;
}

std::vector<double> input_gradient(const TwoLayerNet& net, std::span<const double> z) {
  const auto h = pre_activations(net, z);
  std::vector<double> g(net.d, 0.0);
  for (std::size_t i = 0; i < net.m; ++i) {
    simd::axpy(net.alpha[i] * activation_deriv(h[i], net.gamma), net.hidden(i), g);
  }
  return g;
}

std::vector<double> forward_batch(const TwoLayerNet& net, const Dataset& ds) {
  require(ds.empty() || ds.dim() == net.d, ErrorKind::dimension_mismatch, "net: dataset dimension mismatch");
  std::vector<double> out(ds.size());
  for (std::size_t n = 0; n < ds.size(); ++n) out[n] = forward(net, ds.row(n));
  return out;
}

double mean_loss(const TwoLayerNet& net, const Dataset& ds, LossKind loss) {
  require(!ds.empty(), ErrorKind::invalid_argument, "mean_loss: empty dataset");
  double s = 0.0;
  for (std::size_t n = 0; n < ds.size(); ++n) {
    s += loss_and_deriv(loss, -ds.label(n) * forward(net, ds.row(n))).first;
  }
  return s / static_cast<double>(ds.size());
}

ParamGradient loss_gradient(const TwoLayerNet& net, const Dataset& ds, LossKind loss) {
  require(!ds.empty(), ErrorKind::invalid_argument, "loss_gradient: empty dataset");
  require(ds.dim() == net.d, ErrorKind::dimension_mismatch, "loss_gradient: dataset dimension mismatch");
  ParamGradient g{std::vector<double>(net.m * net.d, 0.0), std::vector<double>(net.m, 0.0)};
  const double inv_n = 1.0 / static_cast<double>(ds.size());
  for (std::size_t n = 0; n < ds.size(); ++n) {
    const auto x = ds.row(n);
    const auto h = pre_activations(net, x);
    double f = 0.0;
    for (std::size_t i = 0; i < net.m; ++i) f += net.alpha[i] * activation(h[i], net.gamma);
    const double y = ds.label(n);
    const double lp = loss_and_deriv(loss, -y * f).second;
    // d/dtheta l(-y f) = -y l' df/dtheta
    for (std::size_t i = 0; i < net.m; ++i) {
      const double c = -y * lp * net.alpha[i] * activation_deriv(h[i], net.gamma) * inv_n;
      g.a[i] += c;
      simd::axpy(c, x, std::span<double>(g.V.data() + i * net.d, net.d));
    }
  }
  return g;
}

double accuracy(const TwoLayerNet& net, const Dataset& ds) {
  if (ds.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t n = 0; n < ds.size(); ++n) {
    const double f = forward(net, ds.row(n));
    if ((f > 0.0 && ds.label(n) == 1) || (f < 0.0 && ds.label(n) == -1)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(ds.size());
}

namespace {

Container net_container(const TwoLayerNet& net) {
  Container c;
  c.add("V", net.m, net.d, net.V);
  c.add("a", net.m, 1, net.a);
  c.add("alpha", net.m, 1, net.alpha);
  return c;
}

}  // namespace

nlohmann::json net_meta(const TwoLayerNet& net) {
  return {{"kind", "two_layer_net"}, {"m", net.m}, {"d", net.d}, {"gamma", net.gamma}};
}

void save_net(const TwoLayerNet& net, const std::filesystem::path& path) {
  net.validate();
  net_container(net).write(path);
  write_json(sidecar_path(path), net_meta(net));
}

TwoLayerNet load_net(const std::filesystem::path& path) {
  const Container c = Container::read(path);
  const auto meta = read_json(sidecar_path(path));
  TwoLayerNet net;
  net.m = meta.at("m").get<std::size_t>();
  net.d = meta.at("d").get<std::size_t>();
  net.gamma = meta.at("gamma").get<double>();
  net.V = c.f64("V", net.m, net.d);
  net.a = c.f64("a", net.m, 1);
  net.alpha = c.f64("alpha", net.m, 1);
  net.validate();
  return net;
}

std::string net_fingerprint(const TwoLayerNet& net) {
  auto bytes = net_container(net).serialize();
  std::uint8_t g[sizeof(double)];
  std::memcpy(g, &net.gamma, sizeof(double));
  bytes.insert(bytes.end(), g, g + sizeof(double));
  return sha256_hex(bytes);
}

}  // namespace plab
