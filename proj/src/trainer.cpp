#include "plab/trainer.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "plab/container.hpp"
#include "plab/error.hpp"
#include "plab/simd.hpp"

namespace plab {

std::string_view to_string(OptimizerKind kind) noexcept {
  return kind == OptimizerKind::momentum ? "momentum" : "plain";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "plain") return OptimizerKind::plain;
  if (name == "momentum") return OptimizerKind::momentum;
  fail(ErrorKind::invalid_argument, "unknown optimizer '" + std::string(name) + "'");
}

std::string_view to_string(TrainerPath path) noexcept {
  switch (path) {
    case TrainerPath::automatic: return "auto";
    case TrainerPath::primal: return "primal";
    case TrainerPath::kernel: return "kernel";
  }
  return "auto";
}

TrainerPath parse_trainer_path(std::string_view name) {
  if (name == "auto") return TrainerPath::automatic;
  if (name == "primal") return TrainerPath::primal;
  if (name == "kernel") return TrainerPath::kernel;
  fail(ErrorKind::invalid_argument, "unknown trainer path '" + std::string(name) + "'");
}

namespace {

constexpr std::size_t kKernelMaxSteps = std::size_t{1} << 32;

// Reduce-on-plateau: multiply the rate by `factor` once the loss has not
// improved (relative threshold) for more than `patience` consecutive steps.
class Plateau {
 public:
  Plateau(double factor, std::size_t patience, double threshold)
      : factor_(factor), patience_(patience), threshold_(threshold) {}

  double observe(double loss, double lr) {
    if (loss < best_ - threshold_ * std::abs(best_) || !std::isfinite(best_)) {
      best_ = loss;
      bad_ = 0;
    } else if (++bad_ > patience_) {
      bad_ = 0;
      return lr * factor_;
    }
    return lr;
  }

 private:
  double factor_;
  std::size_t patience_;
  double threshold_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
};

std::vector<double> transpose(const std::vector<double>& src, std::size_t rows, std::size_t cols) {
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = src[r * cols + c];
  return out;
}

[[noreturn]] void non_finite(std::size_t step, double loss) {
  throw NonFiniteLoss(step, "training loss became non-finite (" + std::to_string(loss) + ") at step " +
                                std::to_string(step));
}

struct Outcome {
  TwoLayerNet final_net;
  std::vector<double> weights;  // unscaled for plain (sum of l'), lr-weighted for momentum
  std::vector<double> losses;
};

// Recomputes H = X V^T + a with two GEMMs per step. Works for every loss.
Outcome train_primal(const TwoLayerNet& init, const Dataset& ds, const TrainOptions& o) {
  const std::size_t N = ds.size(), m = init.m, d = init.d;
  const double inv_n = 1.0 / static_cast<double>(N);
  const double gamma = init.gamma;
  const bool momentum = o.optimizer == OptimizerKind::momentum;

  TwoLayerNet net = init;
  const std::vector<double> X(ds.features().begin(), ds.features().end());
  const std::vector<double> XT = transpose(X, N, d);
  std::vector<double> VT = transpose(net.V, m, d);
  std::vector<double> H(N * m), S(N * m), G(m * d), col(m);
  std::vector<double> buf_v, buf_a;
  if (momentum) {
    buf_v.assign(m * d, 0.0);
    buf_a.assign(m, 0.0);
  }
  Outcome out;
  out.weights.assign(N, 0.0);
  out.losses.reserve(o.steps + 1);
  Plateau plateau(o.plateau_factor, o.plateau_patience, o.plateau_threshold);
  double lr = o.step_size;

  for (std::size_t t = 0;; ++t) {
    simd::gemm_tn(N, m, d, 1.0, XT.data(), N, VT.data(), m, 0.0, H.data(), m);
    double loss_sum = 0.0;
    std::fill(col.begin(), col.end(), 0.0);
    for (std::size_t n = 0; n < N; ++n) {
      double* h = H.data() + n * m;
      double f = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        h[i] += net.a[i];
        f += net.alpha[i] * activation(h[i], gamma);
      }
      const double y = ds.label(n);
      double l, lp;
      try {
        std::tie(l, lp) = loss_and_deriv(o.loss, -y * f);
      } catch (const Error&) {
        non_finite(t, std::numeric_limits<double>::infinity());
      }
      loss_sum += l;
      if (t < o.steps) {
        out.weights[n] += momentum ? lr * lp : lp;
        double* s = S.data() + n * m;
        const double c = y * lp;
        for (std::size_t i = 0; i < m; ++i) {
          s[i] = c * activation_deriv(h[i], gamma);
          col[i] += s[i];
        }
      }
    }
    const double loss = loss_sum * inv_n;
    if (!std::isfinite(loss)) non_finite(t, loss);
    out.losses.push_back(loss);
    if (t == o.steps) break;

    // G = (1/N) S^T X ; the descent direction for v_i is alpha_i G_i.
    simd::gemm_tn(m, d, N, inv_n, S.data(), m, X.data(), d, 0.0, G.data(), d);
    for (std::size_t i = 0; i < m; ++i) {
      double* v = net.V.data() + i * d;
      const double* g = G.data() + i * d;
      const double ai = net.alpha[i];
      const double ga = ai * col[i] * inv_n;
      if (momentum) {
        double* bv = buf_v.data() + i * d;
        for (std::size_t j = 0; j < d; ++j) {
          bv[j] = o.momentum * bv[j] - ai * g[j];
          v[j] -= lr * bv[j];
        }
        buf_a[i] = o.momentum * buf_a[i] - ga;
        net.a[i] -= lr * buf_a[i];
      } else {
        for (std::size_t j = 0; j < d; ++j) v[j] += lr * ai * g[j];
        net.a[i] += lr * ga;
      }
    }
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < d; ++j) VT[j * m + i] = net.V[i * d + j];
    if (momentum) lr = plateau.observe(loss, lr);
  }
  out.final_net = std::move(net);
  return out;
}

// Identity loss only. With l' = 1 the pre-activation update is
//   H_{t+1}[i, n] = H_t[i, n] + lr * alpha_i / N * P_t[i, n],  P_t = S_t^T (X X^T + 1),
// and S_t changes only where a unit crosses its kink, so P_t is maintained by
// one axpy per sign flip instead of two GEMMs per step.
Outcome train_kernel(const TwoLayerNet& init, const Dataset& ds, const TrainOptions& o) {
  const std::size_t N = ds.size(), m = init.m, d = init.d;
  const double inv_n = 1.0 / static_cast<double>(N);
  const double gamma = init.gamma;
  const bool momentum = o.optimizer == OptimizerKind::momentum;
  require(o.steps < (std::size_t{1} << 32), ErrorKind::invalid_argument, "train: too many steps for the kernel path");

  const std::vector<double> X(ds.features().begin(), ds.features().end());
  const std::vector<double> XT = transpose(X, N, d);
  std::vector<double> y(N);
  for (std::size_t n = 0; n < N; ++n) y[n] = ds.label(n);

  // Augmented Gram matrix K = X X^T + 1 (bias input).
  std::vector<double> K(N * N);
  simd::gemm_tn(N, N, d, 1.0, XT.data(), N, XT.data(), N, 0.0, K.data(), N);
  for (auto& k : K) k += 1.0;

  // HT = V X^T + a  (m x N)
  std::vector<double> HT(m * N);
  {
    const std::vector<double> VT = transpose(init.V, m, d);
    simd::gemm_tn(m, N, d, 1.0, VT.data(), m, XT.data(), N, 0.0, HT.data(), N);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t n = 0; n < N; ++n) HT[i * N + n] += init.a[i];
  }

  // Active flags and P = S^T K computed as (S^T X) X^T + rowsum(S^T).
  std::vector<std::uint8_t> active(m * N);
  std::vector<double> P(m * N);
  {
    std::vector<double> S(N * m);
    std::vector<double> rowsum(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t n = 0; n < N; ++n) {
        const bool on = HT[i * N + n] > 0.0;
        active[i * N + n] = on;
        const double s = y[n] * (on ? 1.0 : gamma);
        S[n * m + i] = s;
        rowsum[i] += s;
      }
    }
    std::vector<double> G(m * d);
    simd::gemm_tn(m, d, N, 1.0, S.data(), m, X.data(), d, 0.0, G.data(), d);
    const std::vector<double> GT = transpose(G, m, d);
    simd::gemm_tn(m, N, d, 1.0, GT.data(), m, XT.data(), N, 0.0, P.data(), N);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t n = 0; n < N; ++n) P[i * N + n] += rowsum[i];
  }

  // Accumulated lr-weighted S^T, needed to rebuild the final weights.
  std::vector<std::uint32_t> active_count;
  std::vector<double> Q, B, C;
  if (momentum) {
    Q.assign(m * N, 0.0);
    B.assign(m * N, 0.0);
    C.assign(m * N, 0.0);
  } else {
    active_count.assign(m * N, 0);
  }

  Outcome out;
  out.weights.assign(N, 0.0);
  out.losses.reserve(o.steps + 1);
  Plateau plateau(o.plateau_factor, o.plateau_patience, o.plateau_threshold);
  double lr = o.step_size;
  std::vector<double> f(N);

  std::vector<std::uint32_t> flips(N);

  for (std::size_t t = 0;; ++t) {
    const bool update = t < o.steps;
    std::fill(f.begin(), f.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i) {
      double* h = HT.data() + i * N;
      double* p = P.data() + i * N;
      std::uint8_t* act = active.data() + i * N;
      const double ai = init.alpha[i];
      const double c = update ? lr * ai * inv_n : 0.0;
      if (!momentum) {
        // h was advanced with the pre-flip p; flips correct both p and h.
        std::uint32_t* cnt = active_count.data() + i * N;
        const std::size_t nf = simd::row_step(N, h, p, act, c, ai, gamma, f.data(), flips.data());
        for (std::size_t j = 0; j < nf; ++j) {
          const std::size_t n = flips[j];
          const bool on = act[n] == 0;
          const double delta = y[n] * (on ? 1.0 - gamma : gamma - 1.0);
          const std::span<const double> krow(K.data() + n * N, N);
          simd::axpy(delta, krow, std::span<double>(p, N));
          if (c != 0.0) simd::axpy(c * delta, krow, std::span<double>(h, N));
          act[n] = on;
          // Active steps accumulate as (end - start) in modular uint32 arithmetic.
          const auto tt = static_cast<std::uint32_t>(t);
          cnt[n] = on ? cnt[n] - tt : cnt[n] + tt;
        }
        continue;
      }
      for (std::size_t n = 0; n < N; ++n) {
        f[n] += ai * activation(h[n], gamma);
        const bool on = h[n] > 0.0;
        if (on != static_cast<bool>(act[n])) {
          const double delta = y[n] * (on ? 1.0 - gamma : gamma - 1.0);
          simd::axpy(delta, std::span<const double>(K.data() + n * N, N), std::span<double>(p, N));
          act[n] = on;
        }
      }
      if (!update) continue;
      double* q = Q.data() + i * N;
      double* b = B.data() + i * N;
      double* acc = C.data() + i * N;
      for (std::size_t n = 0; n < N; ++n) {
        q[n] = o.momentum * q[n] + p[n];
        h[n] += c * q[n];
        b[n] = o.momentum * b[n] + y[n] * (act[n] ? 1.0 : gamma);
        acc[n] += lr * b[n];
      }
    }
    double loss_sum = 0.0;
    for (std::size_t n = 0; n < N; ++n) loss_sum += -y[n] * f[n];
    const double loss = loss_sum * inv_n;
    if (!std::isfinite(loss)) non_finite(t, loss);
    out.losses.push_back(loss);
    if (!update) break;
    for (std::size_t n = 0; n < N; ++n) out.weights[n] += momentum ? lr : 1.0;
    if (momentum) lr = plateau.observe(loss, lr);
  }

  // V_T = V_0 + (1/N) diag(alpha) C X,  a_T = a_0 + (1/N) diag(alpha) C 1.
  if (!momentum) {
    C.resize(m * N);
    const double steps = static_cast<double>(o.steps);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t n = 0; n < N; ++n) {
        const std::uint32_t open = active[i * N + n] ? static_cast<std::uint32_t>(o.steps) : 0u;
        const double cnt = static_cast<std::uint32_t>(active_count[i * N + n] + open);
        C[i * N + n] = o.step_size * y[n] * (cnt + gamma * (steps - cnt));
      }
    }
  }
  TwoLayerNet net = init;
  {
    const std::vector<double> CT = transpose(C, m, N);
    std::vector<double> CX(m * d);
    simd::gemm_tn(m, d, N, 1.0, CT.data(), m, X.data(), d, 0.0, CX.data(), d);
    for (std::size_t i = 0; i < m; ++i) {
      const double ci = init.alpha[i] * inv_n;
      double rs = 0.0;
      for (std::size_t n = 0; n < N; ++n) rs += C[i * N + n];
      for (std::size_t j = 0; j < d; ++j) net.V[i * d + j] += ci * CX[i * d + j];
      net.a[i] += ci * rs;
    }
  }
  out.final_net = std::move(net);
  return out;
}

std::vector<std::int8_t> signs_of(const std::vector<double>& h) {
  std::vector<std::int8_t> s(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) s[i] = static_cast<std::int8_t>((h[i] > 0) - (h[i] < 0));
  return s;
}

}  // namespace

TrainTrace train(const TwoLayerNet& net, const Dataset& ds, const TrainOptions& opts,
                 std::span<const std::vector<double>> probes) {
  net.validate();
  require(!ds.empty(), ErrorKind::invalid_argument, "train: empty dataset");
  require(ds.dim() == net.d, ErrorKind::dimension_mismatch,
          "train: dataset dimension " + std::to_string(ds.dim()) + " does not match net input " +
              std::to_string(net.d));
  require(opts.step_size > 0.0 && std::isfinite(opts.step_size), ErrorKind::invalid_argument,
          "train: step_size must be positive");
  require(opts.momentum >= 0.0 && opts.momentum < 1.0, ErrorKind::invalid_argument,
          "train: momentum must be in [0, 1)");
  for (const auto& z : probes) {
    require(z.size() == net.d, ErrorKind::dimension_mismatch, "train: probe dimension mismatch");
  }

  TrainerPath path = opts.path;
  if (path == TrainerPath::automatic) {
    path = opts.loss == LossKind::identity && ds.size() <= opts.kernel_path_max_n && opts.steps < kKernelMaxSteps
               ? TrainerPath::kernel
               : TrainerPath::primal;
  }
  require(path != TrainerPath::kernel || opts.loss == LossKind::identity, ErrorKind::invalid_argument,
          "train: the kernel path requires the identity loss");
  require(path != TrainerPath::kernel || opts.steps < kKernelMaxSteps, ErrorKind::invalid_argument,
          "train: the kernel path counts steps in 32 bits");

  Outcome out = path == TrainerPath::kernel ? train_kernel(net, ds, opts) : train_primal(net, ds, opts);

  TrainTrace trace;
  trace.steps = opts.steps;
  trace.step_size = opts.step_size;
  trace.flow_time = static_cast<double>(opts.steps) * opts.step_size;
  trace.loss = opts.loss;
  trace.optimizer = opts.optimizer;
  trace.path_used = path;
  trace.n_samples = ds.size();
  trace.loss_history = std::move(out.losses);
  trace.integral_weights = std::move(out.weights);
  if (opts.optimizer == OptimizerKind::plain) {
    for (auto& w : trace.integral_weights) w *= opts.step_size;
  }
  trace.initial_net = net;
  trace.final_net = std::move(out.final_net);

  for (const auto& z : probes) {
    ProbeSigns p;
    p.z = z;
    p.initial = signs_of(pre_activations(trace.initial_net, z));
    p.final = signs_of(pre_activations(trace.final_net, z));
    for (std::size_t n = 0; n < ds.size(); ++n) {
      const double ip = simd::dot(ds.row(n), z);
      p.drift_sum += std::abs(ip + 1.0) * trace.integral_weights[n];
      p.width_sum += (std::abs(ip) + 1.0) * trace.integral_weights[n];
    }
    trace.probes.push_back(std::move(p));
  }
  return trace;
}

void save_trace(const TrainTrace& trace, const std::filesystem::path& path) {
  Container c;
  c.add("integral_weights", trace.integral_weights.size(), 1, trace.integral_weights);
  c.add("loss_history", trace.loss_history.size(), 1, trace.loss_history);
  const auto& n0 = trace.initial_net;
  const auto& n1 = trace.final_net;
  c.add("initial.V", n0.m, n0.d, n0.V);
  c.add("initial.a", n0.m, 1, n0.a);
  c.add("initial.alpha", n0.m, 1, n0.alpha);
  c.add("final.V", n1.m, n1.d, n1.V);
  c.add("final.a", n1.m, 1, n1.a);
  c.add("final.alpha", n1.m, 1, n1.alpha);
  for (std::size_t k = 0; k < trace.probes.size(); ++k) {
    const auto& p = trace.probes[k];
    const std::string base = "probe" + std::to_string(k);
    c.add(base + ".z", p.z.size(), 1, p.z);
    c.add(base + ".initial", p.initial.size(), 1, p.initial);
    c.add(base + ".final", p.final.size(), 1, p.final);
    const double sums[2] = {p.drift_sum, p.width_sum};
    c.add(base + ".sums", 2, 1, std::span<const double>(sums));
  }
  c.write(path);
  nlohmann::json meta = {
      {"kind", "train_trace"},
      {"steps", trace.steps},
      {"step_size", trace.step_size},
      {"flow_time", trace.flow_time},
      {"loss", to_string(trace.loss)},
      {"optimizer", to_string(trace.optimizer)},
      {"mode", trace.is_flow() ? "theory" : "figure"},
      {"path", to_string(trace.path_used)},
      {"n_samples", trace.n_samples},
      {"n_probes", trace.probes.size()},
      {"m", n0.m},
      {"d", n0.d},
      {"gamma", n0.gamma},
      {"final_net", net_fingerprint(n1)},
  };
  write_json(sidecar_path(path), meta);
}

TrainTrace load_trace(const std::filesystem::path& path) {
  const Container c = Container::read(path);
  const auto meta = read_json(sidecar_path(path));
  TrainTrace t;
  t.steps = meta.at("steps").get<std::size_t>();
  t.step_size = meta.at("step_size").get<double>();
  t.flow_time = meta.at("flow_time").get<double>();
  t.loss = parse_loss(meta.at("loss").get<std::string>());
  t.optimizer = parse_optimizer(meta.at("optimizer").get<std::string>());
  t.path_used = parse_trainer_path(meta.at("path").get<std::string>());
  t.n_samples = meta.at("n_samples").get<std::size_t>();
  const auto m = meta.at("m").get<std::size_t>();
  const auto d = meta.at("d").get<std::size_t>();
  const auto gamma = meta.at("gamma").get<double>();
  t.integral_weights = c.f64("integral_weights", t.n_samples, 1);
  t.loss_history = c.f64("loss_history");
  for (auto* net : {&t.initial_net, &t.final_net}) {
    const std::string p = net == &t.initial_net ? "initial." : "final.";
    net->m = m;
    net->d = d;
    net->gamma = gamma;
    net->V = c.f64(p + "V", m, d);
    net->a = c.f64(p + "a", m, 1);
    net->alpha = c.f64(p + "alpha", m, 1);
    net->validate();
  }
  const auto n_probes = meta.at("n_probes").get<std::size_t>();
  for (std::size_t k = 0; k < n_probes; ++k) {
    const std::string base = "probe" + std::to_string(k);
    ProbeSigns p;
    p.z = c.f64(base + ".z", d, 1);
    p.initial = c.i8(base + ".initial", m, 1);
    p.final = c.i8(base + ".final", m, 1);
    const auto& sums = c.f64(base + ".sums", 2, 1);
    p.drift_sum = sums[0];
    p.width_sum = sums[1];
    t.probes.push_back(std::move(p));
  }
  return t;
}

}  // namespace plab
