#pragma once

#include <vector>

#include "plab/datasets.hpp"
#include "plab/perturbation.hpp"
#include "test_util.hpp"

namespace plab::testing {

struct Instance {
  Dataset ds;
  AdvSet adv;
  std::vector<double> wf, wg;
  std::vector<double> z;
  double gamma;
};

/// Random micro-instance with hand-built adversarial set and positive weights.
inline Instance random_instance(Rng& gen, std::size_t max_n, std::size_t max_d, Scenario sc) {
  const std::size_t n = 1 + gen.next_u64() % max_n, d = 1 + gen.next_u64() % max_d;
  std::vector<std::int8_t> y(n);
  for (auto& v : y) v = static_cast<std::int8_t>(gen.sign());
  Instance in{make_dataset(d, normal_vector(gen, n * d), y), {}, {}, {}, normal_vector(gen, d), gen.uniform()};
  in.adv.n = n;
  in.adv.d = d;
  in.adv.eps = 0.5;
  in.adv.scenario = sc;
  in.adv.y = y;
  in.adv.grad_norm.assign(n, 1.0);
  in.adv.skipped.assign(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    in.adv.y_adv.push_back(static_cast<std::int8_t>(gen.sign()));
    if (n > 1 && gen.uniform() < 0.2) {
      in.adv.skipped[k] = 1;
      continue;
    }
    in.adv.kept.push_back(k);
  }
  if (in.adv.kept.empty()) {
    in.adv.kept.push_back(0);
    in.adv.skipped[0] = 0;
  }
  in.adv.r = normal_vector(gen, in.adv.kept.size() * d, 0.5);
  for (std::size_t k = 0; k < n; ++k) in.wf.push_back(gen.uniform(0.1, 3.0));
  for (std::size_t k = 0; k < in.adv.kept.size(); ++k) in.wg.push_back(gen.uniform(0.1, 3.0));
  return in;
}

}  // namespace plab::testing
