#ifndef APLOT_TESTS_BT_ORACLE_HPP_
#define APLOT_TESTS_BT_ORACLE_HPP_

#include <cmath>
#include <vector>

#include "aplot/data.hpp"
#include "aplot/rng.hpp"
#include "aplot/trainer.hpp"

namespace testing {

inline double oracle_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Plain Bradley-Terry SGD on a linear head with a constant margin, written
/// out longhand. Shares only the seed policy (initial weights and batch
/// order) with the library trainer. Returns the final [w, b].
inline std::vector<double> oracle_linear_run(const aplot::trainer::TrainConfig& cfg,
                                             const aplot::data::Dataset& ds,
                                             double constant_margin) {
  const std::size_t d = ds.dim();
  const auto init = aplot::model::RewardHead::random(
      aplot::model::Architecture::kLinear, d, 0, cfg.init_scale,
      aplot::derive_seed(cfg.seed, aplot::stream::kHeadInit));
  std::vector<double> p(init.parameters().begin(), init.parameters().end());
  aplot::trainer::MinibatchSampler sampler(ds.size(), cfg.batch_size,
                                           aplot::derive_seed(cfg.seed, aplot::stream::kShuffle));
  auto reward = [&](const std::vector<double>& z) {
    double r = p[d];
    for (std::size_t k = 0; k < d; ++k) r += p[k] * z[k];
    return r;
  };
  for (std::size_t step = 0; step < cfg.max_steps; ++step) {
    const auto idx = sampler.next();
    const double inv_b = 1.0 / static_cast<double>(idx.size());
    std::vector<double> g(d + 1, 0.0);
    for (std::size_t i : idx) {
      const auto& pair = ds.pairs[i];
      const double x =
          reward(pair.chosen_features) - reward(pair.rejected_features) - constant_margin;
      const double coef = -oracle_sigmoid(-x) * inv_b;
      for (std::size_t k = 0; k < d; ++k) g[k] += coef * pair.chosen_features[k];
      g[d] += coef;
      for (std::size_t k = 0; k < d; ++k) g[k] += -coef * pair.rejected_features[k];
      g[d] += -coef;
    }
    for (std::size_t k = 0; k <= d; ++k) p[k] -= cfg.learning_rate * g[k];
  }
  return p;
}

}  // namespace testing

#endif  // APLOT_TESTS_BT_ORACLE_HPP_
