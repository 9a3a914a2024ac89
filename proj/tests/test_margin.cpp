#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "aplot/error.hpp"
#include "aplot/margin.hpp"
#include "test_util.hpp"

using aplot::Error;
using aplot::ErrorCode;
using aplot::Matrix;
using namespace aplot::margin;

namespace {

using Vec = std::vector<double>;

MarginOptions aplot_options(double beta = 0.1) {
  MarginOptions o;
  o.strategy = Strategy::kAplot;
  o.sinkhorn.beta = beta;
  return o;
}

CostMatrix random_cost(std::size_t b, std::mt19937_64& rng) {
  return {testing::random_matrix(b, b, rng), 0.5};
}

}  // namespace

TEST_CASE("cosine similarity examples") {
  CHECK(cosine_similarity(Vec{1, 0}, Vec{1, 0}) == doctest::Approx(1.0));
  CHECK(cosine_similarity(Vec{1, 0}, Vec{0, 1}) == doctest::Approx(0.0));
  CHECK(cosine_similarity(Vec{1, 1}, Vec{-1, -1}) == doctest::Approx(-1.0));
  CHECK(cosine_similarity(Vec{3, 4}, Vec{6, 8}) <= 1.0);

  try {
    cosine_similarity(Vec{0, 0}, Vec{1, 0});
    FAIL("expected ZeroVector");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kZeroVector);
  }
  CHECK_THROWS_AS(cosine_similarity(Vec{1, 0}, Vec{1, 0, 0}), Error);
}

TEST_CASE("similarity matrix pairs chosen rows with rejected columns") {
  const Vec a{1, 0}, b{0, 1}, c{1, 1};
  const std::vector<std::span<const double>> chosen{a, b};
  const std::vector<std::span<const double>> rejected{a, c};
  const Matrix s = similarity_matrix(chosen, rejected);
  CHECK(s(0, 0) == doctest::Approx(1.0));
  CHECK(s(1, 0) == doctest::Approx(0.0));
  CHECK(s(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)));
  for (double v : s.data()) CHECK(std::abs(v) <= 1.0 + 1e-9);
}

TEST_CASE("reward difference examples") {
  CHECK(reward_difference_matrix(Vec{1, 2}, Vec{0, 1}) == Matrix{{1, 0}, {2, 1}});
  CHECK(reward_difference_matrix(Vec{0.7, 0.7, 0.7}, Vec{0.7, 0.7, 0.7}) == Matrix(3, 3));
  CHECK(reward_difference_matrix(Vec{0.3}, Vec{-0.2})(0, 0) == doctest::Approx(0.5));
  CHECK_THROWS_AS(reward_difference_matrix(Vec{1.0, NAN}, Vec{0, 0}), Error);
  CHECK_THROWS_AS(reward_difference_matrix(Vec{1.0}, Vec{0, 0}), Error);
}

TEST_CASE("cost matrix anchors") {
  CHECK(build_cost_matrix(Matrix{{1.0}}, Matrix{{0.0}}, 0.5).matrix(0, 0) == 0.75);

  std::mt19937_64 rng(3);
  const Matrix sim = testing::random_matrix(4, 4, rng, -1.0, 1.0);
  const Matrix diff = testing::random_matrix(4, 4, rng, -3.0, 3.0);
  const auto pure_sim = build_cost_matrix(sim, diff, 1.0);
  for (std::size_t k = 0; k < sim.size(); ++k) {
    CHECK(pure_sim.matrix.data()[k] == (sim.data()[k] + 1.0) / 2.0);
  }

  CHECK(build_cost_matrix(Matrix{{0.3}}, Matrix{{20.0}}, 0.0).matrix(0, 0) < 1e-8);
  CHECK(build_cost_matrix(Matrix{{0.3}}, Matrix{{-20.0}}, 0.0).matrix(0, 0) ==
        doctest::Approx(1.0).epsilon(1e-8));

  for (double g : {-0.1, 1.5, std::nan("")}) {
    try {
      build_cost_matrix(sim, diff, g);
      FAIL("expected GammaOutOfRange");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kGammaOutOfRange);
    }
  }
  CHECK_THROWS_AS(build_cost_matrix(sim, Matrix(4, 3), 0.5), Error);
}

TEST_CASE("cost entries follow the blend formula and stay in [0, 1]") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix sim = testing::random_matrix(5, 5, rng, -1.0, 1.0);
    const Matrix diff = testing::random_matrix(5, 5, rng, -10.0, 10.0);
    const double gamma = g(rng);
    const auto cost = build_cost_matrix(sim, diff, gamma);
    CHECK(cost.gamma == gamma);
    for (std::size_t k = 0; k < sim.size(); ++k) {
      const double s = (sim.data()[k] + 1.0) / 2.0;
      const double expect = gamma * s + (1.0 - gamma) * (1.0 / (1.0 + std::exp(diff.data()[k])));
      CHECK(std::abs(cost.matrix.data()[k] - expect) <= 1e-12);
      CHECK(cost.matrix.data()[k] >= 0.0);
      CHECK(cost.matrix.data()[k] <= 1.0);
    }
    const auto raw = build_cost_matrix(sim, diff, gamma, SimilarityMode::kRaw);
    for (std::size_t k = 0; k < sim.size(); ++k) {
      const double expect =
          gamma * sim.data()[k] + (1.0 - gamma) * (1.0 / (1.0 + std::exp(diff.data()[k])));
      CHECK(std::abs(raw.matrix.data()[k] - expect) <= 1e-12);
    }
  }
}

TEST_CASE("cost rises with similarity and falls with reward difference") {
  const double gamma = 0.3;
  double prev = -1.0;
  for (double s = -1.0; s <= 1.0; s += 0.25) {
    const double c = build_cost_matrix(Matrix{{s}}, Matrix{{0.4}}, gamma).matrix(0, 0);
    CHECK(c > prev);
    prev = c;
  }
  prev = 2.0;
  for (double d = -5.0; d <= 5.0; d += 0.5) {
    const double c = build_cost_matrix(Matrix{{0.2}}, Matrix{{d}}, gamma).matrix(0, 0);
    CHECK(c <= prev);
    prev = c;
  }
}

TEST_CASE("constant cost gives the constant under every aggregation") {
  for (std::size_t b : {1u, 2u, 5u, 16u}) {
    const CostMatrix cost{Matrix(b, b, 0.37), 0.5};
    const auto ap = estimate_margins(cost, aplot_options());
    for (double m : ap.values) CHECK(m == doctest::Approx(0.37).epsilon(1e-12));

    MarginOptions point;
    point.strategy = Strategy::kPoint;
    for (double m : estimate_margins(cost, point).values) CHECK(m == doctest::Approx(0.37));
    point.point = PointNormalization::kSum;
    for (double m : estimate_margins(cost, point).values) {
      CHECK(m == doctest::Approx(0.37 * static_cast<double>(b)));
    }
  }
}

TEST_CASE("constant strategies") {
  std::mt19937_64 rng(7);
  const auto cost = random_cost(6, rng);
  MarginOptions o;
  o.strategy = Strategy::kHard;
  o.hard_value = 1.0;
  const auto hard = estimate_margins(cost, o);
  CHECK(hard.strategy == Strategy::kHard);
  CHECK(hard.values == Vec(6, 1.0));
  o.strategy = Strategy::kNone;
  const auto none = estimate_margins(cost, o);
  CHECK(none.values == Vec(6, 0.0));
}

TEST_CASE("APLOT on the 2x2 instance picks out the min-cost matching") {
  const Matrix c{{0.2, 0.8}, {0.9, 0.1}};
  const double beta = 0.01;
  const auto mu = estimate_margins({c, 0.5}, aplot_options(beta)).values;

  // Unit-mass 2x2 plans are [[t, 1-t], [1-t, t]]; minimize over t directly.
  auto f = [&](double t) {
    return aplot::ot::ot_objective(Matrix{{t, 1 - t}, {1 - t, t}}, c, beta);
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (f(a) < f(b)) hi = b; else lo = a;
  }
  const double t = 0.5 * (lo + hi);
  const double mu0 = t * c(0, 0) + (1 - t) * c(0, 1);
  const double mu1 = (1 - t) * c(1, 0) + t * c(1, 1);
  CHECK(std::abs(mu[0] - mu0) <= 1e-3);
  CHECK(std::abs(mu[1] - mu1) <= 1e-3);
  CHECK(std::abs(mu[0] - 0.2) <= 1e-3);
  CHECK(std::abs(mu[1] - 0.1) <= 1e-3);

  const auto oracle = aplot::ot::brute_force_ot(c, aplot::ot::Marginals::unit_mass(2), beta);
  for (std::size_t i = 0; i < 2; ++i) {
    double m = 0.0;
    for (std::size_t j = 0; j < 2; ++j) m += oracle.matrix(i, j) * c(i, j);
    CHECK(std::abs(mu[i] - m) <= 1e-3);
  }
}

TEST_CASE("APLOT margins are convex combinations of their row costs") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t b = 1 + trial % 12;
    const auto cost = random_cost(b, rng);
    for (double beta : {0.01, 0.1, 1.0}) {
      const auto mu = estimate_margins(cost, aplot_options(beta));
      REQUIRE(mu.values.size() == b);
      for (std::size_t i = 0; i < b; ++i) {
        const auto row = cost.matrix.row(i);
        CHECK(mu.values[i] >= *std::min_element(row.begin(), row.end()) - 1e-9);
        CHECK(mu.values[i] <= *std::max_element(row.begin(), row.end()) + 1e-9);
        CHECK(mu.values[i] >= 0.0);
        CHECK(mu.values[i] <= 1.0);
      }
    }
  }
}

TEST_CASE("a single triplet gets its own cost as margin") {
  const auto mu = estimate_margins({Matrix{{0.6180339}}, 0.5}, aplot_options());
  CHECK(mu.values[0] == 0.6180339);
}

TEST_CASE("permuting the batch permutes the margins") {
  std::mt19937_64 rng(13);
  const std::size_t b = 7;
  const Matrix sim = testing::random_matrix(b, b, rng, -1, 1);
  const Matrix diff = testing::random_matrix(b, b, rng, -2, 2);
  const auto base = estimate_margins(build_cost_matrix(sim, diff, 0.5), aplot_options());

  std::vector<std::size_t> perm(b);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  // Triplet k of the new batch is triplet perm[k] of the old one, on both sides.
  Matrix sim_p(b, b), diff_p(b, b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      sim_p(i, j) = sim(perm[i], perm[j]);
      diff_p(i, j) = diff(perm[i], perm[j]);
    }
  }
  const auto permuted = estimate_margins(build_cost_matrix(sim_p, diff_p, 0.5), aplot_options());
  for (std::size_t k = 0; k < b; ++k) {
    CHECK(permuted.values[k] == doctest::Approx(base.values[perm[k]]).epsilon(1e-9));
  }
}

TEST_CASE("probability marginals shrink APLOT margins by the batch size") {
  std::mt19937_64 rng(17);
  const auto cost = random_cost(8, rng);
  auto unit = aplot_options();
  auto prob = aplot_options();
  prob.mass = MassNormalization::kProbability;
  const auto a = estimate_margins(cost, unit).values;
  const auto p = estimate_margins(cost, prob).values;
  for (std::size_t i = 0; i < 8; ++i) CHECK(p[i] == doctest::Approx(a[i] / 8.0).epsilon(1e-7));
}

TEST_CASE("APLOT reports the solver state") {
  std::mt19937_64 rng(19);
  const auto mu = estimate_margins(random_cost(10, rng), aplot_options());
  CHECK(mu.strategy == Strategy::kAplot);
  CHECK(mu.sinkhorn_iterations >= 1);
  CHECK(mu.sinkhorn_residual <= 1e-9);
}

TEST_CASE("non-square costs are rejected") {
  CHECK_THROWS_AS(estimate_margins({Matrix(2, 3), 0.5}, aplot_options()), Error);
}

TEST_CASE("strategy names round-trip") {
  for (auto s : {Strategy::kAplot, Strategy::kPoint, Strategy::kHard, Strategy::kNone}) {
    CHECK(parse_strategy(strategy_name(s)) == s);
  }
  CHECK(parse_strategy("APLOT") == Strategy::kAplot);
  CHECK_THROWS_AS(parse_strategy("ot"), Error);
}
