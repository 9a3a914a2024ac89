#include <doctest.h>

#include <cmath>
#include <random>

#include "aplot/data.hpp"
#include "aplot/error.hpp"
#include "aplot/eval.hpp"

using aplot::Error;
using aplot::ErrorCode;
using aplot::model::RewardHead;
using namespace aplot::eval;

namespace {

aplot::data::Dataset clean_set(std::size_t n = 500) {
  aplot::data::SyntheticConfig c;
  c.n_pairs = n;
  c.dim = 6;
  return aplot::data::generate_synthetic(c);
}

RewardHead gold_head(std::size_t dim, double sign = 1.0) {
  RewardHead h = RewardHead::linear(dim);
  const auto w = aplot::data::gold_direction(dim, 7);
  for (std::size_t k = 0; k < dim; ++k) h.parameters()[k] = sign * w[k];
  return h;
}

}  // namespace

TEST_CASE("pairwise accuracy anchors") {
  const auto ds = clean_set();
  CHECK(pairwise_accuracy(gold_head(6), ds) == 1.0);
  CHECK(pairwise_accuracy(gold_head(6, -1.0), ds) == 0.0);
  CHECK(pairwise_accuracy(RewardHead::linear(6), ds) == 0.5);
  try {
    pairwise_accuracy(gold_head(6), {});
    FAIL("expected EmptyDataset");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kEmptyDataset);
  }
}

TEST_CASE("separation of identical pairs is zero") {
  aplot::data::Dataset ds;
  for (int i = 0; i < 10; ++i) ds.pairs.push_back({"x", {1.0, 2.0}, {1.0, 2.0}, {}, {}, {}});
  const auto st = separation_stats(gold_head(2), ds, 5);
  CHECK(st.mean_gap == 0.0);
  CHECK(st.std_gap == 0.0);
  CHECK(st.fraction_correct == 0.0);
  std::size_t total = 0;
  for (auto c : st.histogram.counts) total += c;
  CHECK(total == 10);
}

TEST_CASE("histogram partitions the gaps") {
  const auto ds = clean_set(333);
  for (std::size_t bins : {1u, 7u, 20u}) {
    const auto st = separation_stats(gold_head(6), ds, bins);
    REQUIRE(st.histogram.counts.size() == bins);
    REQUIRE(st.histogram.edges.size() == bins + 1);
    std::size_t total = 0;
    for (auto c : st.histogram.counts) total += c;
    CHECK(total == 333);
    for (std::size_t b = 0; b < bins; ++b) CHECK(st.histogram.edges[b] < st.histogram.edges[b + 1]);
  }
  CHECK_THROWS_AS(separation_stats(gold_head(6), ds, 0), Error);
}

TEST_CASE("doubling a linear head doubles the mean gap") {
  const auto ds = clean_set();
  auto head = aplot::model::RewardHead::random(aplot::model::Architecture::kLinear, 6, 0, 1.0, 3);
  const auto a = separation_stats(head, ds, 10);
  for (double& p : head.parameters()) p *= 2.0;
  const auto b = separation_stats(head, ds, 10);
  CHECK(b.mean_gap == doctest::Approx(2.0 * a.mean_gap).epsilon(1e-12));
  CHECK(b.std_gap == doctest::Approx(2.0 * a.std_gap).epsilon(1e-12));
  CHECK(b.fraction_correct == a.fraction_correct);
}

TEST_CASE("fraction correct equals accuracy without ties") {
  const auto ds = clean_set();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto head =
        aplot::model::RewardHead::random(aplot::model::Architecture::kLinear, 6, 0, 1.0, seed);
    CHECK(separation_stats(head, ds, 4).fraction_correct == pairwise_accuracy(head, ds));
  }
}

TEST_CASE("gap statistics") {
  const std::vector<double> gaps{1.0, -1.0, 3.0, 1.0};
  const auto st = separation_stats(gaps, 2);
  CHECK(st.mean_gap == doctest::Approx(1.0));
  CHECK(st.std_gap == doctest::Approx(std::sqrt(2.0)));
  CHECK(st.fraction_correct == 0.75);
  CHECK(st.histogram.edges.front() == -1.0);
  CHECK(st.histogram.edges.back() == 3.0);
  CHECK(st.histogram.counts == std::vector<std::size_t>{1, 3});
}

TEST_CASE("KL of best-of-n") {
  CHECK(kl_bon(1) == 0.0);
  CHECK(kl_bon(405) == doctest::Approx(5.006).epsilon(1e-3));
  for (long long n = 1; n <= 500; ++n) {
    const double expect = std::log(static_cast<double>(n)) -
                          static_cast<double>(n - 1) / static_cast<double>(n);
    CHECK(kl_bon(n) == expect);
    if (n > 1) CHECK(kl_bon(n) > kl_bon(n - 1));
  }
  for (long long bad : {0LL, -3LL}) {
    try {
      kl_bon(bad);
      FAIL("expected InvalidN");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kInvalidN);
    }
  }
}

TEST_CASE("best-of-n selecting by gold is monotone and starts at zero") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    aplot::data::CandidateConfig cfg;
    cfg.n_prompts = 50;
    cfg.n_candidates = 64;
    cfg.seed = seed;
    const auto sets = aplot::data::generate_candidates(cfg);
    std::vector<std::vector<double>> gold;
    for (const auto& s : sets) gold.push_back(s.gold_scores);
    std::vector<std::size_t> ns(64);
    for (std::size_t k = 0; k < 64; ++k) ns[k] = k + 1;
    const auto r = best_of_n(gold, gold, ns);
    CHECK(r.mean_gold_scores[0] == 0.0);
    for (std::size_t k = 1; k < ns.size(); ++k) {
      CHECK(r.mean_gold_scores[k] >= r.mean_gold_scores[k - 1]);
    }
    for (std::size_t k = 0; k < ns.size(); ++k) {
      CHECK(r.kl_values[k] == kl_bon(static_cast<long long>(ns[k])));
    }
    const auto via_head = best_of_n(gold_head(cfg.dim), sets, ns);
    for (std::size_t k = 0; k < ns.size(); ++k) {
      CHECK(via_head.mean_gold_scores[k] == doctest::Approx(r.mean_gold_scores[k]));
    }
  }
}

TEST_CASE("best-of-n breaks ties toward the first candidate") {
  const std::vector<std::vector<double>> proxy{{1.0, 1.0, 0.0}};
  const std::vector<std::vector<double>> gold{{0.0, 5.0, 9.0}};
  const std::vector<std::size_t> ns{1, 2, 3};
  const auto r = best_of_n(proxy, gold, ns);
  CHECK(r.mean_gold_scores == std::vector<double>{0.0, 0.0, 0.0});
}

TEST_CASE("a proxy independent of gold gains nothing") {
  const std::size_t prompts = 4000, cands = 32;
  std::mt19937_64 rng(77);
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> proxy(prompts), gold(prompts);
  for (std::size_t p = 0; p < prompts; ++p) {
    for (std::size_t k = 0; k < cands; ++k) {
      proxy[p].push_back(g(rng));
      gold[p].push_back(g(rng));
    }
  }
  const std::vector<std::size_t> ns{1, 2, 4, 8, 16, 32};
  const auto r = best_of_n(proxy, gold, ns);
  for (std::size_t k = 0; k < ns.size(); ++k) {
    // Per-prompt improvement over candidate 0, recomputed here for its spread.
    std::vector<double> diffs;
    for (std::size_t p = 0; p < prompts; ++p) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < ns[k]; ++c) {
        if (proxy[p][c] > proxy[p][best]) best = c;
      }
      diffs.push_back(gold[p][best] - gold[p][0]);
    }
    double mean = 0.0, var = 0.0;
    for (double d : diffs) mean += d / prompts;
    for (double d : diffs) var += (d - mean) * (d - mean) / (prompts - 1);
    CHECK(r.mean_gold_scores[k] == doctest::Approx(mean).epsilon(1e-9));
    const double se = std::sqrt(var / prompts);
    CHECK(std::abs(r.mean_gold_scores[k]) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("best-of-n needs enough candidates") {
  const std::vector<std::vector<double>> s{{1.0, 2.0}};
  const std::vector<std::size_t> ns{1, 3};
  try {
    best_of_n(s, s, ns);
    FAIL("expected NotEnoughCandidates");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNotEnoughCandidates);
  }
  const std::vector<std::size_t> zero{0};
  CHECK_THROWS_AS(best_of_n(s, s, zero), Error);
}

TEST_CASE("log-spaced grid") {
  const auto ns = log_spaced_n(405, 20);
  CHECK(ns.front() == 1);
  CHECK(ns.back() == 405);
  for (std::size_t k = 1; k < ns.size(); ++k) CHECK(ns[k] > ns[k - 1]);
  CHECK(kl_bon(static_cast<long long>(ns.back())) == doctest::Approx(5.006).epsilon(1e-3));
  CHECK(log_spaced_n(1, 5) == std::vector<std::size_t>{1});
}
