#include <doctest.h>

#include <cmath>
#include <set>

#include "aplot/data.hpp"
#include "aplot/error.hpp"
#include "aplot/eval.hpp"
#include "aplot/margin.hpp"
#include "aplot/trainer.hpp"
#include "test_util.hpp"

using aplot::Error;
using aplot::ErrorCode;
using namespace aplot::data;

namespace {

SyntheticConfig small_config(std::size_t n = 400) {
  SyntheticConfig c;
  c.n_pairs = n;
  c.dim = 8;
  c.seed = 42;
  return c;
}

double gold_accuracy(const Dataset& ds) {
  const auto w = gold_direction(ds.dim(), 7);
  double hits = 0.0;
  for (const auto& p : ds.pairs) {
    hits += gold_reward(w, p.chosen_features) > gold_reward(w, p.rejected_features) ? 1.0 : 0.0;
  }
  return hits / static_cast<double>(ds.size());
}

}  // namespace

TEST_CASE("gold direction is a unit vector fixed by its seed") {
  const auto w = gold_direction(16, 7);
  double norm = 0.0;
  for (double x : w) norm += x * x;
  CHECK(norm == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(gold_direction(16, 7) == w);
  CHECK(gold_direction(16, 8) != w);
}

TEST_CASE("noise-free synthetic data is consistent with the planted gold") {
  const Dataset ds = generate_synthetic(small_config());
  REQUIRE(ds.size() == 400);
  const auto w = gold_direction(8, 7);
  for (const auto& p : ds.pairs) {
    REQUIRE(p.gold_chosen.has_value());
    CHECK(*p.gold_chosen > *p.gold_rejected);
    CHECK(*p.gold_chosen == doctest::Approx(gold_reward(w, p.chosen_features)).epsilon(1e-12));
    CHECK(p.noise_flipped == false);
  }
}

TEST_CASE("hard pairs are close in feature space and have small gold gaps") {
  auto cfg = small_config(1000);
  const Dataset ds = generate_synthetic(cfg);
  double hard_gap = 0.0, easy_gap = 0.0;
  std::size_t n_hard = 0, n_easy = 0;
  for (const auto& p : ds.pairs) {
    const double gap = *p.gold_chosen - *p.gold_rejected;
    if (is_hard_pair(p)) {
      ++n_hard;
      hard_gap += gap;
      CHECK(aplot::margin::cosine_similarity(p.chosen_features, p.rejected_features) >=
            cfg.similarity_coupling);
    } else {
      ++n_easy;
      easy_gap += gap;
    }
  }
  CHECK(n_hard == 500);
  CHECK(n_easy == 500);
  CHECK(hard_gap / n_hard < easy_gap / n_easy);
}

TEST_CASE("difficulty mix controls the share of hard pairs") {
  auto cfg = small_config(100);
  cfg.easy_fraction = 1.0;
  cfg.hard_fraction = 0.0;
  for (const auto& p : generate_synthetic(cfg).pairs) CHECK_FALSE(is_hard_pair(p));
  cfg.easy_fraction = 0.6;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
}

TEST_CASE("generation is deterministic") {
  const auto cfg = small_config(200);
  CHECK(to_jsonl(generate_synthetic(cfg)) == to_jsonl(generate_synthetic(cfg)));
  auto other = cfg;
  other.seed = 43;
  CHECK(to_jsonl(generate_synthetic(other)) != to_jsonl(generate_synthetic(cfg)));
}

TEST_CASE("observation noise perturbs features but not gold") {
  auto cfg = small_config(50);
  const Dataset clean = generate_synthetic(cfg);
  cfg.observation_noise = 0.5;
  const Dataset noisy = generate_synthetic(cfg);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    CHECK(noisy.pairs[i].gold_chosen == clean.pairs[i].gold_chosen);
    CHECK(noisy.pairs[i].chosen_features != clean.pairs[i].chosen_features);
  }
}

TEST_CASE("invalid synthetic configs are rejected") {
  auto cfg = small_config();
  cfg.dim = 0;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = small_config();
  cfg.hard_gap_scale = 0.0;
  CHECK_THROWS_AS(generate_synthetic(cfg), Error);
  cfg = small_config();
  cfg.similarity_coupling = 1.5;
  try {
    generate_synthetic(cfg);
    FAIL("expected InvalidConfig");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kInvalidConfig);
  }
  cfg = small_config(0);
  CHECK(generate_synthetic(cfg).empty());
}

TEST_CASE("label noise at rate 0 changes nothing") {
  const Dataset ds = generate_synthetic(small_config());
  CHECK(inject_label_noise(ds, 0.0, 1) == ds);
}

TEST_CASE("label noise at rate 1 flips every pair") {
  const Dataset ds = generate_synthetic(small_config());
  const Dataset flipped = inject_label_noise(ds, 1.0, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(flipped.pairs[i].noise_flipped == true);
    CHECK(flipped.pairs[i].chosen_features == ds.pairs[i].rejected_features);
    CHECK(flipped.pairs[i].rejected_features == ds.pairs[i].chosen_features);
  }
  CHECK(gold_accuracy(flipped) == doctest::Approx(1.0 - gold_accuracy(ds)));
}

TEST_CASE("label noise flips exactly round(rate * n) pairs") {
  auto cfg = small_config(20000);
  cfg.dim = 2;
  const Dataset ds = generate_synthetic(cfg);
  const Dataset noisy = inject_label_noise(ds, 0.2, 9);
  std::size_t flips = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const bool f = noisy.pairs[i].noise_flipped.value_or(false);
    flips += f;
    CHECK(f == (noisy.pairs[i].chosen_features != ds.pairs[i].chosen_features));
  }
  CHECK(flips == 4000);
  CHECK(inject_label_noise(ds, 0.2, 9) == noisy);
  CHECK(inject_label_noise(ds, 0.2, 10) != noisy);
  CHECK_THROWS_AS(inject_label_noise(ds, 1.2, 9), Error);
}

TEST_CASE("split is a seeded partition") {
  const Dataset ds = generate_synthetic(small_config(100));
  const auto [train, val] = split(ds, 0.25, 3);
  CHECK(train.size() == 75);
  CHECK(val.size() == 25);
  std::set<std::string> ids;
  for (const auto& p : train.pairs) ids.insert(p.id);
  for (const auto& p : val.pairs) ids.insert(p.id);
  CHECK(ids.size() == 100);
  CHECK(split(ds, 0.25, 3).second == val);
}

TEST_CASE("JSONL round-trip") {
  const Dataset ds = generate_synthetic(small_config(1000));
  const auto dir = testing::scratch_dir("data_roundtrip");
  save_jsonl(ds, dir / "pairs.jsonl");
  CHECK(load_jsonl(dir / "pairs.jsonl") == ds);
  CHECK_FALSE(std::filesystem::exists(dir / "pairs.jsonl.tmp"));

  const Dataset noisy = inject_label_noise(ds, 0.3, 2);
  CHECK(parse_jsonl(to_jsonl(noisy)) == noisy);
}

TEST_CASE("JSONL parsing") {
  CHECK(parse_jsonl("").empty());
  CHECK(parse_jsonl("\n\n").empty());

  const auto ds = parse_jsonl(
      R"({"id":"a","chosen_features":[1,2],"rejected_features":[0,1],"gold_chosen":null,"gold_rejected":null,"noise_flipped":null})"
      "\n"
      R"({"rejected_features":[3,4],"id":"b","chosen_features":[5,6]})");
  REQUIRE(ds.size() == 2);
  CHECK_FALSE(ds.pairs[0].gold_chosen.has_value());
  CHECK(ds.pairs[1].chosen_features == std::vector<double>{5, 6});

  const std::string good = R"({"id":"a","chosen_features":[1],"rejected_features":[0]})";
  try {
    parse_jsonl(good + "\n" + R"({"id":"b","rejected_features":[0]})");
    FAIL("expected ParseError");
  } catch (const aplot::ParseError& e) {
    CHECK(e.line() == 2);
    CHECK(std::string(e.what()).find("chosen_features") != std::string::npos);
  }
  try {
    parse_jsonl(good + "\n" + R"({"id":"b","chosen_features":[1],"rejected_features":[0],"x":1})");
    FAIL("expected ParseError");
  } catch (const aplot::ParseError& e) {
    CHECK(e.line() == 2);
  }
  CHECK_THROWS_AS(parse_jsonl("{not json"), aplot::ParseError);
  try {
    parse_jsonl(good + "\n" + R"({"id":"b","chosen_features":[1,2],"rejected_features":[0,1]})");
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDimensionMismatch);
  }
}

TEST_CASE("loading a missing file names the path") {
  try {
    load_jsonl("/nonexistent/pairs.jsonl");
    FAIL("expected IoError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kIoError);
    CHECK(std::string(e.what()).find("/nonexistent/pairs.jsonl") != std::string::npos);
  }
}

TEST_CASE("easy separable data is learned by a linear head") {
  SyntheticConfig cfg;
  cfg.n_pairs = 1000;
  cfg.dim = 16;
  cfg.easy_fraction = 1.0;
  cfg.hard_fraction = 0.0;
  cfg.easy_gap_scale = 10.0;
  const Dataset ds = generate_synthetic(cfg);
  const auto [train, val] = split(ds, 0.2, 1);
  aplot::trainer::TrainConfig tc;
  tc.max_steps = 200;
  const auto result = aplot::trainer::train(tc, train, val);
  CHECK(aplot::eval::pairwise_accuracy(result.head, val) >= 0.99);
}

TEST_CASE("candidate sets") {
  CandidateConfig cfg;
  cfg.n_prompts = 5;
  cfg.n_candidates = 12;
  cfg.dim = 4;
  const auto sets = generate_candidates(cfg);
  REQUIRE(sets.size() == 5);
  const auto w = gold_direction(4, cfg.gold_direction_seed);
  for (const auto& s : sets) {
    REQUIRE(s.candidates.size() == 12);
    for (std::size_t k = 0; k < 12; ++k) {
      CHECK(s.gold_scores[k] == doctest::Approx(gold_reward(w, s.candidates[k])));
    }
  }
  CHECK(generate_candidates(cfg) == sets);
  CHECK(parse_candidates_jsonl(candidates_to_jsonl(sets)) == sets);
  const auto dir = testing::scratch_dir("candidates");
  save_candidates(sets, dir / "c.jsonl");
  CHECK(load_candidates(dir / "c.jsonl") == sets);
}
