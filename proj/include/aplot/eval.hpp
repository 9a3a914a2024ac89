#ifndef APLOT_EVAL_HPP_
#define APLOT_EVAL_HPP_

#include <span>
#include <string>
#include <vector>

#include "aplot/data.hpp"
#include "aplot/model.hpp"

namespace aplot::eval {

/// Fraction of pairs with r(chosen) > r(rejected); ties count one half.
double pairwise_accuracy(const model::RewardHead& head, const data::Dataset& dataset);

/// s_i = r(chosen_i) - r(rejected_i) for every pair.
std::vector<double> reward_gaps(const model::RewardHead& head, const data::Dataset& dataset);

struct Histogram {
  std::vector<double> edges;  // n_bins + 1, increasing
  std::vector<std::size_t> counts;
};

struct SeparationStats {
  double mean_gap = 0.0;
  double std_gap = 0.0;  // population standard deviation
  double fraction_correct = 0.0;
  Histogram histogram;
};

/// Equal-width bins over [min s, max s], last bin closed; a degenerate range
/// is widened to +/- 0.5 around the single value.
SeparationStats separation_stats(std::span<const double> gaps, std::size_t n_bins);
SeparationStats separation_stats(const model::RewardHead& head, const data::Dataset& dataset,
                                 std::size_t n_bins);

/// KL divergence of best-of-n sampling from the base policy: ln n - (n-1)/n.
double kl_bon(long long n);

struct BoNResult {
  std::vector<std::size_t> n_values;
  std::vector<double> kl_values;
  std::vector<double> mean_gold_scores;  // shifted so the n = 1 entry is 0
};

/// Best-of-n over precomputed scores. For every prompt and n, the candidate
/// with the highest proxy score among the first n wins (lowest index on
/// ties) and contributes its gold score. Curves are shifted by the n = 1
/// mean.
BoNResult best_of_n(const std::vector<std::vector<double>>& proxy_scores,
                    const std::vector<std::vector<double>>& gold_scores,
                    std::span<const std::size_t> n_values);

/// Scores each candidate with `proxy`; gold comes from the candidate sets.
BoNResult best_of_n(const model::RewardHead& proxy, const std::vector<data::CandidateSet>& prompts,
                    std::span<const std::size_t> n_values);

/// Roughly log-spaced n grid from 1 to n_max inclusive, deduplicated.
std::vector<std::size_t> log_spaced_n(std::size_t n_max, std::size_t points);

}  // namespace aplot::eval

#endif  // APLOT_EVAL_HPP_
