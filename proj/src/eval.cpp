#include "aplot/eval.hpp"

#include <algorithm>
#include <cmath>

#include "aplot/error.hpp"

namespace aplot::eval {

std::vector<double> reward_gaps(const model::RewardHead& head, const data::Dataset& dataset) {
  std::vector<double> gaps;
  gaps.reserve(dataset.size());
  for (const auto& p : dataset.pairs) {
    gaps.push_back(head.reward(p.chosen_features) - head.reward(p.rejected_features));
  }
  return gaps;
}

double pairwise_accuracy(const model::RewardHead& head, const data::Dataset& dataset) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "accuracy of an empty dataset");
  double correct = 0.0;
  for (const auto& p : dataset.pairs) {
    const double rw = head.reward(p.chosen_features);
    const double rl = head.reward(p.rejected_features);
    if (rw > rl) {
      correct += 1.0;
    } else if (rw == rl) {
      correct += 0.5;
    }
  }
  return correct / static_cast<double>(dataset.size());
}

SeparationStats separation_stats(std::span<const double> gaps, std::size_t n_bins) {
  if (gaps.empty()) throw Error(ErrorCode::kEmptyDataset, "separation stats of no pairs");
  if (n_bins == 0) throw Error(ErrorCode::kInvalidConfig, "n_bins must be >= 1");
  const double n = static_cast<double>(gaps.size());
  SeparationStats st;
  double sum = 0.0;
  std::size_t positive = 0;
  for (double s : gaps) {
    sum += s;
    if (s > 0.0) ++positive;
  }
  st.mean_gap = sum / n;
  double sq = 0.0;
  for (double s : gaps) sq += (s - st.mean_gap) * (s - st.mean_gap);
  st.std_gap = std::sqrt(sq / n);
  st.fraction_correct = static_cast<double>(positive) / n;

  auto [lo_it, hi_it] = std::minmax_element(gaps.begin(), gaps.end());
  double lo = *lo_it;
  double hi = *hi_it;
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(n_bins);
  st.histogram.edges.resize(n_bins + 1);
  for (std::size_t b = 0; b <= n_bins; ++b) {
    st.histogram.edges[b] = lo + width * static_cast<double>(b);
  }
  st.histogram.edges[n_bins] = hi;
  st.histogram.counts.assign(n_bins, 0);
  for (double s : gaps) {
    auto bin = static_cast<std::size_t>((s - lo) / width);
    bin = std::min(bin, n_bins - 1);
    ++st.histogram.counts[bin];
  }
  return st;
}

SeparationStats separation_stats(const model::RewardHead& head, const data::Dataset& dataset,
                                 std::size_t n_bins) {
  if (dataset.empty()) throw Error(ErrorCode::kEmptyDataset, "separation stats of empty dataset");
  return separation_stats(reward_gaps(head, dataset), n_bins);
}

double kl_bon(long long n) {
  if (n < 1) throw Error(ErrorCode::kInvalidN, "best-of-n needs n >= 1");
  const double dn = static_cast<double>(n);
  return std::log(dn) - (dn - 1.0) / dn;
}

BoNResult best_of_n(const std::vector<std::vector<double>>& proxy_scores,
                    const std::vector<std::vector<double>>& gold_scores,
                    std::span<const std::size_t> n_values) {
  if (proxy_scores.size() != gold_scores.size()) {
    throw Error(ErrorCode::kShapeMismatch, "proxy and gold score tables differ in prompt count");
  }
  if (proxy_scores.empty()) throw Error(ErrorCode::kEmptyDataset, "best-of-n needs prompts");
  if (n_values.empty()) throw Error(ErrorCode::kInvalidN, "n list is empty");
  std::size_t n_max = 0;
  for (std::size_t n : n_values) {
    if (n < 1) throw Error(ErrorCode::kInvalidN, "best-of-n needs n >= 1");
    n_max = std::max(n_max, n);
  }
  for (std::size_t p = 0; p < proxy_scores.size(); ++p) {
    if (proxy_scores[p].size() != gold_scores[p].size()) {
      throw Error(ErrorCode::kShapeMismatch, "proxy and gold scores differ for a prompt");
    }
    if (proxy_scores[p].size() < n_max) {
      throw Error(ErrorCode::kNotEnoughCandidates,
                  "prompt " + std::to_string(p) + " has " +
                      std::to_string(proxy_scores[p].size()) + " candidates, need " +
                      std::to_string(n_max));
    }
  }

  const double prompts = static_cast<double>(proxy_scores.size());
  auto mean_gold_at = [&](std::size_t n) {
    double total = 0.0;
    for (std::size_t p = 0; p < proxy_scores.size(); ++p) {
      const auto& proxy = proxy_scores[p];
      std::size_t best = 0;
      for (std::size_t c = 1; c < n; ++c) {
        if (proxy[c] > proxy[best]) best = c;
      }
      total += gold_scores[p][best];
    }
    return total / prompts;
  };

  const double baseline = mean_gold_at(1);
  BoNResult out;
  for (std::size_t n : n_values) {
    out.n_values.push_back(n);
    out.kl_values.push_back(kl_bon(static_cast<long long>(n)));
    out.mean_gold_scores.push_back(n == 1 ? 0.0 : mean_gold_at(n) - baseline);
  }
  return out;
}

BoNResult best_of_n(const model::RewardHead& proxy, const std::vector<data::CandidateSet>& prompts,
                    std::span<const std::size_t> n_values) {
  std::vector<std::vector<double>> proxy_scores, gold_scores;
  proxy_scores.reserve(prompts.size());
  for (const auto& set : prompts) {
    std::vector<double> scores;
    scores.reserve(set.candidates.size());
    for (const auto& c : set.candidates) scores.push_back(proxy.reward(c));
    proxy_scores.push_back(std::move(scores));
    gold_scores.push_back(set.gold_scores);
  }
  return best_of_n(proxy_scores, gold_scores, n_values);
}

std::vector<std::size_t> log_spaced_n(std::size_t n_max, std::size_t points) {
  if (n_max < 1 || points < 1) throw Error(ErrorCode::kInvalidN, "log grid needs n_max, points >= 1");
  std::vector<std::size_t> out{1};
  if (points == 1 || n_max == 1) return out;
  const double log_max = std::log(static_cast<double>(n_max));
  for (std::size_t k = 1; k < points; ++k) {
    const double t = static_cast<double>(k) / static_cast<double>(points - 1);
    auto n = static_cast<std::size_t>(std::llround(std::exp(t * log_max)));
    n = std::clamp<std::size_t>(n, 1, n_max);
    if (n > out.back()) out.push_back(n);
  }
  if (out.back() != n_max) out.push_back(n_max);
  return out;
}

}  // namespace aplot::eval
