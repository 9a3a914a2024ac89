#ifndef APLOT_DATA_HPP_
#define APLOT_DATA_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace aplot::data {

/// One preference triplet at feature level: embedding of (prompt, chosen)
/// and of (prompt, rejected).
struct PreferencePair {
  std::string id;
  std::vector<double> chosen_features;
  std::vector<double> rejected_features;
  std::optional<double> gold_chosen;
  std::optional<double> gold_rejected;
  std::optional<bool> noise_flipped;

  friend bool operator==(const PreferencePair&, const PreferencePair&) = default;
};

struct Dataset {
  std::vector<PreferencePair> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  bool empty() const noexcept { return pairs.empty(); }
  /// Feature dimension, 0 for an empty dataset.
  std::size_t dim() const noexcept {
    return pairs.empty() ? 0 : pairs.front().chosen_features.size();
  }
  /// Throws kDimensionMismatch if any record disagrees with the first.
  void check_dimensions() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Synthetic pairs carry ids "hard-NNNNNN" or "easy-NNNNNN".
bool is_hard_pair(const PreferencePair& pair);

struct SyntheticConfig {
  std::size_t n_pairs = 1000;
  std::size_t dim = 16;
  std::uint64_t gold_direction_seed = 7;
  std::uint64_t seed = 1;
  double easy_fraction = 0.5;
  double hard_fraction = 0.5;
  double easy_gap_scale = 2.0;
  double hard_gap_scale = 0.2;
  double similarity_coupling = 0.95;
  double observation_noise = 0.0;

  void validate() const;
};

/// Unit vector defining the planted gold reward g(z) = w.z.
std::vector<double> gold_direction(std::size_t dim, std::uint64_t gold_direction_seed);
double gold_reward(std::span<const double> direction, std::span<const double> features);

/// Pairs built around a shared base vector x: chosen = x + d/2, rejected =
/// x - d/2, with d's component along the gold direction equal to the gold
/// gap. Hard pairs get a small gap and a small off-axis component so that
/// cos(chosen, rejected) >= similarity_coupling. Gold is recorded on the
/// clean features; observation noise is added after.
Dataset generate_synthetic(const SyntheticConfig& config);

/// Swaps chosen/rejected roles (features and gold) on exactly round(rate*n)
/// pairs chosen uniformly by `seed`; toggles noise_flipped on each.
Dataset inject_label_noise(const Dataset& dataset, double rate, std::uint64_t seed);

/// Seeded shuffle then split; validation gets round(fraction*n) pairs.
std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction,
                                  std::uint64_t seed);

/// Equivalent to the JSONL file contents save_jsonl would write.
std::string to_jsonl(const Dataset& dataset);
Dataset parse_jsonl(const std::string& text);

Dataset load_jsonl(const std::filesystem::path& path);
/// Writes to a temporary sibling then renames, so readers never see a partial file.
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);

/// Candidate responses for one prompt, for best-of-N simulation.
struct CandidateSet {
  std::string id;
  std::vector<std::vector<double>> candidates;
  std::vector<double> gold_scores;

  friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

struct CandidateConfig {
  std::size_t n_prompts = 300;
  std::size_t n_candidates = 405;
  std::size_t dim = 16;
  std::uint64_t gold_direction_seed = 7;
  std::uint64_t seed = 1;
  double spread = 1.0;  // std-dev of candidates around their prompt's base vector

  void validate() const;
};

std::vector<CandidateSet> generate_candidates(const CandidateConfig& config);

std::string candidates_to_jsonl(const std::vector<CandidateSet>& sets);
std::vector<CandidateSet> parse_candidates_jsonl(const std::string& text);
std::vector<CandidateSet> load_candidates(const std::filesystem::path& path);
void save_candidates(const std::vector<CandidateSet>& sets, const std::filesystem::path& path);

/// Atomic text write shared by every output writer.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace aplot::data

#endif  // APLOT_DATA_HPP_
