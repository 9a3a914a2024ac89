#include "aplot/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "aplot/error.hpp"
#include "aplot/rng.hpp"

namespace aplot::data {
namespace {

using ordered_json = nlohmann::ordered_json;

std::string padded(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06zu", i);
  return buf;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

double cosine(std::span<const double> a, std::span<const double> b) {
  return dot(a, b) / (norm(a) * norm(b));
}

std::vector<double> read_vector(const nlohmann::json& value, std::size_t line, const char* key) {
  if (!value.is_array()) throw ParseError(line, std::string("'") + key + "' must be an array");
  std::vector<double> out;
  out.reserve(value.size());
  for (const auto& v : value) {
    if (!v.is_number()) {
      throw ParseError(line, std::string("'") + key + "' must contain only numbers");
    }
    out.push_back(v.get<double>());
    if (!std::isfinite(out.back())) {
      throw ParseError(line, std::string("'") + key + "' contains a non-finite number");
    }
  }
  return out;
}

std::optional<double> read_optional_number(const nlohmann::json& obj, const char* key,
                                           std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) throw ParseError(line, std::string("'") + key + "' must be a number");
  return it->get<double>();
}

// Calls `fn(line_number, json)` for every non-blank line of `text`.
template <typename F>
void for_each_json_line(const std::string& text, F&& fn) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ParseError(line_no, "record must be a JSON object");
    fn(line_no, doc);
  }
}

std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

void Dataset::check_dimensions() const {
  const std::size_t d = dim();
  for (const auto& p : pairs) {
    if (p.chosen_features.size() != d || p.rejected_features.size() != d) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "pair '" + p.id + "' has feature dimension " +
                      std::to_string(p.chosen_features.size()) + "/" +
                      std::to_string(p.rejected_features.size()) + ", expected " +
                      std::to_string(d));
    }
  }
}

bool is_hard_pair(const PreferencePair& pair) { return pair.id.rfind("hard-", 0) == 0; }

void SyntheticConfig::validate() const {
  auto fail = [](const std::string& why) { throw Error(ErrorCode::kInvalidConfig, why); };
  if (dim == 0) fail("dim must be >= 1");
  if (easy_fraction < 0.0 || hard_fraction < 0.0) fail("difficulty fractions must be >= 0");
  if (std::abs(easy_fraction + hard_fraction - 1.0) > 1e-9) {
    fail("difficulty fractions must sum to 1");
  }
  if (!(easy_gap_scale > 0.0) || !(hard_gap_scale > 0.0)) fail("gap scales must be > 0");
  if (!(similarity_coupling >= 0.0 && similarity_coupling <= 1.0)) {
    fail("similarity_coupling must lie in [0, 1]");
  }
  if (similarity_coupling >= 1.0 && n_pairs > 0 && hard_fraction > 0.0) {
    fail("similarity_coupling of 1 is unreachable for pairs with a nonzero gap");
  }
  if (!(observation_noise >= 0.0) || !std::isfinite(observation_noise)) {
    fail("observation_noise must be >= 0");
  }
}

std::vector<double> gold_direction(std::size_t dim, std::uint64_t gold_direction_seed) {
  std::mt19937_64 rng(gold_direction_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> w(dim);
  double n = 0.0;
  while (n < 1e-6) {
    for (double& v : w) v = normal(rng);
    n = norm(w);
  }
  for (double& v : w) v /= n;
  return w;
}

double gold_reward(std::span<const double> direction, std::span<const double> features) {
  if (direction.size() != features.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "gold direction and features differ in size");
  }
  return dot(direction, features);
}

Dataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  const std::size_t n = config.n_pairs;
  const std::size_t d = config.dim;
  const std::vector<double> w = gold_direction(d, config.gold_direction_seed);

  std::mt19937_64 rng(derive_seed(config.seed, stream::kSynthetic));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> jitter(0.5, 1.5);
  // Separate stream so noisy and clean draws share every underlying pair.
  std::mt19937_64 noise_rng(
      derive_seed(derive_seed(config.seed, stream::kSynthetic), stream::kNoise));

  const auto n_hard = static_cast<std::size_t>(std::llround(config.hard_fraction * n));
  std::vector<bool> hard(n, false);
  std::fill(hard.begin(), hard.begin() + static_cast<std::ptrdiff_t>(n_hard), true);
  std::shuffle(hard.begin(), hard.end(), rng);

  Dataset out;
  out.pairs.reserve(n);
  std::vector<double> base(d), offset(d), chosen(d), rejected(d);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : base) v = normal(rng);
    for (double& v : offset) v = normal(rng);
    const double along = dot(offset, w);
    for (std::size_t k = 0; k < d; ++k) offset[k] -= along * w[k];

    const double gap = (hard[i] ? config.hard_gap_scale : config.easy_gap_scale) * jitter(rng);
    const double off_axis = hard[i] ? config.hard_gap_scale : 1.0;
    for (std::size_t k = 0; k < d; ++k) offset[k] = gap * w[k] + off_axis * offset[k];

    auto build = [&] {
      for (std::size_t k = 0; k < d; ++k) {
        chosen[k] = base[k] + 0.5 * offset[k];
        rejected[k] = base[k] - 0.5 * offset[k];
      }
    };
    build();
    if (hard[i]) {
      // Growing the shared component drives cos(chosen, rejected) toward 1.
      while (!(cosine(chosen, rejected) >= config.similarity_coupling)) {
        for (double& v : base) v *= 1.25;
        build();
      }
    }

    PreferencePair pair;
    pair.id = (hard[i] ? "hard-" : "easy-") + padded(i);
    pair.gold_chosen = dot(w, chosen);
    pair.gold_rejected = dot(w, rejected);
    pair.noise_flipped = false;
    pair.chosen_features = chosen;
    pair.rejected_features = rejected;
    if (config.observation_noise > 0.0) {
      for (double& v : pair.chosen_features) v += config.observation_noise * normal(noise_rng);
      for (double& v : pair.rejected_features) v += config.observation_noise * normal(noise_rng);
    }
    out.pairs.push_back(std::move(pair));
  }
  return out;
}

Dataset inject_label_noise(const Dataset& dataset, double rate, std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "noise rate must lie in [0, 1]");
  }
  Dataset out = dataset;
  const std::size_t n = out.size();
  const auto flips =
      static_cast<std::size_t>(std::llround(rate * static_cast<double>(n)));
  const auto order = seeded_permutation(n, seed);
  for (std::size_t k = 0; k < flips; ++k) {
    PreferencePair& p = out.pairs[order[k]];
    std::swap(p.chosen_features, p.rejected_features);
    std::swap(p.gold_chosen, p.gold_rejected);
    p.noise_flipped = !p.noise_flipped.value_or(false);
  }
  return out;
}

std::pair<Dataset, Dataset> split(const Dataset& dataset, double validation_fraction,
                                  std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "validation_fraction must lie in [0, 1)");
  }
  const std::size_t n = dataset.size();
  const auto n_val =
      static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  auto order = seeded_permutation(n, seed);
  std::sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  Dataset train, validation;
  for (std::size_t k = 0; k < n; ++k) {
    (k < n_val ? validation : train).pairs.push_back(dataset.pairs[order[k]]);
  }
  return {std::move(train), std::move(validation)};
}

std::string to_jsonl(const Dataset& dataset) {
  std::string out;
  for (const auto& p : dataset.pairs) {
    ordered_json rec;
    rec["id"] = p.id;
    rec["chosen_features"] = p.chosen_features;
    rec["rejected_features"] = p.rejected_features;
    rec["gold_chosen"] = p.gold_chosen ? ordered_json(*p.gold_chosen) : ordered_json(nullptr);
    rec["gold_rejected"] =
        p.gold_rejected ? ordered_json(*p.gold_rejected) : ordered_json(nullptr);
    rec["noise_flipped"] =
        p.noise_flipped ? ordered_json(*p.noise_flipped) : ordered_json(nullptr);
    out += rec.dump();
    out += '\n';
  }
  return out;
}

Dataset parse_jsonl(const std::string& text) {
  static const std::set<std::string> kKnown = {"id",          "chosen_features",
                                               "rejected_features", "gold_chosen",
                                               "gold_rejected",     "noise_flipped"};
  Dataset out;
  std::size_t dim = 0;
  for_each_json_line(text, [&](std::size_t line, const nlohmann::json& rec) {
    for (const auto& [key, _] : rec.items()) {
      if (!kKnown.count(key)) throw ParseError(line, "unknown field '" + key + "'");
    }
    PreferencePair p;
    if (!rec.contains("id") || !rec.at("id").is_string()) {
      throw ParseError(line, "missing string field 'id'");
    }
    p.id = rec.at("id").get<std::string>();
    for (const char* key : {"chosen_features", "rejected_features"}) {
      if (!rec.contains(key)) throw ParseError(line, std::string("missing field '") + key + "'");
    }
    p.chosen_features = read_vector(rec.at("chosen_features"), line, "chosen_features");
    p.rejected_features = read_vector(rec.at("rejected_features"), line, "rejected_features");
    if (p.chosen_features.empty()) throw ParseError(line, "feature vectors must be non-empty");
    if (p.chosen_features.size() != p.rejected_features.size()) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "line " + std::to_string(line) + ": chosen and rejected dimensions differ");
    }
    if (out.pairs.empty()) {
      dim = p.chosen_features.size();
    } else if (p.chosen_features.size() != dim) {
      throw Error(ErrorCode::kDimensionMismatch,
                  "line " + std::to_string(line) + ": dimension " +
                      std::to_string(p.chosen_features.size()) + " differs from " +
                      std::to_string(dim));
    }
    p.gold_chosen = read_optional_number(rec, "gold_chosen", line);
    p.gold_rejected = read_optional_number(rec, "gold_rejected", line);
    if (auto it = rec.find("noise_flipped"); it != rec.end() && !it->is_null()) {
      if (!it->is_boolean()) throw ParseError(line, "'noise_flipped' must be a boolean");
      p.noise_flipped = it->get<bool>();
    }
    out.pairs.push_back(std::move(p));
  });
  return out;
}

Dataset load_jsonl(const std::filesystem::path& path) { return parse_jsonl(read_file(path)); }

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  write_file_atomic(path, to_jsonl(dataset));
}

void CandidateConfig::validate() const {
  if (dim == 0) throw Error(ErrorCode::kInvalidConfig, "dim must be >= 1");
  if (n_candidates == 0) throw Error(ErrorCode::kInvalidConfig, "n_candidates must be >= 1");
  if (!(spread > 0.0)) throw Error(ErrorCode::kInvalidConfig, "spread must be > 0");
}

std::vector<CandidateSet> generate_candidates(const CandidateConfig& config) {
  config.validate();
  const std::vector<double> w = gold_direction(config.dim, config.gold_direction_seed);
  std::mt19937_64 rng(derive_seed(config.seed, stream::kCandidates));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<CandidateSet> sets;
  sets.reserve(config.n_prompts);
  std::vector<double> base(config.dim);
  for (std::size_t p = 0; p < config.n_prompts; ++p) {
    CandidateSet set;
    set.id = "prompt-" + padded(p);
    for (double& v : base) v = normal(rng);
    for (std::size_t c = 0; c < config.n_candidates; ++c) {
      std::vector<double> z(config.dim);
      for (std::size_t k = 0; k < config.dim; ++k) z[k] = base[k] + config.spread * normal(rng);
      set.gold_scores.push_back(dot(w, z));
      set.candidates.push_back(std::move(z));
    }
    sets.push_back(std::move(set));
  }
  return sets;
}

std::string candidates_to_jsonl(const std::vector<CandidateSet>& sets) {
  std::string out;
  for (const auto& s : sets) {
    ordered_json rec;
    rec["id"] = s.id;
    rec["candidates"] = s.candidates;
    rec["gold_scores"] = s.gold_scores;
    out += rec.dump();
    out += '\n';
  }
  return out;
}

std::vector<CandidateSet> parse_candidates_jsonl(const std::string& text) {
  std::vector<CandidateSet> sets;
  std::size_t dim = 0;
  for_each_json_line(text, [&](std::size_t line, const nlohmann::json& rec) {
    for (const auto& [key, _] : rec.items()) {
      if (key != "id" && key != "candidates" && key != "gold_scores") {
        throw ParseError(line, "unknown field '" + key + "'");
      }
    }
    CandidateSet s;
    if (!rec.contains("id") || !rec.at("id").is_string()) {
      throw ParseError(line, "missing string field 'id'");
    }
    s.id = rec.at("id").get<std::string>();
    if (!rec.contains("candidates") || !rec.at("candidates").is_array()) {
      throw ParseError(line, "missing array field 'candidates'");
    }
    if (!rec.contains("gold_scores")) throw ParseError(line, "missing field 'gold_scores'");
    for (const auto& c : rec.at("candidates")) {
      s.candidates.push_back(read_vector(c, line, "candidates"));
      if (dim == 0) dim = s.candidates.back().size();
      if (s.candidates.back().size() != dim || dim == 0) {
        throw Error(ErrorCode::kDimensionMismatch,
                    "line " + std::to_string(line) + ": candidate dimension mismatch");
      }
    }
    s.gold_scores = read_vector(rec.at("gold_scores"), line, "gold_scores");
    if (s.gold_scores.size() != s.candidates.size()) {
      throw ParseError(line, "gold_scores and candidates differ in length");
    }
    sets.push_back(std::move(s));
  });
  return sets;
}

std::vector<CandidateSet> load_candidates(const std::filesystem::path& path) {
  return parse_candidates_jsonl(read_file(path));
}

void save_candidates(const std::vector<CandidateSet>& sets, const std::filesystem::path& path) {
  write_file_atomic(path, candidates_to_jsonl(sets));
}

void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot open '" + tmp.string() + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw Error(ErrorCode::kIoError, "write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw Error(ErrorCode::kIoError, "cannot move output into '" + path.string() + "'");
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace aplot::data
