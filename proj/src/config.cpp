#include "aplot/config.hpp"

#include <charconv>
#include <sstream>

#include "aplot/error.hpp"

namespace aplot::config {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* type) {
  throw Error(ErrorCode::kInvalidConfig,
              "key '" + key + "': cannot parse '" + value + "' as " + type);
}

const char* similarity_mode_name(margin::SimilarityMode m) {
  return m == margin::SimilarityMode::kRemapped ? "remapped" : "raw";
}
margin::SimilarityMode parse_similarity_mode(const std::string& v) {
  if (v == "remapped") return margin::SimilarityMode::kRemapped;
  if (v == "raw") return margin::SimilarityMode::kRaw;
  throw Error(ErrorCode::kInvalidConfig, "similarity_mode must be 'remapped' or 'raw'");
}

const char* mass_name(margin::MassNormalization m) {
  return m == margin::MassNormalization::kUnitRows ? "unit" : "probability";
}
margin::MassNormalization parse_mass(const std::string& v) {
  if (v == "unit") return margin::MassNormalization::kUnitRows;
  if (v == "probability") return margin::MassNormalization::kProbability;
  throw Error(ErrorCode::kInvalidConfig, "ot_marginals must be 'unit' or 'probability'");
}

const char* point_name(margin::PointNormalization p) {
  return p == margin::PointNormalization::kMean ? "mean" : "sum";
}
margin::PointNormalization parse_point(const std::string& v) {
  if (v == "mean") return margin::PointNormalization::kMean;
  if (v == "sum") return margin::PointNormalization::kSum;
  throw Error(ErrorCode::kInvalidConfig, "point_normalization must be 'mean' or 'sum'");
}

}  // namespace

KeyValues parse_key_values(const std::string& text) {
  KeyValues out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    if (!out.emplace(key, value).second) throw ParseError(line_no, "duplicate key '" + key + "'");
  }
  return out;
}

KeyValues load_key_values(const std::string& path) {
  return parse_key_values(data::read_file(path));
}

std::string exact_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

unsigned long long FieldTable::parse_unsigned(const std::string& key, const std::string& value) {
  unsigned long long out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size()) {
    bad_value(key, value, "a non-negative integer");
  }
  return out;
}

void FieldTable::add(const std::string& key, double& field) {
  entries_[key] = {[&field, key](const std::string& v) {
                     double out = 0.0;
                     const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
                     if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
                       bad_value(key, v, "a real number");
                     }
                     field = out;
                   },
                   [&field] { return exact_real(field); }};
}

void FieldTable::add(const std::string& key, int& field) {
  entries_[key] = {[&field, key](const std::string& v) {
                     int out = 0;
                     const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
                     if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
                       bad_value(key, v, "an integer");
                     }
                     field = out;
                   },
                   [&field] { return std::to_string(field); }};
}

void FieldTable::add(const std::string& key, std::string& field) {
  entries_[key] = {[&field](const std::string& v) { field = v; }, [&field] { return field; }};
}

void FieldTable::set(const std::string& key, const std::string& value) {
  auto it = entries_.find(key);
  if (it == entries_.end()) throw Error(ErrorCode::kInvalidConfig, "unknown key '" + key + "'");
  it->second.set(value);
}

void FieldTable::apply(const KeyValues& values) {
  for (const auto& [k, v] : values) set(k, v);
}

KeyValues FieldTable::apply_known(const KeyValues& values) {
  KeyValues rest;
  for (const auto& [k, v] : values) {
    if (has(k)) {
      set(k, v);
    } else {
      rest.emplace(k, v);
    }
  }
  return rest;
}

KeyValues FieldTable::dump() const {
  KeyValues out;
  for (const auto& [k, e] : entries_) out.emplace(k, e.get());
  return out;
}

FieldTable train_fields(trainer::TrainConfig& c) {
  FieldTable t;
  t.add("batch_size", c.batch_size);
  t.add("epochs", c.epochs);
  t.add("max_steps", c.max_steps);
  t.add("learning_rate", c.learning_rate);
  t.add("gamma", c.gamma);
  t.add("beta", c.beta);
  t.add_enum("margin_strategy", c.margin_strategy, margin::parse_strategy,
             margin::strategy_name);
  t.add("hard_margin_value", c.hard_margin_value);
  t.add_enum("similarity_mode", c.similarity_mode, parse_similarity_mode, similarity_mode_name);
  t.add_enum("ot_marginals", c.mass_normalization, parse_mass, mass_name);
  t.add_enum("point_normalization", c.point_normalization, parse_point, point_name);
  t.add("sinkhorn_max_iters", c.sinkhorn_max_iters);
  t.add("sinkhorn_tolerance", c.sinkhorn_tolerance);
  t.add("seed", c.seed);
  t.add("eval_every_steps", c.eval_every_steps);
  t.add_enum("optimizer", c.optimizer, trainer::parse_optimizer, trainer::optimizer_name);
  t.add("adam_beta1", c.adam_beta1);
  t.add("adam_beta2", c.adam_beta2);
  t.add("adam_epsilon", c.adam_epsilon);
  t.add_enum("architecture", c.architecture, model::parse_architecture,
             model::architecture_name);
  t.add("hidden_dim", c.hidden_dim);
  t.add("init_scale", c.init_scale);
  return t;
}

FieldTable synthetic_fields(data::SyntheticConfig& c) {
  FieldTable t;
  t.add("n_pairs", c.n_pairs);
  t.add("dim", c.dim);
  t.add("gold_direction_seed", c.gold_direction_seed);
  t.add("seed", c.seed);
  t.add("easy_fraction", c.easy_fraction);
  t.add("hard_fraction", c.hard_fraction);
  t.add("easy_gap_scale", c.easy_gap_scale);
  t.add("hard_gap_scale", c.hard_gap_scale);
  t.add("similarity_coupling", c.similarity_coupling);
  t.add("observation_noise", c.observation_noise);
  return t;
}

FieldTable candidate_fields(data::CandidateConfig& c) {
  FieldTable t;
  t.add("n_prompts", c.n_prompts);
  t.add("n_candidates", c.n_candidates);
  t.add("dim", c.dim);
  t.add("gold_direction_seed", c.gold_direction_seed);
  t.add("seed", c.seed);
  t.add("spread", c.spread);
  return t;
}

}  // namespace aplot::config
