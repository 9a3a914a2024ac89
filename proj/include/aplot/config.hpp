#ifndef APLOT_CONFIG_HPP_
#define APLOT_CONFIG_HPP_

#include <concepts>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "aplot/data.hpp"
#include "aplot/trainer.hpp"

namespace aplot::config {

using KeyValues = std::map<std::string, std::string>;

/// Flat "key = value" documents. '#' starts a comment; blank lines are
/// skipped; duplicate keys are an error.
KeyValues parse_key_values(const std::string& text);
KeyValues load_key_values(const std::string& path);

/// Binds string keys to typed fields of a config struct, for reading a
/// KeyValues document into it and for echoing it back out losslessly.
class FieldTable {
 public:
  void add(const std::string& key, double& field);
  void add(const std::string& key, int& field);
  void add(const std::string& key, std::string& field);

  template <std::unsigned_integral U>
  void add(const std::string& key, U& field) {
    entries_[key] = {[&field, key](const std::string& v) {
                       field = static_cast<U>(parse_unsigned(key, v));
                     },
                     [&field] { return std::to_string(field); }};
  }

  template <typename E>
  void add_enum(const std::string& key, E& field, E (*parse)(const std::string&),
                const char* (*name)(E)) {
    entries_[key] = {[&field, parse](const std::string& v) { field = parse(v); },
                     [&field, name] { return std::string(name(field)); }};
  }

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  /// Throws kInvalidConfig for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  void apply(const KeyValues& values);
  /// Apply only the keys this table knows; returns the rest.
  KeyValues apply_known(const KeyValues& values);
  KeyValues dump() const;

 private:
  static unsigned long long parse_unsigned(const std::string& key, const std::string& value);

  struct Entry {
    std::function<void(const std::string&)> set;
    std::function<std::string()> get;
  };
  std::map<std::string, Entry> entries_;
};

FieldTable train_fields(trainer::TrainConfig& config);
FieldTable synthetic_fields(data::SyntheticConfig& config);
FieldTable candidate_fields(data::CandidateConfig& config);

/// Shortest text that parses back to the same double.
std::string exact_real(double v);

}  // namespace aplot::config

#endif  // APLOT_CONFIG_HPP_
