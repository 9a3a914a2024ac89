#include "aplot/cli.hpp"

#include <algorithm>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <future>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "aplot/config.hpp"
#include "aplot/data.hpp"
#include "aplot/error.hpp"
#include "aplot/eval.hpp"
#include "aplot/format.hpp"
#include "aplot/rng.hpp"
#include "aplot/trainer.hpp"

namespace aplot::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using config::KeyValues;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool with_config) {
  if (with_config) {
    cmd->add_option("--config", f.config_path, "flat key = value config file");
    cmd->add_option("--set", f.sets, "override one config key (key=value), repeatable");
  }
  f.seed_opt = cmd->add_option("--seed", f.seed, "master seed, overrides the config file");
  cmd->add_option("--out", f.out, "output location")->required();
}

// Precedence: --seed > --set > config file > built-in defaults.
KeyValues gather_config(const CommonFlags& f) {
  KeyValues kv;
  if (!f.config_path.empty()) {
    try {
      kv = config::load_key_values(f.config_path);
    } catch (const ParseError& e) {
      const std::string what = e.what();
      throw Error(ErrorCode::kParseError,
                  "'" + f.config_path + "' " + what.substr(what.find(": ") + 2));
    }
  }
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::kInvalidConfig, "--set expects key=value, got '" + s + "'");
    }
    kv[s.substr(0, eq)] = s.substr(eq + 1);
  }
  if (f.seed_opt != nullptr && f.seed_opt->count() > 0) kv["seed"] = std::to_string(f.seed);
  return kv;
}

struct Manifest {
  std::string command;
  KeyValues config;
  std::uint64_t seed = 0;
  ordered_json options = ordered_json::object();
  ordered_json artifacts = ordered_json::object();
  ordered_json summary = ordered_json::object();
  std::string started_at;
};

void write_manifest(const fs::path& path, const Manifest& m) {
  ordered_json doc;
  doc["command"] = m.command;
  doc["version"] = kVersion;
  doc["seed"] = m.seed;
  doc["config"] = ordered_json::object();
  for (const auto& [k, v] : m.config) doc["config"][k] = v;
  doc["options"] = m.options;
  doc["artifacts"] = m.artifacts;
  doc["summary"] = m.summary;
  doc["started_at"] = m.started_at;
  doc["finished_at"] = utc_now();
  data::write_file_atomic(path, doc.dump(2) + "\n");
}

std::string join_reals(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + config::exact_real(v[i]);
  return s;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

model::RewardHead load_head(const std::string& path) {
  const std::string text = data::read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, "'" + path + "': " + e.what());
  }
  return model::RewardHead::from_json(doc);
}

void write_head(const fs::path& path, const model::RewardHead& head) {
  data::write_file_atomic(path, head.to_json().dump(2) + "\n");
}

// ---- gen -------------------------------------------------------------------

struct GenFlags {
  CommonFlags common;
};

int cmd_gen(const GenFlags& g, std::ostream& out) {
  const std::string started = utc_now();
  KeyValues kv = gather_config(g.common);

  std::string kind = "pairs";
  double label_noise = 0.0;
  config::FieldTable extra;
  extra.add("kind", kind);
  extra.add("label_noise", label_noise);
  KeyValues rest = extra.apply_known(kv);
  if (kind != "pairs" && kind != "candidates") {
    throw Error(ErrorCode::kInvalidConfig, "kind must be 'pairs' or 'candidates'");
  }

  Manifest m;
  m.command = "gen";
  m.started_at = started;
  const fs::path out_path = g.common.out;
  std::size_t records = 0;

  if (kind == "pairs") {
    data::SyntheticConfig sc;
    auto table = config::synthetic_fields(sc);
    table.apply(rest);
    sc.validate();
    if (!(label_noise >= 0.0 && label_noise <= 1.0)) {
      throw Error(ErrorCode::kInvalidConfig, "label_noise must lie in [0, 1]");
    }
    data::Dataset ds = data::generate_synthetic(sc);
    if (label_noise > 0.0) {
      ds = data::inject_label_noise(ds, label_noise, derive_seed(sc.seed, stream::kNoise));
    }
    records = ds.size();
    data::save_jsonl(ds, out_path);
    m.config = table.dump();
    m.seed = sc.seed;
  } else {
    if (label_noise != 0.0) {
      throw Error(ErrorCode::kInvalidConfig, "label_noise applies to kind = pairs only");
    }
    data::CandidateConfig cc;
    auto table = config::candidate_fields(cc);
    table.apply(rest);
    cc.validate();
    const auto sets = data::generate_candidates(cc);
    records = sets.size();
    data::save_candidates(sets, out_path);
    m.config = table.dump();
    m.seed = cc.seed;
  }
  for (const auto& [k, v] : extra.dump()) m.config[k] = v;

  fs::path manifest_path = out_path;
  manifest_path += ".manifest.json";
  m.options["out"] = out_path.string();
  m.artifacts["data"] = out_path.string();
  m.artifacts["manifest"] = manifest_path.string();
  m.summary["records"] = records;
  write_manifest(manifest_path, m);
  out << "wrote " << records << " records to " << out_path.string() << "\n";
  return 0;
}

// ---- train -----------------------------------------------------------------

struct TrainFlags {
  CommonFlags common;
  std::string data_path;
  std::string validation_path;
};

struct TrainSetup {
  trainer::TrainConfig config;
  double validation_fraction = 0.1;
  KeyValues echo;
};

TrainSetup read_train_config(const KeyValues& kv) {
  TrainSetup s;
  auto table = config::train_fields(s.config);
  table.add("validation_fraction", s.validation_fraction);
  table.apply(kv);
  s.config.validate();
  if (!(s.validation_fraction >= 0.0 && s.validation_fraction < 1.0)) {
    throw Error(ErrorCode::kInvalidConfig, "validation_fraction must lie in [0, 1)");
  }
  s.echo = table.dump();
  return s;
}

std::pair<data::Dataset, data::Dataset> load_train_data(const TrainSetup& s,
                                                        const std::string& data_path,
                                                        const std::string& validation_path) {
  data::Dataset ds = data::load_jsonl(data_path);
  if (!validation_path.empty()) return {std::move(ds), data::load_jsonl(validation_path)};
  if (s.validation_fraction > 0.0) {
    return data::split(ds, s.validation_fraction, derive_seed(s.config.seed, stream::kSplit));
  }
  return {std::move(ds), data::Dataset{}};
}

ordered_json train_options(const TrainFlags& t) {
  ordered_json o;
  o["data"] = t.data_path;
  if (!t.validation_path.empty()) o["validation"] = t.validation_path;
  o["out"] = t.common.out;
  return o;
}

int cmd_train(const TrainFlags& t, std::ostream& out) {
  const std::string started = utc_now();
  const TrainSetup setup = read_train_config(gather_config(t.common));
  const auto [train_set, validation_set] = load_train_data(setup, t.data_path, t.validation_path);

  const fs::path dir = t.common.out;
  fs::create_directories(dir);
  const fs::path head_path = dir / "head.json";
  const fs::path trace_path = dir / "trace.csv";

  const auto result = trainer::train(
      setup.config, train_set, validation_set,
      [&](std::size_t, const model::RewardHead& head, const trainer::TrainTrace& trace) {
        write_head(head_path, head);
        data::write_file_atomic(trace_path, trace.to_csv());
      });
  write_head(head_path, result.head);
  data::write_file_atomic(trace_path, result.trace.to_csv());

  Manifest m;
  m.command = "train";
  m.config = setup.echo;
  m.seed = setup.config.seed;
  m.started_at = started;
  m.options = train_options(t);
  m.artifacts["head"] = head_path.string();
  m.artifacts["trace"] = trace_path.string();
  m.artifacts["manifest"] = (dir / "manifest.json").string();
  m.summary["steps"] = result.trace.records.size();
  m.summary["train_pairs"] = train_set.size();
  m.summary["validation_pairs"] = validation_set.size();
  if (result.final_validation_accuracy) {
    m.summary["final_validation_accuracy"] = *result.final_validation_accuracy;
  }
  write_manifest(dir / "manifest.json", m);

  out << "final validation accuracy: "
      << (result.final_validation_accuracy ? format_real(*result.final_validation_accuracy)
                                           : std::string("n/a (no validation set)"))
      << "\n";
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalFlags {
  CommonFlags common;
  std::string head_path;
  std::string data_path;
  std::size_t bins = 20;
};

int cmd_eval(const EvalFlags& e, std::ostream& out) {
  const std::string started = utc_now();
  if (e.bins < 1) throw Error(ErrorCode::kInvalidConfig, "--bins must be >= 1");
  const model::RewardHead head = load_head(e.head_path);
  const data::Dataset ds = data::load_jsonl(e.data_path);
  const double accuracy = eval::pairwise_accuracy(head, ds);
  const auto stats = eval::separation_stats(head, ds, e.bins);

  const fs::path dir = e.common.out;
  fs::create_directories(dir);
  std::string csv = "bin,lower,upper,count\n";
  for (std::size_t b = 0; b < stats.histogram.counts.size(); ++b) {
    csv += std::to_string(b) + ',' + format_real(stats.histogram.edges[b]) + ',' +
           format_real(stats.histogram.edges[b + 1]) + ',' +
           std::to_string(stats.histogram.counts[b]) + '\n';
  }
  data::write_file_atomic(dir / "histogram.csv", csv);

  ordered_json summary;
  summary["pairs"] = ds.size();
  summary["accuracy"] = accuracy;
  summary["mean_gap"] = stats.mean_gap;
  summary["std_gap"] = stats.std_gap;
  summary["fraction_correct"] = stats.fraction_correct;
  summary["bins"] = e.bins;
  data::write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");

  Manifest m;
  m.command = "eval";
  m.started_at = started;
  m.options["head"] = e.head_path;
  m.options["data"] = e.data_path;
  m.options["bins"] = std::to_string(e.bins);
  m.options["out"] = e.common.out;
  m.artifacts["histogram"] = (dir / "histogram.csv").string();
  m.artifacts["summary"] = (dir / "summary.json").string();
  m.artifacts["manifest"] = (dir / "manifest.json").string();
  m.summary = summary;
  write_manifest(dir / "manifest.json", m);

  out << "accuracy: " << format_real(accuracy) << "\n"
      << "mean_gap: " << format_real(stats.mean_gap) << "\n"
      << "std_gap: " << format_real(stats.std_gap) << "\n"
      << "fraction_correct: " << format_real(stats.fraction_correct) << "\n";
  return 0;
}

// ---- bon -------------------------------------------------------------------

struct BonFlags {
  CommonFlags common;
  std::string head_path;
  std::string candidates_path;
  std::vector<std::size_t> n_values;
  std::size_t points = 20;
  bool proxy_is_gold = false;
};

int cmd_bon(const BonFlags& b, std::ostream& out) {
  const std::string started = utc_now();
  if (!b.proxy_is_gold && b.head_path.empty()) {
    throw Error(ErrorCode::kInvalidConfig, "bon needs --head or --proxy-is-gold");
  }
  const auto sets = data::load_candidates(b.candidates_path);
  std::vector<std::size_t> n_values = b.n_values;
  if (n_values.empty()) {
    std::size_t smallest = std::numeric_limits<std::size_t>::max();
    for (const auto& s : sets) smallest = std::min(smallest, s.candidates.size());
    if (sets.empty() || smallest == 0) {
      throw Error(ErrorCode::kNotEnoughCandidates, "no candidates to choose from");
    }
    n_values = eval::log_spaced_n(smallest, b.points);
  }

  eval::BoNResult result;
  if (b.proxy_is_gold) {
    std::vector<std::vector<double>> gold;
    gold.reserve(sets.size());
    for (const auto& s : sets) gold.push_back(s.gold_scores);
    result = eval::best_of_n(gold, gold, n_values);
  } else {
    result = eval::best_of_n(load_head(b.head_path), sets, n_values);
  }

  const fs::path dir = b.common.out;
  fs::create_directories(dir);
  std::string csv = "n,kl,mean_gold_score\n";
  for (std::size_t i = 0; i < result.n_values.size(); ++i) {
    csv += std::to_string(result.n_values[i]) + ',' + format_real(result.kl_values[i]) + ',' +
           format_real(result.mean_gold_scores[i]) + '\n';
  }
  data::write_file_atomic(dir / "bon.csv", csv);

  ordered_json summary;
  summary["prompts"] = sets.size();
  summary["n_values"] = result.n_values;
  summary["kl_values"] = result.kl_values;
  summary["mean_gold_scores"] = result.mean_gold_scores;
  summary["proxy_is_gold"] = b.proxy_is_gold;
  data::write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");

  Manifest m;
  m.command = "bon";
  m.started_at = started;
  if (!b.head_path.empty()) m.options["head"] = b.head_path;
  m.options["candidates"] = b.candidates_path;
  m.options["n"] = join_sizes(n_values);
  if (b.proxy_is_gold) m.options["proxy-is-gold"] = true;
  m.options["out"] = b.common.out;
  m.artifacts["bon"] = (dir / "bon.csv").string();
  m.artifacts["summary"] = (dir / "summary.json").string();
  m.artifacts["manifest"] = (dir / "manifest.json").string();
  m.summary["rows"] = result.n_values.size();
  write_manifest(dir / "manifest.json", m);

  out << "wrote " << result.n_values.size() << " rows to " << (dir / "bon.csv").string()
      << "\n";
  return 0;
}

// ---- sweep-gamma -----------------------------------------------------------

struct SweepFlags {
  TrainFlags train;
  std::vector<double> gammas;
  bool parallel = false;
};

int cmd_sweep(const SweepFlags& s, std::ostream& out) {
  const std::string started = utc_now();
  const KeyValues base = gather_config(s.train.common);
  if (s.gammas.empty()) throw Error(ErrorCode::kInvalidConfig, "--gammas is empty");

  // Every point is validated before the first run starts.
  std::vector<TrainSetup> setups;
  for (double g : s.gammas) {
    if (!(g >= 0.0 && g <= 1.0)) {
      throw Error(ErrorCode::kGammaOutOfRange,
                  "gamma " + config::exact_real(g) + " is outside [0, 1]");
    }
    KeyValues kv = base;
    kv["gamma"] = config::exact_real(g);
    setups.push_back(read_train_config(kv));
  }
  const auto [train_set, validation_set] =
      load_train_data(setups.front(), s.train.data_path, s.train.validation_path);
  const data::Dataset& scored = validation_set.empty() ? train_set : validation_set;

  const fs::path dir = s.train.common.out;
  fs::create_directories(dir);

  auto run_one = [&](std::size_t k) {
    return trainer::train(setups[k].config, train_set, validation_set);
  };
  std::vector<trainer::TrainResult> results;
  if (s.parallel) {
    std::vector<std::future<trainer::TrainResult>> futures;
    for (std::size_t k = 0; k < setups.size(); ++k) {
      futures.push_back(std::async(std::launch::async, run_one, k));
    }
    for (auto& f : futures) results.push_back(f.get());
  } else {
    for (std::size_t k = 0; k < setups.size(); ++k) results.push_back(run_one(k));
  }

  Manifest m;
  m.command = "sweep-gamma";
  // The swept key is carried by --gammas, not the echo.
  m.config = setups.front().echo;
  m.config.erase("gamma");
  m.seed = setups.front().config.seed;
  m.started_at = started;
  m.options = train_options(s.train);
  m.options["gammas"] = join_reals(s.gammas);
  if (s.parallel) m.options["parallel"] = true;

  std::string csv = "gamma,validation_accuracy,mean_gap,std_gap,fraction_correct,steps\n";
  ordered_json runs = ordered_json::array();
  for (std::size_t k = 0; k < results.size(); ++k) {
    const fs::path run_dir = dir / ("gamma_" + std::to_string(k));
    fs::create_directories(run_dir);
    write_head(run_dir / "head.json", results[k].head);
    data::write_file_atomic(run_dir / "trace.csv", results[k].trace.to_csv());
    const auto stats = eval::separation_stats(results[k].head, scored, 1);
    const double acc = eval::pairwise_accuracy(results[k].head, scored);
    csv += format_real(s.gammas[k]) + ',' + format_real(acc) + ',' +
           format_real(stats.mean_gap) + ',' + format_real(stats.std_gap) + ',' +
           format_real(stats.fraction_correct) + ',' +
           std::to_string(results[k].trace.records.size()) + '\n';
    runs.push_back({{"gamma", s.gammas[k]},
                    {"head", (run_dir / "head.json").string()},
                    {"trace", (run_dir / "trace.csv").string()}});
  }
  data::write_file_atomic(dir / "sweep.csv", csv);
  m.artifacts["sweep"] = (dir / "sweep.csv").string();
  m.artifacts["runs"] = runs;
  m.artifacts["manifest"] = (dir / "manifest.json").string();
  m.summary["points"] = results.size();
  m.summary["scored_on"] = validation_set.empty() ? "train" : "validation";
  write_manifest(dir / "manifest.json", m);

  out << "wrote " << results.size() << " rows to " << (dir / "sweep.csv").string() << "\n";
  return 0;
}

// ---- rerun -----------------------------------------------------------------

std::vector<std::string> replay_args(const std::string& manifest_path,
                                     const std::string& out_override) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(data::read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParseError, "'" + manifest_path + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("command") || !doc["command"].is_string()) {
    throw Error(ErrorCode::kParseError, "'" + manifest_path + "' is not a run manifest");
  }
  const std::string command = doc["command"].get<std::string>();
  if (command == "rerun") throw Error(ErrorCode::kParseError, "cannot replay a rerun");

  std::vector<std::string> args{command};
  if (doc.contains("config")) {
    for (const auto& [k, v] : doc["config"].items()) {
      args.push_back("--set");
      args.push_back(k + "=" + v.get<std::string>());
    }
  }
  if (doc.contains("options")) {
    for (const auto& [k, v] : doc["options"].items()) {
      if (k == "out" && !out_override.empty()) continue;
      if (v.is_boolean()) {
        if (v.get<bool>()) args.push_back("--" + k);
        continue;
      }
      args.push_back("--" + k);
      args.push_back(v.get<std::string>());
    }
  }
  if (!out_override.empty()) {
    args.push_back("--out");
    args.push_back(out_override);
  }
  return args;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Reward-model training with optimal-transport adaptive margins", "aplot"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  GenFlags gen;
  auto* gen_cmd = app.add_subcommand("gen", "generate synthetic pairs or BoN candidates as JSONL");
  add_common(gen_cmd, gen.common, true);

  TrainFlags train;
  auto* train_cmd = app.add_subcommand("train", "train a reward head");
  add_common(train_cmd, train.common, true);
  train_cmd->add_option("--data", train.data_path, "training pairs (JSONL)")->required();
  train_cmd->add_option("--validation", train.validation_path,
                        "validation pairs (JSONL); default splits --data");

  EvalFlags ev;
  auto* eval_cmd = app.add_subcommand("eval", "accuracy and reward-gap separation of a head");
  add_common(eval_cmd, ev.common, false);
  eval_cmd->add_option("--head", ev.head_path, "head JSON")->required();
  eval_cmd->add_option("--data", ev.data_path, "pairs (JSONL)")->required();
  eval_cmd->add_option("--bins", ev.bins, "histogram bins")->capture_default_str();

  BonFlags bon;
  auto* bon_cmd = app.add_subcommand("bon", "best-of-n simulation against the gold scores");
  add_common(bon_cmd, bon.common, false);
  bon_cmd->add_option("--head", bon.head_path, "proxy head JSON");
  bon_cmd->add_option("--candidates", bon.candidates_path, "candidate sets (JSONL)")->required();
  bon_cmd->add_option("--n", bon.n_values, "comma-separated n values")->delimiter(',');
  bon_cmd->add_option("--points", bon.points, "log-spaced grid size when --n is absent")
      ->capture_default_str();
  bon_cmd->add_flag("--proxy-is-gold", bon.proxy_is_gold, "select by gold score");

  SweepFlags sweep;
  auto* sweep_cmd = app.add_subcommand("sweep-gamma", "train once per gamma value");
  add_common(sweep_cmd, sweep.train.common, true);
  sweep_cmd->add_option("--data", sweep.train.data_path, "training pairs (JSONL)")->required();
  sweep_cmd->add_option("--validation", sweep.train.validation_path, "validation pairs (JSONL)");
  sweep_cmd->add_option("--gammas", sweep.gammas, "comma-separated gamma values")
      ->delimiter(',')
      ->required();
  sweep_cmd->add_flag("--parallel", sweep.parallel, "run gamma points concurrently");

  std::string manifest_path, rerun_out;
  auto* rerun_cmd = app.add_subcommand("rerun", "replay a command from its manifest");
  rerun_cmd->add_option("manifest", manifest_path, "manifest JSON")->required();
  rerun_cmd->add_option("--out", rerun_out, "write outputs here instead");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*gen_cmd) return cmd_gen(gen, out);
    if (*train_cmd) return cmd_train(train, out);
    if (*eval_cmd) return cmd_eval(ev, out);
    if (*bon_cmd) return cmd_bon(bon, out);
    if (*sweep_cmd) return cmd_sweep(sweep, out);
    if (*rerun_cmd) return run(replay_args(manifest_path, rerun_out), out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace aplot::cli
