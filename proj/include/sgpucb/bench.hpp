#pragma once

// Experiment harness: JSON configuration, per-(seed, algorithm) CSV traces and
// the aggregated summary. The summary is always produced by reading traces
// back from disk, so `aggregate` on a finished run reproduces it exactly.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sgpucb/algorithms.hpp"
#include "sgpucb/analysis.hpp"
#include "sgpucb/environment.hpp"
#include "sgpucb/errors.hpp"

namespace sgpucb {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr const char* kTraceHeader =
    "seed,algorithm,round,action_index,instant_regret,cumulative_regret,g_value,violation,safe_set_size,phase";

struct AlgorithmEntry {
  Algorithm algorithm = Algorithm::SgpUcb;
  AlgoConfig config;
};

struct ExperimentConfig {
  InstanceConfig instance;
  std::vector<AlgorithmEntry> algorithms;
  int T = 500;
  int n_seeds = 30;
  std::uint64_t base_seed = 1;
  std::string output_dir = "out";
};

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline void allow_keys(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where, "must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError(where.empty() ? it.key() : where + "." + it.key(), "unknown key");
  }
}

template <class T>
T get_key(const json& j, const std::string& where, const char* key, std::optional<T> fallback = std::nullopt) {
  const std::string path = where.empty() ? key : where + "." + key;
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    throw ConfigError(path, "missing");
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(path, e.what());
  }
}

inline TPrimePolicy parse_tprime_policy(const json& j, const std::string& where, int T) {
  std::string kind;
  if (j.is_string()) {
    kind = j.get<std::string>();
  } else if (j.is_object()) {
    kind = get_key<std::string>(j, where, "kind");
  } else {
    throw ConfigError(where, "must be a string or an object");
  }
  if (kind == "plateau") {
    TPrimePolicy p = TPrimePolicy::plateau(20, std::min(100, T));
    if (j.is_object()) {
      allow_keys(j, where, {"kind", "window", "cap"});
      p.window = get_key<int>(j, where, "window", p.window);
      p.cap = get_key<int>(j, where, "cap", p.cap);
    }
    return p;
  }
  if (kind == "fixed") {
    if (!j.is_object()) throw ConfigError(where + ".value", "missing");
    allow_keys(j, where, {"kind", "value"});
    return TPrimePolicy::fixed_length(get_key<int>(j, where, "value"));
  }
  if (kind == "theoretical_finite") {
    if (j.is_object()) allow_keys(j, where, {"kind"});
    return TPrimePolicy::theoretical_finite();
  }
  if (kind == "theoretical_infinite") {
    TPrimePolicy p = TPrimePolicy::theoretical_infinite();
    if (j.is_object()) {
      allow_keys(j, where, {"kind", "qff_nodes"});
      p.qff_nodes = get_key<int>(j, where, "qff_nodes", p.qff_nodes);
    }
    return p;
  }
  throw ConfigError(j.is_object() ? where + ".kind" : where, "unknown policy '" + kind + "'");
}

inline json tprime_policy_to_json(const TPrimePolicy& p) {
  switch (p.kind) {
    case TPrimePolicy::Kind::Plateau: return {{"kind", "plateau"}, {"window", p.window}, {"cap", p.cap}};
    case TPrimePolicy::Kind::Fixed: return {{"kind", "fixed"}, {"value", p.fixed}};
    case TPrimePolicy::Kind::TheoreticalFinite: return {{"kind", "theoretical_finite"}};
    case TPrimePolicy::Kind::TheoreticalInfinite:
      return {{"kind", "theoretical_infinite"}, {"qff_nodes", p.qff_nodes}};
  }
  return nullptr;
}

}  // namespace detail

/// Parses an experiment document. Throws ConfigError naming the offending key.
inline ExperimentConfig parse_experiment_config(const json& j) {
  using detail::get_key;
  detail::allow_keys(j, "", {"instance", "algorithms", "run"});
  if (!j.contains("instance")) throw ConfigError("instance", "missing");
  if (!j.contains("algorithms")) throw ConfigError("algorithms", "missing");
  if (!j.contains("run")) throw ConfigError("run", "missing");

  ExperimentConfig cfg;
  const json& run = j.at("run");
  detail::allow_keys(run, "run", {"T", "n_seeds", "base_seed", "output_dir"});
  cfg.T = get_key<int>(run, "run", "T");
  cfg.n_seeds = get_key<int>(run, "run", "n_seeds");
  cfg.base_seed = get_key<std::uint64_t>(run, "run", "base_seed", std::uint64_t{1});
  cfg.output_dir = get_key<std::string>(run, "run", "output_dir", std::string("out"));
  if (cfg.T < 1) throw ConfigError("run.T", "must be >= 1");
  if (cfg.n_seeds < 1) throw ConfigError("run.n_seeds", "must be >= 1");

  const json& inst = j.at("instance");
  detail::allow_keys(inst, "instance",
                     {"n", "d", "f_kernel", "g_kernel", "sigma", "epsilon", "seed_set_min", "seed_set_max",
                      "threshold_quantile", "max_attempts"});
  InstanceConfig& ic = cfg.instance;
  ic.n = get_key<int>(inst, "instance", "n");
  ic.d = get_key<int>(inst, "instance", "d");
  if (ic.n < 2) throw ConfigError("instance.n", "must be >= 2");
  if (ic.d < 1) throw ConfigError("instance.d", "must be >= 1");
  if (!inst.contains("f_kernel")) throw ConfigError("instance.f_kernel", "missing");
  if (!inst.contains("g_kernel")) throw ConfigError("instance.g_kernel", "missing");
  ic.f_kernel = kernel_from_json(inst.at("f_kernel"), ic.d, "instance.f_kernel");
  ic.g_kernel = kernel_from_json(inst.at("g_kernel"), ic.d, "instance.g_kernel");
  ic.sigma = get_key<double>(inst, "instance", "sigma");
  ic.epsilon = get_key<double>(inst, "instance", "epsilon");
  ic.seed_set_min = get_key<int>(inst, "instance", "seed_set_min");
  ic.seed_set_max = get_key<int>(inst, "instance", "seed_set_max");
  ic.threshold_quantile = get_key<double>(inst, "instance", "threshold_quantile", 0.6);
  ic.max_attempts = get_key<int>(inst, "instance", "max_attempts", 100);
  if (!(ic.sigma > 0.0)) throw ConfigError("instance.sigma", "must be > 0");
  if (!(ic.epsilon > 0.0)) throw ConfigError("instance.epsilon", "must be > 0");
  if (ic.seed_set_min < 1) throw ConfigError("instance.seed_set_min", "must be >= 1");
  if (ic.seed_set_max < ic.seed_set_min) throw ConfigError("instance.seed_set_max", "must be >= seed_set_min");
  if (!(ic.threshold_quantile >= 0.0 && ic.threshold_quantile <= 1.0))
    throw ConfigError("instance.threshold_quantile", "must lie in [0, 1]");
  if (ic.max_attempts < 1) throw ConfigError("instance.max_attempts", "must be >= 1");

  const json& algos = j.at("algorithms");
  if (!algos.is_array() || algos.empty()) throw ConfigError("algorithms", "must be a non-empty array");
  for (std::size_t k = 0; k < algos.size(); ++k) {
    const std::string where = "algorithms[" + std::to_string(k) + "]";
    const json& a = algos[k];
    detail::allow_keys(a, where, {"name", "delta", "phase1_rule", "tprime_policy", "model_noise_std"});
    AlgorithmEntry e;
    const std::string name = get_key<std::string>(a, where, "name");
    const auto algo = algorithm_from_string(name);
    if (!algo)
      throw ConfigError(where + ".name", "unknown algorithm '" + name +
                                             "' (available: sgp_ucb, naive_sgp_ucb, oracle_gp_ucb, safeopt_mc, stageopt)");
    e.algorithm = *algo;
    e.config.T = cfg.T;
    e.config.epsilon = ic.epsilon;
    e.config.delta = get_key<double>(a, where, "delta", 0.01);
    const std::string rule = get_key<std::string>(a, where, "phase1_rule", std::string("uniform"));
    if (rule == "uniform") e.config.phase1_rule = Phase1Rule::Uniform;
    else if (rule == "max_variance") e.config.phase1_rule = Phase1Rule::MaxVariance;
    else throw ConfigError(where + ".phase1_rule", "unknown rule '" + rule + "'");
    e.config.tprime_policy = a.contains("tprime_policy")
                                 ? detail::parse_tprime_policy(a.at("tprime_policy"), where + ".tprime_policy", cfg.T)
                                 : TPrimePolicy::plateau(20, std::min(100, cfg.T));
    if (a.contains("model_noise_std")) e.config.model_noise_std = get_key<double>(a, where, "model_noise_std");
    try {
      e.config.validate();
    } catch (const InputError& err) {
      throw ConfigError(where, err.what());
    }
    cfg.algorithms.push_back(e);
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("<document>", e.what());
  }
  return parse_experiment_config(j);
}

inline json to_json(const ExperimentConfig& cfg) {
  json algos = json::array();
  for (const auto& e : cfg.algorithms) {
    json a{{"name", to_string(e.algorithm)},
           {"delta", e.config.delta},
           {"phase1_rule", to_string(e.config.phase1_rule)},
           {"tprime_policy", detail::tprime_policy_to_json(e.config.tprime_policy)}};
    if (e.config.model_noise_std) a["model_noise_std"] = *e.config.model_noise_std;
    algos.push_back(a);
  }
  const InstanceConfig& ic = cfg.instance;
  return {{"instance",
           {{"n", ic.n},
            {"d", ic.d},
            {"f_kernel", kernel_to_json(ic.f_kernel)},
            {"g_kernel", kernel_to_json(ic.g_kernel)},
            {"sigma", ic.sigma},
            {"epsilon", ic.epsilon},
            {"seed_set_min", ic.seed_set_min},
            {"seed_set_max", ic.seed_set_max},
            {"threshold_quantile", ic.threshold_quantile},
            {"max_attempts", ic.max_attempts}}},
          {"algorithms", algos},
          {"run", {{"T", cfg.T}, {"n_seeds", cfg.n_seeds}, {"base_seed", cfg.base_seed}, {"output_dir", cfg.output_dir}}}};
}

// ---------------------------------------------------------------------------
// Trace CSV

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string trace_filename(const std::string& algorithm, std::uint64_t seed) {
  return algorithm + "_seed" + std::to_string(seed) + ".csv";
}

inline void write_trace_csv(const fs::path& path, std::uint64_t seed, const std::string& algorithm,
                            const RegretTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << kTraceHeader << '\n';
  for (const RoundRecord& r : trace.rounds) {
    out << seed << ',' << algorithm << ',' << r.round << ',' << r.action << ',' << format_double(r.instant_regret)
        << ',' << format_double(r.cumulative_regret) << ',' << format_double(r.g_value) << ','
        << (r.violation ? 1 : 0) << ',' << r.safe_set_size << ',' << to_string(r.phase) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

/// One parsed trace file.
struct TraceTable {
  std::string file;
  std::uint64_t seed = 0;
  std::string algorithm;
  std::vector<double> instant_regret;
  std::vector<double> cumulative_regret;
  std::vector<int> violation;
  std::vector<Phase> phase;

  std::size_t rounds() const { return cumulative_regret.size(); }
};

inline TraceTable read_trace_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  TraceTable t;
  t.file = path.filename().string();
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader)
    throw AggregationError(t.file + ": header does not match the trace schema");
  int expected_round = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 10) throw AggregationError(t.file + ": expected 10 columns at round " + std::to_string(expected_round));
    try {
      const std::uint64_t seed = std::stoull(f[0]);
      if (expected_round == 1) {
        t.seed = seed;
        t.algorithm = f[1];
      } else if (seed != t.seed || f[1] != t.algorithm) {
        throw AggregationError(t.file + ": seed/algorithm changes within the file");
      }
      if (std::stoi(f[2]) != expected_round) throw AggregationError(t.file + ": rounds out of order");
      t.instant_regret.push_back(std::stod(f[4]));
      t.cumulative_regret.push_back(std::stod(f[5]));
      t.violation.push_back(std::stoi(f[7]));
      if (f[9] == "explore") t.phase.push_back(Phase::Explore);
      else if (f[9] == "exploit") t.phase.push_back(Phase::Exploit);
      else throw AggregationError(t.file + ": unknown phase '" + f[9] + "'");
    } catch (const std::logic_error&) {
      throw AggregationError(t.file + ": malformed number at round " + std::to_string(expected_round));
    }
    ++expected_round;
  }
  if (t.rounds() == 0) throw AggregationError(t.file + ": no rounds");
  return t;
}

// ---------------------------------------------------------------------------
// Aggregation

namespace detail {

/// Population mean and standard deviation per column of `rows`.
inline std::pair<std::vector<double>, std::vector<double>> column_stats(const std::vector<std::vector<double>>& rows) {
  const std::size_t T = rows.front().size();
  std::vector<double> mean(T, 0.0), sd(T, 0.0);
  const double m = static_cast<double>(rows.size());
  for (std::size_t t = 0; t < T; ++t) {
    double s = 0.0;
    for (const auto& r : rows) s += r[t];
    mean[t] = s / m;
    double q = 0.0;
    for (const auto& r : rows) q += (r[t] - mean[t]) * (r[t] - mean[t]);
    sd[t] = std::sqrt(q / m);
  }
  return {mean, sd};
}

}  // namespace detail

/// Per-algorithm statistics across seeds. Tables must share a common T.
inline json summarize_traces(std::vector<TraceTable> tables) {
  if (tables.empty()) throw AggregationError("no trace files to aggregate");
  std::sort(tables.begin(), tables.end(), [](const TraceTable& a, const TraceTable& b) {
    return std::tie(a.algorithm, a.seed, a.file) < std::tie(b.algorithm, b.seed, b.file);
  });
  const std::size_t T = tables.front().rounds();
  for (const auto& t : tables)
    if (t.rounds() != T)
      throw AggregationError("mixed T across traces: " + tables.front().file + " has " + std::to_string(T) +
                             " rounds, " + t.file + " has " + std::to_string(t.rounds()));

  std::map<std::string, std::vector<const TraceTable*>> by_algo;
  for (const auto& t : tables) by_algo[t.algorithm].push_back(&t);

  json algos = json::object();
  for (const auto& [name, group] : by_algo) {
    std::vector<std::vector<double>> cum, step;
    json seeds = json::array(), viol = json::array(), tprime = json::array(), viol2 = json::array();
    long long viol_total = 0;
    for (const TraceTable* t : group) {
      cum.push_back(t->cumulative_regret);
      std::vector<double> s(T);
      for (std::size_t k = 0; k < T; ++k) s[k] = t->cumulative_regret[k] / static_cast<double>(k + 1);
      step.push_back(std::move(s));
      int v = 0, v2 = 0, explore = 0;
      for (std::size_t k = 0; k < T; ++k) {
        v += t->violation[k];
        if (t->phase[k] == Phase::Exploit) v2 += t->violation[k];
        else ++explore;
      }
      viol_total += v;
      seeds.push_back(t->seed);
      viol.push_back(v);
      viol2.push_back(v2);
      tprime.push_back(explore);
    }
    auto [mc, sc] = detail::column_stats(cum);
    auto [ms, ss] = detail::column_stats(step);
    algos[name] = {{"n_runs", group.size()},
                   {"seeds", seeds},
                   {"mean_cum_regret", mc},
                   {"std_cum_regret", sc},
                   {"mean_step_regret", ms},
                   {"std_step_regret", ss},
                   {"violations_total", viol_total},
                   {"violations_per_seed", viol},
                   {"phase2_violations_per_seed", viol2},
                   {"tprime_resolved", tprime}};
  }
  return {{"T", T}, {"std_convention", "population"}, {"algorithms", algos}};
}

inline constexpr const char* kRunMetaFile = "run_meta.json";

/// Reads every trace under dir/traces (or dir itself) and builds the summary.
/// Run metadata (bound report, failed seeds) is merged in when present.
inline json aggregate(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  const fs::path trace_dir = fs::is_directory(dir / "traces") ? dir / "traces" : dir;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(trace_dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<TraceTable> tables;
  for (const auto& f : files) tables.push_back(read_trace_csv(f));
  json summary = summarize_traces(std::move(tables));
  const fs::path meta_path = dir / kRunMetaFile;
  if (fs::exists(meta_path)) {
    std::ifstream in(meta_path);
    if (!in) throw IoError("cannot open " + meta_path.string());
    json meta;
    try {
      in >> meta;
    } catch (const json::parse_error& e) {
      throw AggregationError(std::string(kRunMetaFile) + ": " + e.what());
    }
    for (auto it = meta.begin(); it != meta.end(); ++it) summary[it.key()] = it.value();
  }
  return summary;
}

inline void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Running

struct RunOptions {
  /// Worker threads; 1 runs everything on the calling thread.
  int parallel = 1;
  /// Also serialize each sampled instance under instances/.
  bool write_instances = true;
};

struct ExperimentResult {
  json summary;
  std::vector<std::uint64_t> failed_seeds;
  fs::path output_dir;
};

/// Seed of the algorithm RNG for a given instance seed; shared by all
/// algorithms so comparisons are paired.
inline std::uint64_t run_seed_for(std::uint64_t instance_seed) {
  std::uint64_t z = instance_seed + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg, const RunOptions& opts = {}) {
  if (cfg.algorithms.empty()) throw ConfigError("algorithms", "must be a non-empty array");
  const fs::path out = cfg.output_dir;
  const fs::path traces = out / "traces";
  const fs::path instances = out / "instances";
  std::error_code ec;
  fs::create_directories(traces, ec);
  if (ec) throw IoError("cannot create " + traces.string() + ": " + ec.message());
  for (const auto& e : fs::directory_iterator(traces))
    if (e.path().extension() == ".csv") fs::remove(e.path());
  if (opts.write_instances) {
    fs::create_directories(instances, ec);
    if (ec) throw IoError("cannot create " + instances.string() + ": " + ec.message());
  }

  const int n_seeds = cfg.n_seeds;
  std::vector<std::optional<ProblemInstance>> sampled(static_cast<std::size_t>(n_seeds));
  std::vector<int> first_tprime(static_cast<std::size_t>(n_seeds), 0);
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= n_seeds) return;
      const std::uint64_t seed = cfg.base_seed + static_cast<std::uint64_t>(k);
      try {
        ProblemInstance inst;
        try {
          inst = sample_instance(cfg.instance, seed);
        } catch (const InstanceGenerationError&) {
          continue;
        }
        if (opts.write_instances)
          write_json(instances / ("seed" + std::to_string(seed) + ".json"), to_json(inst));
        const std::uint64_t rs = run_seed_for(seed);
        for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
          const auto& e = cfg.algorithms[a];
          const RegretTrace tr = run_algorithm(e.algorithm, inst, e.config, rs);
          if (a == 0) first_tprime[static_cast<std::size_t>(k)] = tr.tprime;
          write_trace_csv(traces / trace_filename(to_string(e.algorithm), seed), seed, to_string(e.algorithm), tr);
        }
        sampled[static_cast<std::size_t>(k)] = std::move(inst);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n_seeds);
        return;
      }
    }
  };

  const int threads = std::max(1, std::min(opts.parallel, n_seeds));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);

  ExperimentResult result;
  result.output_dir = out;
  json bound = nullptr;
  for (int k = 0; k < n_seeds; ++k) {
    const auto& inst = sampled[static_cast<std::size_t>(k)];
    if (!inst) {
      result.failed_seeds.push_back(cfg.base_seed + static_cast<std::uint64_t>(k));
      continue;
    }
    if (bound.is_null())
      bound = to_json(make_bound_report(*inst, cfg.algorithms.front().config, first_tprime[static_cast<std::size_t>(k)]));
  }
  if (result.failed_seeds.size() == static_cast<std::size_t>(n_seeds))
    throw InstanceGenerationError("every seed failed instance generation");

  json meta{{"bound_report", bound}, {"failed_seeds", result.failed_seeds}, {"config", to_json(cfg)}};
  write_json(out / kRunMetaFile, meta);
  result.summary = aggregate(out);
  write_json(out / "summary.json", result.summary);
  return result;
}

}  // namespace sgpucb
