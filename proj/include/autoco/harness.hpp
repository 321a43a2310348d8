#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autoco/bandit.hpp"
#include "autoco/config.hpp"
#include "autoco/envs.hpp"
#include "autoco/features.hpp"
#include "autoco/rng.hpp"

namespace autoco::harness {

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct EnvSpec {
  std::string kind;  // synthetic | mushroom | adult
  envs::SyntheticConfig synthetic;
  std::vector<std::string> data_paths;  // replay source files
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 1;
  int trials_per_batch = 0;
  int batches = 0;
  int repetitions = 0;
  std::string out_dir;
  EnvSpec env;
  std::vector<bandit::AlgorithmSpec> algorithms;
};

namespace detail {

inline void parse_model_overrides(const config::Table& t,
                                  bandit::ModelPolicyConfig& m) {
  m.dim = static_cast<int>(t.get_int("dim", m.dim));
  m.operation_aware = t.get_bool("operation_aware", m.operation_aware);
  m.identity_heads = t.get_bool("identity_heads", m.identity_heads);
  m.train_heads = t.get_bool("train_heads", m.train_heads);
  m.train_first = t.get_bool("train_first", m.train_first);
  m.variational = t.get_bool("variational", m.variational);
  m.epsilon = t.get_double("epsilon", m.epsilon);
  m.sample_per_batch = t.get_bool("sample_per_batch", m.sample_per_batch);
  m.eta_alpha = t.get_double("eta_alpha", m.eta_alpha);
  m.eta_theta = t.get_double("eta_theta", m.eta_theta);
  m.sigma0 = t.get_double("sigma0", m.sigma0);
  m.rho_init = t.get_double("rho_init", m.rho_init);
  m.kl_weight = t.get_double("kl_weight", m.kl_weight);
  m.mu_init_std = t.get_double("mu_init_std", m.mu_init_std);
  m.epochs = static_cast<int>(t.get_int("epochs", m.epochs));
  m.minibatch = static_cast<int>(t.get_int("minibatch", m.minibatch));
  m.replay_cap = t.get_int("replay_cap", m.replay_cap);
  if (const std::string rule = t.get_string("select", ""); !rule.empty()) {
    if (rule == "greedy")
      m.select = bandit::SelectRule::kGreedy;
    else if (rule == "ts")
      m.select = bandit::SelectRule::kTs;
    else if (rule == "egreedy")
      m.select = bandit::SelectRule::kEgreedy;
    else
      throw config::ConfigError("unknown select rule '" + rule + "'");
  }
}

inline void parse_linear_overrides(const config::Table& t,
                                   const FieldSchema& schema,
                                   bandit::LinearConfig& lin) {
  lin.alpha_ucb = t.get_double("alpha_ucb", lin.alpha_ucb);
  lin.ridge_lambda = t.get_double("ridge_lambda", lin.ridge_lambda);
  lin.ts_scale = t.get_double("ts_scale", lin.ts_scale);
  const std::vector<std::string> excluded =
      t.get_string_array("exclude_fields", {});
  if (!excluded.empty()) {
    lin.field_mask.assign(static_cast<std::size_t>(schema.field_count()), 1);
    for (const std::string& name : excluded) {
      bool found = false;
      for (int f = 0; f < schema.field_count(); ++f)
        if (schema.field(f).name == name) {
          lin.field_mask[static_cast<std::size_t>(f)] = 0;
          found = true;
        }
      if (!found)
        throw config::ConfigError("exclude_fields: no field named '" + name +
                                  "'");
    }
  }
}

}  // namespace detail

// Schema the policies see for a given environment spec.  Synthetic worlds are
// rebuilt per repetition, but the schema is seed-independent.
inline FieldSchema experiment_schema(const EnvSpec& env) {
  if (env.kind == "synthetic") {
    std::vector<Field> fields;
    for (std::size_t i = 0; i < env.synthetic.element_names.size(); ++i)
      fields.push_back(Field{env.synthetic.element_names[i],
                             env.synthetic.element_cards[i]});
    fields.push_back(Field{"product", env.synthetic.products});
    return FieldSchema(std::move(fields));
  }
  if (env.kind == "mushroom") {
    CategoricalDataset data = load_mushroom(env.data_paths.at(0));
    return envs::ReplayBandit::make(envs::ReplayKind::kMushroom,
                                    std::make_shared<CategoricalDataset>(
                                        std::move(data)))
        .schema;
  }
  if (env.kind == "adult") {
    CategoricalDataset data = load_adult(env.data_paths);
    return envs::ReplayBandit::make(envs::ReplayKind::kAdult,
                                    std::make_shared<CategoricalDataset>(
                                        std::move(data)))
        .schema;
  }
  throw std::invalid_argument("unknown environment kind '" + env.kind + "'");
}

// Parses an [environment] section body.
inline EnvSpec parse_env_spec(const config::Table& env) {
  EnvSpec out;
  out.kind = env.require_string("kind");
  if (out.kind == "synthetic") {
    envs::SyntheticConfig& s = out.synthetic;
    const std::vector<std::string> names =
        env.get_string_array("element_names", s.element_names);
    const std::vector<std::int64_t> cards = env.get_int_array(
        "element_cards",
        std::vector<std::int64_t>(s.element_cards.begin(),
                                  s.element_cards.end()));
    s.element_names = names;
    s.element_cards.assign(cards.begin(), cards.end());
    s.products = static_cast<int>(env.get_int("products", s.products));
    s.candidates_per_product = static_cast<int>(
        env.get_int("candidates_per_product", s.candidates_per_product));
    s.jitter_candidates =
        env.get_bool("jitter_candidates", s.jitter_candidates);
    s.hidden_dim = static_cast<int>(env.get_int("hidden_dim", s.hidden_dim));
    s.hidden_emb_std = env.get_double("hidden_emb_std", s.hidden_emb_std);
    s.target_mean_ctr = env.get_double("target_mean_ctr", s.target_mean_ctr);
  } else if (out.kind == "mushroom" || out.kind == "adult") {
    if (env.require("data").kind == config::Value::Kind::kArray)
      out.data_paths = env.get_string_array("data", {});
    else
      out.data_paths = {env.require_string("data")};
  } else {
    throw config::ConfigError("unknown environment kind '" + out.kind + "'");
  }
  return out;
}

// Parses a full experiment description.  Layout:
//
//   [experiment]       seed / trials_per_batch / batches / repetitions / ...
//   [environment]      kind plus environment-specific knobs
//   [model]            optional global defaults for model-family algorithms
//   [[algorithms]]     one block per policy; kind is required
inline ExperimentConfig parse_experiment(const config::Table& root) {
  ExperimentConfig cfg;

  const config::Table* exp = root.child("experiment");
  if (exp == nullptr)
    throw config::ConfigError("missing [experiment] section");
  cfg.name = exp->get_string("name", cfg.name);
  cfg.seed = static_cast<std::uint64_t>(exp->get_int("seed", 1));
  cfg.trials_per_batch =
      static_cast<int>(exp->require("trials_per_batch").integer);
  cfg.batches = static_cast<int>(exp->require("batches").integer);
  cfg.repetitions = static_cast<int>(exp->require("repetitions").integer);
  cfg.out_dir = exp->get_string("out_dir", "");
  if (cfg.trials_per_batch <= 0 || cfg.batches <= 0 || cfg.repetitions <= 0)
    throw config::ConfigError(
        "trials_per_batch, batches, and repetitions must be positive");

  const config::Table* env = root.child("environment");
  if (env == nullptr)
    throw config::ConfigError("missing [environment] section");
  cfg.env = parse_env_spec(*env);

  const FieldSchema schema = experiment_schema(cfg.env);

  bandit::ModelPolicyConfig model_defaults;
  if (const config::Table* m = root.child("model"); m != nullptr)
    detail::parse_model_overrides(*m, model_defaults);

  const std::vector<config::Table>* algs = root.list("algorithms");
  if (algs == nullptr || algs->empty())
    throw config::ConfigError("no [[algorithms]] blocks");
  for (const config::Table& a : *algs) {
    bandit::AlgorithmSpec spec;
    spec.kind = a.require_string("kind");
    spec.model = model_defaults;
    spec.epsilon = a.get_double("epsilon", spec.epsilon);
    spec.beta_prior_alpha = a.get_double("prior_alpha", spec.beta_prior_alpha);
    spec.beta_prior_beta = a.get_double("prior_beta", spec.beta_prior_beta);
    if (const std::string op = a.get_string("op", ""); !op.empty()) {
      const std::optional<Op> parsed = op_from_name(op);
      if (!parsed) throw config::ConfigError("unknown operator '" + op + "'");
      spec.op = *parsed;
    }
    bandit::apply_kind_defaults(spec);  // validates the kind
    detail::parse_model_overrides(a, spec.model);
    detail::parse_linear_overrides(a, schema, spec.lin);
    if (a.has("epsilon")) spec.model.epsilon = spec.epsilon;
    spec.label = a.get_string("label", bandit::default_label(spec));
    cfg.algorithms.push_back(std::move(spec));
  }

  std::map<std::string, int> seen;
  for (const bandit::AlgorithmSpec& spec : cfg.algorithms)
    if (++seen[spec.label] > 1)
      throw config::ConfigError("duplicate algorithm label '" + spec.label +
                                "'");
  return cfg;
}

inline ExperimentConfig load_experiment(const std::string& path) {
  return parse_experiment(config::load_config_file(path));
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

// One row of the per-batch log.  Sums are over the batch's trials; cumulative
// columns run from the start of the repetition.
struct BatchRow {
  std::string algorithm;
  int repetition = 0;
  int batch = 0;
  int trials = 0;
  double reward_sum = 0.0;
  double oracle_expected_sum = 0.0;
  double chosen_expected_sum = 0.0;
  double cum_ctr = 0.0;
  double cum_regret = 0.0;
};

using ExperimentLog = std::vector<BatchRow>;

namespace detail {

// Uniform view over the two environment families: a request id addresses a
// product (synthetic) or a record (replay), and every request exposes a
// candidate list, expected rewards, and a sampled reward.
class EnvAdapter {
 public:
  EnvAdapter(const envs::SyntheticWorld* world, const envs::ReplayBandit* replay)
      : world_(world), replay_(replay) {}

  int universe() const {
    return world_ != nullptr ? world_->product_count()
                             : static_cast<int>(replay_->records());
  }

  const std::vector<FeatureVector>& candidates(int id) {
    if (world_ != nullptr)
      return world_->candidates[static_cast<std::size_t>(id)];
    auto arms = replay_->arms(id);
    scratch_.clear();
    scratch_.push_back(std::move(arms[0]));
    scratch_.push_back(std::move(arms[1]));
    return scratch_;
  }

  double expected(int id, int arm) const {
    if (world_ != nullptr)
      return world_->true_ctr[static_cast<std::size_t>(id)]
                             [static_cast<std::size_t>(arm)];
    return replay_->expected_reward(id, arm);
  }

  int oracle_arm(int id) const {
    if (world_ != nullptr)
      return world_->best_index[static_cast<std::size_t>(id)];
    return replay_->oracle(id).first;
  }

  double oracle_expected(int id) const {
    if (world_ != nullptr)
      return world_->best_ctr[static_cast<std::size_t>(id)];
    return replay_->oracle(id).second;
  }

  double step(int id, int arm, Rng& rng) const {
    if (world_ != nullptr) return envs::synth_step_indexed(*world_, id, arm, rng);
    return replay_->step(id, arm, rng);
  }

  double unit(double raw) const {
    return world_ != nullptr ? raw : replay_->unit_reward(raw);
  }

 private:
  const envs::SyntheticWorld* world_;
  const envs::ReplayBandit* replay_;
  std::vector<FeatureVector> scratch_;
};

// Runs one (algorithm, repetition) cell.  The request stream depends only on
// (seed, repetition), so every algorithm in a repetition faces the same
// products/records in the same order; all other randomness is cell-local.
inline std::vector<BatchRow> run_cell(const ExperimentConfig& cfg,
                                      const FieldSchema& schema,
                                      const bandit::AlgorithmSpec& spec,
                                      int rep, EnvAdapter env) {
  Rng req_rng(derive_seed(cfg.seed, "requests", static_cast<std::uint64_t>(rep)));
  Rng cell_rng(derive_seed(cfg.seed, spec.label, static_cast<std::uint64_t>(rep)));
  std::unique_ptr<bandit::Policy> policy;
  const bool oracle = spec.kind == "oracle";
  if (!oracle)
    policy = bandit::make_policy(
        spec, schema,
        derive_seed(cfg.seed, spec.label + "/init",
                    static_cast<std::uint64_t>(rep)));

  std::vector<BatchRow> rows;
  rows.reserve(static_cast<std::size_t>(cfg.batches));
  std::vector<bandit::Observation> batch_obs;
  batch_obs.reserve(static_cast<std::size_t>(cfg.trials_per_batch));
  double cum_reward = 0.0;
  double cum_regret = 0.0;
  std::int64_t cum_trials = 0;

  const int universe = env.universe();
  for (int batch = 0; batch < cfg.batches; ++batch) {
    BatchRow row;
    row.algorithm = spec.label;
    row.repetition = rep;
    row.batch = batch;
    row.trials = cfg.trials_per_batch;
    batch_obs.clear();
    for (int t = 0; t < cfg.trials_per_batch; ++t) {
      const int id = req_rng.uniform_int(universe);
      const std::vector<FeatureVector>& candidates = env.candidates(id);
      int chosen;
      if (oracle) {
        chosen = env.oracle_arm(id);
      } else {
        chosen = policy->select(candidates, cell_rng).chosen;
      }
      const double raw = env.step(id, chosen, cell_rng);
      row.reward_sum += raw;
      row.oracle_expected_sum += env.oracle_expected(id);
      row.chosen_expected_sum += env.expected(id, chosen);
      batch_obs.push_back(bandit::Observation{candidates[static_cast<std::size_t>(chosen)],
                                              raw, env.unit(raw)});
    }
    if (!oracle) policy->update(batch_obs, cell_rng);
    cum_reward += row.reward_sum;
    cum_trials += row.trials;
    cum_regret += row.oracle_expected_sum - row.chosen_expected_sum;
    row.cum_ctr = cum_reward / static_cast<double>(cum_trials);
    row.cum_regret = cum_regret;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

// Runs every (algorithm, repetition) cell and returns rows ordered by
// (algorithm block order, repetition, batch).  The ordering and every value
// are independent of `parallel`.
inline ExperimentLog run_experiment(const ExperimentConfig& cfg,
                                    int parallel = 1, bool quiet = false) {
  const FieldSchema schema = experiment_schema(cfg.env);

  // Environments: one synthetic world per repetition (independent draws of
  // the hidden model), or one shared replay dataset.
  std::vector<envs::SyntheticWorld> worlds;
  std::optional<envs::ReplayBandit> replay;
  if (cfg.env.kind == "synthetic") {
    worlds.reserve(static_cast<std::size_t>(cfg.repetitions));
    for (int rep = 0; rep < cfg.repetitions; ++rep)
      worlds.push_back(envs::synth_generate(
          cfg.env.synthetic,
          derive_seed(cfg.seed, "world", static_cast<std::uint64_t>(rep))));
  } else {
    const envs::ReplayKind kind = cfg.env.kind == "mushroom"
                                      ? envs::ReplayKind::kMushroom
                                      : envs::ReplayKind::kAdult;
    CategoricalDataset data = kind == envs::ReplayKind::kMushroom
                                  ? load_mushroom(cfg.env.data_paths.at(0))
                                  : load_adult(cfg.env.data_paths);
    replay = envs::ReplayBandit::make(
        kind, std::make_shared<CategoricalDataset>(std::move(data)));
  }

  struct Cell {
    int alg = 0;
    int rep = 0;
  };
  std::vector<Cell> cells;
  for (int a = 0; a < static_cast<int>(cfg.algorithms.size()); ++a)
    for (int rep = 0; rep < cfg.repetitions; ++rep)
      cells.push_back(Cell{a, rep});
  std::vector<std::vector<BatchRow>> results(cells.size());

  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> done{0};
  std::mutex log_mutex;
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      const Cell cell = cells[i];
      const bandit::AlgorithmSpec& spec =
          cfg.algorithms[static_cast<std::size_t>(cell.alg)];
      detail::EnvAdapter env(
          worlds.empty() ? nullptr : &worlds[static_cast<std::size_t>(cell.rep)],
          replay ? &*replay : nullptr);
      results[i] = detail::run_cell(cfg, schema, spec, cell.rep, env);
      const std::size_t finished = done.fetch_add(1) + 1;
      if (!quiet) {
        std::lock_guard<std::mutex> lock(log_mutex);
        std::fprintf(stderr, "[%zu/%zu] %s rep %d done\n", finished,
                     cells.size(), spec.label.c_str(), cell.rep);
      }
    }
  };

  const int threads = std::max(1, std::min<int>(parallel,
                                                static_cast<int>(cells.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  ExperimentLog log;
  log.reserve(cells.size() * static_cast<std::size_t>(cfg.batches));
  for (std::vector<BatchRow>& rows : results)
    for (BatchRow& row : rows) log.push_back(std::move(row));
  return log;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

inline MeanStderr mean_stderr(const std::vector<double>& xs) {
  MeanStderr out;
  if (xs.empty()) return out;
  double sum = 0.0;
  for (double x : xs) sum += x;
  out.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    const double var = ss / static_cast<double>(xs.size() - 1);
    out.stderr_ = std::sqrt(var / static_cast<double>(xs.size()));
  }
  return out;
}

// Final-batch value of one column, grouped per algorithm across repetitions
// (in repetition order).
inline std::map<std::string, std::vector<double>> final_values(
    const ExperimentLog& log, double BatchRow::*column) {
  std::map<std::string, std::map<int, std::pair<int, double>>> latest;
  for (const BatchRow& row : log) {
    auto& slot = latest[row.algorithm][row.repetition];
    if (row.batch >= slot.first) slot = {row.batch, row.*column};
  }
  std::map<std::string, std::vector<double>> out;
  for (const auto& [alg, reps] : latest) {
    std::vector<double>& xs = out[alg];
    for (const auto& [rep, batch_value] : reps)
      xs.push_back(batch_value.second);
  }
  return out;
}

// Per-repetition cumulative regret as a percentage of the baseline
// algorithm's regret in the same repetition, then averaged.  The baseline
// itself lands at exactly 100 with zero spread.
inline std::map<std::string, MeanStderr> relative_regret(
    const ExperimentLog& log, const std::string& baseline) {
  std::map<std::string, std::map<int, std::pair<int, double>>> latest;
  for (const BatchRow& row : log) {
    auto& slot = latest[row.algorithm][row.repetition];
    if (row.batch >= slot.first) slot = {row.batch, row.cum_regret};
  }
  const auto base = latest.find(baseline);
  if (base == latest.end())
    throw std::invalid_argument("relative_regret: no algorithm labeled '" +
                                baseline + "'");

  std::map<std::string, MeanStderr> out;
  for (const auto& [alg, reps] : latest) {
    std::vector<double> ratios;
    for (const auto& [rep, batch_value] : reps) {
      const auto base_rep = base->second.find(rep);
      if (base_rep == base->second.end())
        throw std::invalid_argument(
            "relative_regret: baseline missing repetition " +
            std::to_string(rep));
      const double denom = base_rep->second.second;
      if (denom == 0.0)
        throw std::invalid_argument(
            "relative_regret: baseline regret is zero in repetition " +
            std::to_string(rep));
      ratios.push_back(100.0 * batch_value.second / denom);
    }
    out[alg] = mean_stderr(ratios);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Outputs
// ---------------------------------------------------------------------------

namespace detail {

inline std::string fmt_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

inline constexpr const char* kBatchesCsvHeader =
    "algorithm,repetition,batch,trials,reward_sum,oracle_expected_sum,"
    "chosen_expected_sum,cum_ctr,cum_regret";

inline void write_batches_csv(const ExperimentLog& log, std::ostream& os) {
  os << kBatchesCsvHeader << "\n";
  for (const BatchRow& row : log) {
    os << row.algorithm << ',' << row.repetition << ',' << row.batch << ','
       << row.trials << ',' << detail::fmt_double(row.reward_sum) << ','
       << detail::fmt_double(row.oracle_expected_sum) << ','
       << detail::fmt_double(row.chosen_expected_sum) << ','
       << detail::fmt_double(row.cum_ctr) << ','
       << detail::fmt_double(row.cum_regret) << "\n";
  }
}

inline ExperimentLog read_batches_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("batches csv: empty file");
  if (line == std::string(kBatchesCsvHeader) + "\r") line.pop_back();
  if (line != kBatchesCsvHeader)
    throw std::runtime_error("batches csv: unexpected header");
  ExperimentLog log;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
      const std::size_t comma = line.find(',', start);
      parts.push_back(line.substr(start, comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (parts.size() != 9)
      throw std::runtime_error("batches csv: malformed row '" + line + "'");
    BatchRow row;
    row.algorithm = parts[0];
    row.repetition = std::stoi(parts[1]);
    row.batch = std::stoi(parts[2]);
    row.trials = std::stoi(parts[3]);
    row.reward_sum = std::stod(parts[4]);
    row.oracle_expected_sum = std::stod(parts[5]);
    row.chosen_expected_sum = std::stod(parts[6]);
    row.cum_ctr = std::stod(parts[7]);
    row.cum_regret = std::stod(parts[8]);
    log.push_back(std::move(row));
  }
  return log;
}

// Per-algorithm final metrics, mean +/- standard error across repetitions.
inline nlohmann::ordered_json summarize(const ExperimentConfig& cfg,
                                        const ExperimentLog& log) {
  nlohmann::ordered_json out;
  out["experiment"] = {{"name", cfg.name},
                       {"seed", cfg.seed},
                       {"trials_per_batch", cfg.trials_per_batch},
                       {"batches", cfg.batches},
                       {"repetitions", cfg.repetitions},
                       {"environment", cfg.env.kind}};

  const auto ctr = final_values(log, &BatchRow::cum_ctr);
  const auto regret = final_values(log, &BatchRow::cum_regret);
  const bool has_uniform = ctr.count("Uniform") > 0;
  std::map<std::string, MeanStderr> relative;
  if (has_uniform) relative = relative_regret(log, "Uniform");

  nlohmann::ordered_json algs = nlohmann::ordered_json::object();
  // Config block order, not map order, so the summary mirrors the experiment.
  std::vector<std::string> order;
  for (const bandit::AlgorithmSpec& spec : cfg.algorithms)
    if (ctr.count(spec.label) > 0) order.push_back(spec.label);
  for (const auto& [alg, values] : ctr)
    if (std::find(order.begin(), order.end(), alg) == order.end())
      order.push_back(alg);

  for (const std::string& alg : order) {
    const MeanStderr c = mean_stderr(ctr.at(alg));
    const MeanStderr r = mean_stderr(regret.at(alg));
    nlohmann::ordered_json entry;
    entry["final_cum_ctr"] = {{"mean", c.mean}, {"stderr", c.stderr_}};
    entry["final_cum_regret"] = {{"mean", r.mean}, {"stderr", r.stderr_}};
    if (has_uniform) {
      const MeanStderr rel = relative.at(alg);
      entry["relative_regret"] = {{"mean", rel.mean}, {"stderr", rel.stderr_}};
    }
    algs[alg] = std::move(entry);
  }
  out["algorithms"] = std::move(algs);
  if (has_uniform) out["baseline"] = "Uniform";
  return out;
}

// ---------------------------------------------------------------------------
// Plots: two-panel SVG learning curves (mean over repetitions per batch)
// ---------------------------------------------------------------------------

namespace detail {

inline constexpr const char* kPalette[] = {
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f",
    "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac"};
inline constexpr int kPaletteSize = 10;

struct Curve {
  std::string label;
  std::vector<double> y;  // per batch, mean over repetitions
};

inline std::vector<Curve> mean_curves(const ExperimentLog& log,
                                      double BatchRow::*column) {
  std::map<std::string, std::map<int, std::pair<int, double>>> acc;
  std::vector<std::string> order;
  for (const BatchRow& row : log) {
    if (acc.find(row.algorithm) == acc.end()) order.push_back(row.algorithm);
    auto& slot = acc[row.algorithm][row.batch];
    slot.first += 1;
    slot.second += row.*column;
  }
  std::vector<Curve> curves;
  for (const std::string& alg : order) {
    Curve c;
    c.label = alg;
    for (const auto& [batch, count_sum] : acc[alg])
      c.y.push_back(count_sum.second / count_sum.first);
    curves.push_back(std::move(c));
  }
  return curves;
}

inline void svg_panel(std::ostream& os, const std::vector<Curve>& curves,
                      const std::string& title, double x0, double y0,
                      double width, double height) {
  double lo = 0.0, hi = 1.0;
  bool first = true;
  std::size_t batches = 0;
  for (const Curve& c : curves) {
    batches = std::max(batches, c.y.size());
    for (double v : c.y) {
      if (first) {
        lo = hi = v;
        first = false;
      } else {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  const double pad_l = 64.0, pad_r = 16.0, pad_t = 28.0, pad_b = 32.0;
  const double plot_w = width - pad_l - pad_r;
  const double plot_h = height - pad_t - pad_b;

  os << "<g>\n";
  os << "<rect x='" << x0 + pad_l << "' y='" << y0 + pad_t << "' width='"
     << plot_w << "' height='" << plot_h
     << "' fill='none' stroke='#999' stroke-width='1'/>\n";
  os << "<text x='" << x0 + width / 2 << "' y='" << y0 + 18
     << "' text-anchor='middle' font-size='14' fill='#333'>" << title
     << "</text>\n";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4g", hi);
  os << "<text x='" << x0 + pad_l - 6 << "' y='" << y0 + pad_t + 4
     << "' text-anchor='end' font-size='11' fill='#333'>" << buf
     << "</text>\n";
  std::snprintf(buf, sizeof buf, "%.4g", lo);
  os << "<text x='" << x0 + pad_l - 6 << "' y='" << y0 + pad_t + plot_h
     << "' text-anchor='end' font-size='11' fill='#333'>" << buf
     << "</text>\n";
  os << "<text x='" << x0 + pad_l << "' y='" << y0 + height - 8
     << "' text-anchor='middle' font-size='11' fill='#333'>0</text>\n";
  os << "<text x='" << x0 + pad_l + plot_w << "' y='" << y0 + height - 8
     << "' text-anchor='middle' font-size='11' fill='#333'>"
     << (batches == 0 ? 0 : batches - 1) << "</text>\n";

  // Cap points per polyline; long runs get every k-th batch plus the last.
  const std::size_t max_points = 400;
  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const Curve& c = curves[ci];
    if (c.y.empty()) continue;
    const std::size_t stride = std::max<std::size_t>(1, c.y.size() / max_points);
    os << "<polyline fill='none' stroke='"
       << kPalette[ci % kPaletteSize] << "' stroke-width='1.5' points='";
    auto emit = [&](std::size_t i) {
      const double fx = c.y.size() <= 1
                            ? 0.0
                            : static_cast<double>(i) /
                                  static_cast<double>(c.y.size() - 1);
      const double fy = (c.y[i] - lo) / (hi - lo);
      std::snprintf(buf, sizeof buf, "%.1f,%.1f ", x0 + pad_l + fx * plot_w,
                    y0 + pad_t + (1.0 - fy) * plot_h);
      os << buf;
    };
    for (std::size_t i = 0; i < c.y.size(); i += stride) emit(i);
    if ((c.y.size() - 1) % stride != 0) emit(c.y.size() - 1);
    os << "'/>\n";
  }
  os << "</g>\n";
}

}  // namespace detail

inline void write_curves_svg(const ExperimentLog& log, std::ostream& os) {
  const std::vector<detail::Curve> ctr =
      detail::mean_curves(log, &BatchRow::cum_ctr);
  const std::vector<detail::Curve> regret =
      detail::mean_curves(log, &BatchRow::cum_regret);
  const double panel_w = 460.0, panel_h = 300.0, legend_h =
      24.0 + 16.0 * static_cast<double>(ctr.size());
  const double width = 2 * panel_w + 20.0;
  const double height = panel_h + legend_h;

  os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
     << "' height='" << height << "' viewBox='0 0 " << width << ' ' << height
     << "'>\n";
  os << "<rect width='100%' height='100%' fill='white'/>\n";
  detail::svg_panel(os, ctr, "cumulative mean reward", 0.0, 0.0, panel_w,
                    panel_h);
  detail::svg_panel(os, regret, "cumulative regret", panel_w + 20.0, 0.0,
                    panel_w, panel_h);
  for (std::size_t i = 0; i < ctr.size(); ++i) {
    const double y = panel_h + 16.0 + 16.0 * static_cast<double>(i);
    os << "<rect x='24' y='" << y - 9 << "' width='18' height='4' fill='"
       << detail::kPalette[i % detail::kPaletteSize] << "'/>\n";
    os << "<text x='48' y='" << y << "' font-size='12' fill='#333'>"
       << ctr[i].label << "</text>\n";
  }
  os << "</svg>\n";
}

// Writes batches.csv, summary.json, and curves.svg under out_dir.
inline void write_outputs(const ExperimentConfig& cfg, const ExperimentLog& log,
                          const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "batches.csv", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write batches.csv in " + out_dir);
    write_batches_csv(log, os);
  }
  {
    std::ofstream os(fs::path(out_dir) / "summary.json", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write summary.json in " + out_dir);
    os << summarize(cfg, log).dump(2) << "\n";
  }
  {
    std::ofstream os(fs::path(out_dir) / "curves.svg", std::ios::binary);
    if (!os) throw std::runtime_error("cannot write curves.svg in " + out_dir);
    write_curves_svg(log, os);
  }
}

}  // namespace autoco::harness
