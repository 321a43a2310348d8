#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "autoco/features.hpp"
#include "autoco/model.hpp"
#include "autoco/rng.hpp"

namespace autoco::envs {

// ---------------------------------------------------------------------------
// Synthetic creative-composition world
// ---------------------------------------------------------------------------

// A simulated catalog: each product owns a fixed list of candidate creatives
// (element combinations), and a hidden interaction model assigns every
// (product, candidate) cell a ground-truth CTR.  Worlds are immutable after
// generation; reward draws take an external rng.
struct SyntheticConfig {
  std::vector<std::string> element_names = {"template", "picture_size", "font",
                                            "blur", "color"};
  std::vector<int> element_cards = {4, 5, 10, 2, 10};
  int products = 167;
  int candidates_per_product = 67;
  bool jitter_candidates = false;  // Poisson around candidates_per_product
  int hidden_dim = 8;
  double hidden_emb_std = 0.3;  // spread that keeps pre-calibration logits
                                // informative
  double target_mean_ctr = 0.0885;
};

struct SyntheticWorld {
  SyntheticConfig config;
  std::uint64_t seed = 0;

  FieldSchema schema;     // element fields plus a trailing product-id field
  int product_field = 0;  // index of the product-id field

  // Per product: candidate creatives and their ground-truth CTRs, plus
  // precomputed per-product aggregates for oracle and baseline checks.
  std::vector<std::vector<FeatureVector>> candidates;
  std::vector<std::vector<double>> true_ctr;
  std::vector<int> best_index;
  std::vector<double> best_ctr;
  std::vector<double> product_mean_ctr;

  // Generator metadata, recorded for the world artifact.
  std::vector<Op> hidden_ops;
  double bias = 0.0;      // calibrated global offset
  double mean_ctr = 0.0;  // realized mean over all cells

  int product_count() const { return static_cast<int>(candidates.size()); }

  std::size_t cell_count() const {
    std::size_t n = 0;
    for (const auto& c : candidates) n += c.size();
    return n;
  }

  // Index of a candidate in its product's list, or -1 if it does not belong.
  int find_candidate(int product, const FeatureVector& x) const {
    const auto& list = candidates[static_cast<std::size_t>(product)];
    for (std::size_t i = 0; i < list.size(); ++i)
      if (list[i] == x) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

// Poisson draw via Knuth's product method; the rates used here (tens of
// candidates) keep exp(-lambda) comfortably inside double range.
inline int poisson(Rng& rng, double lambda) {
  const double limit = std::exp(-lambda);
  int k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return k - 1;
}

}  // namespace detail

inline SyntheticWorld synth_generate(const SyntheticConfig& config,
                                     std::uint64_t seed) {
  if (config.element_names.size() != config.element_cards.size())
    throw std::invalid_argument(
        "synth_generate: element names/cardinalities size mismatch");
  if (config.element_names.empty())
    throw std::invalid_argument("synth_generate: need at least one element");
  if (config.products < 1 || config.candidates_per_product < 1)
    throw std::invalid_argument("synth_generate: counts must be positive");

  std::int64_t combos = 1;
  for (int c : config.element_cards) {
    if (c < 1)
      throw std::invalid_argument("synth_generate: element cardinality < 1");
    combos *= c;
  }
  if (config.candidates_per_product > combos)
    throw std::invalid_argument(
        "synth_generate: more candidates per product than combinations");

  SyntheticWorld w;
  w.config = config;
  w.seed = seed;

  std::vector<Field> fields;
  for (std::size_t i = 0; i < config.element_names.size(); ++i)
    fields.push_back(Field{config.element_names[i], config.element_cards[i]});
  fields.push_back(Field{"product", config.products});
  w.schema = FieldSchema(std::move(fields));
  w.product_field = static_cast<int>(config.element_names.size());

  Rng rng(seed);

  // Hidden scorer: one uniformly random operator per field pair over
  // operation-aware Gaussian embeddings, with default random scalar heads.
  const int pairs = w.schema.pair_count();
  w.hidden_ops.reserve(static_cast<std::size_t>(pairs));
  for (int p = 0; p < pairs; ++p)
    w.hidden_ops.push_back(static_cast<Op>(rng.uniform_int(kNumOps)));
  ModelParams hidden =
      init_model(w.schema, config.hidden_dim, /*operation_aware=*/true,
                 ModelInit{.emb_std = config.hidden_emb_std}, rng);
  auto hidden_rows = [&hidden](int f, int k, int r) {
    return hidden.emb.row(f, k, r);
  };

  // Candidate lists: a without-replacement draw from the element grid per
  // product (partial Fisher-Yates over combination ids, kept in ascending id
  // order so list positions are reproducible and meaningful).
  w.candidates.resize(static_cast<std::size_t>(config.products));
  w.true_ctr.resize(static_cast<std::size_t>(config.products));
  std::vector<std::int64_t> ids(static_cast<std::size_t>(combos));
  std::vector<double> logits;
  logits.reserve(w.cell_count());
  for (int p = 0; p < config.products; ++p) {
    int count = config.candidates_per_product;
    if (config.jitter_candidates)
      count = std::clamp(detail::poisson(rng, config.candidates_per_product), 1,
                         static_cast<int>(combos));

    std::iota(ids.begin(), ids.end(), std::int64_t{0});
    for (int t = 0; t < count; ++t)
      std::swap(ids[static_cast<std::size_t>(t)],
                ids[static_cast<std::size_t>(
                    t + rng.uniform_int(static_cast<int>(combos) - t))]);
    std::sort(ids.begin(), ids.begin() + count);

    auto& list = w.candidates[static_cast<std::size_t>(p)];
    list.reserve(static_cast<std::size_t>(count));
    for (int t = 0; t < count; ++t) {
      std::int64_t id = ids[static_cast<std::size_t>(t)];
      FeatureVector x;
      x.values.reserve(config.element_cards.size() + 1);
      for (int c : config.element_cards) {
        x.values.push_back(static_cast<std::int32_t>(id % c));
        id /= c;
      }
      x.values.push_back(static_cast<std::int32_t>(p));
      logits.push_back(selected_logit(x, w.hidden_ops, hidden_rows,
                                      hidden.heads, hidden.first,
                                      config.hidden_dim));
      list.push_back(std::move(x));
    }
  }

  // Calibrate the global bias by bisection: mean sigmoid(z + b) is strictly
  // increasing in b, so this pins the realized mean CTR to the target up to
  // floating-point resolution.
  const double inv_cells = 1.0 / static_cast<double>(logits.size());
  auto mean_ctr_at = [&](double b) {
    double s = 0.0;
    for (double z : logits) s += sigmoid(z + b);
    return s * inv_cells;
  };
  double lo = -40.0;
  double hi = 40.0;
  for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mean_ctr_at(mid) < config.target_mean_ctr ? lo : hi) = mid;
  }
  w.bias = 0.5 * (lo + hi);

  std::size_t cell = 0;
  double total = 0.0;
  for (int p = 0; p < config.products; ++p) {
    auto& ctrs = w.true_ctr[static_cast<std::size_t>(p)];
    const std::size_t n = w.candidates[static_cast<std::size_t>(p)].size();
    ctrs.reserve(n);
    int best = 0;
    double product_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i, ++cell) {
      const double ctr =
          std::clamp(sigmoid(logits[cell] + w.bias), 1e-12, 1.0 - 1e-12);
      ctrs.push_back(ctr);
      product_sum += ctr;
      if (ctr > ctrs[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    w.best_index.push_back(best);
    w.best_ctr.push_back(ctrs[static_cast<std::size_t>(best)]);
    w.product_mean_ctr.push_back(product_sum / static_cast<double>(n));
    total += product_sum;
  }
  w.mean_ctr = total * inv_cells;
  return w;
}

// Bernoulli click draw for a candidate resolved by list index (the fast path
// for callers that already hold the index).
inline int synth_step_indexed(const SyntheticWorld& world, int product,
                              int candidate, Rng& rng) {
  return rng.bernoulli(world.true_ctr[static_cast<std::size_t>(product)]
                                     [static_cast<std::size_t>(candidate)])
             ? 1
             : 0;
}

// Bernoulli click draw for a candidate given by value; rejects creatives that
// do not belong to the product's list.
inline int synth_step(const SyntheticWorld& world, int product,
                      const FeatureVector& candidate, Rng& rng) {
  if (product < 0 || product >= world.product_count())
    throw std::out_of_range("synth_step: bad product id");
  const int idx = world.find_candidate(product, candidate);
  if (idx < 0)
    throw std::invalid_argument(
        "synth_step: candidate does not belong to product " +
        std::to_string(product));
  return synth_step_indexed(world, product, idx, rng);
}

// Best candidate of a product and its expected reward.
inline std::pair<int, double> synth_oracle(const SyntheticWorld& world,
                                           int product) {
  return {world.best_index[static_cast<std::size_t>(product)],
          world.best_ctr[static_cast<std::size_t>(product)]};
}

// Single-file world artifact: schema, per-cell candidates and CTRs, and the
// generator metadata needed to audit or regenerate it.
inline void save_world_json(const std::string& path,
                            const SyntheticWorld& world) {
  nlohmann::ordered_json j;
  auto& schema = j["schema"] = nlohmann::ordered_json::array();
  for (int f = 0; f < world.schema.field_count(); ++f)
    schema.push_back({{"name", world.schema.field(f).name},
                      {"cardinality", world.schema.field(f).cardinality}});

  nlohmann::ordered_json ops;
  int p = 0;
  for (int i = 0; i < world.schema.field_count(); ++i)
    for (int k = i + 1; k < world.schema.field_count(); ++k, ++p)
      ops[std::to_string(i) + "," + std::to_string(k)] =
          op_name(world.hidden_ops[static_cast<std::size_t>(p)]);
  j["generator"] = {{"seed", world.seed},
                    {"hidden_dim", world.config.hidden_dim},
                    {"hidden_emb_std", world.config.hidden_emb_std},
                    {"target_mean_ctr", world.config.target_mean_ctr},
                    {"bias", world.bias},
                    {"mean_ctr", world.mean_ctr},
                    {"operators", std::move(ops)}};

  auto& cells = j["products"] = nlohmann::ordered_json::array();
  for (int q = 0; q < world.product_count(); ++q) {
    nlohmann::ordered_json entry;
    entry["product"] = q;
    auto& cand = entry["candidates"] = nlohmann::ordered_json::array();
    for (const FeatureVector& x : world.candidates[static_cast<std::size_t>(q)])
      cand.push_back(x.values);
    entry["true_ctr"] = world.true_ctr[static_cast<std::size_t>(q)];
    cells.push_back(std::move(entry));
  }

  std::ofstream out(path, std::ios::trunc);
  if (!out)
    throw std::runtime_error("cannot write world artifact: " + path);
  out << j.dump() << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Replay bandits over the UCI datasets
// ---------------------------------------------------------------------------

enum class ReplayKind { kMushroom, kAdult };

// A labeled dataset replayed as a two-action bandit.  A binary action field
// is appended to the context so one shared model scores both arms of a round
// from a single feature vector.
//
// Rewards (raw scale, used for regret accounting):
//   mushroom: act on a safe record +5; act on an unsafe record +5 or -35 with
//             equal probability (expectation -15); pass 0
//   adult:    1 if the action matches the record's label, else 0
//
// unit_reward() maps raw rewards affinely into [0, 1] for model training.
struct ReplayBandit {
  ReplayKind kind = ReplayKind::kMushroom;
  std::shared_ptr<const CategoricalDataset> data;
  FieldSchema schema;  // context fields plus the trailing action field
  int action_field = 0;

  static ReplayBandit make(ReplayKind kind,
                           std::shared_ptr<const CategoricalDataset> data) {
    ReplayBandit env;
    env.kind = kind;
    env.data = std::move(data);
    std::vector<Field> fields;
    for (int f = 0; f < env.data->schema.field_count(); ++f)
      fields.push_back(env.data->schema.field(f));
    fields.push_back(Field{"action", 2});
    env.schema = FieldSchema(std::move(fields));
    env.action_field = env.data->schema.field_count();
    return env;
  }

  std::size_t records() const { return data->size(); }

  bool positive_label(std::size_t record) const {
    return data->labels[record] != 0;
  }

  // The two arms of a round: context with action 0 (pass / predict negative)
  // and action 1 (act / predict positive).
  std::array<FeatureVector, 2> arms(std::size_t record) const {
    std::array<FeatureVector, 2> out;
    for (int a = 0; a < 2; ++a) {
      out[static_cast<std::size_t>(a)].values = data->rows[record].values;
      out[static_cast<std::size_t>(a)].values.push_back(a);
    }
    return out;
  }

  double step(std::size_t record, int action, Rng& rng) const {
    if (action != 0 && action != 1)
      throw std::invalid_argument("ReplayBandit::step: bad action");
    switch (kind) {
      case ReplayKind::kMushroom:
        if (action == 0) return 0.0;
        if (positive_label(record)) return 5.0;
        return rng.bernoulli(0.5) ? 5.0 : -35.0;
      case ReplayKind::kAdult:
        return action == (positive_label(record) ? 1 : 0) ? 1.0 : 0.0;
    }
    throw std::logic_error("ReplayBandit::step: unknown kind");
  }

  double expected_reward(std::size_t record, int action) const {
    switch (kind) {
      case ReplayKind::kMushroom:
        if (action == 0) return 0.0;
        return positive_label(record) ? 5.0 : -15.0;
      case ReplayKind::kAdult:
        return action == (positive_label(record) ? 1 : 0) ? 1.0 : 0.0;
    }
    throw std::logic_error("ReplayBandit::expected_reward: unknown kind");
  }

  std::pair<int, double> oracle(std::size_t record) const {
    switch (kind) {
      case ReplayKind::kMushroom:
        return positive_label(record) ? std::pair<int, double>{1, 5.0}
                                      : std::pair<int, double>{0, 0.0};
      case ReplayKind::kAdult:
        return {positive_label(record) ? 1 : 0, 1.0};
    }
    throw std::logic_error("ReplayBandit::oracle: unknown kind");
  }

  // Affine map of raw rewards into [0, 1] so the click model's Bernoulli
  // likelihood applies: mushroom {-35, 0, +5} -> {0, 0.875, 1}, adult is
  // already binary.
  double unit_reward(double raw) const {
    return kind == ReplayKind::kMushroom ? (raw + 35.0) / 40.0 : raw;
  }
};

inline ReplayBandit make_mushroom(
    std::shared_ptr<const CategoricalDataset> data) {
  return ReplayBandit::make(ReplayKind::kMushroom, std::move(data));
}

inline ReplayBandit make_adult(std::shared_ptr<const CategoricalDataset> data) {
  return ReplayBandit::make(ReplayKind::kAdult, std::move(data));
}

}  // namespace autoco::envs
