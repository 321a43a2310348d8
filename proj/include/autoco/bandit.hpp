#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "autoco/bayes.hpp"
#include "autoco/features.hpp"
#include "autoco/model.hpp"
#include "autoco/rng.hpp"
#include "autoco/search.hpp"

namespace autoco::bandit {

// One logged interaction: the chosen candidate's features, the raw reward
// (regret/means accounting), and its affine map into [0, 1] (model training
// target).
struct Observation {
  FeatureVector x;
  double reward = 0.0;
  double unit_reward = 0.0;
};

// Outcome of one selection request: the chosen candidate plus every
// candidate's score under the policy, for logging.
struct Decision {
  int chosen = -1;
  std::vector<double> scores;
};

// Argmax with ties broken toward the lowest index, the tie rule used
// everywhere in this library.
inline int argmax_lowest(std::span<const double> scores) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(scores.size()); ++i)
    if (scores[static_cast<std::size_t>(i)] >
        scores[static_cast<std::size_t>(best)])
      best = i;
  return best;
}

// Selection strategies consume an external rng so a seeded replay of
// (state, candidates, draws) reproduces every decision exactly.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual Decision select(const std::vector<FeatureVector>& candidates,
                          Rng& rng) = 0;

  // Delayed feedback: the harness delivers each batch's observations in one
  // call.  An empty batch is a no-op.
  virtual void update(const std::vector<Observation>& batch, Rng& rng) = 0;
};

namespace detail {

inline void check_candidates(const std::vector<FeatureVector>& candidates) {
  if (candidates.empty())
    throw std::invalid_argument("select: empty candidate list");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Context-free policies
// ---------------------------------------------------------------------------

class UniformPolicy final : public Policy {
 public:
  Decision select(const std::vector<FeatureVector>& candidates,
                  Rng& rng) override {
    detail::check_candidates(candidates);
    Decision d;
    d.scores.assign(candidates.size(), 0.0);
    d.chosen = rng.uniform_int(static_cast<int>(candidates.size()));
    return d;
  }

  void update(const std::vector<Observation>&, Rng&) override {}
};

// Per-arm statistics keyed by the full feature vector: candidates are arms,
// and a revisited candidate carries its history.
struct ArmStats {
  double count = 0.0;
  double sum = 0.0;
};

using ArmTable = std::map<std::vector<std::int32_t>, ArmStats>;

// Epsilon-greedy over empirical mean raw reward per arm; unseen arms score 0.
class EgreedyPolicy final : public Policy {
 public:
  explicit EgreedyPolicy(double epsilon) : epsilon_(epsilon) {
    if (epsilon < 0.0 || epsilon > 1.0)
      throw std::invalid_argument("EgreedyPolicy: epsilon outside [0, 1]");
  }

  Decision select(const std::vector<FeatureVector>& candidates,
                  Rng& rng) override {
    detail::check_candidates(candidates);
    Decision d;
    d.scores.reserve(candidates.size());
    for (const FeatureVector& x : candidates) {
      auto it = arms_.find(x.values);
      d.scores.push_back(it == arms_.end() || it->second.count == 0.0
                             ? 0.0
                             : it->second.sum / it->second.count);
    }
    if (rng.uniform() < epsilon_)
      d.chosen = rng.uniform_int(static_cast<int>(candidates.size()));
    else
      d.chosen = argmax_lowest(d.scores);
    return d;
  }

  void update(const std::vector<Observation>& batch, Rng&) override {
    for (const Observation& obs : batch) {
      ArmStats& arm = arms_[obs.x.values];
      arm.count += 1.0;
      arm.sum += obs.reward;
    }
  }

  const ArmTable& arms() const { return arms_; }

 private:
  double epsilon_;
  ArmTable arms_;
};

// Per-arm Beta Thompson sampling with a heavily pessimistic prior, matching a
// click-rate regime where almost all impressions miss.  Fractional unit
// rewards update the pseudo-counts proportionally.
class BetaTsPolicy final : public Policy {
 public:
  BetaTsPolicy(double prior_alpha, double prior_beta)
      : prior_alpha_(prior_alpha), prior_beta_(prior_beta) {
    if (prior_alpha <= 0.0 || prior_beta <= 0.0)
      throw std::invalid_argument("BetaTsPolicy: prior must be positive");
  }

  Decision select(const std::vector<FeatureVector>& candidates,
                  Rng& rng) override {
    detail::check_candidates(candidates);
    Decision d;
    d.scores.reserve(candidates.size());
    for (const FeatureVector& x : candidates) {
      double a = prior_alpha_;
      double b = prior_beta_;
      if (auto it = arms_.find(x.values); it != arms_.end()) {
        a += it->second.sum;
        b += it->second.count - it->second.sum;
      }
      d.scores.push_back(rng.beta(a, b));
    }
    d.chosen = argmax_lowest(d.scores);
    return d;
  }

  void update(const std::vector<Observation>& batch, Rng&) override {
    for (const Observation& obs : batch) {
      ArmStats& arm = arms_[obs.x.values];
      arm.count += 1.0;
      arm.sum += obs.unit_reward;
    }
  }

  const ArmTable& arms() const { return arms_; }

 private:
  double prior_alpha_;
  double prior_beta_;
  ArmTable arms_;  // count = pulls, sum = accumulated unit reward
};

// ---------------------------------------------------------------------------
// Linear contextual policies (LinUCB / LinTS / the multivariate tester)
// ---------------------------------------------------------------------------

// Sparse binary featurizations.  Both return the active indices of an
// implicit 0/1 vector.

// One-hot over every field, unknown slots included, so any valid
// FeatureVector featurizes.
inline int onehot_dim(const FieldSchema& schema) {
  int n = 0;
  for (int f = 0; f < schema.field_count(); ++f) n += schema.rows(f);
  return n;
}

inline std::vector<int> onehot_featurize(const FeatureVector& x,
                                         const FieldSchema& schema) {
  validate_features(x, schema);
  std::vector<int> active;
  active.reserve(x.values.size());
  int offset = 0;
  for (int f = 0; f < schema.field_count(); ++f) {
    active.push_back(offset + x.values[static_cast<std::size_t>(f)]);
    offset += schema.rows(f);
  }
  return active;
}

// Per-field one-hots plus one indicator per cross-category pair (i < j): the
// quadratic expansion a linear tester runs over.  Unknown slots carry no
// indicator, so out-of-vocabulary values simply contribute nothing.
inline int mvt_dim(const FieldSchema& schema) {
  int base = 0;
  int cross = 0;
  for (int i = 0; i < schema.field_count(); ++i) {
    base += schema.field(i).cardinality;
    for (int j = i + 1; j < schema.field_count(); ++j)
      cross += schema.field(i).cardinality * schema.field(j).cardinality;
  }
  return base + cross;
}

inline std::vector<int> mvt_featurize(const FeatureVector& x,
                                      const FieldSchema& schema) {
  validate_features(x, schema);
  const int L = schema.field_count();
  std::vector<int> active;
  active.reserve(static_cast<std::size_t>(L + L * (L - 1) / 2));

  int offset = 0;
  for (int f = 0; f < L; ++f) {
    const int v = x.values[static_cast<std::size_t>(f)];
    if (v < schema.field(f).cardinality) active.push_back(offset + v);
    offset += schema.field(f).cardinality;
  }
  for (int i = 0; i < L; ++i) {
    const int li = schema.field(i).cardinality;
    const int vi = x.values[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < L; ++j) {
      const int lj = schema.field(j).cardinality;
      const int vj = x.values[static_cast<std::size_t>(j)];
      if (vi < li && vj < lj) active.push_back(offset + vi * lj + vj);
      offset += li * lj;
    }
  }
  return active;
}

namespace detail {

// Dense symmetric positive definite solves via an in-place lower Cholesky
// factor; dimensions here are a few hundred at most.
inline void cholesky(int n, const std::vector<double>& a,
                     std::vector<double>& l) {
  l.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j <= i; ++j) {
      double s = a[static_cast<std::size_t>(i) * n + j];
      for (int k = 0; k < j; ++k)
        s -= l[static_cast<std::size_t>(i) * n + k] *
             l[static_cast<std::size_t>(j) * n + k];
      if (i == j) {
        if (s <= 0.0)
          throw std::runtime_error("cholesky: matrix not positive definite");
        l[static_cast<std::size_t>(i) * n + j] = std::sqrt(s);
      } else {
        l[static_cast<std::size_t>(i) * n + j] =
            s / l[static_cast<std::size_t>(j) * n + j];
      }
    }
  }
}

// Solves L y = b in place.
inline void solve_lower(int n, const std::vector<double>& l,
                        std::vector<double>& y) {
  for (int i = 0; i < n; ++i) {
    double s = y[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k)
      s -= l[static_cast<std::size_t>(i) * n + k] *
           y[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(i)] = s / l[static_cast<std::size_t>(i) * n + i];
  }
}

// Solves L^T y = b in place.
inline void solve_upper(int n, const std::vector<double>& l,
                        std::vector<double>& y) {
  for (int i = n - 1; i >= 0; --i) {
    double s = y[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < n; ++k)
      s -= l[static_cast<std::size_t>(k) * n + i] *
           y[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(i)] = s / l[static_cast<std::size_t>(i) * n + i];
  }
}

}  // namespace detail

enum class LinMode { kUcb, kTs, kGreedy };

struct LinearConfig {
  LinMode mode = LinMode::kUcb;
  double alpha_ucb = 1.0;     // UCB exploration width
  double ridge_lambda = 1.0;  // A = lambda I + sum x x^T
  double ts_scale = 0.25;     // posterior scale v for sampling
  bool poly2 = false;         // quadratic (multivariate-tester) features
  // Optional per-field mask (1 = featurize); empty means all fields.  Lets
  // the tester run over element fields only while candidates still carry a
  // product id.
  std::vector<std::uint8_t> field_mask;
};

// Shared ridge model over sparse binary features with three selection rules:
// deterministic argmax of x'theta_hat (greedy), optimism via
// alpha * sqrt(x' A^-1 x) (UCB), or a posterior draw theta_hat + v L^-T z
// (TS).  One posterior draw per selection request.  A and b absorb rank-1
// updates; the factor/inverse refresh is deferred to the next select, so a
// batch of updates pays for one refresh.
class LinearPolicy final : public Policy {
 public:
  LinearPolicy(const FieldSchema& schema, const LinearConfig& config)
      : schema_(schema), config_(config) {
    if (config.ridge_lambda <= 0.0)
      throw std::invalid_argument("LinearPolicy: ridge lambda must be > 0");
    if (!config.field_mask.empty() &&
        config.field_mask.size() !=
            static_cast<std::size_t>(schema.field_count()))
      throw std::invalid_argument("LinearPolicy: field mask size mismatch");

    masked_schema_ = masked(schema, config.field_mask);
    dim_ = config.poly2 ? mvt_dim(masked_schema_) : onehot_dim(masked_schema_);
    a_.assign(static_cast<std::size_t>(dim_) * dim_, 0.0);
    for (int i = 0; i < dim_; ++i)
      a_[static_cast<std::size_t>(i) * dim_ + i] = config.ridge_lambda;
    b_.assign(static_cast<std::size_t>(dim_), 0.0);
  }

  int dim() const { return dim_; }

  Decision select(const std::vector<FeatureVector>& candidates,
                  Rng& rng) override {
    detail::check_candidates(candidates);
    refresh_if_stale();

    // TS: one sampled parameter vector scores the whole request.
    std::vector<double> theta_draw;
    if (config_.mode == LinMode::kTs) {
      theta_draw.resize(static_cast<std::size_t>(dim_));
      for (double& z : theta_draw) z = rng.normal();
      detail::solve_upper(dim_, chol_, theta_draw);
      for (int i = 0; i < dim_; ++i)
        theta_draw[static_cast<std::size_t>(i)] =
            theta_hat_[static_cast<std::size_t>(i)] +
            config_.ts_scale * theta_draw[static_cast<std::size_t>(i)];
    }

    Decision d;
    d.scores.reserve(candidates.size());
    for (const FeatureVector& x : candidates) {
      const std::vector<int> active = featurize(x);
      double score = 0.0;
      switch (config_.mode) {
        case LinMode::kGreedy:
          for (int p : active) score += theta_hat_[static_cast<std::size_t>(p)];
          break;
        case LinMode::kTs:
          for (int p : active) score += theta_draw[static_cast<std::size_t>(p)];
          break;
        case LinMode::kUcb: {
          double quad = 0.0;
          for (int p : active) {
            score += theta_hat_[static_cast<std::size_t>(p)];
            for (int q : active)
              quad += ainv_[static_cast<std::size_t>(p) * dim_ + q];
          }
          score += config_.alpha_ucb * std::sqrt(std::max(quad, 0.0));
          break;
        }
      }
      d.scores.push_back(score);
    }
    d.chosen = argmax_lowest(d.scores);
    return d;
  }

  void update(const std::vector<Observation>& batch, Rng&) override {
    for (const Observation& obs : batch) {
      const std::vector<int> active = featurize(obs.x);
      for (int p : active) {
        for (int q : active) a_[static_cast<std::size_t>(p) * dim_ + q] += 1.0;
        b_[static_cast<std::size_t>(p)] += obs.reward;
      }
      stale_ = true;
    }
  }

  // Exposed for tests: the ridge statistics and the current solve.
  const std::vector<double>& gram() const { return a_; }
  const std::vector<double>& moment() const { return b_; }
  const std::vector<double>& theta_hat() {
    refresh_if_stale();
    return theta_hat_;
  }

  std::vector<int> featurize(const FeatureVector& x) const {
    const FeatureVector* input = &x;
    FeatureVector projected;
    if (!config_.field_mask.empty()) {
      projected.values.reserve(x.values.size());
      for (std::size_t f = 0; f < config_.field_mask.size(); ++f)
        if (config_.field_mask[f]) projected.values.push_back(x.values[f]);
      input = &projected;
    }
    return config_.poly2 ? mvt_featurize(*input, masked_schema_)
                         : onehot_featurize(*input, masked_schema_);
  }

 private:
  static FieldSchema masked(const FieldSchema& schema,
                            const std::vector<std::uint8_t>& mask) {
    if (mask.empty()) return schema;
    std::vector<Field> fields;
    for (int f = 0; f < schema.field_count(); ++f)
      if (mask[static_cast<std::size_t>(f)]) fields.push_back(schema.field(f));
    return FieldSchema(std::move(fields));
  }

  void refresh_if_stale() {
    if (!stale_ && !chol_.empty()) return;
    detail::cholesky(dim_, a_, chol_);
    theta_hat_ = b_;
    detail::solve_lower(dim_, chol_, theta_hat_);
    detail::solve_upper(dim_, chol_, theta_hat_);
    if (config_.mode == LinMode::kUcb) {
      // Full inverse: selection-time quadratic forms over sparse candidates
      // then cost |active|^2 lookups.
      ainv_.assign(static_cast<std::size_t>(dim_) * dim_, 0.0);
      std::vector<double> col(static_cast<std::size_t>(dim_));
      for (int j = 0; j < dim_; ++j) {
        std::fill(col.begin(), col.end(), 0.0);
        col[static_cast<std::size_t>(j)] = 1.0;
        detail::solve_lower(dim_, chol_, col);
        detail::solve_upper(dim_, chol_, col);
        for (int i = 0; i < dim_; ++i)
          ainv_[static_cast<std::size_t>(i) * dim_ + j] =
              col[static_cast<std::size_t>(i)];
      }
    }
    stale_ = false;
  }

  FieldSchema schema_;
  FieldSchema masked_schema_;
  LinearConfig config_;
  int dim_ = 0;
  std::vector<double> a_;
  std::vector<double> b_;
  std::vector<double> chol_;
  std::vector<double> ainv_;
  std::vector<double> theta_hat_;
  bool stale_ = true;
};

// ---------------------------------------------------------------------------
// Factorized CTR-model policies
// ---------------------------------------------------------------------------

enum class SelectRule { kGreedy, kTs, kEgreedy };

// Configuration spanning the whole model-policy family.  The factory below
// derives the classic members (FM, FM-TS, fixed-operator TS, the searched
// model) from an AlgorithmSpec; every axis also stays individually reachable
// through the config file.
struct ModelPolicyConfig {
  int dim = 8;
  bool operation_aware = true;
  bool search = true;                // run the interaction-function search
  Op fixed_op = Op::kMultiply;       // used when search is off
  bool identity_heads = false;       // frozen all-ones heads (the FM form)
  bool train_heads = true;
  bool train_first = true;
  bool variational = true;           // off: point estimate (sigma frozen)
  SelectRule select = SelectRule::kTs;
  double epsilon = 0.2;              // explore rate for kEgreedy
  bool sample_per_batch = false;     // one posterior draw reused until the
                                     // next update (throughput mode)

  double eta_alpha = 1e-2;
  double eta_theta = 1e-3;
  double sigma0 = 1.0;
  double rho_init = kRhoInit;
  double kl_weight = 0.0;            // <= 0: adaptive 1/N over the replay store
  double mu_init_std = 0.01;

  int epochs = 1;                    // passes over the replay store per update
  int minibatch = 64;
  std::int64_t replay_cap = 0;       // 0: retain everything; else ring buffer
};

// Thompson-sampling CTR-model policy: scores candidates with the discretized
// interaction model under one posterior draw per request (or per batch), and
// trains by variational steps over a replay store of all past observations.
class ModelPolicy final : public Policy {
 public:
  ModelPolicy(const FieldSchema& schema, const ModelPolicyConfig& config,
              std::uint64_t init_seed)
      : schema_(schema), config_(config) {
    Rng rng(init_seed);
    ModelParams init = init_model(
        schema, config.dim, config.operation_aware,
        ModelInit{.emb_std = config.mu_init_std,
                  .identity_heads = config.identity_heads},
        rng);
    state_.dim = config.dim;
    state_.alpha = ArchWeights(schema.field_count(), kAlphaInit);
    state_.vp.mu = std::move(init.emb);
    state_.vp.rho = EmbeddingTables(schema, config.dim, config.operation_aware);
    state_.vp.rho.fill(config.rho_init);
    state_.heads = std::move(init.heads);
    state_.first = std::move(init.first);
    if (!config.search)
      fixed_ops_.assign(static_cast<std::size_t>(schema.pair_count()),
                        config.fixed_op);
    scratch_ = bayes_scratch();
    eps_scratch_ = EmbeddingTables(schema, config.dim, config.operation_aware);
  }

  std::vector<Op> selected_ops() const {
    return config_.search ? select_ops(state_.alpha) : fixed_ops_;
  }

  Decision select(const std::vector<FeatureVector>& candidates,
                  Rng& rng) override {
    detail::check_candidates(candidates);
    const std::vector<Op> ops = selected_ops();

    Decision d;
    d.scores.reserve(candidates.size());
    const bool ts = config_.select == SelectRule::kTs && config_.variational;
    if (ts && config_.sample_per_batch) {
      if (!batch_draw_) batch_draw_ = sample_theta(state_.vp, rng);
      score_with(candidates, ops,
                 [this](int f, int k, int r) { return batch_draw_->row(f, k, r); },
                 d.scores);
    } else if (ts) {
      LazyPosteriorRows rows(state_.vp, rng, /*mean_only=*/false);
      score_with(candidates, ops, std::ref(rows), d.scores);
    } else {
      score_with(candidates, ops,
                 [this](int f, int k, int r) { return state_.vp.mu.row(f, k, r); },
                 d.scores);
    }

    if (config_.select == SelectRule::kEgreedy && rng.uniform() < config_.epsilon)
      d.chosen = rng.uniform_int(static_cast<int>(candidates.size()));
    else
      d.chosen = argmax_lowest(d.scores);
    return d;
  }

  void update(const std::vector<Observation>& batch, Rng& rng) override {
    if (batch.empty()) return;
    for (const Observation& obs : batch) {
      if (config_.replay_cap > 0 &&
          static_cast<std::int64_t>(replay_.size()) >= config_.replay_cap) {
        replay_[replay_next_] = LabeledExample{obs.x, obs.unit_reward};
        replay_next_ = (replay_next_ + 1) % replay_.size();
      } else {
        replay_.push_back(LabeledExample{obs.x, obs.unit_reward});
      }
    }
    batch_draw_.reset();

    ViOptions opt;
    opt.eta_alpha = config_.eta_alpha;
    opt.eta_theta = config_.eta_theta;
    opt.kl_weight = config_.kl_weight > 0.0
                        ? config_.kl_weight
                        : 1.0 / static_cast<double>(replay_.size());
    opt.prior_std = config_.sigma0;
    opt.freeze_sigma = !config_.variational;
    opt.update_alpha = config_.search;
    opt.update_heads = config_.train_heads && !config_.identity_heads;
    opt.update_first = config_.train_first;
    if (!config_.search) opt.fixed_ops = &fixed_ops_;

    const std::size_t n = replay_.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<LabeledExample> minibatch;
    minibatch.reserve(static_cast<std::size_t>(config_.minibatch));
    for (int epoch = 0; epoch < config_.epochs; ++epoch) {
      for (std::size_t i = n; i > 1; --i)
        std::swap(order[i - 1],
                  order[static_cast<std::size_t>(
                      rng.uniform_int(static_cast<int>(i)))]);
      for (std::size_t start = 0; start < n;
           start += static_cast<std::size_t>(config_.minibatch)) {
        const std::size_t stop =
            std::min(n, start + static_cast<std::size_t>(config_.minibatch));
        minibatch.clear();
        for (std::size_t i = start; i < stop; ++i)
          minibatch.push_back(replay_[order[i]]);
        vi_step(minibatch, state_, opt, rng, scratch_, eps_scratch_);
      }
    }
  }

  // Posterior-mean CTR estimate, the quantity greedy selection maximizes.
  double mean_ctr(const FeatureVector& x) const {
    const std::vector<Op> ops = selected_ops();
    double z = selected_logit(
        x, ops, [this](int f, int k, int r) { return state_.vp.mu.row(f, k, r); },
        state_.heads, state_.first, state_.dim);
    return sigmoid(std::clamp(z, -kLogitClamp, kLogitClamp));
  }

  const ViState& state() const { return state_; }
  std::size_t replay_size() const { return replay_.size(); }

 private:
  ViGradients bayes_scratch() const {
    return make_vi_gradients(schema_, config_.dim, config_.operation_aware);
  }

  template <class RowFn>
  void score_with(const std::vector<FeatureVector>& candidates,
                  const std::vector<Op>& ops, RowFn&& rows,
                  std::vector<double>& scores) {
    for (const FeatureVector& x : candidates) {
      const double z = selected_logit(x, ops, rows, state_.heads, state_.first,
                                      state_.dim);
      scores.push_back(sigmoid(std::clamp(z, -kLogitClamp, kLogitClamp)));
    }
  }

  FieldSchema schema_;
  ModelPolicyConfig config_;
  ViState state_;
  std::vector<Op> fixed_ops_;
  std::vector<LabeledExample> replay_;
  std::size_t replay_next_ = 0;
  ViGradients scratch_;
  EmbeddingTables eps_scratch_;
  std::optional<EmbeddingTables> batch_draw_;
};

// ---------------------------------------------------------------------------
// Algorithm specs and the policy factory
// ---------------------------------------------------------------------------

// A named policy configuration as it appears in an experiment file.
struct AlgorithmSpec {
  std::string kind;   // uniform | egreedy | beta_ts | linucb | lints | mvt |
                      // fm | fm_ts | fm_egreedy | fixed_ts | autoco | oracle
  std::string label;  // unique display name, defaulted from the kind
  double epsilon = 0.1;
  double beta_prior_alpha = 1.0;
  double beta_prior_beta = 50.0;
  Op op = Op::kMultiply;  // operator for fixed_ts
  LinearConfig lin;
  ModelPolicyConfig model;
};

inline const std::vector<std::string>& algorithm_kinds() {
  static const std::vector<std::string> kinds = {
      "uniform", "egreedy", "beta_ts",    "linucb", "lints",  "mvt",
      "fm",      "fm_ts",   "fm_egreedy", "fixed_ts", "autoco", "oracle"};
  return kinds;
}

// Fills the kind-implied members of a spec: the classic baselines are fixed
// points in the model-policy configuration space.
inline void apply_kind_defaults(AlgorithmSpec& spec) {
  ModelPolicyConfig& m = spec.model;
  if (spec.kind == "uniform" || spec.kind == "oracle") {
    // nothing to derive
  } else if (spec.kind == "egreedy") {
    // per-arm means over raw rewards
  } else if (spec.kind == "beta_ts") {
    // per-arm Beta posterior
  } else if (spec.kind == "linucb") {
    spec.lin.mode = LinMode::kUcb;
  } else if (spec.kind == "lints") {
    spec.lin.mode = LinMode::kTs;
  } else if (spec.kind == "mvt") {
    spec.lin.mode = LinMode::kTs;
    spec.lin.poly2 = true;
  } else if (spec.kind == "fm" || spec.kind == "fm_ts" ||
             spec.kind == "fm_egreedy") {
    m.search = false;
    m.fixed_op = Op::kMultiply;
    m.operation_aware = false;
    m.identity_heads = true;
    m.train_heads = false;
    m.variational = spec.kind == "fm_ts";
    m.select = spec.kind == "fm_ts" ? SelectRule::kTs
               : spec.kind == "fm"  ? SelectRule::kGreedy
                                    : SelectRule::kEgreedy;
    if (spec.kind == "fm_egreedy") m.epsilon = 0.2;
  } else if (spec.kind == "fixed_ts") {
    m.search = false;
    m.fixed_op = spec.op;
    m.operation_aware = false;
    m.identity_heads = false;
    m.train_heads = true;
    m.variational = true;
    m.select = SelectRule::kTs;
  } else if (spec.kind == "autoco") {
    m.search = true;
    m.variational = true;
  } else {
    throw std::invalid_argument("unknown algorithm kind '" + spec.kind + "'");
  }
}

inline std::string default_label(const AlgorithmSpec& spec) {
  if (spec.kind == "uniform") return "Uniform";
  if (spec.kind == "egreedy") return "Egreedy";
  if (spec.kind == "beta_ts") return "BetaTS";
  if (spec.kind == "linucb") return "LinUCB";
  if (spec.kind == "lints") return "LinTS";
  if (spec.kind == "mvt") return "MVT";
  if (spec.kind == "fm") return "FM";
  if (spec.kind == "fm_ts") return "FM-TS";
  if (spec.kind == "fm_egreedy") return "FM-Egreedy";
  if (spec.kind == "fixed_ts") return std::string("TS-") + op_name(spec.op);
  if (spec.kind == "autoco")
    return spec.model.operation_aware ? "AutoCO" : "AutoCO-noOAE";
  if (spec.kind == "oracle") return "Oracle";
  throw std::invalid_argument("unknown algorithm kind '" + spec.kind + "'");
}

// Builds a ready policy.  The oracle pseudo-policy needs environment ground
// truth and is realized inside the harness, not here.
inline std::unique_ptr<Policy> make_policy(const AlgorithmSpec& spec,
                                           const FieldSchema& schema,
                                           std::uint64_t init_seed) {
  if (spec.kind == "uniform") return std::make_unique<UniformPolicy>();
  if (spec.kind == "egreedy")
    return std::make_unique<EgreedyPolicy>(spec.epsilon);
  if (spec.kind == "beta_ts")
    return std::make_unique<BetaTsPolicy>(spec.beta_prior_alpha,
                                          spec.beta_prior_beta);
  if (spec.kind == "linucb" || spec.kind == "lints" || spec.kind == "mvt")
    return std::make_unique<LinearPolicy>(schema, spec.lin);
  if (spec.kind == "fm" || spec.kind == "fm_ts" || spec.kind == "fm_egreedy" ||
      spec.kind == "fixed_ts" || spec.kind == "autoco")
    return std::make_unique<ModelPolicy>(schema, spec.model, init_seed);
  throw std::invalid_argument("unknown algorithm kind '" + spec.kind + "'");
}

}  // namespace autoco::bandit
