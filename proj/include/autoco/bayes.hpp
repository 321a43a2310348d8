#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "autoco/model.hpp"
#include "autoco/rng.hpp"
#include "autoco/search.hpp"

namespace autoco {

// Numerically stable softplus; sigma = softplus(rho) keeps every posterior
// standard deviation strictly positive.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

// Inverse of softplus, for tests and for constructing a rho that realizes a
// target sigma.
inline double softplus_inverse(double y) {
  if (y <= 0.0) throw std::invalid_argument("softplus_inverse: y must be > 0");
  if (y > 30.0) return y;
  return std::log(std::expm1(y));
}

// Diagonal Gaussian posterior over the embedding tables: Theta ~ N(mu,
// diag(softplus(rho)^2)).  Heads, first-order terms, and architecture weights
// stay point estimates.
struct VariationalParams {
  EmbeddingTables mu;
  EmbeddingTables rho;

  bool congruent() const { return mu.congruent(rho); }
};

// Default rho: softplus(-5) ~ 6.7e-3, small initial uncertainty on the same
// scale as the mu init.
inline constexpr double kRhoInit = -5.0;

inline VariationalParams init_variational(const FieldSchema& schema, int dim,
                                          bool operation_aware, double mu_std,
                                          double rho_init, Rng& rng) {
  VariationalParams vp;
  vp.mu = EmbeddingTables(schema, dim, operation_aware);
  for (Table& t : vp.mu.tables())
    for (double& v : t.v) v = rng.normal(0.0, mu_std);
  vp.rho = EmbeddingTables(schema, dim, operation_aware);
  vp.rho.fill(rho_init);
  return vp;
}

// Unit-normal noise tables, one entry per posterior entry.
inline EmbeddingTables sample_epsilon(const VariationalParams& vp, Rng& rng) {
  EmbeddingTables eps = vp.rho;  // copy for shape
  for (Table& t : eps.tables())
    for (double& v : t.v) v = rng.normal();
  return eps;
}

// Theta = mu + softplus(rho) * eps, written into theta (shape-congruent).
inline void reparameterize(const VariationalParams& vp,
                           const EmbeddingTables& eps, EmbeddingTables& theta) {
  auto mu_t = vp.mu.tables();
  auto rho_t = vp.rho.tables();
  auto eps_t = eps.tables();
  auto out_t = theta.tables();
  for (std::size_t t = 0; t < mu_t.size(); ++t)
    for (std::size_t i = 0; i < mu_t[t].v.size(); ++i)
      out_t[t].v[i] =
          mu_t[t].v[i] + softplus(rho_t[t].v[i]) * eps_t[t].v[i];
}

// One full posterior draw of the embedding tables.
inline EmbeddingTables sample_theta(const VariationalParams& vp, Rng& rng) {
  EmbeddingTables eps = sample_epsilon(vp, rng);
  EmbeddingTables theta = vp.mu;
  reparameterize(vp, eps, theta);
  return theta;
}

// KL(N(mu, sigma^2) || N(0, sigma0^2)) summed over all entries:
// sum[ log(sigma0/sigma) + (sigma^2 + mu^2) / (2 sigma0^2) - 1/2 ].
inline double kl_diag_gaussian(const VariationalParams& vp, double prior_std) {
  if (prior_std <= 0.0)
    throw std::invalid_argument("kl_diag_gaussian: prior_std must be > 0");
  const double s0sq = prior_std * prior_std;
  const double log_s0 = std::log(prior_std);
  double kl = 0.0;
  auto mu_t = vp.mu.tables();
  auto rho_t = vp.rho.tables();
  for (std::size_t t = 0; t < mu_t.size(); ++t)
    for (std::size_t i = 0; i < mu_t[t].v.size(); ++i) {
      const double mu = mu_t[t].v[i];
      const double sigma = softplus(rho_t[t].v[i]);
      kl += (log_s0 - std::log(sigma)) +
            (sigma * sigma + mu * mu) / (2.0 * s0sq) - 0.5;
    }
  return kl;
}

// ---------------------------------------------------------------------------
// ELBO evaluation and gradients
// ---------------------------------------------------------------------------

// Gradient accumulator for the variational loss: `model` carries d/d(mu) in
// its emb tables plus head/first/alpha gradients; `rho` carries d/d(rho).
struct ViGradients {
  Gradients model;
  EmbeddingTables rho;

  void zero() {
    model.zero();
    rho.fill(0.0);
  }
};

inline ViGradients make_vi_gradients(const FieldSchema& schema, int dim,
                                     bool operation_aware) {
  ViGradients g;
  g.model = make_gradients(schema, dim, operation_aware);
  g.rho = EmbeddingTables(schema, dim, operation_aware);
  return g;
}

// Variational loss at a fixed noise draw: kl_weight * KL + mean BCE over the
// batch evaluated at Theta = mu + softplus(rho) * eps.  With kl_weight = 0
// and eps = 0 this is exactly the deterministic mean BCE.
inline double elbo_loss(std::span<const LabeledExample> batch,
                        const ArchWeights& alpha, const VariationalParams& vp,
                        const EmbeddingTables& eps,
                        const std::array<FcHead, kNumOps>& heads,
                        const FirstOrder& first, int dim, double kl_weight,
                        double prior_std) {
  if (batch.empty()) throw std::invalid_argument("elbo_loss: empty batch");
  EmbeddingTables theta = vp.mu;
  reparameterize(vp, eps, theta);
  double bce = 0.0;
  for (const LabeledExample& ex : batch)
    bce += bce_with_logit(
        mixed_logit(
            ex.x, alpha,
            [&theta](int f, int k, int r) { return theta.row(f, k, r); },
            heads, first, dim),
        ex.y);
  bce /= static_cast<double>(batch.size());
  return kl_weight * kl_diag_gaussian(vp, prior_std) + bce;
}

// Full analytic gradient of elbo_loss with the same fixed eps.  The BCE part
// backpropagates through the reparameterization (d Theta/d mu = 1, d Theta/d
// rho = eps * sigmoid(rho)); the KL part contributes kl_weight * (mu/sigma0^2)
// to mu and kl_weight * (sigma/sigma0^2 - 1/sigma) * sigmoid(rho) to rho.
// Returns the loss.
inline double elbo_backward(std::span<const LabeledExample> batch,
                            const ArchWeights& alpha,
                            const VariationalParams& vp,
                            const EmbeddingTables& eps,
                            const std::array<FcHead, kNumOps>& heads,
                            const FirstOrder& first, int dim, double kl_weight,
                            double prior_std, ViGradients& g,
                            bool with_alpha = true) {
  if (batch.empty()) throw std::invalid_argument("elbo_backward: empty batch");
  EmbeddingTables theta = vp.mu;
  reparameterize(vp, eps, theta);

  g.zero();
  double bce = 0.0;
  for (const LabeledExample& ex : batch)
    bce += backward_rows(
        ex.x, ex.y, alpha,
        [&theta](int f, int k, int r) { return theta.row(f, k, r); },
        heads, first, dim, g.model, with_alpha);
  const double inv = 1.0 / static_cast<double>(batch.size());
  g.model.scale(inv);
  bce *= inv;

  // Chain the Theta gradients onto rho, then add the KL term to both halves.
  const double s0sq = prior_std * prior_std;
  auto mu_t = vp.mu.tables();
  auto rho_t = vp.rho.tables();
  auto eps_t = eps.tables();
  auto gmu_t = g.model.emb.tables();
  auto grho_t = g.rho.tables();
  for (std::size_t t = 0; t < mu_t.size(); ++t)
    for (std::size_t i = 0; i < mu_t[t].v.size(); ++i) {
      const double rho = rho_t[t].v[i];
      const double sig_rho = sigmoid(rho);  // d sigma / d rho
      const double sigma = softplus(rho);
      const double g_theta = gmu_t[t].v[i];
      grho_t[t].v[i] = g_theta * eps_t[t].v[i] * sig_rho +
                       kl_weight * (sigma / s0sq - 1.0 / sigma) * sig_rho;
      gmu_t[t].v[i] = g_theta + kl_weight * mu_t[t].v[i] / s0sq;
    }
  return kl_weight * kl_diag_gaussian(vp, prior_std) + bce;
}

// ---------------------------------------------------------------------------
// Variational training step
// ---------------------------------------------------------------------------

struct ViState {
  int dim = 0;
  ArchWeights alpha;
  VariationalParams vp;
  std::array<FcHead, kNumOps> heads;
  FirstOrder first;
};

struct ViOptions {
  double eta_alpha = 1e-2;
  double eta_theta = 1e-3;
  double kl_weight = 0.0;  // callers typically pass 1/N with N = observations
  double prior_std = 1.0;
  bool freeze_sigma = false;  // deterministic mode: Theta = mu, rho untouched
  bool update_alpha = true;
  bool update_heads = true;
  bool update_first = true;
  // When set, overrides the architecture search: every pair trains with this
  // fixed operator at unit weight (FM and the fixed-operator baselines).
  const std::vector<Op>* fixed_ops = nullptr;
};

namespace detail {

// Marks the (field, table) slots owned by currently selected operators: in
// operation-aware mode only tables of an operator selected for some pair
// containing the field are updated; shared tables are always live.
inline std::vector<std::uint8_t> selected_table_mask(
    const EmbeddingTables& emb, const std::vector<Op>& selected) {
  const int L = emb.field_count();
  const int tpf = emb.tables_per_field();
  std::vector<std::uint8_t> mask(
      static_cast<std::size_t>(L) * static_cast<std::size_t>(tpf), 0);
  if (tpf == 1) {
    std::fill(mask.begin(), mask.end(), 1);
    return mask;
  }
  int p = 0;
  for (int i = 0; i < L; ++i)
    for (int j = i + 1; j < L; ++j, ++p) {
      const int k = static_cast<int>(selected[static_cast<std::size_t>(p)]);
      mask[static_cast<std::size_t>(i * tpf + k)] = 1;
      mask[static_cast<std::size_t>(j * tpf + k)] = 1;
    }
  return mask;
}

}  // namespace detail

// One joint SGD step on a minibatch, following the one-shot search with
// Thompson sampling: discretize alpha, draw one noise sample for the whole
// minibatch, take gradients at the reparameterized Theta, update alpha (all
// branches, projected to the box) and the posterior (only tables of currently
// selected operators), and step heads/first-order terms deterministically.
// Returns the minibatch loss (kl_weight * KL + mean BCE).
inline double vi_step(std::span<const LabeledExample> batch, ViState& state,
                      const ViOptions& opt, Rng& rng, ViGradients& scratch,
                      EmbeddingTables& eps_scratch) {
  if (batch.empty()) return 0.0;

  // Training architecture: discretized current weights, or the fixed
  // override at unit weight.
  ArchWeights train_arch =
      opt.fixed_ops ? ArchWeights(state.alpha.field_count(), 0.0)
                    : discretize(state.alpha);
  std::vector<Op> selected;
  if (opt.fixed_ops) {
    selected = *opt.fixed_ops;
    for (int p = 0; p < train_arch.pair_count(); ++p)
      train_arch.at(p, static_cast<int>(selected[static_cast<std::size_t>(p)])) =
          1.0;
  } else {
    selected = select_ops(state.alpha);
  }

  if (opt.freeze_sigma) {
    eps_scratch.fill(0.0);
  } else {
    for (Table& t : eps_scratch.tables())
      for (double& v : t.v) v = rng.normal();
  }

  const double loss =
      elbo_backward(batch, train_arch, state.vp, eps_scratch, state.heads,
                    state.first, state.dim, opt.kl_weight, opt.prior_std,
                    scratch, /*with_alpha=*/opt.fixed_ops == nullptr);

  if (opt.update_alpha && !opt.fixed_ops)
    detail::apply_alpha_sgd(state.alpha, scratch.model, opt.eta_alpha);

  // Posterior update, masked to the tables of selected operators.
  const std::vector<std::uint8_t> mask =
      detail::selected_table_mask(state.vp.mu, selected);
  auto mu_t = state.vp.mu.tables();
  auto rho_t = state.vp.rho.tables();
  auto gmu_t = scratch.model.emb.tables();
  auto grho_t = scratch.rho.tables();
  for (std::size_t t = 0; t < mu_t.size(); ++t) {
    if (!mask[t]) continue;
    for (std::size_t i = 0; i < mu_t[t].v.size(); ++i)
      mu_t[t].v[i] -= opt.eta_theta * gmu_t[t].v[i];
    if (!opt.freeze_sigma)
      for (std::size_t i = 0; i < rho_t[t].v.size(); ++i)
        rho_t[t].v[i] -= opt.eta_theta * grho_t[t].v[i];
  }

  if (opt.update_heads)
    for (int k = 0; k < kNumOps; ++k) {
      FcHead& h = state.heads[static_cast<std::size_t>(k)];
      const FcHead& gh = scratch.model.heads[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < h.w.size(); ++i)
        h.w[i] -= opt.eta_theta * gh.w[i];
      h.b -= opt.eta_theta * gh.b;
    }
  if (opt.update_first) {
    for (std::size_t f = 0; f < state.first.w.size(); ++f)
      for (std::size_t i = 0; i < state.first.w[f].size(); ++i)
        state.first.w[f][i] -= opt.eta_theta * scratch.model.first.w[f][i];
    state.first.bias -= opt.eta_theta * scratch.model.first.bias;
  }
  return loss;
}

// ---------------------------------------------------------------------------
// Lazy posterior sampling for selection
// ---------------------------------------------------------------------------

// One posterior draw over the embedding tables, sampled row by row on first
// access.  Scoring a candidate list touches only the rows those candidates
// reference, so a selection request pays for a few dozen normal draws instead
// of the full table set.  Rows are stable once sampled: every candidate in
// the request is scored under the same draw.  In mean mode (degenerate
// posterior) rows alias mu directly.
class LazyPosteriorRows {
 public:
  LazyPosteriorRows(const VariationalParams& vp, Rng& rng, bool mean_only)
      : vp_(&vp), rng_(&rng), mean_only_(mean_only), dim_(vp.mu.dim()) {
    if (mean_only_) return;
    const auto tables = vp.mu.tables();
    offsets_.reserve(tables.size());
    std::size_t total = 0;
    for (const Table& t : tables) {
      offsets_.push_back(total);
      total += t.v.size();
    }
    buffer_.resize(total);
    sampled_.assign(total / static_cast<std::size_t>(dim_), 0);
  }

  const double* operator()(int field, int op, int row) {
    if (mean_only_) return vp_->mu.row(field, op, row);
    const int tpf = vp_->mu.tables_per_field();
    const int t = field * tpf + (vp_->mu.operation_aware() ? op : 0);
    const std::size_t off = offsets_[static_cast<std::size_t>(t)] +
                            static_cast<std::size_t>(row) *
                                static_cast<std::size_t>(dim_);
    double* slot = &buffer_[off];
    const std::size_t flag = off / static_cast<std::size_t>(dim_);
    if (!sampled_[flag]) {
      const double* mu = vp_->mu.table(field, vp_->mu.operation_aware() ? op : 0)
                             .row(row);
      const double* rho = vp_->rho.table(field, vp_->rho.operation_aware() ? op : 0)
                              .row(row);
      for (int i = 0; i < dim_; ++i)
        slot[i] = mu[i] + softplus(rho[i]) * rng_->normal();
      sampled_[flag] = 1;
    }
    return slot;
  }

 private:
  const VariationalParams* vp_;
  Rng* rng_;
  bool mean_only_;
  int dim_;
  std::vector<std::size_t> offsets_;
  std::vector<double> buffer_;
  std::vector<std::uint8_t> sampled_;
};

}  // namespace autoco
