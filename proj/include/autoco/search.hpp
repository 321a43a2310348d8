#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "autoco/model.hpp"

namespace autoco {

// Architecture weights live in the box [kAlphaClip, 1 - kAlphaClip] so no
// operator's weight ever reaches exactly zero or one and every branch keeps a
// live gradient.
inline constexpr double kAlphaClip = 1e-3;

// Default architecture weight: uniform over the operator set.
inline constexpr double kAlphaInit = 0.2;

// Projection onto the one-active-operator constraint: keep the maximum
// entry's value, zero the rest.  Ties break toward the lowest operator index.
inline std::array<double, kNumOps> prox_c1(const std::array<double, kNumOps>& v) {
  int best = 0;
  for (int k = 1; k < kNumOps; ++k)
    if (v[static_cast<std::size_t>(k)] > v[static_cast<std::size_t>(best)])
      best = k;
  std::array<double, kNumOps> out{};
  out[static_cast<std::size_t>(best)] = v[static_cast<std::size_t>(best)];
  return out;
}

// Projection onto the box constraint.  Rejects non-finite input: a NaN would
// otherwise propagate silently through every later step.
inline std::array<double, kNumOps> prox_c2(const std::array<double, kNumOps>& v) {
  std::array<double, kNumOps> out;
  for (int k = 0; k < kNumOps; ++k) {
    const double x = v[static_cast<std::size_t>(k)];
    if (!std::isfinite(x))
      throw std::invalid_argument("prox_c2: non-finite architecture weight");
    out[static_cast<std::size_t>(k)] =
        std::clamp(x, kAlphaClip, 1.0 - kAlphaClip);
  }
  return out;
}

namespace detail {

inline std::array<double, kNumOps> pair_array(const ArchWeights& a, int p) {
  std::array<double, kNumOps> v;
  for (int k = 0; k < kNumOps; ++k) v[static_cast<std::size_t>(k)] = a.at(p, k);
  return v;
}

}  // namespace detail

// Applies prox_c1 pairwise: the discretized architecture used by every
// training forward pass.  Kept entries retain their continuous value.
inline ArchWeights discretize(const ArchWeights& alpha) {
  ArchWeights out(alpha.field_count(), 0.0);
  for (int p = 0; p < alpha.pair_count(); ++p) {
    const std::array<double, kNumOps> kept = prox_c1(detail::pair_array(alpha, p));
    for (int k = 0; k < kNumOps; ++k)
      out.at(p, k) = kept[static_cast<std::size_t>(k)];
  }
  return out;
}

// The operator each pair's weights currently select (argmax, ties to the
// lowest index).
inline std::vector<Op> select_ops(const ArchWeights& alpha) {
  std::vector<Op> out;
  out.reserve(static_cast<std::size_t>(alpha.pair_count()));
  for (int p = 0; p < alpha.pair_count(); ++p) {
    int best = 0;
    for (int k = 1; k < kNumOps; ++k)
      if (alpha.at(p, k) > alpha.at(p, best)) best = k;
    out.push_back(static_cast<Op>(best));
  }
  return out;
}

// A one-hot unit-weight architecture with the same operator for every pair
// (fixed-operator baselines: FM and the single-operator variants).
inline ArchWeights fixed_arch(int field_count, Op op) {
  ArchWeights a(field_count, 0.0);
  for (int p = 0; p < a.pair_count(); ++p)
    a.at(p, static_cast<int>(op)) = 1.0;
  return a;
}

struct SearchOptions {
  double eta_alpha = 1e-2;  // architecture-weight learning rate
  double eta_theta = 1e-3;  // model-parameter learning rate
  bool update_alpha = true;
  bool update_embeddings = true;
  bool update_heads = true;
  bool update_first = true;
};

namespace detail {

// SGD over the dense parameter containers; gradient tables must be
// shape-congruent with the parameters.
inline void apply_sgd(ModelParams& params, const Gradients& g,
                      const SearchOptions& opt) {
  if (opt.update_embeddings) {
    auto pt = params.emb.tables();
    auto gt = g.emb.tables();
    for (std::size_t t = 0; t < pt.size(); ++t)
      for (std::size_t i = 0; i < pt[t].v.size(); ++i)
        pt[t].v[i] -= opt.eta_theta * gt[t].v[i];
  }
  if (opt.update_heads) {
    for (int k = 0; k < kNumOps; ++k) {
      FcHead& h = params.heads[static_cast<std::size_t>(k)];
      const FcHead& gh = g.heads[static_cast<std::size_t>(k)];
      for (std::size_t i = 0; i < h.w.size(); ++i)
        h.w[i] -= opt.eta_theta * gh.w[i];
      h.b -= opt.eta_theta * gh.b;
    }
  }
  if (opt.update_first) {
    for (std::size_t f = 0; f < params.first.w.size(); ++f)
      for (std::size_t i = 0; i < params.first.w[f].size(); ++i)
        params.first.w[f][i] -= opt.eta_theta * g.first.w[f][i];
    params.first.bias -= opt.eta_theta * g.first.bias;
  }
}

inline void apply_alpha_sgd(ArchWeights& alpha, const Gradients& g,
                            double eta_alpha) {
  for (int p = 0; p < alpha.pair_count(); ++p) {
    std::array<double, kNumOps> v = pair_array(alpha, p);
    for (int k = 0; k < kNumOps; ++k)
      v[static_cast<std::size_t>(k)] -= eta_alpha * g.alpha.at(p, k);
    const std::array<double, kNumOps> clamped = prox_c2(v);
    for (int k = 0; k < kNumOps; ++k)
      alpha.at(p, k) = clamped[static_cast<std::size_t>(k)];
  }
}

}  // namespace detail

// One step of the one-shot interaction-function search on a minibatch:
// discretize the architecture weights, take gradients of the mean BCE at the
// discretized point, step alpha (projected back onto the box) and the model
// parameters jointly.  Returns the minibatch mean loss.
inline double ifs_step(std::span<const LabeledExample> batch, ArchWeights& alpha,
                       ModelParams& params, const SearchOptions& opt,
                       Gradients& scratch) {
  if (batch.empty()) return 0.0;
  const ArchWeights disc = discretize(alpha);
  scratch.zero();
  double loss = 0.0;
  for (const LabeledExample& ex : batch)
    loss += backward(ex.x, ex.y, disc, params, scratch);
  const double inv = 1.0 / static_cast<double>(batch.size());
  scratch.scale(inv);
  loss *= inv;

  if (opt.update_alpha) detail::apply_alpha_sgd(alpha, scratch, opt.eta_alpha);
  detail::apply_sgd(params, scratch, opt);
  return loss;
}

}  // namespace autoco
