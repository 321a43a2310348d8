#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "autoco/features.hpp"
#include "autoco/rng.hpp"

namespace autoco {

// ---------------------------------------------------------------------------
// Operators
// ---------------------------------------------------------------------------

// Elementwise binary operators applied to a pair of field embeddings.  The
// order is part of the on-disk and in-memory layout contracts: operator k
// always means this list's k-th entry, and every argmax tie breaks toward the
// lowest index.
enum class Op : int { kMultiply = 0, kPlus = 1, kMax = 2, kMin = 3, kConcat = 4 };

inline constexpr int kNumOps = 5;

inline constexpr const char* kOpNames[kNumOps] = {"MULTIPLY", "PLUS", "MAX",
                                                  "MIN", "CONCAT"};

inline const char* op_name(Op k) { return kOpNames[static_cast<int>(k)]; }

inline std::optional<Op> op_from_name(std::string_view name) {
  for (int k = 0; k < kNumOps; ++k)
    if (name == kOpNames[k]) return static_cast<Op>(k);
  return std::nullopt;
}

// Output length of an operator for embedding dimension d.
inline int op_output_dim(Op k, int d) { return k == Op::kConcat ? 2 * d : d; }

inline bool op_commutative(Op k) { return k != Op::kConcat; }

// ---------------------------------------------------------------------------
// Architecture weights
// ---------------------------------------------------------------------------

// One weight per (field pair, operator): the continuous relaxation of the
// per-pair operator choice.  Pairs are ordered (0,1), (0,2), ..., (L-2,L-1).
class ArchWeights {
 public:
  ArchWeights() = default;

  ArchWeights(int field_count, double init_value)
      : field_count_(field_count),
        w_(static_cast<std::size_t>(pair_count()) * kNumOps, init_value) {}

  static int pair_count_for(int field_count) {
    return field_count * (field_count - 1) / 2;
  }

  // Index of pair (i, j), i < j, in the flattened pair order.
  static int pair_index(int field_count, int i, int j) {
    return i * field_count - i * (i + 1) / 2 + (j - i - 1);
  }

  int field_count() const { return field_count_; }
  int pair_count() const { return pair_count_for(field_count_); }

  double* pair(int p) { return &w_[static_cast<std::size_t>(p) * kNumOps]; }
  const double* pair(int p) const {
    return &w_[static_cast<std::size_t>(p) * kNumOps];
  }

  double& at(int p, int k) { return pair(p)[k]; }
  double at(int p, int k) const { return pair(p)[k]; }

  std::span<double> flat() { return w_; }
  std::span<const double> flat() const { return w_; }

  void fill(double v) { std::fill(w_.begin(), w_.end(), v); }

  bool operator==(const ArchWeights& other) const {
    return field_count_ == other.field_count_ && w_ == other.w_;
  }

 private:
  int field_count_ = 0;
  std::vector<double> w_;
};

// ---------------------------------------------------------------------------
// Parameter containers
// ---------------------------------------------------------------------------

// Dense rows × dim matrix of doubles.
struct Table {
  int rows = 0;
  int dim = 0;
  std::vector<double> v;

  Table() = default;
  Table(int r, int d)
      : rows(r), dim(d), v(static_cast<std::size_t>(r) * d, 0.0) {}

  double* row(int r) { return &v[static_cast<std::size_t>(r) * dim]; }
  const double* row(int r) const { return &v[static_cast<std::size_t>(r) * dim]; }

  bool operator==(const Table& other) const {
    return rows == other.rows && dim == other.dim && v == other.v;
  }
};

// Embedding storage for all fields.  In operation-aware mode each field owns
// one table per operator; in shared mode a single table per field serves all
// operators.  Table r-counts include the reserved unknown row.
class EmbeddingTables {
 public:
  EmbeddingTables() = default;

  EmbeddingTables(const FieldSchema& schema, int dim, bool operation_aware)
      : dim_(dim),
        field_count_(schema.field_count()),
        operation_aware_(operation_aware) {
    if (dim < 1 || dim > 64)
      throw std::invalid_argument("embedding dim must be in [1, 64]");
    tables_.reserve(static_cast<std::size_t>(field_count_) * tables_per_field());
    for (int f = 0; f < field_count_; ++f)
      for (int t = 0; t < tables_per_field(); ++t)
        tables_.emplace_back(schema.rows(f), dim);
  }

  int dim() const { return dim_; }
  int field_count() const { return field_count_; }
  bool operation_aware() const { return operation_aware_; }
  int tables_per_field() const { return operation_aware_ ? kNumOps : 1; }

  Table& table(int field, int t) {
    return tables_[static_cast<std::size_t>(field) * tables_per_field() + t];
  }
  const Table& table(int field, int t) const {
    return tables_[static_cast<std::size_t>(field) * tables_per_field() + t];
  }

  // Embedding row of field f under operator k (k collapses to the shared
  // table when not operation-aware).
  double* row(int field, int op, int r) {
    return table(field, operation_aware_ ? op : 0).row(r);
  }
  const double* row(int field, int op, int r) const {
    return table(field, operation_aware_ ? op : 0).row(r);
  }

  std::span<Table> tables() { return tables_; }
  std::span<const Table> tables() const { return tables_; }

  bool operator==(const EmbeddingTables& other) const {
    return dim_ == other.dim_ && field_count_ == other.field_count_ &&
           operation_aware_ == other.operation_aware_ &&
           tables_ == other.tables_;
  }

  std::size_t value_count() const {
    std::size_t n = 0;
    for (const Table& t : tables_) n += t.v.size();
    return n;
  }

  void fill(double x) {
    for (Table& t : tables_)
      std::fill(t.v.begin(), t.v.end(), x);
  }

  bool congruent(const EmbeddingTables& other) const {
    if (dim_ != other.dim_ || field_count_ != other.field_count_ ||
        operation_aware_ != other.operation_aware_ ||
        tables_.size() != other.tables_.size())
      return false;
    for (std::size_t i = 0; i < tables_.size(); ++i)
      if (tables_[i].rows != other.tables_[i].rows) return false;
    return true;
  }

 private:
  int dim_ = 0;
  int field_count_ = 0;
  bool operation_aware_ = true;
  std::vector<Table> tables_;
};

// Per-operator scalar head: contribution = w · op_output + b.
struct FcHead {
  std::vector<double> w;
  double b = 0.0;
};

// Linear terms over the one-hot features plus the global bias.
struct FirstOrder {
  std::vector<std::vector<double>> w;  // w[field][row]
  double bias = 0.0;
};

struct ModelParams {
  int dim = 0;
  EmbeddingTables emb;
  std::array<FcHead, kNumOps> heads;
  FirstOrder first;

  std::size_t parameter_count() const {
    std::size_t n = emb.value_count();
    for (const FcHead& h : heads) n += h.w.size() + 1;
    for (const auto& fw : first.w) n += fw.size();
    return n + 1;  // global bias
  }
};

struct ModelInit {
  double emb_std = 0.01;
  double head_std = 0.0;        // 0 means the default 1/sqrt(d)
  bool identity_heads = false;  // all-ones weights, zero bias, for the FM
                                // reduction; such heads are typically frozen
};

// Draw order is part of the reproducibility contract: embedding tables in
// (field, operator) order, then heads in operator order.  First-order weights
// and all biases start at zero so initial logits stay near zero.
inline ModelParams init_model(const FieldSchema& schema, int dim,
                              bool operation_aware, const ModelInit& init,
                              Rng& rng) {
  if (dim < 1) throw std::invalid_argument("embedding dim must be >= 1");
  ModelParams p;
  p.dim = dim;
  p.emb = EmbeddingTables(schema, dim, operation_aware);
  for (Table& t : p.emb.tables())
    for (double& v : t.v) v = rng.normal(0.0, init.emb_std);

  const double head_std =
      init.head_std > 0.0 ? init.head_std : 1.0 / std::sqrt(double(dim));
  for (int k = 0; k < kNumOps; ++k) {
    FcHead& h = p.heads[k];
    h.w.assign(static_cast<std::size_t>(op_output_dim(static_cast<Op>(k), dim)),
               0.0);
    h.b = 0.0;
    if (init.identity_heads) {
      std::fill(h.w.begin(), h.w.end(), 1.0);
    } else {
      for (double& v : h.w) v = rng.normal(0.0, head_std);
    }
  }

  p.first.w.resize(static_cast<std::size_t>(schema.field_count()));
  for (int f = 0; f < schema.field_count(); ++f)
    p.first.w[static_cast<std::size_t>(f)].assign(
        static_cast<std::size_t>(schema.rows(f)), 0.0);
  p.first.bias = 0.0;
  return p;
}

// ---------------------------------------------------------------------------
// Scalar helpers
// ---------------------------------------------------------------------------

inline double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// Binary cross-entropy against a logit, in the overflow-free rearrangement
// max(z,0) - z*y + log(1 + exp(-|z|)).
inline double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

// Logits beyond this magnitude saturate the sigmoid to exactly 0/1 in double
// precision; predict_ctr clamps so its output stays strictly inside (0,1).
inline constexpr double kLogitClamp = 36.0;

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

inline constexpr int kMaxDim = 64;

// Writes op(p, q) into out; returns the number of values written (2d for
// CONCAT, d otherwise).
inline int apply_operator(Op k, std::span<const double> p,
                          std::span<const double> q, std::span<double> out) {
  if (p.size() != q.size())
    throw std::invalid_argument("apply_operator: operand length mismatch");
  const std::size_t d = p.size();
  switch (k) {
    case Op::kMultiply:
      for (std::size_t t = 0; t < d; ++t) out[t] = p[t] * q[t];
      return static_cast<int>(d);
    case Op::kPlus:
      for (std::size_t t = 0; t < d; ++t) out[t] = p[t] + q[t];
      return static_cast<int>(d);
    case Op::kMax:
      for (std::size_t t = 0; t < d; ++t) out[t] = std::max(p[t], q[t]);
      return static_cast<int>(d);
    case Op::kMin:
      for (std::size_t t = 0; t < d; ++t) out[t] = std::min(p[t], q[t]);
      return static_cast<int>(d);
    case Op::kConcat:
      for (std::size_t t = 0; t < d; ++t) out[t] = p[t];
      for (std::size_t t = 0; t < d; ++t) out[d + t] = q[t];
      return static_cast<int>(2 * d);
  }
  throw std::invalid_argument("apply_operator: unknown operator");
}

// Scalar contribution of one pair under one operator: head.w · op(p,q) + head.b.
inline double pair_contribution(Op k, std::span<const double> p,
                                std::span<const double> q, const FcHead& head) {
  std::array<double, 2 * kMaxDim> buf;
  const int n = apply_operator(k, p, q, buf);
  if (static_cast<std::size_t>(n) != head.w.size())
    throw std::invalid_argument("pair_contribution: head size mismatch");
  double s = head.b;
  for (int t = 0; t < n; ++t) s += head.w[static_cast<std::size_t>(t)] * buf[t];
  return s;
}

inline void validate_features(const FeatureVector& x, const FieldSchema& schema) {
  if (static_cast<int>(x.values.size()) != schema.field_count())
    throw std::out_of_range("feature vector has " +
                            std::to_string(x.values.size()) + " fields, schema " +
                            std::to_string(schema.field_count()));
  for (int f = 0; f < schema.field_count(); ++f) {
    const int v = x.values[static_cast<std::size_t>(f)];
    if (v < 0 || v >= schema.rows(f))
      throw std::out_of_range("feature value " + std::to_string(v) +
                              " outside field '" + schema.field(f).name + "'");
  }
}

// Mixture logit: first-order terms + sum over pairs and operators of
// alpha[pair][k] * pair_contribution(k, ...).  RowFn maps (field, operator,
// row) to a const double* embedding row, which lets the same code run on
// plain tables, posterior samples, or lazily sampled rows.
template <class RowFn>
double mixed_logit(const FeatureVector& x, const ArchWeights& alpha,
                   RowFn&& rows, const std::array<FcHead, kNumOps>& heads,
                   const FirstOrder& first, int dim) {
  const int L = static_cast<int>(x.values.size());
  double z = first.bias;
  for (int f = 0; f < L; ++f)
    z += first.w[static_cast<std::size_t>(f)]
                [static_cast<std::size_t>(x.values[static_cast<std::size_t>(f)])];

  int p = 0;
  for (int i = 0; i < L; ++i) {
    const int xi = x.values[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < L; ++j, ++p) {
      const int xj = x.values[static_cast<std::size_t>(j)];
      const double* a = alpha.pair(p);
      for (int k = 0; k < kNumOps; ++k) {
        if (a[k] == 0.0) continue;
        const Op op = static_cast<Op>(k);
        const std::span<const double> ei(rows(i, k, xi), size_t(dim));
        const std::span<const double> ej(rows(j, k, xj), size_t(dim));
        z += a[k] * pair_contribution(op, ei, ej, heads[k]);
      }
    }
  }
  return z;
}

// Logit under a fixed operator per pair, each with weight one (the inference
// form: no architecture weights remain after discretization).
template <class RowFn>
double selected_logit(const FeatureVector& x, std::span<const Op> selected,
                      RowFn&& rows, const std::array<FcHead, kNumOps>& heads,
                      const FirstOrder& first, int dim) {
  const int L = static_cast<int>(x.values.size());
  double z = first.bias;
  for (int f = 0; f < L; ++f)
    z += first.w[static_cast<std::size_t>(f)]
                [static_cast<std::size_t>(x.values[static_cast<std::size_t>(f)])];

  int p = 0;
  for (int i = 0; i < L; ++i) {
    const int xi = x.values[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < L; ++j, ++p) {
      const int xj = x.values[static_cast<std::size_t>(j)];
      const Op op = selected[static_cast<std::size_t>(p)];
      const int k = static_cast<int>(op);
      const std::span<const double> ei(rows(i, k, xi), size_t(dim));
      const std::span<const double> ej(rows(j, k, xj), size_t(dim));
      z += pair_contribution(op, ei, ej, heads[k]);
    }
  }
  return z;
}

inline double forward_mixed(const FeatureVector& x, const ArchWeights& alpha,
                            const ModelParams& params) {
  return mixed_logit(
      x, alpha,
      [&params](int f, int k, int r) { return params.emb.row(f, k, r); },
      params.heads, params.first, params.dim);
}

// Expected-reward estimate under the discretized architecture.  The output is
// clamped strictly inside (0,1): downstream code divides by it and takes
// logs.
inline double predict_ctr(const FeatureVector& x, std::span<const Op> selected,
                          const ModelParams& params) {
  if (static_cast<int>(selected.size()) !=
      ArchWeights::pair_count_for(static_cast<int>(x.values.size())))
    throw std::invalid_argument("predict_ctr: need one operator per pair");
  double z = selected_logit(
      x, selected,
      [&params](int f, int k, int r) { return params.emb.row(f, k, r); },
      params.heads, params.first, params.dim);
  z = std::clamp(z, -kLogitClamp, kLogitClamp);
  return sigmoid(z);
}

// ---------------------------------------------------------------------------
// Backward
// ---------------------------------------------------------------------------

// Gradient accumulator, shape-congruent with ModelParams plus the
// architecture weights.
struct Gradients {
  EmbeddingTables emb;
  std::array<FcHead, kNumOps> heads;
  FirstOrder first;
  ArchWeights alpha;

  void zero() {
    emb.fill(0.0);
    for (FcHead& h : heads) {
      std::fill(h.w.begin(), h.w.end(), 0.0);
      h.b = 0.0;
    }
    for (auto& fw : first.w) std::fill(fw.begin(), fw.end(), 0.0);
    first.bias = 0.0;
    alpha.fill(0.0);
  }

  void scale(double s) {
    for (Table& t : emb.tables())
      for (double& v : t.v) v *= s;
    for (FcHead& h : heads) {
      for (double& v : h.w) v *= s;
      h.b *= s;
    }
    for (auto& fw : first.w)
      for (double& v : fw) v *= s;
    first.bias *= s;
    for (double& v : alpha.flat()) v *= s;
  }
};

inline Gradients make_gradients(const FieldSchema& schema, int dim,
                                bool operation_aware) {
  Gradients g;
  g.emb = EmbeddingTables(schema, dim, operation_aware);
  for (int k = 0; k < kNumOps; ++k)
    g.heads[static_cast<std::size_t>(k)].w.assign(
        static_cast<std::size_t>(op_output_dim(static_cast<Op>(k), dim)), 0.0);
  g.first.w.resize(static_cast<std::size_t>(schema.field_count()));
  for (int f = 0; f < schema.field_count(); ++f)
    g.first.w[static_cast<std::size_t>(f)].assign(
        static_cast<std::size_t>(schema.rows(f)), 0.0);
  g.alpha = ArchWeights(schema.field_count(), 0.0);
  return g;
}

// Accumulates d(BCE)/d(everything) for one example into g and returns the
// example's loss.  theta_rows supplies the embedding rows the forward pass
// reads (plain tables or a posterior sample); the matching gradient rows land
// at the same (field, operator, row) coordinates of g.emb.
//
// Alpha gradients are filled for every operator branch — including branches
// whose mixture weight is zero — because the architecture search needs the
// would-be gradient of unselected operators.  Embedding/head gradients flow
// only through branches with nonzero weight.  MAX/MIN route each dimension's
// gradient to the winning operand; exact ties go to the first operand.
//
// with_alpha = false skips the all-branch alpha gradients (and the work of
// evaluating zero-weight branches); callers training a fixed architecture use
// it to avoid paying for operators they will never switch to.
template <class RowFn>
double backward_rows(const FeatureVector& x, double y, const ArchWeights& alpha,
                     RowFn&& theta_rows,
                     const std::array<FcHead, kNumOps>& heads,
                     const FirstOrder& first, int dim, Gradients& g,
                     bool with_alpha = true) {
  const int L = static_cast<int>(x.values.size());
  std::array<double, 2 * kMaxDim> buf;

  // Forward pass for the logit (zero-weight branches contribute nothing).
  const double z = mixed_logit(x, alpha, theta_rows, heads, first, dim);
  const double gz = sigmoid(z) - y;  // d loss / d logit

  g.first.bias += gz;
  for (int f = 0; f < L; ++f)
    g.first.w[static_cast<std::size_t>(f)]
             [static_cast<std::size_t>(x.values[static_cast<std::size_t>(f)])] +=
        gz;

  int p = 0;
  for (int i = 0; i < L; ++i) {
    const int xi = x.values[static_cast<std::size_t>(i)];
    for (int j = i + 1; j < L; ++j, ++p) {
      const int xj = x.values[static_cast<std::size_t>(j)];
      const double* a = alpha.pair(p);
      for (int k = 0; k < kNumOps; ++k) {
        if (!with_alpha && a[k] == 0.0) continue;
        const Op op = static_cast<Op>(k);
        const double* ei = theta_rows(i, k, xi);
        const double* ej = theta_rows(j, k, xj);
        const int n = apply_operator(op, std::span<const double>(ei, size_t(dim)),
                                     std::span<const double>(ej, size_t(dim)),
                                     buf);
        const FcHead& head = heads[static_cast<std::size_t>(k)];
        double s = head.b;
        for (int t = 0; t < n; ++t)
          s += head.w[static_cast<std::size_t>(t)] * buf[static_cast<std::size_t>(t)];
        if (with_alpha) g.alpha.at(p, k) += gz * s;

        if (a[k] == 0.0) continue;
        const double w = gz * a[k];
        FcHead& gh = g.heads[static_cast<std::size_t>(k)];
        gh.b += w;
        for (int t = 0; t < n; ++t)
          gh.w[static_cast<std::size_t>(t)] += w * buf[static_cast<std::size_t>(t)];

        double* gi = g.emb.row(i, k, xi);
        double* gj = g.emb.row(j, k, xj);
        switch (op) {
          case Op::kMultiply:
            for (int t = 0; t < dim; ++t) {
              const double v = w * head.w[static_cast<std::size_t>(t)];
              gi[t] += v * ej[t];
              gj[t] += v * ei[t];
            }
            break;
          case Op::kPlus:
            for (int t = 0; t < dim; ++t) {
              const double v = w * head.w[static_cast<std::size_t>(t)];
              gi[t] += v;
              gj[t] += v;
            }
            break;
          case Op::kMax:
            for (int t = 0; t < dim; ++t) {
              const double v = w * head.w[static_cast<std::size_t>(t)];
              if (ei[t] >= ej[t])
                gi[t] += v;
              else
                gj[t] += v;
            }
            break;
          case Op::kMin:
            for (int t = 0; t < dim; ++t) {
              const double v = w * head.w[static_cast<std::size_t>(t)];
              if (ei[t] <= ej[t])
                gi[t] += v;
              else
                gj[t] += v;
            }
            break;
          case Op::kConcat:
            for (int t = 0; t < dim; ++t) {
              gi[t] += w * head.w[static_cast<std::size_t>(t)];
              gj[t] += w * head.w[static_cast<std::size_t>(t + dim)];
            }
            break;
        }
      }
    }
  }
  return bce_with_logit(z, y);
}

inline double backward(const FeatureVector& x, double y,
                       const ArchWeights& alpha, const ModelParams& params,
                       Gradients& g) {
  return backward_rows(
      x, y, alpha,
      [&params](int f, int k, int r) { return params.emb.row(f, k, r); },
      params.heads, params.first, params.dim, g);
}

}  // namespace autoco
