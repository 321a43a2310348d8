#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is written scalar-by-scalar against the definitions, on
// purpose sharing no arithmetic with the code under test: tests read numbers
// out of the library containers and recompute from scratch.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace testsupport {

// Embedding lookup signature: (field, operator, row) -> copy of the row.
using EmbLookup = std::function<std::vector<double>(int, int, int)>;

inline std::vector<double> naive_op(int k, const std::vector<double>& p,
                                    const std::vector<double>& q) {
  std::vector<double> out;
  if (k == 0) {  // multiply
    for (std::size_t t = 0; t < p.size(); ++t) out.push_back(p[t] * q[t]);
  } else if (k == 1) {  // plus
    for (std::size_t t = 0; t < p.size(); ++t) out.push_back(p[t] + q[t]);
  } else if (k == 2) {  // max
    for (std::size_t t = 0; t < p.size(); ++t)
      out.push_back(p[t] > q[t] ? p[t] : q[t]);
  } else if (k == 3) {  // min
    for (std::size_t t = 0; t < p.size(); ++t)
      out.push_back(p[t] < q[t] ? p[t] : q[t]);
  } else {  // concat
    for (double v : p) out.push_back(v);
    for (double v : q) out.push_back(v);
  }
  return out;
}

// Mixture logit recomputed exhaustively: first-order terms, then for every
// (i, j) pair in (0,1), (0,2), ... order and every operator, weight times
// head-mapped operator output.
inline double naive_mixed_logit(
    const std::vector<int>& x,
    const std::vector<std::array<double, 5>>& alpha, const EmbLookup& emb,
    const std::vector<std::vector<double>>& head_w,
    const std::vector<double>& head_b,
    const std::vector<std::vector<double>>& first_w, double bias) {
  double z = bias;
  for (std::size_t f = 0; f < x.size(); ++f)
    z += first_w[f][static_cast<std::size_t>(x[f])];

  std::size_t pair = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j, ++pair) {
      for (int k = 0; k < 5; ++k) {
        const std::vector<double> ei = emb(static_cast<int>(i), k, x[i]);
        const std::vector<double> ej = emb(static_cast<int>(j), k, x[j]);
        const std::vector<double> out = naive_op(k, ei, ej);
        double s = head_b[static_cast<std::size_t>(k)];
        for (std::size_t t = 0; t < out.size(); ++t)
          s += head_w[static_cast<std::size_t>(k)][t] * out[t];
        z += alpha[pair][static_cast<std::size_t>(k)] * s;
      }
    }
  }
  return z;
}

// Factorization-machine reference with its own storage: sigma(b + sum_i
// w_i[x_i] + sum_{i<j} <v_i[x_i], v_j[x_j]>).
struct NaiveFm {
  std::vector<std::vector<std::vector<double>>> v;  // [field][row][dim]
  std::vector<std::vector<double>> w;               // [field][row]
  double b = 0.0;

  double logit(const std::vector<int>& x) const {
    double z = b;
    for (std::size_t f = 0; f < x.size(); ++f)
      z += w[f][static_cast<std::size_t>(x[f])];
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = i + 1; j < x.size(); ++j) {
        const std::vector<double>& vi = v[i][static_cast<std::size_t>(x[i])];
        const std::vector<double>& vj = v[j][static_cast<std::size_t>(x[j])];
        for (std::size_t t = 0; t < vi.size(); ++t) z += vi[t] * vj[t];
      }
    return z;
  }

  double prob(const std::vector<int>& x) const {
    return 1.0 / (1.0 + std::exp(-logit(x)));
  }
};

// Central finite difference of f with respect to *param.
template <class F>
double central_diff(F&& f, double* param, double h) {
  const double orig = *param;
  *param = orig + h;
  const double up = f();
  *param = orig - h;
  const double down = f();
  *param = orig;
  return (up - down) / (2.0 * h);
}

// Relative agreement metric with an absolute floor folded into the
// denominator: |a - b| <= tol * max(|a|, |b|, floor/tol).
inline double rel_err(double a, double b, double floor_denom = 1e-3) {
  const double denom =
      std::max(std::max(std::abs(a), std::abs(b)), floor_denom);
  return std::abs(a - b) / denom;
}

}  // namespace testsupport
