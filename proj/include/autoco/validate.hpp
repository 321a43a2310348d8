#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "autoco/bayes.hpp"
#include "autoco/model.hpp"
#include "autoco/rng.hpp"
#include "autoco/search.hpp"

// Numerical self-checks runnable from the command line: analytic gradients
// against central finite differences, the closed-form KL against Monte Carlo,
// and the proximal steps against their defining properties.  Each suite
// returns a pass flag plus printable detail lines.

namespace autoco::validate {

struct SuiteResult {
  std::string name;
  bool pass = false;
  std::vector<std::string> lines;
};

namespace detail {

inline std::string fmt(const char* format, double a, double b = 0.0,
                       double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, format, a, b, c);
  return buf;
}

inline double rel_err(double analytic, double numeric) {
  const double denom =
      std::max({std::fabs(analytic), std::fabs(numeric), 1e-6});
  return std::fabs(analytic - numeric) / denom;
}

// One random model instance for gradient checking: schema, parameters with
// every component nonzero, a value-keeping discretized architecture, and a
// small batch with fractional labels.
struct GradInstance {
  FieldSchema schema;
  int dim = 1;
  bool oae = false;
  ModelParams params;
  ArchWeights alpha{2, 0.0};
  ArchWeights disc{2, 0.0};
  std::vector<LabeledExample> batch;
};

inline GradInstance random_instance(Rng& rng) {
  GradInstance inst;
  const int L = 2 + rng.uniform_int(3);          // L <= 4
  std::vector<Field> fields;
  for (int f = 0; f < L; ++f)
    fields.push_back(
        Field{"f" + std::to_string(f), 2 + rng.uniform_int(5)});
  inst.schema = FieldSchema(std::move(fields));
  inst.dim = 1 + rng.uniform_int(4);             // d <= 4
  inst.oae = rng.bernoulli(0.5);

  inst.params = init_model(inst.schema, inst.dim, inst.oae,
                           ModelInit{.emb_std = 0.5, .head_std = 0.7}, rng);
  for (auto& row : inst.params.first.w)
    for (double& w : row) w = rng.normal(0.0, 0.5);
  inst.params.first.bias = rng.normal(0.0, 0.5);

  inst.alpha = ArchWeights(L, 0.0);
  for (int p = 0; p < inst.alpha.pair_count(); ++p)
    for (int k = 0; k < kNumOps; ++k)
      inst.alpha.at(p, k) = rng.uniform(0.05, 0.95);
  inst.disc = discretize(inst.alpha);

  const int m = 1 + rng.uniform_int(6);
  for (int e = 0; e < m; ++e) {
    FeatureVector x;
    for (int f = 0; f < L; ++f)
      x.values.push_back(
          static_cast<std::int32_t>(rng.uniform_int(inst.schema.rows(f))));
    const double y = rng.bernoulli(0.5)
                         ? rng.uniform()
                         : (rng.bernoulli(0.5) ? 1.0 : 0.0);
    inst.batch.push_back(LabeledExample{std::move(x), y});
  }
  return inst;
}

inline double batch_loss(const GradInstance& inst, const ArchWeights& arch,
                         const ModelParams& params) {
  double total = 0.0;
  for (const LabeledExample& ex : inst.batch)
    total += bce_with_logit(forward_mixed(ex.x, arch, params), ex.y);
  return total;
}

// Central difference through a single coordinate reachable via a setter.
template <class Setter>
double central_diff(const GradInstance& inst, const ArchWeights& arch,
                    double value, Setter&& set) {
  const double h = 1e-6 * std::max(1.0, std::fabs(value));
  ModelParams plus = inst.params;
  ModelParams minus = inst.params;
  ArchWeights arch_plus = arch;
  ArchWeights arch_minus = arch;
  set(plus, arch_plus, value + h);
  set(minus, arch_minus, value - h);
  return (batch_loss(inst, arch_plus, plus) -
          batch_loss(inst, arch_minus, minus)) /
         (2.0 * h);
}

}  // namespace detail

// Analytic gradients against central finite differences on `instances`
// random model instances: embeddings, heads, first-order terms, the
// all-branch architecture gradients, and the variational path (mu and rho
// through the reparameterized sample, KL term included).  Every architecture
// coordinate is checked; the dense parameter blocks are subsampled per
// instance to keep the sweep fast.
inline SuiteResult check_gradients(int instances, std::uint64_t seed,
                                   double tolerance = 1e-3) {
  SuiteResult result;
  result.name = "gradients";
  Rng rng(seed);
  double worst_emb = 0.0, worst_head = 0.0, worst_first = 0.0,
         worst_alpha = 0.0, worst_mu = 0.0, worst_rho = 0.0;
  int checked = 0;

  for (int it = 0; it < instances; ++it) {
    detail::GradInstance inst = detail::random_instance(rng);
    Gradients g = make_gradients(inst.schema, inst.dim, inst.oae);
    for (const LabeledExample& ex : inst.batch)
      backward(ex.x, ex.y, inst.disc, inst.params, g);

    // Embedding coordinates: a random sample across tables/rows/dims.
    const auto tables = inst.params.emb.tables();
    for (int pick = 0; pick < 24; ++pick) {
      const int t = rng.uniform_int(static_cast<int>(tables.size()));
      const int idx =
          rng.uniform_int(static_cast<int>(tables[size_t(t)].v.size()));
      const double an = g.emb.tables()[size_t(t)].v[size_t(idx)];
      const double fd = detail::central_diff(
          inst, inst.disc, tables[size_t(t)].v[size_t(idx)],
          [&](ModelParams& p, ArchWeights&, double v) {
            p.emb.tables()[size_t(t)].v[size_t(idx)] = v;
          });
      worst_emb = std::max(worst_emb, detail::rel_err(an, fd));
      ++checked;
    }

    // Head coordinates: every weight and bias of every operator head.
    for (int k = 0; k < kNumOps; ++k) {
      const FcHead& head = inst.params.heads[size_t(k)];
      for (int t = -1; t < static_cast<int>(head.w.size()); ++t) {
        const double an = t < 0 ? g.heads[size_t(k)].b
                                : g.heads[size_t(k)].w[size_t(t)];
        const double value = t < 0 ? head.b : head.w[size_t(t)];
        const double fd = detail::central_diff(
            inst, inst.disc, value,
            [&](ModelParams& p, ArchWeights&, double v) {
              if (t < 0)
                p.heads[size_t(k)].b = v;
              else
                p.heads[size_t(k)].w[size_t(t)] = v;
            });
        worst_head = std::max(worst_head, detail::rel_err(an, fd));
        ++checked;
      }
    }

    // First-order coordinates: a sample plus the global bias.
    for (int pick = 0; pick < 8; ++pick) {
      const int f = rng.uniform_int(inst.schema.field_count());
      const int r = rng.uniform_int(inst.schema.rows(f));
      const double an = g.first.w[size_t(f)][size_t(r)];
      const double fd = detail::central_diff(
          inst, inst.disc, inst.params.first.w[size_t(f)][size_t(r)],
          [&](ModelParams& p, ArchWeights&, double v) {
            p.first.w[size_t(f)][size_t(r)] = v;
          });
      worst_first = std::max(worst_first, detail::rel_err(an, fd));
      ++checked;
    }
    {
      const double fd = detail::central_diff(
          inst, inst.disc, inst.params.first.bias,
          [&](ModelParams& p, ArchWeights&, double v) { p.first.bias = v; });
      worst_first = std::max(worst_first, detail::rel_err(g.first.bias, fd));
      ++checked;
    }

    // Architecture coordinates: all of them, perturbed around the
    // discretized point the analytic gradient is taken at.
    for (int p = 0; p < inst.disc.pair_count(); ++p) {
      for (int k = 0; k < kNumOps; ++k) {
        const double an = g.alpha.at(p, k);
        const double fd = detail::central_diff(
            inst, inst.disc, inst.disc.at(p, k),
            [&](ModelParams&, ArchWeights& a, double v) { a.at(p, k) = v; });
        worst_alpha = std::max(worst_alpha, detail::rel_err(an, fd));
        ++checked;
      }
    }

    // Variational path: gradients of BCE + kl_weight * KL with respect to mu
    // and rho, through theta = mu + softplus(rho) * eps at a fixed eps draw.
    {
      VariationalParams vp;
      vp.mu = inst.params.emb;
      vp.rho = EmbeddingTables(inst.schema, inst.dim, inst.oae);
      for (Table& t : vp.rho.tables())
        for (double& v : t.v) v = rng.uniform(-3.0, 0.5);
      EmbeddingTables eps = sample_epsilon(vp, rng);
      const double kl_weight = rng.uniform(0.1, 0.7);
      const double prior_std = rng.bernoulli(0.5) ? 1.0 : 2.0;

      ViGradients vg = make_vi_gradients(inst.schema, inst.dim, inst.oae);
      elbo_backward(inst.batch, inst.disc, vp, eps, inst.params.heads,
                    inst.params.first, inst.dim, kl_weight, prior_std, vg);

      auto elbo_at = [&](const VariationalParams& p) {
        return elbo_loss(inst.batch, inst.disc, p, eps, inst.params.heads,
                         inst.params.first, inst.dim, kl_weight, prior_std);
      };
      const auto mu_tables = vp.mu.tables();
      for (int pick = 0; pick < 12; ++pick) {
        const int t = rng.uniform_int(static_cast<int>(mu_tables.size()));
        const int idx =
            rng.uniform_int(static_cast<int>(mu_tables[size_t(t)].v.size()));
        const bool do_mu = pick % 2 == 0;
        EmbeddingTables& target = do_mu ? vp.mu : vp.rho;
        const double saved = target.tables()[size_t(t)].v[size_t(idx)];
        const double h = 1e-6 * std::max(1.0, std::fabs(saved));
        target.tables()[size_t(t)].v[size_t(idx)] = saved + h;
        const double up = elbo_at(vp);
        target.tables()[size_t(t)].v[size_t(idx)] = saved - h;
        const double down = elbo_at(vp);
        target.tables()[size_t(t)].v[size_t(idx)] = saved;
        const double fd = (up - down) / (2.0 * h);
        const double an = do_mu ? vg.model.emb.tables()[size_t(t)].v[size_t(idx)]
                                : vg.rho.tables()[size_t(t)].v[size_t(idx)];
        if (do_mu)
          worst_mu = std::max(worst_mu, detail::rel_err(an, fd));
        else
          worst_rho = std::max(worst_rho, detail::rel_err(an, fd));
        ++checked;
      }
    }
  }

  result.pass = worst_emb < tolerance && worst_head < tolerance &&
                worst_first < tolerance && worst_alpha < tolerance &&
                worst_mu < tolerance && worst_rho < tolerance;
  result.lines.push_back(detail::fmt("instances: %.0f, coordinates: %.0f",
                                     double(instances), double(checked)));
  result.lines.push_back(
      detail::fmt("max rel err  embeddings: %.3g", worst_emb));
  result.lines.push_back(detail::fmt("max rel err  heads:      %.3g", worst_head));
  result.lines.push_back(
      detail::fmt("max rel err  first:      %.3g", worst_first));
  result.lines.push_back(
      detail::fmt("max rel err  arch:       %.3g", worst_alpha));
  result.lines.push_back(detail::fmt("max rel err  mu:         %.3g", worst_mu));
  result.lines.push_back(
      detail::fmt("max rel err  rho:        %.3g", worst_rho));
  return result;
}

// Closed-form diagonal-Gaussian KL against a Monte Carlo estimate of
// E_q[log q - log p] on random variational states, including an exact-zero
// setting (mu = 0, sigma = prior).  Deviation is measured absolutely, so the
// per-setting coordinate count is kept small enough for the MC noise floor
// to sit well under the tolerance.
inline SuiteResult check_kl(int settings, std::int64_t samples,
                            std::uint64_t seed, double tolerance = 1e-2) {
  SuiteResult result;
  result.name = "kl";
  Rng rng(seed);
  double worst = 0.0;

  for (int s = 0; s < settings; ++s) {
    std::vector<Field> fields = {Field{"a", 1 + rng.uniform_int(2)},
                                 Field{"b", 1 + rng.uniform_int(2)}};
    FieldSchema schema(std::move(fields));
    const int dim = 1 + rng.uniform_int(2);
    const bool oae = false;  // small coordinate count keeps MC noise low
    const bool zero_case = s == 0;
    const double prior_std = zero_case ? 1.0 : (rng.bernoulli(0.5) ? 1.0 : 2.0);

    VariationalParams vp;
    vp.mu = EmbeddingTables(schema, dim, oae);
    vp.rho = EmbeddingTables(schema, dim, oae);
    for (Table& t : vp.mu.tables())
      for (double& v : t.v) v = zero_case ? 0.0 : rng.normal(0.0, 0.6);
    for (Table& t : vp.rho.tables())
      for (double& v : t.v)
        v = zero_case ? softplus_inverse(prior_std) : rng.uniform(-3.0, 0.0);

    const double closed = kl_diag_gaussian(vp, prior_std);

    // Per-sample log-ratio; constants and the epsilon substitution remove
    // every transcendental from the inner loop.
    double constant = 0.0;
    std::vector<double> mus, sigmas;
    {
      auto mu_t = vp.mu.tables();
      auto rho_t = vp.rho.tables();
      for (std::size_t t = 0; t < mu_t.size(); ++t)
        for (std::size_t i = 0; i < mu_t[t].v.size(); ++i) {
          const double sigma = softplus(rho_t[t].v[i]);
          mus.push_back(mu_t[t].v[i]);
          sigmas.push_back(sigma);
          constant += std::log(prior_std / sigma);
        }
    }
    double acc = 0.0;
    for (std::int64_t n = 0; n < samples; ++n) {
      double term = 0.0;
      for (std::size_t i = 0; i < mus.size(); ++i) {
        const double eps = rng.normal();
        const double x = mus[i] + sigmas[i] * eps;
        term += -0.5 * eps * eps + x * x / (2.0 * prior_std * prior_std);
      }
      acc += term;
    }
    const double mc = constant + acc / static_cast<double>(samples);
    const double err = std::fabs(mc - closed);
    worst = std::max(worst, err);
    if (s < 4)
      result.lines.push_back(
          detail::fmt("closed: %.6f  monte-carlo: %.6f  abs err: %.3g", closed,
                      mc, err));
  }

  result.pass = worst < tolerance;
  result.lines.push_back(detail::fmt("settings: %.0f  samples each: %.0f",
                                     double(settings), double(samples)));
  result.lines.push_back(detail::fmt("max abs err: %.3g", worst));
  return result;
}

// Proximal steps against their defining properties: the sparsity step keeps
// exactly the (lowest-index) max coordinate at its value, the clamp step maps
// into [clip, 1-clip] monotonically, and both are idempotent.
inline SuiteResult check_prox(int trials, std::uint64_t seed) {
  SuiteResult result;
  result.name = "prox";
  Rng rng(seed);
  int failures = 0;

  auto run_case = [&](const std::array<double, kNumOps>& v) {
    const auto c1 = prox_c1(v);
    int nonzero = 0;
    int kept = -1;
    for (int k = 0; k < kNumOps; ++k)
      if (c1[size_t(k)] != 0.0) {
        ++nonzero;
        kept = k;
      }
    int best = 0;
    for (int k = 1; k < kNumOps; ++k)
      if (v[size_t(k)] > v[size_t(best)]) best = k;
    bool ok = nonzero <= 1;
    if (nonzero == 1) ok = ok && kept == best && c1[size_t(kept)] == v[size_t(best)];
    // All-zero input keeps index 0 at value 0, which scans as zero nonzeros.
    if (nonzero == 0)
      ok = ok && v[size_t(best)] == 0.0;
    // Idempotent on the operating domain: training clamps weights positive
    // before any sparsity step, and a kept positive maximum stays kept.
    if (v[size_t(best)] > 0.0) ok = ok && prox_c1(c1) == c1;
    const auto boxed = prox_c1(prox_c2(v));
    ok = ok && prox_c1(boxed) == boxed;

    const auto c2 = prox_c2(v);
    for (int k = 0; k < kNumOps; ++k) {
      ok = ok && c2[size_t(k)] >= kAlphaClip && c2[size_t(k)] <= 1.0 - kAlphaClip;
      for (int j = 0; j < kNumOps; ++j)
        if (v[size_t(k)] <= v[size_t(j)]) ok = ok && c2[size_t(k)] <= c2[size_t(j)];
    }
    ok = ok && prox_c2(c2) == c2;
    if (!ok) ++failures;
  };

  for (int t = 0; t < trials; ++t) {
    std::array<double, kNumOps> v;
    for (double& x : v) x = rng.uniform(-2.0, 2.0);
    run_case(v);
  }
  run_case({0.3, 0.3, 0.3, 0.3, 0.3});   // exact ties
  run_case({0.0, 0.0, 0.0, 0.0, 0.0});   // all zero
  run_case({-1.0, -2.0, -3.0, -4.0, -5.0});
  run_case({100.0, -100.0, 0.5, 0.5, 0.5});

  result.pass = failures == 0;
  result.lines.push_back(detail::fmt("trials: %.0f  failures: %.0f",
                                     double(trials + 4), double(failures)));
  return result;
}

}  // namespace autoco::validate
