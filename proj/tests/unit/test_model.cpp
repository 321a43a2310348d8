#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <vector>

#include "autoco/model.hpp"
#include "autoco/search.hpp"
#include "support/oracles.hpp"

using autoco::ArchWeights;
using autoco::FcHead;
using autoco::FeatureVector;
using autoco::Field;
using autoco::FieldSchema;
using autoco::Gradients;
using autoco::ModelInit;
using autoco::ModelParams;
using autoco::Op;
using autoco::Rng;

namespace {

// A random small model instance with magnitudes large enough that gradients
// are far from the noise floor.
struct Instance {
  FieldSchema schema;
  int dim = 0;
  ModelParams params;
  ArchWeights alpha;
  FeatureVector x;
  double y = 0.0;
};

Instance random_instance(std::uint64_t seed, bool operation_aware = true) {
  Rng rng(seed);
  const int L = 2 + rng.uniform_int(3);   // 2..4 fields
  const int d = 1 + rng.uniform_int(4);   // 1..4 dims
  std::vector<Field> fields;
  for (int f = 0; f < L; ++f)
    fields.push_back({"f" + std::to_string(f), 2 + rng.uniform_int(4)});
  Instance inst;
  inst.schema = FieldSchema(fields);
  inst.dim = d;
  inst.params = autoco::init_model(inst.schema, d, operation_aware, ModelInit{}, rng);
  for (auto& t : inst.params.emb.tables())
    for (double& v : t.v) v = rng.normal(0.0, 0.5);
  for (auto& h : inst.params.heads) {
    for (double& v : h.w) v = rng.normal(0.0, 0.5);
    h.b = rng.normal(0.0, 0.3);
  }
  for (auto& fw : inst.params.first.w)
    for (double& v : fw) v = rng.normal(0.0, 0.3);
  inst.params.first.bias = rng.normal(0.0, 0.3);

  inst.alpha = ArchWeights(L, 0.0);
  for (double& a : inst.alpha.flat()) a = rng.uniform(0.1, 0.9);

  inst.x.values.resize(std::size_t(L));
  for (int f = 0; f < L; ++f)  // may land on the unknown slot too
    inst.x.values[std::size_t(f)] = rng.uniform_int(inst.schema.rows(f));
  inst.y = rng.uniform() < 0.5 ? 0.0 : 1.0;
  return inst;
}

// MAX/MIN are kinked where operands tie; finite differences need to stay
// away from the kink.
bool near_tie(const Instance& inst, double gap) {
  const int L = inst.schema.field_count();
  for (int i = 0; i < L; ++i)
    for (int j = i + 1; j < L; ++j)
      for (int k : {int(Op::kMax), int(Op::kMin)}) {
        const double* ei =
            inst.params.emb.row(i, k, inst.x.values[std::size_t(i)]);
        const double* ej =
            inst.params.emb.row(j, k, inst.x.values[std::size_t(j)]);
        for (int t = 0; t < inst.dim; ++t)
          if (std::abs(ei[t] - ej[t]) < gap) return true;
      }
  return false;
}

Instance safe_instance(std::uint64_t seed, bool operation_aware = true) {
  for (std::uint64_t s = seed;; ++s) {
    Instance inst = random_instance(s, operation_aware);
    if (!near_tie(inst, 1e-3)) return inst;
  }
}

testsupport::EmbLookup lookup_of(const ModelParams& params) {
  return [&params](int f, int k, int r) {
    const double* row = params.emb.row(f, k, r);
    return std::vector<double>(row, row + params.dim);
  };
}

std::vector<std::array<double, 5>> alpha_of(const ArchWeights& a) {
  std::vector<std::array<double, 5>> out(std::size_t(a.pair_count()));
  for (int p = 0; p < a.pair_count(); ++p)
    for (int k = 0; k < 5; ++k) out[std::size_t(p)][std::size_t(k)] = a.at(p, k);
  return out;
}

std::vector<std::vector<double>> heads_w_of(const ModelParams& params) {
  std::vector<std::vector<double>> out;
  for (const FcHead& h : params.heads) out.push_back(h.w);
  return out;
}

std::vector<double> heads_b_of(const ModelParams& params) {
  std::vector<double> out;
  for (const FcHead& h : params.heads) out.push_back(h.b);
  return out;
}

std::vector<int> x_of(const FeatureVector& x) {
  return std::vector<int>(x.values.begin(), x.values.end());
}

}  // namespace

TEST_CASE("operator names round-trip and the canonical order is fixed") {
  REQUIRE(autoco::op_name(Op::kMultiply) == std::string("MULTIPLY"));
  REQUIRE(autoco::op_from_name("CONCAT") == Op::kConcat);
  REQUIRE_FALSE(autoco::op_from_name("NOPE").has_value());
  REQUIRE(static_cast<int>(Op::kMultiply) == 0);
  REQUIRE(static_cast<int>(Op::kPlus) == 1);
  REQUIRE(static_cast<int>(Op::kMax) == 2);
  REQUIRE(static_cast<int>(Op::kMin) == 3);
  REQUIRE(static_cast<int>(Op::kConcat) == 4);
}

TEST_CASE("apply_operator matches the elementwise definitions") {
  const std::vector<double> p{1, 2}, q{3, 4};
  std::array<double, 8> out{};

  REQUIRE(autoco::apply_operator(Op::kMultiply, p, q, out) == 2);
  REQUIRE(out[0] == 3.0);
  REQUIRE(out[1] == 8.0);

  REQUIRE(autoco::apply_operator(Op::kPlus, p, q, out) == 2);
  REQUIRE(out[0] == 4.0);
  REQUIRE(out[1] == 6.0);

  const std::vector<double> p2{1, 5}, q2{4, 2};
  REQUIRE(autoco::apply_operator(Op::kMax, p2, q2, out) == 2);
  REQUIRE(out[0] == 4.0);
  REQUIRE(out[1] == 5.0);

  REQUIRE(autoco::apply_operator(Op::kMin, p2, q2, out) == 2);
  REQUIRE(out[0] == 1.0);
  REQUIRE(out[1] == 2.0);

  REQUIRE(autoco::apply_operator(Op::kConcat, p, q, out) == 4);
  REQUIRE(out[0] == 1.0);
  REQUIRE(out[3] == 4.0);

  const std::vector<double> shorter{1};
  REQUIRE_THROWS_AS(autoco::apply_operator(Op::kPlus, p, shorter, out),
                    std::invalid_argument);
}

TEST_CASE("operator commutativity holds exactly where defined") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> p(3), q(3);
    for (auto& v : p) v = rng.normal();
    for (auto& v : q) v = rng.normal();
    std::array<double, 8> ab{}, ba{};
    for (Op k : {Op::kMultiply, Op::kPlus, Op::kMax, Op::kMin}) {
      const int n = autoco::apply_operator(k, p, q, ab);
      autoco::apply_operator(k, q, p, ba);
      for (int t = 0; t < n; ++t) REQUIRE(ab[std::size_t(t)] == ba[std::size_t(t)]);
    }
    autoco::apply_operator(Op::kConcat, p, q, ab);
    autoco::apply_operator(Op::kConcat, q, p, ba);
    bool same = true;
    for (int t = 0; t < 6; ++t)
      if (ab[std::size_t(t)] != ba[std::size_t(t)]) same = false;
    REQUIRE_FALSE(same);  // generic vectors: concat order matters
  }
}

TEST_CASE("pair_contribution applies the head affine map") {
  FcHead zero_head;
  zero_head.w = {0.0, 0.0};
  zero_head.b = 1.75;
  const std::vector<double> p{1, 0}, q{0, 1};
  REQUIRE(autoco::pair_contribution(Op::kMultiply, p, q, zero_head) == 1.75);

  FcHead ones;
  ones.w = {1.0, 1.0};
  ones.b = 0.0;
  REQUIRE(autoco::pair_contribution(Op::kPlus, p, q, ones) == 2.0);

  FcHead wrong;
  wrong.w = {1.0};
  REQUIRE_THROWS_AS(autoco::pair_contribution(Op::kPlus, p, q, wrong),
                    std::invalid_argument);
}

TEST_CASE("forward_mixed is zero for all-zero parameters and weights") {
  FieldSchema schema({{"a", 2}, {"b", 3}});
  Rng rng(1);
  ModelParams params = autoco::init_model(schema, 2, true, ModelInit{}, rng);
  for (auto& t : params.emb.tables())
    std::fill(t.v.begin(), t.v.end(), 0.5);  // embeddings irrelevant
  ArchWeights alpha(2, 0.0);
  for (auto& fw : params.first.w) std::fill(fw.begin(), fw.end(), 0.0);
  for (auto& h : params.heads) {
    std::fill(h.w.begin(), h.w.end(), 0.0);
    h.b = 0.0;
  }
  params.first.bias = 0.0;
  FeatureVector x;
  x.values = {0, 1};
  REQUIRE(autoco::forward_mixed(x, alpha, params) == 0.0);
}

TEST_CASE("forward_mixed matches the brute-force evaluator") {
  for (std::uint64_t seed : {10u, 11u, 12u, 13u, 14u, 15u, 16u, 17u}) {
    const Instance inst = random_instance(seed);
    const double lib = autoco::forward_mixed(inst.x, inst.alpha, inst.params);
    const double ref = testsupport::naive_mixed_logit(
        x_of(inst.x), alpha_of(inst.alpha), lookup_of(inst.params),
        heads_w_of(inst.params), heads_b_of(inst.params), inst.params.first.w,
        inst.params.first.bias);
    REQUIRE_THAT(lib, Catch::Matchers::WithinRel(ref, 1e-12));
  }
}

TEST_CASE("forward_mixed matches the brute-force evaluator on shared tables") {
  for (std::uint64_t seed : {20u, 21u, 22u}) {
    const Instance inst = random_instance(seed, /*operation_aware=*/false);
    const double lib = autoco::forward_mixed(inst.x, inst.alpha, inst.params);
    const double ref = testsupport::naive_mixed_logit(
        x_of(inst.x), alpha_of(inst.alpha), lookup_of(inst.params),
        heads_w_of(inst.params), heads_b_of(inst.params), inst.params.first.w,
        inst.params.first.bias);
    REQUIRE_THAT(lib, Catch::Matchers::WithinRel(ref, 1e-12));
  }
}

TEST_CASE("multiply-everywhere with sum-pooling heads reproduces the FM score") {
  Rng rng(31);
  FieldSchema schema({{"a", 3}, {"b", 2}, {"c", 4}});
  const int d = 2;
  ModelParams params =
      autoco::init_model(schema, d, /*operation_aware=*/false,
                         ModelInit{.identity_heads = true}, rng);
  for (auto& t : params.emb.tables())
    for (double& v : t.v) v = rng.normal(0.0, 0.6);
  for (auto& fw : params.first.w)
    for (double& v : fw) v = rng.normal(0.0, 0.4);
  params.first.bias = rng.normal(0.0, 0.4);

  // Mirror the parameters into the independent FM reference.
  testsupport::NaiveFm fm;
  fm.b = params.first.bias;
  fm.w = params.first.w;
  fm.v.resize(3);
  for (int f = 0; f < 3; ++f) {
    fm.v[std::size_t(f)].resize(std::size_t(schema.rows(f)));
    for (int r = 0; r < schema.rows(f); ++r) {
      const double* row = params.emb.row(f, 0, r);
      fm.v[std::size_t(f)][std::size_t(r)].assign(row, row + d);
    }
  }

  const ArchWeights alpha = autoco::fixed_arch(3, Op::kMultiply);
  const std::vector<Op> sel(3, Op::kMultiply);
  // Exhaustive over the full input space, unknown slots included.
  for (int a = 0; a < schema.rows(0); ++a)
    for (int b = 0; b < schema.rows(1); ++b)
      for (int c = 0; c < schema.rows(2); ++c) {
        FeatureVector x;
        x.values = {a, b, c};
        const double logit = autoco::forward_mixed(x, alpha, params);
        REQUIRE_THAT(logit,
                     Catch::Matchers::WithinAbs(fm.logit({a, b, c}), 1e-12));
        REQUIRE_THAT(autoco::predict_ctr(x, sel, params),
                     Catch::Matchers::WithinAbs(fm.prob({a, b, c}), 1e-12));
      }
}

TEST_CASE("predict_ctr is the sigmoid of the one-hot mixed forward") {
  for (std::uint64_t seed : {41u, 42u, 43u}) {
    Instance inst = random_instance(seed);
    Rng rng(seed * 17);
    const int K = inst.alpha.pair_count();
    std::vector<Op> sel;
    ArchWeights onehot(inst.schema.field_count(), 0.0);
    for (int p = 0; p < K; ++p) {
      const Op k = static_cast<Op>(rng.uniform_int(5));
      sel.push_back(k);
      onehot.at(p, static_cast<int>(k)) = 1.0;
    }
    const double z = autoco::forward_mixed(inst.x, onehot, inst.params);
    REQUIRE_THAT(autoco::predict_ctr(inst.x, sel, inst.params),
                 Catch::Matchers::WithinAbs(autoco::sigmoid(z), 1e-15));
  }
}

TEST_CASE("predict_ctr saturates strictly inside (0,1)") {
  FieldSchema schema({{"a", 2}, {"b", 2}});
  Rng rng(5);
  ModelParams params = autoco::init_model(schema, 2, true, ModelInit{}, rng);
  const std::vector<Op> sel{Op::kMultiply};
  FeatureVector x;
  x.values = {0, 0};

  params.first.bias = 1000.0;
  double hi = autoco::predict_ctr(x, sel, params);
  REQUIRE(hi < 1.0);
  REQUIRE(std::isfinite(hi));

  params.first.bias = -1000.0;
  double lo = autoco::predict_ctr(x, sel, params);
  REQUIRE(lo > 0.0);

  params.first.bias = 0.0;
  for (auto& t : params.emb.tables()) std::fill(t.v.begin(), t.v.end(), 0.0);
  for (auto& h : params.heads) {
    std::fill(h.w.begin(), h.w.end(), 0.0);
    h.b = 0.0;
  }
  REQUIRE(autoco::predict_ctr(x, sel, params) == 0.5);

  std::vector<Op> tooShort;
  REQUIRE_THROWS_AS(autoco::predict_ctr(x, tooShort, params),
                    std::invalid_argument);
}

TEST_CASE("parameter_count matches the closed-form layout formula") {
  FieldSchema schema({{"a", 2}, {"b", 3}});
  Rng rng(7);
  const int d = 2;
  ModelParams params = autoco::init_model(schema, d, true, ModelInit{}, rng);
  // 5 tables per field of (l+1) x d; heads d+1 each (2d+1 for concat);
  // first-order (l+1) per field; global bias.
  const std::size_t emb = 5u * (3u * 2u + 4u * 2u);
  const std::size_t heads = 4u * (2u + 1u) + (4u + 1u);
  const std::size_t first = 3u + 4u;
  REQUIRE(params.parameter_count() == emb + heads + first + 1u);
}

TEST_CASE("init_model is deterministic per seed and honors identity heads") {
  FieldSchema schema({{"a", 3}, {"b", 2}});
  Rng r1(99), r2(99);
  ModelParams a = autoco::init_model(schema, 4, true, ModelInit{}, r1);
  ModelParams b = autoco::init_model(schema, 4, true, ModelInit{}, r2);
  REQUIRE(a.emb.table(0, 0).v == b.emb.table(0, 0).v);
  REQUIRE(a.heads[4].w == b.heads[4].w);

  Rng r3(1);
  ModelParams fm =
      autoco::init_model(schema, 4, false, ModelInit{.identity_heads = true}, r3);
  for (const auto& h : fm.heads) {
    for (double v : h.w) REQUIRE(v == 1.0);
    REQUIRE(h.b == 0.0);
  }
  for (const auto& fw : fm.first.w)
    for (double v : fw) REQUIRE(v == 0.0);
}

TEST_CASE("validate_features flags out-of-range values") {
  FieldSchema schema({{"a", 2}, {"b", 3}});
  FeatureVector ok;
  ok.values = {2, 3};  // unknown slots are valid
  REQUIRE_NOTHROW(autoco::validate_features(ok, schema));

  FeatureVector bad;
  bad.values = {3, 0};
  REQUIRE_THROWS_AS(autoco::validate_features(bad, schema), std::out_of_range);
  FeatureVector short_x;
  short_x.values = {0};
  REQUIRE_THROWS_AS(autoco::validate_features(short_x, schema),
                    std::out_of_range);
}

TEST_CASE("bce_with_logit is stable and matches the naive form") {
  for (double z : {-3.0, -0.5, 0.0, 0.7, 4.0})
    for (double y : {0.0, 1.0}) {
      const double naive =
          -(y * std::log(autoco::sigmoid(z)) +
            (1.0 - y) * std::log(1.0 - autoco::sigmoid(z)));
      REQUIRE_THAT(autoco::bce_with_logit(z, y),
                   Catch::Matchers::WithinAbs(naive, 1e-12));
    }
  REQUIRE(std::isfinite(autoco::bce_with_logit(50.0, 0.0)));
  REQUIRE(std::isfinite(autoco::bce_with_logit(-50.0, 1.0)));
  REQUIRE_THAT(autoco::bce_with_logit(50.0, 1.0),
               Catch::Matchers::WithinAbs(0.0, 1e-12));
}

TEST_CASE("backward gradients vanish exactly at a stationary point") {
  Instance inst = random_instance(55);
  const double z = autoco::forward_mixed(inst.x, inst.alpha, inst.params);
  inst.y = autoco::sigmoid(z);  // forces dloss/dlogit = 0 exactly

  Gradients g = autoco::make_gradients(inst.schema, inst.dim, true);
  g.zero();
  autoco::backward(inst.x, inst.y, inst.alpha, inst.params, g);
  for (const auto& t : g.emb.tables())
    for (double v : t.v) REQUIRE(v == 0.0);
  for (const auto& h : g.heads) {
    for (double v : h.w) REQUIRE(v == 0.0);
    REQUIRE(h.b == 0.0);
  }
  for (double v : g.alpha.flat()) REQUIRE(v == 0.0);
  REQUIRE(g.first.bias == 0.0);
}

TEST_CASE("backward matches central finite differences on every parameter") {
  int instances = 0;
  for (std::uint64_t seed = 100; instances < 6; ++seed) {
    Instance inst = safe_instance(seed);
    ++instances;

    Gradients g = autoco::make_gradients(inst.schema, inst.dim,
                                         inst.params.emb.operation_aware());
    g.zero();
    autoco::backward(inst.x, inst.y, inst.alpha, inst.params, g);

    auto loss = [&inst]() {
      return autoco::bce_with_logit(
          autoco::forward_mixed(inst.x, inst.alpha, inst.params), inst.y);
    };
    const double h = 1e-5;
    auto check = [&](double analytic, double* param) {
      const double fd = testsupport::central_diff(loss, param, h);
      REQUIRE(testsupport::rel_err(analytic, fd) < 1e-3);
    };

    auto pt = inst.params.emb.tables();
    auto gt = g.emb.tables();
    for (std::size_t t = 0; t < pt.size(); ++t)
      for (std::size_t i = 0; i < pt[t].v.size(); ++i)
        check(gt[t].v[i], &pt[t].v[i]);
    for (int k = 0; k < autoco::kNumOps; ++k) {
      for (std::size_t i = 0; i < inst.params.heads[std::size_t(k)].w.size(); ++i)
        check(g.heads[std::size_t(k)].w[i], &inst.params.heads[std::size_t(k)].w[i]);
      check(g.heads[std::size_t(k)].b, &inst.params.heads[std::size_t(k)].b);
    }
    for (std::size_t f = 0; f < inst.params.first.w.size(); ++f)
      for (std::size_t i = 0; i < inst.params.first.w[f].size(); ++i)
        check(g.first.w[f][i], &inst.params.first.w[f][i]);
    check(g.first.bias, &inst.params.first.bias);
    for (int p = 0; p < inst.alpha.pair_count(); ++p)
      for (int k = 0; k < autoco::kNumOps; ++k)
        check(g.alpha.at(p, k), &inst.alpha.pair(p)[k]);
  }
}

TEST_CASE("alpha gradients cover unselected branches too") {
  Instance inst = safe_instance(200);
  // Discretize to a one-hot architecture: most branches carry zero weight.
  const ArchWeights disc = autoco::discretize(inst.alpha);
  Gradients g = autoco::make_gradients(inst.schema, inst.dim, true);
  g.zero();
  autoco::backward(inst.x, inst.y, disc, inst.params, g);

  auto loss = [&]() {
    return autoco::bce_with_logit(
        autoco::forward_mixed(inst.x, inst.alpha, inst.params), inst.y);
  };
  // The analytic alpha gradient at the discretized point must match finite
  // differences of the mixture taken through each branch weight.
  ArchWeights fd_point = disc;
  auto loss_at_disc = [&]() {
    return autoco::bce_with_logit(
        autoco::forward_mixed(inst.x, fd_point, inst.params), inst.y);
  };
  (void)loss;
  for (int p = 0; p < disc.pair_count(); ++p)
    for (int k = 0; k < autoco::kNumOps; ++k) {
      const double fd =
          testsupport::central_diff(loss_at_disc, &fd_point.pair(p)[k], 1e-5);
      REQUIRE(testsupport::rel_err(g.alpha.at(p, k), fd) < 1e-3);
    }
}

TEST_CASE("max/min route gradients to the winning operand per dimension") {
  // Two fields, one pair, d = 2, MAX selected with unit weight.
  FieldSchema schema({{"a", 1}, {"b", 1}});
  Rng rng(1);
  ModelParams params = autoco::init_model(schema, 2, true, ModelInit{}, rng);
  for (auto& t : params.emb.tables()) std::fill(t.v.begin(), t.v.end(), 0.0);
  for (auto& h : params.heads) {
    std::fill(h.w.begin(), h.w.end(), 0.0);
    h.b = 0.0;
  }
  const int kMax = static_cast<int>(Op::kMax);
  double* ea = params.emb.row(0, kMax, 0);
  ea[0] = 2.0;
  ea[1] = 0.0;
  double* eb = params.emb.row(1, kMax, 0);
  eb[0] = 1.0;
  eb[1] = 3.0;
  params.heads[std::size_t(kMax)].w = {1.0, 1.0};

  ArchWeights alpha = autoco::fixed_arch(2, Op::kMax);
  FeatureVector x;
  x.values = {0, 0};
  Gradients g = autoco::make_gradients(schema, 2, true);
  g.zero();
  autoco::backward(x, 0.0, alpha, params, g);

  const double* ga = g.emb.row(0, kMax, 0);
  const double* gb = g.emb.row(1, kMax, 0);
  REQUIRE(ga[0] != 0.0);  // field a wins dim 0 (2 > 1)
  REQUIRE(ga[1] == 0.0);
  REQUIRE(gb[0] == 0.0);
  REQUIRE(gb[1] != 0.0);  // field b wins dim 1 (3 > 0)

  SECTION("exact ties route to the first operand") {
    eb[0] = 2.0;  // tie in dim 0
    g.zero();
    autoco::backward(x, 0.0, alpha, params, g);
    REQUIRE(g.emb.row(0, kMax, 0)[0] != 0.0);
    REQUIRE(g.emb.row(1, kMax, 0)[0] == 0.0);
  }
}
