#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "autoco/search.hpp"
#include "support/oracles.hpp"

using autoco::ArchWeights;
using autoco::FieldSchema;
using autoco::ModelInit;
using autoco::ModelParams;
using autoco::Op;
using autoco::Rng;

TEST_CASE("prox_c1 keeps the maximum entry and zeroes the rest") {
  const std::array<double, 5> v{0.1, 0.7, 0.2, 0.05, 0.3};
  const std::array<double, 5> out = autoco::prox_c1(v);
  REQUIRE(out == std::array<double, 5>{0.0, 0.7, 0.0, 0.0, 0.0});
}

TEST_CASE("prox_c1 breaks ties toward the lowest operator index") {
  const std::array<double, 5> v{0.4, 0.4, 0.1, 0.1, 0.0};
  REQUIRE(autoco::prox_c1(v) == std::array<double, 5>{0.4, 0.0, 0.0, 0.0, 0.0});
}

TEST_CASE("prox_c1 is idempotent and keeps the support order") {
  Rng rng(2);
  for (int t = 0; t < 50; ++t) {
    std::array<double, 5> v;
    for (auto& x : v) x = rng.uniform(0.001, 0.999);
    const auto once = autoco::prox_c1(v);
    REQUIRE(autoco::prox_c1(once) == once);
    int nonzero = 0;
    for (double x : once) nonzero += (x != 0.0) ? 1 : 0;
    REQUIRE(nonzero == 1);
  }
}

TEST_CASE("prox_c2 clamps into the epsilon box") {
  const std::array<double, 5> v{-0.2, 0.5, 1.3, 0.001, 0.999};
  REQUIRE(autoco::prox_c2(v) ==
          std::array<double, 5>{0.001, 0.5, 0.999, 0.001, 0.999});

  const std::array<double, 5> interior{0.2, 0.3, 0.4, 0.5, 0.6};
  REQUIRE(autoco::prox_c2(interior) == interior);
  REQUIRE(autoco::prox_c2(autoco::prox_c2(v)) == autoco::prox_c2(v));
}

TEST_CASE("prox_c2 rejects non-finite input") {
  std::array<double, 5> v{0.1, std::numeric_limits<double>::quiet_NaN(), 0.2,
                          0.3, 0.4};
  REQUIRE_THROWS_AS(autoco::prox_c2(v), std::invalid_argument);
  v[1] = std::numeric_limits<double>::infinity();
  REQUIRE_THROWS_AS(autoco::prox_c2(v), std::invalid_argument);
}

TEST_CASE("discretize keeps exactly one live operator per pair") {
  Rng rng(3);
  ArchWeights alpha(4, 0.0);
  for (double& a : alpha.flat()) a = rng.uniform(0.001, 0.999);
  const ArchWeights disc = autoco::discretize(alpha);
  for (int p = 0; p < disc.pair_count(); ++p) {
    int nonzero = 0;
    double kept = 0.0;
    for (int k = 0; k < 5; ++k)
      if (disc.at(p, k) != 0.0) {
        ++nonzero;
        kept = disc.at(p, k);
      }
    REQUIRE(nonzero == 1);
    // The kept entry retains its continuous value.
    double maxv = 0.0;
    for (int k = 0; k < 5; ++k) maxv = std::max(maxv, alpha.at(p, k));
    REQUIRE(kept == maxv);
  }
}

TEST_CASE("select_ops takes the argmax with ties to the lowest index") {
  ArchWeights uniform(3, 0.2);
  const std::vector<Op> sel = autoco::select_ops(uniform);
  for (Op k : sel) REQUIRE(k == Op::kMultiply);

  ArchWeights onehot(2, 0.0);
  onehot.at(0, static_cast<int>(Op::kConcat)) = 1.0;
  REQUIRE(autoco::select_ops(onehot)[0] == Op::kConcat);
}

TEST_CASE("select_ops is invariant to prox_c1 and positive scaling") {
  Rng rng(4);
  for (int t = 0; t < 30; ++t) {
    ArchWeights alpha(4, 0.0);
    for (double& a : alpha.flat()) a = rng.uniform(0.001, 0.999);
    const auto base = autoco::select_ops(alpha);
    REQUIRE(autoco::select_ops(autoco::discretize(alpha)) == base);

    ArchWeights scaled = alpha;
    for (double& a : scaled.flat()) a *= 7.25;
    REQUIRE(autoco::select_ops(scaled) == base);
  }
}

TEST_CASE("fixed_arch builds a unit one-hot per pair") {
  const ArchWeights a = autoco::fixed_arch(3, Op::kMin);
  for (int p = 0; p < a.pair_count(); ++p)
    for (int k = 0; k < 5; ++k)
      REQUIRE(a.at(p, k) == (k == static_cast<int>(Op::kMin) ? 1.0 : 0.0));
}

TEST_CASE("pair indexing enumerates (i<j) in row-major order") {
  REQUIRE(ArchWeights::pair_count_for(5) == 10);
  REQUIRE(ArchWeights::pair_index(5, 0, 1) == 0);
  REQUIRE(ArchWeights::pair_index(5, 0, 4) == 3);
  REQUIRE(ArchWeights::pair_index(5, 1, 2) == 4);
  REQUIRE(ArchWeights::pair_index(5, 3, 4) == 9);
}

namespace {

// A single-pair setup where only PLUS produces a nonzero contribution, and
// that contribution points toward the label: its architecture weight must
// climb while the others stand still.
struct PlusWorld {
  FieldSchema schema{std::vector<autoco::Field>{{"a", 1}, {"b", 1}}};
  ModelParams params;
  ArchWeights alpha{2, autoco::kAlphaInit};
  std::vector<autoco::LabeledExample> batch;

  PlusWorld() {
    Rng rng(1);
    params = autoco::init_model(schema, 1, true, ModelInit{}, rng);
    for (auto& t : params.emb.tables()) std::fill(t.v.begin(), t.v.end(), 0.0);
    for (auto& h : params.heads) {
      std::fill(h.w.begin(), h.w.end(), 0.0);
      h.b = 0.0;
    }
    const int plus = static_cast<int>(Op::kPlus);
    params.emb.row(0, plus, 0)[0] = 1.0;
    params.emb.row(1, plus, 0)[0] = 1.0;
    params.heads[std::size_t(plus)].w = {1.0};

    autoco::LabeledExample ex;
    ex.x.values = {0, 0};
    ex.y = 1.0;
    batch.push_back(ex);
  }
};

}  // namespace

TEST_CASE("ifs_step migrates alpha mass toward the loss-reducing operator") {
  PlusWorld w;
  autoco::SearchOptions opt;
  opt.eta_theta = 0.0;  // isolate the architecture update
  autoco::Gradients scratch = autoco::make_gradients(w.schema, 1, true);

  const int plus = static_cast<int>(Op::kPlus);
  double prev = w.alpha.at(0, plus);
  for (int step = 0; step < 200; ++step) {
    autoco::ifs_step(w.batch, w.alpha, w.params, opt, scratch);
    const double cur = w.alpha.at(0, plus);
    if (cur < 1.0 - autoco::kAlphaClip) REQUIRE(cur > prev);
    prev = cur;
    // Operators with zero contribution see zero gradient and stay put.
    REQUIRE(w.alpha.at(0, static_cast<int>(Op::kMax)) == autoco::kAlphaInit);
  }
  REQUIRE(w.alpha.at(0, plus) == 1.0 - autoco::kAlphaClip);
  REQUIRE(autoco::select_ops(w.alpha)[0] == Op::kPlus);
}

TEST_CASE("ifs_step returns the pre-update minibatch loss and learns", "[slow]") {
  // Supervised smoke test: labels from a hidden multiply model, loss after
  // 300 joint steps is well below the starting loss.
  Rng rng(9);
  FieldSchema schema({{"a", 4}, {"b", 3}, {"c", 5}});
  ModelParams hidden = autoco::init_model(schema, 2, true, ModelInit{}, rng);
  for (auto& t : hidden.emb.tables())
    for (double& v : t.v) v = rng.normal(0.0, 0.8);
  for (auto& h : hidden.heads)
    for (double& v : h.w) v = rng.normal(0.0, 0.8);
  const std::vector<Op> gen_ops(3, Op::kMultiply);

  std::vector<autoco::LabeledExample> batch;
  for (int n = 0; n < 256; ++n) {
    autoco::LabeledExample ex;
    ex.x.values = {rng.uniform_int(4), rng.uniform_int(3), rng.uniform_int(5)};
    ex.y = rng.bernoulli(autoco::predict_ctr(ex.x, gen_ops, hidden)) ? 1.0 : 0.0;
    batch.push_back(ex);
  }

  ModelParams params =
      autoco::init_model(schema, 2, true, ModelInit{.emb_std = 0.3}, rng);
  ArchWeights alpha(3, autoco::kAlphaInit);
  autoco::SearchOptions opt;
  opt.eta_theta = 0.1;
  opt.eta_alpha = 0.05;
  autoco::Gradients scratch = autoco::make_gradients(schema, 2, true);

  const double first = autoco::ifs_step(batch, alpha, params, opt, scratch);
  double last = first;
  for (int step = 0; step < 2500; ++step)
    last = autoco::ifs_step(batch, alpha, params, opt, scratch);
  REQUIRE(last < first - 0.05);

  // The search state stays a valid discrete model throughout.
  const ArchWeights disc = autoco::discretize(alpha);
  for (int p = 0; p < disc.pair_count(); ++p) {
    int nonzero = 0;
    for (int k = 0; k < 5; ++k) nonzero += disc.at(p, k) != 0.0 ? 1 : 0;
    REQUIRE(nonzero == 1);
  }
}

TEST_CASE("ifs_step honors the update flags") {
  PlusWorld w;
  autoco::SearchOptions opt;
  opt.update_alpha = false;
  opt.update_heads = false;
  autoco::Gradients scratch = autoco::make_gradients(w.schema, 1, true);
  const ArchWeights alpha_before = w.alpha;
  const auto heads_before = w.params.heads;
  autoco::ifs_step(w.batch, w.alpha, w.params, opt, scratch);
  REQUIRE(w.alpha == alpha_before);
  for (int k = 0; k < 5; ++k) {
    REQUIRE(w.params.heads[std::size_t(k)].w ==
            heads_before[std::size_t(k)].w);
    REQUIRE(w.params.heads[std::size_t(k)].b == heads_before[std::size_t(k)].b);
  }
}

TEST_CASE("stationary batches leave alpha unchanged up to clamping") {
  PlusWorld w;
  // Make the single example stationary: y = sigma(logit).
  const ArchWeights disc = autoco::discretize(w.alpha);
  const double z = autoco::forward_mixed(w.batch[0].x, disc, w.params);
  w.batch[0].y = autoco::sigmoid(z);
  autoco::SearchOptions opt;
  autoco::Gradients scratch = autoco::make_gradients(w.schema, 1, true);
  const ArchWeights before = w.alpha;
  autoco::ifs_step(w.batch, w.alpha, w.params, opt, scratch);
  REQUIRE(w.alpha == before);
}
