#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "autoco/checkpoint.hpp"
#include "autoco/model.hpp"
#include "autoco/rng.hpp"

using autoco::ArchWeights;
using autoco::Field;
using autoco::FieldSchema;
using autoco::init_model;
using autoco::ModelInit;
using autoco::ModelParams;
using autoco::Op;
using autoco::Rng;
using autoco::checkpoint::CheckpointError;
using autoco::checkpoint::load_model;
using autoco::checkpoint::load_ops_json;
using autoco::checkpoint::load_variational;
using autoco::checkpoint::save_model;
using autoco::checkpoint::save_ops_json;
using autoco::checkpoint::save_variational;
using autoco::checkpoint::VariationalCheckpoint;

namespace {

FieldSchema toy_schema() {
  return FieldSchema({Field{"a", 3}, Field{"b", 2}, Field{"c", 4}});
}

// Unique temp path, removed on destruction.
class TempPath {
 public:
  explicit TempPath(const std::string& suffix) {
    path_ = (std::filesystem::temp_directory_path() /
             ("autoco_ckpt_" + std::to_string(counter_++) + suffix))
                .string();
  }
  ~TempPath() { std::remove(path_.c_str()); }
  const std::string& str() const { return path_; }

 private:
  static inline int counter_ = 0;
  std::string path_;
};

bool params_equal(const ModelParams& a, const ModelParams& b) {
  if (a.dim != b.dim) return false;
  if (!(a.emb == b.emb)) return false;
  for (int k = 0; k < autoco::kNumOps; ++k) {
    if (a.heads[k].w != b.heads[k].w) return false;
    if (a.heads[k].b != b.heads[k].b) return false;
  }
  return a.first.w == b.first.w && a.first.bias == b.first.bias;
}

}  // namespace

TEST_CASE("model checkpoints round-trip bit-exactly", "[checkpoint]") {
  const FieldSchema schema = toy_schema();
  Rng rng(11);
  for (const bool oae : {false, true}) {
    const ModelParams params = init_model(
        schema, 4, oae, ModelInit{.emb_std = 0.3, .head_std = 0.5}, rng);
    TempPath path(".bin");
    save_model(path.str(), schema, params);
    const ModelParams loaded = load_model(path.str(), schema);
    CHECK(params_equal(params, loaded));
    CHECK(loaded.emb.operation_aware() == oae);
  }
}

TEST_CASE("variational checkpoints round-trip bit-exactly", "[checkpoint]") {
  const FieldSchema schema = toy_schema();
  Rng rng(12);
  const ModelParams params =
      init_model(schema, 3, true, ModelInit{.emb_std = 0.2, .head_std = 0.4},
                 rng);
  VariationalCheckpoint ckpt;
  ckpt.dim = 3;
  ckpt.vp.mu = params.emb;
  ckpt.vp.rho = params.emb;
  for (auto& t : ckpt.vp.rho.tables())
    for (double& v : t.v) v = rng.normal(-5.0, 0.3);
  ckpt.heads = params.heads;
  ckpt.first = params.first;

  TempPath path(".bin");
  save_variational(path.str(), schema, ckpt);
  const VariationalCheckpoint loaded = load_variational(path.str(), schema);
  CHECK(loaded.dim == 3);
  CHECK(loaded.vp.mu == ckpt.vp.mu);
  CHECK(loaded.vp.rho == ckpt.vp.rho);
  for (int k = 0; k < autoco::kNumOps; ++k)
    CHECK(loaded.heads[k].w == ckpt.heads[k].w);
  CHECK(loaded.first.w == ckpt.first.w);
}

TEST_CASE("schema mismatch is rejected", "[checkpoint]") {
  const FieldSchema schema = toy_schema();
  Rng rng(13);
  const ModelParams params = init_model(schema, 2, false, ModelInit{}, rng);
  TempPath path(".bin");
  save_model(path.str(), schema, params);

  const FieldSchema other({Field{"a", 3}, Field{"b", 2}, Field{"c", 5}});
  CHECK_THROWS_AS(load_model(path.str(), other), CheckpointError);
}

TEST_CASE("wrong checkpoint kind is rejected", "[checkpoint]") {
  const FieldSchema schema = toy_schema();
  Rng rng(14);
  const ModelParams params = init_model(schema, 2, false, ModelInit{}, rng);
  TempPath path(".bin");
  save_model(path.str(), schema, params);
  CHECK_THROWS_AS(load_variational(path.str(), schema), CheckpointError);
}

TEST_CASE("truncated checkpoints are rejected with the path", "[checkpoint]") {
  const FieldSchema schema = toy_schema();
  Rng rng(15);
  const ModelParams params = init_model(schema, 2, false, ModelInit{}, rng);
  TempPath path(".bin");
  save_model(path.str(), schema, params);

  const auto full = std::filesystem::file_size(path.str());
  std::filesystem::resize_file(path.str(), full - 9);
  try {
    (void)load_model(path.str(), schema);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(std::string(e.what()).find(path.str()) != std::string::npos);
  }
}

TEST_CASE("missing file reports cleanly", "[checkpoint]") {
  CHECK_THROWS_AS(load_model("/nonexistent/nope.bin", toy_schema()),
                  CheckpointError);
}

TEST_CASE("operator maps round-trip as json", "[checkpoint]") {
  const std::vector<Op> ops = {Op::kMultiply, Op::kConcat, Op::kMax};
  TempPath path(".json");
  save_ops_json(path.str(), 3, ops);
  CHECK(load_ops_json(path.str(), 3) == ops);

  // Keys are "i,j" pairs with canonical operator names.
  std::ifstream in(path.str());
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  CHECK(text.find("\"0,1\"") != std::string::npos);
  CHECK(text.find("\"MULTIPLY\"") != std::string::npos);
  CHECK(text.find("\"2,3\"") == std::string::npos);
}

TEST_CASE("operator maps validate shape and names", "[checkpoint]") {
  TempPath path(".json");
  CHECK_THROWS_AS(save_ops_json(path.str(), 4, {Op::kPlus}), CheckpointError);

  save_ops_json(path.str(), 3, {Op::kPlus, Op::kPlus, Op::kPlus});
  CHECK_THROWS_AS(load_ops_json(path.str(), 4), CheckpointError);

  {
    std::ofstream out(path.str());
    out << "{\"0,1\": \"NOPE\", \"0,2\": \"PLUS\", \"1,2\": \"PLUS\"}";
  }
  CHECK_THROWS_AS(load_ops_json(path.str(), 3), CheckpointError);
}
