#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "autoco/bayes.hpp"
#include "autoco/model.hpp"

namespace autoco::checkpoint {

// Flat binary checkpoints, bit-exact by construction (raw little-endian
// doubles, no text round-trip).  Layout:
//
//   magic            8 bytes: "ACOMODL1" (point model) / "ACOVARL1" (posterior)
//   schema_hash      u64     FieldSchema::hash() of the training schema
//   dim              u32
//   operation_aware  u32     0 or 1
//   field_count      u32
//   rows[field]      u32 each (cardinality + unknown slot)
//   payload          doubles, row-major:
//     model:      embedding tables in (field, operator) order, then per
//                 operator head weights + bias, then per-field first-order
//                 weights, then the global bias
//     posterior:  mu tables, rho tables (each in (field, operator) order),
//                 then heads and first-order terms as above
//
// Loading validates magic, schema hash, and shape before reading any payload,
// so a checkpoint can never be restored against a mismatched schema.

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline constexpr char kModelMagic[8] = {'A', 'C', 'O', 'M', 'O', 'D', 'L', '1'};
inline constexpr char kVariationalMagic[8] = {'A', 'C', 'O', 'V', 'A',
                                              'R', 'L', '1'};

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
  out.write(reinterpret_cast<const char*>(v.data()),
            static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw CheckpointError("truncated checkpoint: " + path);
  return v;
}

inline std::uint64_t read_u64(std::istream& in, const std::string& path) {
  std::uint64_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
    throw CheckpointError("truncated checkpoint: " + path);
  return v;
}

inline void read_doubles(std::istream& in, std::vector<double>& v,
                         const std::string& path) {
  if (!in.read(reinterpret_cast<char*>(v.data()),
               static_cast<std::streamsize>(v.size() * sizeof(double))))
    throw CheckpointError("truncated checkpoint: " + path);
}

inline void write_header(std::ostream& out, const char magic[8],
                         const FieldSchema& schema, int dim,
                         bool operation_aware) {
  out.write(magic, 8);
  write_u64(out, schema.hash());
  write_u32(out, static_cast<std::uint32_t>(dim));
  write_u32(out, operation_aware ? 1 : 0);
  write_u32(out, static_cast<std::uint32_t>(schema.field_count()));
  for (int f = 0; f < schema.field_count(); ++f)
    write_u32(out, static_cast<std::uint32_t>(schema.rows(f)));
}

// Validates the header against the expected schema and returns (dim,
// operation_aware).
inline std::pair<int, bool> read_header(std::istream& in, const char magic[8],
                                        const FieldSchema& schema,
                                        const std::string& path) {
  char got[8] = {};
  if (!in.read(got, 8) || std::memcmp(got, magic, 8) != 0)
    throw CheckpointError("not a checkpoint of the expected kind: " + path);
  const std::uint64_t hash = read_u64(in, path);
  if (hash != schema.hash())
    throw CheckpointError("checkpoint schema hash mismatch: " + path);
  const int dim = static_cast<int>(read_u32(in, path));
  const bool oae = read_u32(in, path) != 0;
  const int fields = static_cast<int>(read_u32(in, path));
  if (fields != schema.field_count())
    throw CheckpointError("checkpoint field count mismatch: " + path);
  for (int f = 0; f < schema.field_count(); ++f)
    if (static_cast<int>(read_u32(in, path)) != schema.rows(f))
      throw CheckpointError("checkpoint row count mismatch in field '" +
                            schema.field(f).name + "': " + path);
  return {dim, oae};
}

inline void write_tables(std::ostream& out, const EmbeddingTables& emb) {
  for (const Table& t : emb.tables()) write_doubles(out, t.v);
}

inline void read_tables(std::istream& in, EmbeddingTables& emb,
                        const std::string& path) {
  for (Table& t : emb.tables()) read_doubles(in, t.v, path);
}

inline void write_heads_first(std::ostream& out,
                              const std::array<FcHead, kNumOps>& heads,
                              const FirstOrder& first) {
  for (const FcHead& h : heads) {
    write_doubles(out, h.w);
    out.write(reinterpret_cast<const char*>(&h.b), sizeof h.b);
  }
  for (const auto& fw : first.w) write_doubles(out, fw);
  out.write(reinterpret_cast<const char*>(&first.bias), sizeof first.bias);
}

inline void read_heads_first(std::istream& in,
                             std::array<FcHead, kNumOps>& heads,
                             FirstOrder& first, const std::string& path) {
  for (FcHead& h : heads) {
    read_doubles(in, h.w, path);
    if (!in.read(reinterpret_cast<char*>(&h.b), sizeof h.b))
      throw CheckpointError("truncated checkpoint: " + path);
  }
  for (auto& fw : first.w) read_doubles(in, fw, path);
  if (!in.read(reinterpret_cast<char*>(&first.bias), sizeof first.bias))
    throw CheckpointError("truncated checkpoint: " + path);
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write checkpoint: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint: " + path);
  return in;
}

}  // namespace detail

inline void save_model(const std::string& path, const FieldSchema& schema,
                       const ModelParams& params) {
  std::ofstream out = detail::open_out(path);
  detail::write_header(out, detail::kModelMagic, schema, params.dim,
                       params.emb.operation_aware());
  detail::write_tables(out, params.emb);
  detail::write_heads_first(out, params.heads, params.first);
  if (!out) throw CheckpointError("write failed: " + path);
}

inline ModelParams load_model(const std::string& path,
                              const FieldSchema& schema) {
  std::ifstream in = detail::open_in(path);
  const auto [dim, oae] =
      detail::read_header(in, detail::kModelMagic, schema, path);
  Rng unused(0);
  ModelParams p = init_model(schema, dim, oae, ModelInit{}, unused);
  detail::read_tables(in, p.emb, path);
  detail::read_heads_first(in, p.heads, p.first, path);
  return p;
}

// The posterior checkpoint carries everything needed to resume or serve a
// variationally trained model except the architecture weights, which have
// their own artifact (the operator map below) because they are the part that
// gets audited and frozen.
struct VariationalCheckpoint {
  int dim = 0;
  VariationalParams vp;
  std::array<FcHead, kNumOps> heads;
  FirstOrder first;
};

inline void save_variational(const std::string& path, const FieldSchema& schema,
                             const VariationalCheckpoint& ckpt) {
  std::ofstream out = detail::open_out(path);
  detail::write_header(out, detail::kVariationalMagic, schema, ckpt.dim,
                       ckpt.vp.mu.operation_aware());
  detail::write_tables(out, ckpt.vp.mu);
  detail::write_tables(out, ckpt.vp.rho);
  detail::write_heads_first(out, ckpt.heads, ckpt.first);
  if (!out) throw CheckpointError("write failed: " + path);
}

inline VariationalCheckpoint load_variational(const std::string& path,
                                              const FieldSchema& schema) {
  std::ifstream in = detail::open_in(path);
  const auto [dim, oae] =
      detail::read_header(in, detail::kVariationalMagic, schema, path);
  VariationalCheckpoint c;
  c.dim = dim;
  c.vp.mu = EmbeddingTables(schema, dim, oae);
  c.vp.rho = EmbeddingTables(schema, dim, oae);
  detail::read_tables(in, c.vp.mu, path);
  detail::read_tables(in, c.vp.rho, path);
  Rng unused(0);
  ModelParams shape = init_model(schema, dim, oae, ModelInit{}, unused);
  c.heads = std::move(shape.heads);
  c.first = std::move(shape.first);
  detail::read_heads_first(in, c.heads, c.first, path);
  return c;
}

// Selected-operator map as JSON, keyed "i,j" per field pair: small, diffable,
// and loadable to freeze an architecture.
inline void save_ops_json(const std::string& path, int field_count,
                          const std::vector<Op>& ops) {
  if (static_cast<int>(ops.size()) != ArchWeights::pair_count_for(field_count))
    throw CheckpointError("save_ops_json: need one operator per field pair");
  nlohmann::ordered_json j;
  int p = 0;
  for (int i = 0; i < field_count; ++i)
    for (int k = i + 1; k < field_count; ++k, ++p)
      j[std::to_string(i) + "," + std::to_string(k)] =
          op_name(ops[static_cast<std::size_t>(p)]);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw CheckpointError("cannot write operator map: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw CheckpointError("write failed: " + path);
}

inline std::vector<Op> load_ops_json(const std::string& path, int field_count) {
  std::ifstream in(path);
  if (!in) throw CheckpointError("cannot open operator map: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("bad operator map " + path + ": " + e.what());
  }
  std::vector<Op> ops(
      static_cast<std::size_t>(ArchWeights::pair_count_for(field_count)),
      Op::kMultiply);
  std::vector<bool> seen(ops.size(), false);
  for (const auto& [key, value] : j.items()) {
    const std::size_t comma = key.find(',');
    int i = -1;
    int k = -1;
    try {
      i = std::stoi(key.substr(0, comma));
      k = std::stoi(key.substr(comma + 1));
    } catch (...) {
      throw CheckpointError("bad pair key '" + key + "' in " + path);
    }
    if (comma == std::string::npos || i < 0 || k <= i || k >= field_count)
      throw CheckpointError("bad pair key '" + key + "' in " + path);
    const auto op = op_from_name(value.get<std::string>());
    if (!op)
      throw CheckpointError("unknown operator '" +
                            value.get<std::string>() + "' in " + path);
    const int p = ArchWeights::pair_index(field_count, i, k);
    ops[static_cast<std::size_t>(p)] = *op;
    seen[static_cast<std::size_t>(p)] = true;
  }
  for (std::size_t p = 0; p < seen.size(); ++p)
    if (!seen[p])
      throw CheckpointError("operator map " + path + " is missing pairs");
  return ops;
}

}  // namespace autoco::checkpoint
