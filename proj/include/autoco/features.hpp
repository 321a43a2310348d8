#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace autoco {

// Thrown by the dataset loaders and parsers; carries file/line context in the
// message.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Field {
  std::string name;
  int cardinality = 0;  // number of in-vocabulary categories (excludes the
                        // reserved unknown slot)
};

// Ordered list of categorical fields.  Every embedding/weight table in the
// model reserves one extra row per field for out-of-vocabulary values, so a
// field with cardinality l owns row indices 0..l, with l being the unknown
// slot.
class FieldSchema {
 public:
  FieldSchema() = default;

  explicit FieldSchema(std::vector<Field> fields) : fields_(std::move(fields)) {
    for (std::size_t i = 0; i < fields_.size(); ++i) {
      if (fields_[i].cardinality < 1)
        throw std::invalid_argument("field '" + fields_[i].name +
                                    "' has cardinality < 1");
      for (std::size_t j = 0; j < i; ++j)
        if (fields_[j].name == fields_[i].name)
          throw std::invalid_argument("duplicate field name '" +
                                      fields_[i].name + "'");
    }
  }

  int field_count() const { return static_cast<int>(fields_.size()); }
  int pair_count() const {
    const int n = field_count();
    return n * (n - 1) / 2;
  }
  const Field& field(int i) const { return fields_[static_cast<std::size_t>(i)]; }
  // Rows of any per-field table: in-vocabulary categories plus the unknown
  // slot.
  int rows(int i) const { return field(i).cardinality + 1; }
  int unknown_index(int i) const { return field(i).cardinality; }

  bool operator==(const FieldSchema& other) const {
    if (fields_.size() != other.fields_.size()) return false;
    for (std::size_t i = 0; i < fields_.size(); ++i)
      if (fields_[i].name != other.fields_[i].name ||
          fields_[i].cardinality != other.fields_[i].cardinality)
        return false;
    return true;
  }

  // Stable content hash, embedded in checkpoints so that a model trained
  // against one schema is never restored against another.
  std::uint64_t hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::string_view bytes) {
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
    };
    for (const Field& f : fields_) {
      mix(f.name);
      mix(std::string_view("\x1f", 1));
      mix(std::to_string(f.cardinality));
      mix(std::string_view("\x1e", 1));
    }
    return h;
  }

 private:
  std::vector<Field> fields_;
};

// One categorical value index per schema field.
struct FeatureVector {
  std::vector<std::int32_t> values;

  bool operator==(const FeatureVector& other) const {
    return values == other.values;
  }
};

struct LabeledExample {
  FeatureVector x;
  double y = 0.0;  // target in [0, 1]
};

// Bidirectional token <-> index mapping per field, built in first-occurrence
// order while scanning a dataset.  encode() maps unseen tokens to the
// schema's reserved unknown slot rather than failing.
class Vocabulary {
 public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> field_names)
      : names_(std::move(field_names)),
        index_(names_.size()),
        tokens_(names_.size()) {}

  int field_count() const { return static_cast<int>(names_.size()); }
  const std::string& field_name(int f) const {
    return names_[static_cast<std::size_t>(f)];
  }

  // Returns the index for token in field f, inserting it if new.
  int add(int f, const std::string& token) {
    auto& map = index_[static_cast<std::size_t>(f)];
    auto it = map.find(token);
    if (it != map.end()) return it->second;
    const int id = static_cast<int>(tokens_[static_cast<std::size_t>(f)].size());
    map.emplace(token, id);
    tokens_[static_cast<std::size_t>(f)].push_back(token);
    return id;
  }

  // Index of token in field f, or the unknown slot (== cardinality) if the
  // token was never added.
  int lookup(int f, std::string_view token) const {
    const auto& map = index_[static_cast<std::size_t>(f)];
    auto it = map.find(std::string(token));
    if (it != map.end()) return it->second;
    return cardinality(f);
  }

  int cardinality(int f) const {
    return static_cast<int>(tokens_[static_cast<std::size_t>(f)].size());
  }

  const std::string& token(int f, int idx) const {
    return tokens_[static_cast<std::size_t>(f)][static_cast<std::size_t>(idx)];
  }

  FieldSchema schema() const {
    std::vector<Field> fields;
    fields.reserve(names_.size());
    for (int f = 0; f < field_count(); ++f)
      fields.push_back(Field{names_[static_cast<std::size_t>(f)], cardinality(f)});
    return FieldSchema(std::move(fields));
  }

  // Encodes one raw token per field; unseen tokens land on the unknown slot.
  FeatureVector encode(const std::vector<std::string>& tokens) const {
    if (static_cast<int>(tokens.size()) != field_count())
      throw std::invalid_argument("encode: expected " +
                                  std::to_string(field_count()) +
                                  " tokens, got " +
                                  std::to_string(tokens.size()));
    FeatureVector x;
    x.values.reserve(tokens.size());
    for (int f = 0; f < field_count(); ++f)
      x.values.push_back(lookup(f, tokens[static_cast<std::size_t>(f)]));
    return x;
  }

  // Inverse of encode for in-vocabulary values; unknown slots decode to "?".
  std::vector<std::string> decode(const FeatureVector& x) const {
    std::vector<std::string> out;
    out.reserve(x.values.size());
    for (int f = 0; f < field_count(); ++f) {
      const int v = x.values[static_cast<std::size_t>(f)];
      out.push_back(v < cardinality(f) ? token(f, v) : std::string("?"));
    }
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<std::unordered_map<std::string, int>> index_;
  std::vector<std::vector<std::string>> tokens_;
};

// A categorical classification dataset: encoded context rows plus a binary
// label per row.
struct CategoricalDataset {
  Vocabulary vocab;
  FieldSchema schema;  // context fields only
  std::vector<FeatureVector> rows;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return rows.size(); }
};

namespace detail {

inline std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

[[noreturn]] inline void fail_at(const std::string& path, long line,
                                 const std::string& what) {
  throw ParseError(path + ":" + std::to_string(line) + ": " + what);
}

}  // namespace detail

// Loads the UCI mushroom file (agaricus-lepiota.data): 23 comma-separated
// tokens per row, class first ('e' edible / 'p' poisonous), then 22
// categorical attributes.  '?' is kept as an ordinary category value.
// labels[i] == 1 means edible.
inline CategoricalDataset load_mushroom(const std::string& path) {
  static const char* kAttributes[] = {
      "cap-shape", "cap-surface", "cap-color", "bruises", "odor",
      "gill-attachment", "gill-spacing", "gill-size", "gill-color",
      "stalk-shape", "stalk-root", "stalk-surface-above-ring",
      "stalk-surface-below-ring", "stalk-color-above-ring",
      "stalk-color-below-ring", "veil-type", "veil-color", "ring-number",
      "ring-type", "spore-print-color", "population", "habitat"};
  constexpr int kNumAttributes = 22;

  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");

  CategoricalDataset data;
  data.vocab = Vocabulary(
      std::vector<std::string>(kAttributes, kAttributes + kNumAttributes));

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> tokens = detail::split_csv(line);
    if (tokens.size() != kNumAttributes + 1)
      detail::fail_at(path, line_no,
                      "expected " + std::to_string(kNumAttributes + 1) +
                          " fields, got " + std::to_string(tokens.size()));
    std::uint8_t edible = 0;
    if (tokens[0] == "e")
      edible = 1;
    else if (tokens[0] == "p")
      edible = 0;
    else
      detail::fail_at(path, line_no, "unknown class label '" + tokens[0] + "'");

    FeatureVector x;
    x.values.reserve(kNumAttributes);
    for (int f = 0; f < kNumAttributes; ++f)
      x.values.push_back(
          data.vocab.add(f, tokens[static_cast<std::size_t>(f) + 1]));
    data.rows.push_back(std::move(x));
    data.labels.push_back(edible);
  }
  if (data.rows.empty()) throw ParseError(path + ": no records");
  data.schema = data.vocab.schema();
  return data;
}

namespace detail {

// Columns of the UCI adult table that are categorical, with their positions
// in the 15-column record.  Numeric columns are dropped.
struct AdultColumn {
  const char* name;
  int index;
};

inline constexpr AdultColumn kAdultColumns[] = {
    {"workclass", 1},    {"education", 3},  {"marital-status", 5},
    {"occupation", 6},   {"relationship", 7}, {"race", 8},
    {"sex", 9},          {"native-country", 13}};
inline constexpr int kAdultContextFields = 8;
inline constexpr int kAdultRecordTokens = 15;

inline void load_adult_file(const std::string& path, CategoricalDataset& data) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open file");

  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim(line);
    if (body.empty()) continue;
    if (body[0] == '|') continue;  // comment header in adult.test
    const std::vector<std::string> tokens = split_csv(body);
    if (tokens.size() != kAdultRecordTokens)
      fail_at(path, line_no,
              "expected " + std::to_string(kAdultRecordTokens) +
                  " fields, got " + std::to_string(tokens.size()));

    std::string label = tokens[kAdultRecordTokens - 1];
    if (!label.empty() && label.back() == '.') label.pop_back();  // adult.test
    std::uint8_t over50k = 0;
    if (label == ">50K")
      over50k = 1;
    else if (label == "<=50K")
      over50k = 0;
    else
      fail_at(path, line_no, "unknown income label '" + label + "'");

    FeatureVector x;
    x.values.reserve(kAdultContextFields);
    for (int f = 0; f < kAdultContextFields; ++f)
      x.values.push_back(data.vocab.add(
          f, tokens[static_cast<std::size_t>(kAdultColumns[f].index)]));
    data.rows.push_back(std::move(x));
    data.labels.push_back(over50k);
  }
}

}  // namespace detail

// Loads the UCI adult dataset from one or more files (train and test splits
// are concatenated; trailing '.' on test labels is accepted).  Keeps the 8
// categorical attributes, drops the numeric ones.  labels[i] == 1 means
// income > 50K.
inline CategoricalDataset load_adult(const std::vector<std::string>& paths) {
  CategoricalDataset data;
  std::vector<std::string> names;
  for (const auto& col : detail::kAdultColumns) names.push_back(col.name);
  data.vocab = Vocabulary(std::move(names));

  for (const std::string& path : paths) detail::load_adult_file(path, data);
  if (data.rows.empty())
    throw ParseError(paths.empty() ? std::string("load_adult")
                                   : paths.front() + ": no records");
  data.schema = data.vocab.schema();
  return data;
}

inline CategoricalDataset load_adult(const std::string& path) {
  return load_adult(std::vector<std::string>{path});
}

// ---------------------------------------------------------------------------
// Internal record format
// ---------------------------------------------------------------------------
//
// A prepared dataset as a self-describing text artifact: vocabulary (field
// names, tokens in index order) followed by encoded rows.  Round-trips a
// CategoricalDataset exactly.
//
//   autoco-records 1
//   fields <F>
//   field <name> <cardinality> <token...>
//   rows <M>
//   <value...> <label>

inline void save_records(const CategoricalDataset& data, std::ostream& os) {
  os << "autoco-records 1\n";
  os << "fields " << data.vocab.field_count() << "\n";
  for (int f = 0; f < data.vocab.field_count(); ++f) {
    os << "field " << data.vocab.field_name(f) << ' '
       << data.vocab.cardinality(f);
    for (int v = 0; v < data.vocab.cardinality(f); ++v) {
      const std::string& token = data.vocab.token(f, v);
      if (token.empty() ||
          token.find_first_of(" \t\r\n") != std::string::npos)
        throw ParseError("save_records: token not serializable: '" + token +
                         "'");
      os << ' ' << token;
    }
    os << "\n";
  }
  os << "rows " << data.rows.size() << "\n";
  for (std::size_t i = 0; i < data.rows.size(); ++i) {
    const FeatureVector& x = data.rows[i];
    for (std::int32_t v : x.values) os << v << ' ';
    os << static_cast<int>(data.labels[i]) << "\n";
  }
}

inline void save_records(const CategoricalDataset& data,
                         const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError(path + ": cannot open for writing");
  save_records(data, os);
}

inline CategoricalDataset load_records(std::istream& is,
                                       const std::string& source = "records") {
  auto fail = [&source](const std::string& what) -> ParseError {
    return ParseError(source + ": " + what);
  };
  std::string word;
  int version = 0;
  if (!(is >> word >> version) || word != "autoco-records" || version != 1)
    throw fail("not a version-1 records file");

  int field_count = 0;
  if (!(is >> word >> field_count) || word != "fields" || field_count <= 0)
    throw fail("bad fields header");

  CategoricalDataset data;
  std::vector<std::string> names(static_cast<std::size_t>(field_count));
  std::vector<std::vector<std::string>> tokens(
      static_cast<std::size_t>(field_count));
  for (int f = 0; f < field_count; ++f) {
    int card = 0;
    if (!(is >> word) || word != "field" ||
        !(is >> names[static_cast<std::size_t>(f)] >> card) || card <= 0)
      throw fail("bad field line");
    tokens[static_cast<std::size_t>(f)].resize(static_cast<std::size_t>(card));
    for (int v = 0; v < card; ++v)
      if (!(is >> tokens[static_cast<std::size_t>(f)][static_cast<std::size_t>(v)]))
        throw fail("truncated token list");
  }
  data.vocab = Vocabulary(names);
  for (int f = 0; f < field_count; ++f)
    for (const std::string& token : tokens[static_cast<std::size_t>(f)])
      data.vocab.add(f, token);

  std::size_t row_count = 0;
  if (!(is >> word >> row_count) || word != "rows")
    throw fail("bad rows header");
  data.rows.reserve(row_count);
  data.labels.reserve(row_count);
  for (std::size_t i = 0; i < row_count; ++i) {
    FeatureVector x;
    x.values.reserve(static_cast<std::size_t>(field_count));
    for (int f = 0; f < field_count; ++f) {
      int v = 0;
      if (!(is >> v)) throw fail("truncated row " + std::to_string(i));
      if (v < 0 || v > data.vocab.cardinality(f))
        throw fail("row " + std::to_string(i) + ": value " +
                   std::to_string(v) + " out of range for field " +
                   names[static_cast<std::size_t>(f)]);
      x.values.push_back(static_cast<std::int32_t>(v));
    }
    int label = 0;
    if (!(is >> label) || (label != 0 && label != 1))
      throw fail("bad label in row " + std::to_string(i));
    data.rows.push_back(std::move(x));
    data.labels.push_back(static_cast<std::uint8_t>(label));
  }
  data.schema = data.vocab.schema();
  return data;
}

inline CategoricalDataset load_records(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError(path + ": cannot open");
  return load_records(is, path);
}

}  // namespace autoco
