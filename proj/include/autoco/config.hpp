#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace autoco::config {

// Reader for the experiment-file format: a TOML subset covering what the
// configs in this repository actually use.
//
//   # comment
//   key = "string"            (escapes: \" \\ \n \t)
//   key = 42 / 4.2 / true     (integer, float, boolean)
//   key = [1, 2, 3]           (single-line array, elements of any value type)
//   [section] / [a.b]         (nested tables)
//   [[section]]               (array of tables, appended in file order)
//
// Anything outside this subset is a hard error with a file:line position —
// configs drive experiments, so a half-understood file must not run.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Value {
  enum class Kind { kString, kInteger, kFloat, kBoolean, kArray };

  Kind kind = Kind::kInteger;
  std::string str;
  std::int64_t integer = 0;
  double real = 0.0;
  bool boolean = false;
  std::vector<Value> items;
  int line = 0;  // where the value was written, for error messages

  const char* kind_name() const {
    switch (kind) {
      case Kind::kString: return "string";
      case Kind::kInteger: return "integer";
      case Kind::kFloat: return "float";
      case Kind::kBoolean: return "boolean";
      case Kind::kArray: return "array";
    }
    return "?";
  }
};

// A parsed table: scalar/array entries, named child tables, and arrays of
// tables.  Typed getters convert with an error that names the key, so config
// mistakes surface as "key 'dim': expected integer, got string" rather than
// as downstream misbehavior.
struct Table {
  std::map<std::string, Value> values;
  std::map<std::string, Table> children;
  std::map<std::string, std::vector<Table>> lists;

  bool has(const std::string& key) const { return values.count(key) != 0; }

  const Value& require(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end())
      throw ConfigError("missing required key '" + key + "'");
    return it->second;
  }

  static ConfigError type_error(const std::string& key, const Value& v,
                                const char* wanted) {
    return ConfigError("key '" + key + "' (line " + std::to_string(v.line) +
                       "): expected " + wanted + ", got " + v.kind_name());
  }

  std::string get_string(const std::string& key,
                         const std::string& fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second.kind != Value::Kind::kString)
      throw type_error(key, it->second, "string");
    return it->second.str;
  }

  std::string require_string(const std::string& key) const {
    const Value& v = require(key);
    if (v.kind != Value::Kind::kString) throw type_error(key, v, "string");
    return v.str;
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second.kind != Value::Kind::kInteger)
      throw type_error(key, it->second, "integer");
    return it->second.integer;
  }

  // Floats accept integer literals: "sigma0 = 1" means 1.0.
  double get_double(const std::string& key, double fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    const Value& v = it->second;
    if (v.kind == Value::Kind::kFloat) return v.real;
    if (v.kind == Value::Kind::kInteger) return static_cast<double>(v.integer);
    throw type_error(key, v, "float");
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second.kind != Value::Kind::kBoolean)
      throw type_error(key, it->second, "boolean");
    return it->second.boolean;
  }

  std::vector<std::string> get_string_array(
      const std::string& key, const std::vector<std::string>& fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second.kind != Value::Kind::kArray)
      throw type_error(key, it->second, "array");
    std::vector<std::string> out;
    for (const Value& v : it->second.items) {
      if (v.kind != Value::Kind::kString)
        throw type_error(key, v, "array of strings");
      out.push_back(v.str);
    }
    return out;
  }

  std::vector<std::int64_t> get_int_array(
      const std::string& key, const std::vector<std::int64_t>& fallback) const {
    auto it = values.find(key);
    if (it == values.end()) return fallback;
    if (it->second.kind != Value::Kind::kArray)
      throw type_error(key, it->second, "array");
    std::vector<std::int64_t> out;
    for (const Value& v : it->second.items) {
      if (v.kind != Value::Kind::kInteger)
        throw type_error(key, v, "array of integers");
      out.push_back(v.integer);
    }
    return out;
  }

  const Table* child(const std::string& key) const {
    auto it = children.find(key);
    return it == children.end() ? nullptr : &it->second;
  }

  const std::vector<Table>* list(const std::string& key) const {
    auto it = lists.find(key);
    return it == lists.end() ? nullptr : &it->second;
  }
};

namespace detail {

inline std::string_view strip(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
    s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
    s.remove_suffix(1);
  return s;
}

[[noreturn]] inline void fail(std::string_view source, int line,
                              const std::string& what) {
  throw ConfigError(std::string(source) + ":" + std::to_string(line) + ": " +
                    what);
}

// Removes a trailing comment, honoring '#' inside quoted strings.
inline std::string_view strip_comment(std::string_view s, std::string_view src,
                                      int line) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '\\') {
        if (i + 1 >= s.size()) fail(src, line, "dangling escape");
        ++i;
      } else if (c == '"') {
        quoted = false;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == '#') {
      return s.substr(0, i);
    }
  }
  if (quoted) fail(src, line, "unterminated string");
  return s;
}

inline bool valid_key(std::string_view key) {
  if (key.empty()) return false;
  for (char c : key)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-')
      return false;
  return true;
}

// Parses one value from the front of s, advancing it.  `src`/`line` feed
// error positions.
inline Value parse_value(std::string_view& s, std::string_view src, int line) {
  s = strip(s);
  if (s.empty()) fail(src, line, "expected a value");
  Value v;
  v.line = line;

  if (s.front() == '"') {
    v.kind = Value::Kind::kString;
    std::size_t i = 1;
    for (; i < s.size(); ++i) {
      const char c = s[i];
      if (c == '"') break;
      if (c == '\\') {
        if (i + 1 >= s.size()) fail(src, line, "dangling escape");
        const char e = s[++i];
        switch (e) {
          case '"': v.str.push_back('"'); break;
          case '\\': v.str.push_back('\\'); break;
          case 'n': v.str.push_back('\n'); break;
          case 't': v.str.push_back('\t'); break;
          default:
            fail(src, line, std::string("unsupported escape '\\") + e + "'");
        }
      } else {
        v.str.push_back(c);
      }
    }
    if (i >= s.size()) fail(src, line, "unterminated string");
    s.remove_prefix(i + 1);
    return v;
  }

  if (s.front() == '[') {
    v.kind = Value::Kind::kArray;
    s.remove_prefix(1);
    s = strip(s);
    if (!s.empty() && s.front() == ']') {
      s.remove_prefix(1);
      return v;
    }
    while (true) {
      v.items.push_back(parse_value(s, src, line));
      s = strip(s);
      if (s.empty()) fail(src, line, "unterminated array");
      if (s.front() == ',') {
        s.remove_prefix(1);
        continue;
      }
      if (s.front() == ']') {
        s.remove_prefix(1);
        return v;
      }
      fail(src, line, "expected ',' or ']' in array");
    }
  }

  // Bare token: boolean or number, ending at ',', ']', or whitespace.
  std::size_t end = 0;
  while (end < s.size() && s[end] != ',' && s[end] != ']' &&
         !std::isspace(static_cast<unsigned char>(s[end])))
    ++end;
  const std::string_view token = s.substr(0, end);
  s.remove_prefix(end);

  if (token == "true" || token == "false") {
    v.kind = Value::Kind::kBoolean;
    v.boolean = token == "true";
    return v;
  }

  const char* first = token.data();
  const char* last = token.data() + token.size();
  std::int64_t as_int = 0;
  auto ir = std::from_chars(first, last, as_int);
  if (ir.ec == std::errc() && ir.ptr == last) {
    v.kind = Value::Kind::kInteger;
    v.integer = as_int;
    return v;
  }
  double as_double = 0.0;
  auto dr = std::from_chars(first, last, as_double);
  if (dr.ec == std::errc() && dr.ptr == last) {
    v.kind = Value::Kind::kFloat;
    v.real = as_double;
    return v;
  }
  fail(src, line, "cannot parse value '" + std::string(token) + "'");
}

// Walks a dotted header path, creating child tables on the way.
inline Table* descend(Table* t, std::string_view path, std::string_view src,
                      int line) {
  while (!path.empty()) {
    const std::size_t dot = path.find('.');
    const std::string_view part =
        strip(dot == std::string_view::npos ? path : path.substr(0, dot));
    path = dot == std::string_view::npos ? std::string_view()
                                         : path.substr(dot + 1);
    if (!valid_key(part))
      fail(src, line, "bad table name part '" + std::string(part) + "'");
    t = &t->children[std::string(part)];
  }
  return t;
}

}  // namespace detail

inline Table parse_config(std::string_view text, std::string_view source_name) {
  Table root;
  Table* current = &root;
  std::map<std::string, bool> seen_headers;

  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, nl == std::string_view::npos ? text.size() - pos
                                                      : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;

    line = detail::strip(detail::strip_comment(line, source_name, line_no));
    if (line.empty()) continue;

    if (line.front() == '[') {
      const bool is_list = line.size() > 1 && line[1] == '[';
      const std::string_view close = is_list ? "]]" : "]";
      if (!line.ends_with(close))
        detail::fail(source_name, line_no, "malformed table header");
      std::string_view path = line.substr(is_list ? 2 : 1,
                                          line.size() - 2 * close.size());
      path = detail::strip(path);
      if (path.empty())
        detail::fail(source_name, line_no, "empty table header");

      if (is_list) {
        // [[a.b]]: the last path part names the list, the rest is a table
        // path.
        const std::size_t dot = path.rfind('.');
        Table* parent =
            dot == std::string_view::npos
                ? &root
                : detail::descend(&root, path.substr(0, dot), source_name,
                                  line_no);
        const std::string_view leaf =
            detail::strip(dot == std::string_view::npos ? path
                                                        : path.substr(dot + 1));
        if (!detail::valid_key(leaf))
          detail::fail(source_name, line_no,
                       "bad table name part '" + std::string(leaf) + "'");
        auto& list = parent->lists[std::string(leaf)];
        list.emplace_back();
        current = &list.back();
      } else {
        if (seen_headers[std::string(path)])
          detail::fail(source_name, line_no,
                       "duplicate table [" + std::string(path) + "]");
        seen_headers[std::string(path)] = true;
        current = detail::descend(&root, path, source_name, line_no);
      }
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      detail::fail(source_name, line_no, "expected 'key = value'");
    const std::string key(detail::strip(line.substr(0, eq)));
    if (!detail::valid_key(key))
      detail::fail(source_name, line_no, "bad key '" + key + "'");
    if (current->values.count(key))
      detail::fail(source_name, line_no, "duplicate key '" + key + "'");

    std::string_view rest = line.substr(eq + 1);
    Value v = detail::parse_value(rest, source_name, line_no);
    if (!detail::strip(rest).empty())
      detail::fail(source_name, line_no, "trailing characters after value");
    current->values.emplace(key, std::move(v));
  }
  return root;
}

inline Table load_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

}  // namespace autoco::config
