#pragma once

// Plain-text key/value trees in a TOML-compatible subset: `[section]`
// headers, `key = value` lines, `#` comments, and values that are quoted
// strings, numbers, booleans or single-line arrays of those. Keys inside a
// section are flattened to `section.key`.

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace facdiff {

struct KvValue {
  enum class Kind { string, number, boolean, array };
  Kind kind = Kind::string;
  std::string text;            // scalar payload, unquoted
  std::vector<KvValue> items;  // array elements

  /// Scalars as written; arrays as a comma list.
  std::string as_text() const;
  double as_number() const;
  long long as_integer() const;
  bool as_bool() const;
  std::vector<std::string> as_list() const;  // a scalar is a one-element list
};

class KvDocument {
 public:
  /// Throws std::invalid_argument with a line number on malformed input.
  static KvDocument parse(std::string_view text);
  static KvDocument load(const std::string& path);

  const std::vector<std::pair<std::string, KvValue>>& entries() const noexcept { return entries_; }
  std::optional<KvValue> get(std::string_view key) const;
  bool contains(std::string_view key) const { return get(key).has_value(); }
  void set(std::string key, KvValue value);

  /// Entries whose key starts with `prefix.`, with the prefix removed.
  std::vector<std::pair<std::string, KvValue>> section(std::string_view prefix) const;

 private:
  std::vector<std::pair<std::string, KvValue>> entries_;
};

/// Renders `key = value` pairs, grouping dotted keys under `[section]` headers.
std::string to_kv_text(const std::vector<std::pair<std::string, KvValue>>& entries);

KvValue kv_string(std::string s);
KvValue kv_number(double v);
KvValue kv_integer(long long v);
KvValue kv_bool(bool v);

}  // namespace facdiff
