#include "facdiff/kv_config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace facdiff {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Drops a trailing comment that is not inside a string.
std::string_view strip_comment(std::string_view s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + what);
}

KvValue parse_scalar(std::string_view s, int line) {
  s = trim(s);
  if (s.empty()) fail(line, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"') fail(line, "unterminated string");
    return kv_string(std::string(s.substr(1, s.size() - 2)));
  }
  if (s == "true" || s == "false") return kv_bool(s == "true");
  double v = 0.0;
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) fail(line, "cannot parse value '" + std::string(s) + "'");
  KvValue out;
  out.kind = KvValue::Kind::number;
  out.text = std::string(s);
  return out;
}

KvValue parse_value(std::string_view s, int line) {
  s = trim(s);
  if (!s.empty() && s.front() == '[') {
    if (s.back() != ']') fail(line, "arrays must be on one line");
    KvValue arr;
    arr.kind = KvValue::Kind::array;
    std::string_view body = trim(s.substr(1, s.size() - 2));
    bool quoted = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i < body.size() && body[i] == '"') quoted = !quoted;
      if (i == body.size() || (body[i] == ',' && !quoted)) {
        const auto item = trim(body.substr(start, i - start));
        if (!item.empty()) arr.items.push_back(parse_scalar(item, line));
        start = i + 1;
      }
    }
    return arr;
  }
  return parse_scalar(s, line);
}

}  // namespace

std::string KvValue::as_text() const {
  if (kind != Kind::array) return text;
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i].text;
  return out;
}

double KvValue::as_number() const {
  if (kind != Kind::number) throw std::invalid_argument("expected a number, got '" + as_text() + "'");
  double v = 0.0;
  const auto* first = text.data() + (text.front() == '+' ? 1 : 0);
  std::from_chars(first, text.data() + text.size(), v);
  return v;
}

long long KvValue::as_integer() const {
  const double v = as_number();
  if (v != std::floor(v)) throw std::invalid_argument("expected an integer, got '" + text + "'");
  return static_cast<long long>(v);
}

bool KvValue::as_bool() const {
  if (kind != Kind::boolean) throw std::invalid_argument("expected true/false, got '" + as_text() + "'");
  return text == "true";
}

std::vector<std::string> KvValue::as_list() const {
  if (kind != Kind::array) return {text};
  std::vector<std::string> out;
  for (const auto& i : items) out.push_back(i.text);
  return out;
}

KvDocument KvDocument::parse(std::string_view text) {
  KvDocument doc;
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const auto line = trim(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') fail(line_no, "malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (section.empty()) fail(line_no, "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(line_no, "expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) fail(line_no, "empty key");
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    doc.set(std::move(full), parse_value(line.substr(eq + 1), line_no));
  }
  return doc;
}

KvDocument KvDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::optional<KvValue> KvDocument::get(std::string_view key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

void KvDocument::set(std::string key, KvValue value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(std::move(key), std::move(value));
}

std::vector<std::pair<std::string, KvValue>> KvDocument::section(std::string_view prefix) const {
  std::vector<std::pair<std::string, KvValue>> out;
  const std::string p = std::string(prefix) + ".";
  for (const auto& [k, v] : entries_) {
    if (k.starts_with(p)) out.emplace_back(k.substr(p.size()), v);
  }
  return out;
}

namespace {

std::string render(const KvValue& v) {
  switch (v.kind) {
    case KvValue::Kind::string: return "\"" + v.text + "\"";
    case KvValue::Kind::array: {
      std::string out = "[";
      for (std::size_t i = 0; i < v.items.size(); ++i) out += (i ? ", " : "") + render(v.items[i]);
      return out + "]";
    }
    default: return v.text;
  }
}

}  // namespace

std::string to_kv_text(const std::vector<std::pair<std::string, KvValue>>& entries) {
  std::ostringstream os;
  std::map<std::string, std::vector<std::pair<std::string, const KvValue*>>> sections;
  std::vector<std::string> order;
  for (const auto& [k, v] : entries) {
    const auto dot = k.find('.');
    if (dot == std::string::npos) {
      os << k << " = " << render(v) << '\n';
      continue;
    }
    const std::string sec = k.substr(0, dot);
    if (!sections.contains(sec)) order.push_back(sec);
    sections[sec].emplace_back(k.substr(dot + 1), &v);
  }
  for (const auto& sec : order) {
    os << "\n[" << sec << "]\n";
    for (const auto& [k, v] : sections[sec]) os << k << " = " << render(*v) << '\n';
  }
  return os.str();
}

KvValue kv_string(std::string s) { return {KvValue::Kind::string, std::move(s), {}}; }

KvValue kv_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  std::string text(buf, ptr);
  if (text.find_first_of(".eE") == std::string::npos && text.find("inf") == std::string::npos &&
      text.find("nan") == std::string::npos) {
    text += ".0";
  }
  return {KvValue::Kind::number, std::move(text), {}};
}

KvValue kv_integer(long long v) { return {KvValue::Kind::number, std::to_string(v), {}}; }

KvValue kv_bool(bool v) { return {KvValue::Kind::boolean, v ? "true" : "false", {}}; }

}  // namespace facdiff
