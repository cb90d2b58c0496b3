#include "config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>

#include "knitply/errors.hpp"

namespace knitply::cli {

namespace pt = boost::property_tree;

namespace {

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double to_double(const std::string& s, const std::string& where) {
  double v = 0;
  const char* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError(where + ": invalid number '" + s + "'");
  return v;
}

std::string fmt(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Keys may contain '.', so children are matched by name rather than by path.
void put(pt::ptree& tree, const std::string& section, const std::string& key, const std::string& value) {
  auto s = tree.find(section);
  pt::ptree& child = s == tree.not_found() ? tree.push_back({section, pt::ptree{}})->second : s->second;
  auto k = child.find(key);
  if (k == child.not_found()) {
    child.push_back({key, pt::ptree(value)});
  } else {
    k->second.data() = value;
  }
}

}  // namespace

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto dir = path.parent_path();
  return parse(ss.str(), dir.empty() ? std::filesystem::path(".") : dir);
}

Config Config::parse(const std::string& text, const std::filesystem::path& base_dir) {
  Config c;
  c.base_ = base_dir;
  std::istringstream in(text);
  try {
    pt::read_ini(in, c.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw ParseError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  return c;
}

std::optional<std::string> Config::raw(const std::string& section, const std::string& key) const {
  const auto s = tree_.find(section);
  if (s == tree_.not_found()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.not_found()) return std::nullopt;
  return trim(k->second.data());
}

void Config::record(const std::string& section, const std::string& key, const std::string& value) const {
  put(effective_, section, key, value);
}

bool Config::has(const std::string& section, const std::string& key) const { return raw(section, key).has_value(); }

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  put(tree_, section, key, value);
}

std::vector<std::string> Config::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, child] : tree_) out.push_back(name);
  return out;
}

std::string Config::text(const std::string& section, const std::string& key, const std::string& fallback) const {
  const std::string v = raw(section, key).value_or(fallback);
  record(section, key, v);
  return v;
}

std::string Config::required(const std::string& section, const std::string& key) const {
  const auto v = raw(section, key);
  if (!v || v->empty()) throw InvariantError("config: missing [" + section + "] " + key);
  record(section, key, *v);
  return *v;
}

double Config::number(const std::string& section, const std::string& key, double fallback) const {
  const auto v = raw(section, key);
  const double d = v ? to_double(*v, "[" + section + "] " + key) : fallback;
  record(section, key, fmt(d));
  return d;
}

long long Config::integer(const std::string& section, const std::string& key, long long fallback) const {
  const auto v = raw(section, key);
  long long n = fallback;
  if (v) {
    const auto [ptr, ec] = std::from_chars(v->data(), v->data() + v->size(), n);
    if (ec != std::errc{} || ptr != v->data() + v->size()) {
      throw ParseError("[" + section + "] " + key + ": invalid integer '" + *v + "'");
    }
  }
  record(section, key, std::to_string(n));
  return n;
}

bool Config::flag(const std::string& section, const std::string& key, bool fallback) const {
  const auto v = raw(section, key);
  bool b = fallback;
  if (v) {
    if (*v == "true" || *v == "1" || *v == "yes") {
      b = true;
    } else if (*v == "false" || *v == "0" || *v == "no") {
      b = false;
    } else {
      throw ParseError("[" + section + "] " + key + ": expected true or false, got '" + *v + "'");
    }
  }
  record(section, key, b ? "true" : "false");
  return b;
}

Vec3 Config::vec3(const std::string& section, const std::string& key, const Vec3& fallback) const {
  const auto v = raw(section, key);
  Vec3 out = fallback;
  if (v) {
    const auto parts = split_list(*v);
    if (parts.size() != 3) throw ParseError("[" + section + "] " + key + ": expected three numbers");
    const std::string where = "[" + section + "] " + key;
    out = {to_double(parts[0], where), to_double(parts[1], where), to_double(parts[2], where)};
  }
  record(section, key, fmt(out.x) + " " + fmt(out.y) + " " + fmt(out.z));
  return out;
}

std::filesystem::path Config::resolve(const std::filesystem::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_ / p;
}

std::filesystem::path Config::path(const std::string& section, const std::string& key,
                                   const std::filesystem::path& fallback) const {
  const auto v = raw(section, key);
  const std::filesystem::path p = v ? resolve(*v) : fallback;
  record(section, key, std::filesystem::absolute(p).lexically_normal().string());
  return p;
}

std::filesystem::path Config::required_path(const std::string& section, const std::string& key) const {
  const auto p = resolve(required(section, key));
  record(section, key, std::filesystem::absolute(p).lexically_normal().string());
  return p;
}

std::vector<std::string> Config::list(const std::string& section, const std::string& key) const {
  const auto v = raw(section, key);
  if (!v) return {};
  record(section, key, *v);
  return split_list(*v);
}

std::string Config::echo() const {
  std::ostringstream out;
  pt::write_ini(out, effective_);
  return out.str();
}

void Config::write_echo(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << echo();
}

}  // namespace knitply::cli
