#pragma once

// INI-style pipeline configuration: "[section]" headers, "key = value" lines,
// '#' or ';' comment lines. Relative paths resolve against the file's folder.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "knitply/vecmath.hpp"

namespace knitply::cli {

class Config {
 public:
  static Config load(const std::filesystem::path& path);
  static Config parse(const std::string& text, const std::filesystem::path& base_dir = ".");

  bool has(const std::string& section, const std::string& key) const;
  void set(const std::string& section, const std::string& key, const std::string& value);
  std::vector<std::string> sections() const;

  // Typed getters record the effective value (default or given) for echo().
  std::string text(const std::string& section, const std::string& key, const std::string& fallback) const;
  std::string required(const std::string& section, const std::string& key) const;
  double number(const std::string& section, const std::string& key, double fallback) const;
  long long integer(const std::string& section, const std::string& key, long long fallback) const;
  bool flag(const std::string& section, const std::string& key, bool fallback) const;
  Vec3 vec3(const std::string& section, const std::string& key, const Vec3& fallback) const;
  std::filesystem::path path(const std::string& section, const std::string& key,
                             const std::filesystem::path& fallback) const;
  std::filesystem::path required_path(const std::string& section, const std::string& key) const;
  std::vector<std::string> list(const std::string& section, const std::string& key) const;

  const std::filesystem::path& base_dir() const { return base_; }
  std::filesystem::path resolve(const std::filesystem::path& p) const;

  /// Every value read so far, as a loadable config.
  std::string echo() const;
  void write_echo(const std::filesystem::path& path) const;

 private:
  std::optional<std::string> raw(const std::string& section, const std::string& key) const;
  void record(const std::string& section, const std::string& key, const std::string& value) const;

  boost::property_tree::ptree tree_;
  std::filesystem::path base_{"."};
  mutable boost::property_tree::ptree effective_;
};

}  // namespace knitply::cli
