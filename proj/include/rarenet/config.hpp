#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>

namespace rarenet {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` document. Blank lines and lines starting with '#' are
/// ignored; a repeated key is an error.
class KeyValues {
 public:
  static KeyValues parse(std::string_view text, const std::string& source = "<config>");
  static KeyValues load(const std::filesystem::path& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::map<std::string, std::string>& entries() const { return values_; }

  /// Typed reads that leave `out` alone when the key is absent.
  void read(const std::string& key, std::string& out) const;
  void read(const std::string& key, double& out) const;
  void read(const std::string& key, bool& out) const;
  void read(const std::string& key, std::int64_t& out) const;
  void read(const std::string& key, std::uint64_t& out) const;
  void read(const std::string& key, int& out) const;

  /// Throws ConfigError naming the first key not in `known`.
  void reject_unknown(const std::set<std::string>& known) const;

 private:
  std::string source_ = "<config>";
  std::map<std::string, std::string> values_;
};

}  // namespace rarenet
