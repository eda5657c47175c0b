#pragma once

#include <map>
#include <string>
#include <vector>

namespace slnl {

/// Flat `key.path = value` UTF-8 text. '#' starts a comment; blank lines are
/// skipped. Keys are unique.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config(const std::string& text);
ConfigMap load_config_file(const std::string& path);
std::string serialize_config(const ConfigMap& cfg);

/// Typed reader that tracks which keys were consumed so callers can reject
/// unknown keys by name.
class ConfigReader {
 public:
  explicit ConfigReader(ConfigMap cfg) : cfg_(std::move(cfg)) {}

  bool has(const std::string& key) const { return cfg_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::size_t get_size(const std::string& key, std::size_t fallback);
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
  std::vector<std::size_t> get_size_list(const std::string& key,
                                         std::vector<std::size_t> fallback);
  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback);

  /// Throws naming every present key with the given prefix that was never
  /// consumed (catches typos in config files).
  void reject_unconsumed(const std::string& prefix) const;
  const ConfigMap& raw() const { return cfg_; }

 private:
  std::string take(const std::string& key);
  ConfigMap cfg_;
  std::map<std::string, bool> consumed_;
};

}  // namespace slnl
