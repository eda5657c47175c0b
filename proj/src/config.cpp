#include "slnl/config.hpp"

#include <fstream>
#include <sstream>

#include "slnl/util.hpp"

namespace slnl {

namespace {

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigMap parse_config(const std::string& text) {
  ConfigMap cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = strip(line);
    if (line.empty()) continue;
    std::size_t eq = line.find('=');
    check(eq != std::string::npos,
          "config: line " + std::to_string(lineno) + " has no '=': " + line);
    std::string key = strip(line.substr(0, eq));
    std::string value = strip(line.substr(eq + 1));
    check(!key.empty(), "config: empty key on line " + std::to_string(lineno));
    check(cfg.find(key) == cfg.end(),
          "config: duplicate key '" + key + "' on line " + std::to_string(lineno));
    cfg[key] = value;
  }
  return cfg;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in.good()) throw std::runtime_error("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ConfigMap& cfg) {
  std::ostringstream out;
  for (const auto& [k, v] : cfg) out << k << " = " << v << "\n";
  return out.str();
}

std::string ConfigReader::take(const std::string& key) {
  consumed_[key] = true;
  auto it = cfg_.find(key);
  return it == cfg_.end() ? std::string{} : it->second;
}

std::string ConfigReader::get_string(const std::string& key, const std::string& fallback) {
  std::string v = take(key);
  return cfg_.count(key) ? v : fallback;
}

double ConfigReader::get_double(const std::string& key, double fallback) {
  if (!cfg_.count(key)) {
    consumed_[key] = true;
    return fallback;
  }
  const std::string v = take(key);
  try {
    std::size_t pos = 0;
    double d = std::stod(v, &pos);
    check(pos == v.size(), "trailing characters");
    return d;
  } catch (const std::exception&) {
    fail("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

std::size_t ConfigReader::get_size(const std::string& key, std::size_t fallback) {
  if (!cfg_.count(key)) {
    consumed_[key] = true;
    return fallback;
  }
  const std::string v = take(key);
  try {
    std::size_t pos = 0;
    long long d = std::stoll(v, &pos);
    check(pos == v.size() && d >= 0, "not a non-negative integer");
    return static_cast<std::size_t>(d);
  } catch (const std::exception&) {
    fail("config: key '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

std::uint64_t ConfigReader::get_u64(const std::string& key, std::uint64_t fallback) {
  if (!cfg_.count(key)) {
    consumed_[key] = true;
    return fallback;
  }
  const std::string v = take(key);
  try {
    std::size_t pos = 0;
    unsigned long long d = std::stoull(v, &pos);
    check(pos == v.size(), "trailing characters");
    return static_cast<std::uint64_t>(d);
  } catch (const std::exception&) {
    fail("config: key '" + key + "' expects an unsigned integer, got '" + v + "'");
  }
}

std::vector<std::size_t> ConfigReader::get_size_list(const std::string& key,
                                                     std::vector<std::size_t> fallback) {
  if (!cfg_.count(key)) {
    consumed_[key] = true;
    return fallback;
  }
  const std::string v = take(key);
  std::vector<std::size_t> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t pos = 0;
      long long d = std::stoll(item, &pos);
      check(d >= 0, "negative");
      out.push_back(static_cast<std::size_t>(d));
    } catch (const std::exception&) {
      fail("config: key '" + key + "' expects a comma list of integers, got '" + v + "'");
    }
  }
  check(!out.empty(), "config: key '" + key + "' is an empty list");
  return out;
}

std::vector<double> ConfigReader::get_double_list(const std::string& key,
                                                  std::vector<double> fallback) {
  if (!cfg_.count(key)) {
    consumed_[key] = true;
    return fallback;
  }
  const std::string v = take(key);
  std::vector<double> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail("config: key '" + key + "' expects a comma list of numbers, got '" + v + "'");
    }
  }
  check(!out.empty(), "config: key '" + key + "' is an empty list");
  return out;
}

void ConfigReader::reject_unconsumed(const std::string& prefix) const {
  std::string unknown;
  for (const auto& [k, v] : cfg_) {
    if (k.rfind(prefix, 0) != 0) continue;
    if (!consumed_.count(k)) unknown += (unknown.empty() ? "" : ", ") + k;
  }
  check(unknown.empty(), "config: unknown key(s): " + unknown);
}

}  // namespace slnl
