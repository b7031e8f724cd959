#include "bci/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace bci {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::Config,
            "config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorKind::Config,
            "config line " + std::to_string(line_no) + ": empty key");
    require(!cfg.values_.count(key), ErrorKind::Config,
            "config: duplicate key '" + key + "'");
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open config '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key) const {
  auto it = values_.find(key);
  require(it != values_.end(), ErrorKind::Config,
          "config: missing required key '" + key + "'");
  return it->second;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

namespace {

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    require(used == v.size(), ErrorKind::Config, "");
    return x;
  } catch (...) {
    raise(ErrorKind::Config, "config: key '" + key + "' is not a number: '" + v + "'");
  }
}

}  // namespace

double Config::get_double(const std::string& key) const {
  return parse_double(key, get_string(key));
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const {
  const double v = get_double(key);
  const int i = static_cast<int>(v);
  require(double(i) == v, ErrorKind::Config,
          "config: key '" + key + "' is not an integer");
  return i;
}

int Config::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

std::uint64_t Config::get_uint64(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t used = 0;
    const auto x = std::stoull(v, &used);
    require(used == v.size(), ErrorKind::Config, "");
    return x;
  } catch (...) {
    raise(ErrorKind::Config,
          "config: key '" + key + "' is not an unsigned integer: '" + v + "'");
  }
}

std::uint64_t Config::get_uint64(const std::string& key,
                                 std::uint64_t fallback) const {
  return has(key) ? get_uint64(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
  const std::string v = get_string(key);
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  raise(ErrorKind::Config, "config: key '" + key + "' is not a boolean: '" + v + "'");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : get_strings(key)) out.push_back(parse_double(key, item));
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& key) const {
  const std::string v = get_string(key);
  std::vector<std::string> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  require(!out.empty(), ErrorKind::Config, "config: key '" + key + "' is empty");
  return out;
}

void Config::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

void Config::assert_only(const std::set<std::string>& allowed) const {
  for (const auto& [key, value] : values_)
    require(allowed.count(key) > 0, ErrorKind::Config,
            "config: unknown key '" + key + "'");
}

std::string Config::canonical_text() const {
  std::ostringstream out;
  for (const auto& [key, value] : values_) out << key << " = " << value << "\n";
  return out.str();
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace bci
