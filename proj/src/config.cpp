#include "rarenet/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace rarenet {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <typename T>
T parse_number(const std::string& source, const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(source + ": value of '" + key + "' is not a valid number: " + text);
  }
  return value;
}

}  // namespace

KeyValues KeyValues::parse(std::string_view text, const std::string& source) {
  KeyValues kv;
  kv.source_ = source;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t nl = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, nl == std::string_view::npos ? text.size() - pos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++line_no;
    const std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(source + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": empty key");
    }
    if (!kv.values_.emplace(key, value).second) {
      throw ConfigError(source + ":" + std::to_string(line_no) + ": duplicate key '" +
                        key + "'");
    }
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str(), path.string());
}

void KeyValues::read(const std::string& key, std::string& out) const {
  if (auto it = values_.find(key); it != values_.end()) out = it->second;
}

void KeyValues::read(const std::string& key, double& out) const {
  if (auto it = values_.find(key); it != values_.end()) {
    out = parse_number<double>(source_, key, it->second);
  }
}

void KeyValues::read(const std::string& key, bool& out) const {
  auto it = values_.find(key);
  if (it == values_.end()) return;
  const std::string& v = it->second;
  if (v == "true" || v == "1" || v == "yes") {
    out = true;
  } else if (v == "false" || v == "0" || v == "no") {
    out = false;
  } else {
    throw ConfigError(source_ + ": value of '" + key + "' is not a boolean: " + v);
  }
}

void KeyValues::read(const std::string& key, std::int64_t& out) const {
  if (auto it = values_.find(key); it != values_.end()) {
    out = parse_number<std::int64_t>(source_, key, it->second);
  }
}

void KeyValues::read(const std::string& key, std::uint64_t& out) const {
  if (auto it = values_.find(key); it != values_.end()) {
    out = parse_number<std::uint64_t>(source_, key, it->second);
  }
}

void KeyValues::read(const std::string& key, int& out) const {
  if (auto it = values_.find(key); it != values_.end()) {
    out = parse_number<int>(source_, key, it->second);
  }
}

void KeyValues::reject_unknown(const std::set<std::string>& known) const {
  for (const auto& [key, value] : values_) {
    if (!known.contains(key)) throw ConfigError(source_ + ": unknown key '" + key + "'");
  }
}

}  // namespace rarenet
