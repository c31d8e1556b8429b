#include "modcl/kv.hpp"

#include <fstream>
#include <sstream>

namespace modcl {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueMap parse_key_values(const std::string& text) {
  KeyValueMap out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw KeyValueError("line " + std::to_string(line_no) + ": expected key=value, got '" + t + "'");
    }
    auto key = trim(t.substr(0, eq));
    if (!out.emplace(key, trim(t.substr(eq + 1))).second) {
      throw KeyValueError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
  }
  return out;
}

KeyValueMap read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw KeyValueError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  try {
    return parse_key_values(buffer.str());
  } catch (const KeyValueError& e) {
    throw KeyValueError(path.string() + ": " + e.what());
  }
}

std::string format_key_values(const KeyValueList& pairs) {
  std::string out;
  for (const auto& [k, v] : pairs) out += k + "=" + v + "\n";
  return out;
}

void write_key_values(const std::filesystem::path& path, const KeyValueList& pairs) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw KeyValueError("cannot open " + path.string() + " for writing");
  out << format_key_values(pairs);
  if (!out) throw KeyValueError("write failed for " + path.string());
}

}  // namespace modcl
