#pragma once

#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace modcl {

/// Flat `key=value` text files: one pair per line, `#` starts a comment line.
using KeyValueList = std::vector<std::pair<std::string, std::string>>;
using KeyValueMap = std::map<std::string, std::string>;

class KeyValueError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

KeyValueMap parse_key_values(const std::string& text);
KeyValueMap read_key_values(const std::filesystem::path& path);
void write_key_values(const std::filesystem::path& path, const KeyValueList& pairs);
std::string format_key_values(const KeyValueList& pairs);

}  // namespace modcl
