#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace modcl::pickle {

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Value;
using ValuePtr = std::shared_ptr<Value>;

/// Just enough of the Python object model to decode a dict of numpy arrays.
/// Calls (REDUCE / NEWOBJ) are not executed; they are recorded as Object
/// nodes holding the callable, its arguments and any BUILD state.
struct Value {
  enum class Kind { None, Bool, Int, Float, Str, Bytes, Tuple, List, Dict, Global, Object };

  Kind kind = Kind::None;
  std::int64_t integer = 0;
  double real = 0.0;
  std::string text;  // Str, Bytes, or "module.name" for Global
  std::vector<ValuePtr> items;
  std::vector<std::pair<ValuePtr, ValuePtr>> entries;
  ValuePtr callable;
  ValuePtr args;
  ValuePtr state;

  [[nodiscard]] bool is_string_like() const noexcept {
    return kind == Kind::Str || kind == Kind::Bytes;
  }
  [[nodiscard]] std::string describe() const;
};

/// Runs the pickle opcode stream (protocols 0-5, in-band buffers only).
ValuePtr load(std::span<const std::uint8_t> bytes);

/// A decoded numpy float array, always widened to float32 in C order.
struct Array {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

/// Interprets numpy's reduce protocol (`_reconstruct` + BUILD, or `_frombuffer`).
Array to_array(const Value& v);

}  // namespace modcl::pickle
