#include "modcl/pickle.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <map>
#include <sstream>

namespace modcl::pickle {
namespace {

ValuePtr make(Value::Kind kind) {
  auto v = std::make_shared<Value>();
  v->kind = kind;
  return v;
}

ValuePtr make_str(std::string s, Value::Kind kind = Value::Kind::Str) {
  auto v = make(kind);
  v->text = std::move(s);
  return v;
}

ValuePtr make_int(std::int64_t i) {
  auto v = make(Value::Kind::Int);
  v->integer = i;
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Python str -> latin-1 bytes (the encoding numpy uses for protocol-2 buffers).
std::string utf8_to_latin1(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
      ++i;
    } else if ((c & 0xE0) == 0xC0 && i + 1 < s.size()) {
      const unsigned cp = ((c & 0x1FU) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3FU);
      if (cp > 0xFF) throw ParseError("latin-1 buffer contains code point above U+00FF");
      out.push_back(static_cast<char>(cp));
      i += 2;
    } else {
      throw ParseError("latin-1 buffer contains code point above U+00FF");
    }
  }
  return out;
}

class Machine {
 public:
  explicit Machine(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  ValuePtr run() {
    while (true) {
      const std::size_t at = pos_;
      const auto op = static_cast<std::uint8_t>(u8());
      switch (op) {
        case 0x80: u8(); break;                       // PROTO
        case 0x95: take(8); break;                    // FRAME
        case '.': return stop(at);                    // STOP
        case '(': marks_.push_back(stack_.size()); break;
        case '}': push(make(Value::Kind::Dict)); break;
        case ']': push(make(Value::Kind::List)); break;
        case ')': push(make(Value::Kind::Tuple)); break;
        case 'N': push(make(Value::Kind::None)); break;
        case 0x88: push_bool(true); break;
        case 0x89: push_bool(false); break;
        case 'J': push(make_int(static_cast<std::int32_t>(le<std::uint32_t>()))); break;
        case 'K': push(make_int(u8())); break;
        case 'M': push(make_int(le<std::uint16_t>())); break;
        case 0x8a: push(make_int(long_bytes(u8()))); break;
        case 0x8b: push(make_int(long_bytes(le<std::uint32_t>()))); break;
        case 'I': push_text_int(line()); break;
        case 'L': {
          auto s = line();
          if (!s.empty() && s.back() == 'L') s.pop_back();
          push_text_int(s);
          break;
        }
        case 'F': {
          auto v = make(Value::Kind::Float);
          v->real = std::stod(line());
          push(v);
          break;
        }
        case 'G': {
          auto v = make(Value::Kind::Float);
          v->real = std::bit_cast<double>(be<std::uint64_t>());
          push(v);
          break;
        }
        case 'T': push(make_str(take(le<std::uint32_t>()), Value::Kind::Bytes)); break;
        case 'U': push(make_str(take(u8()), Value::Kind::Bytes)); break;
        case 'S': push(make_str(unquote(line()), Value::Kind::Bytes)); break;
        case 'X': push(make_str(take(le<std::uint32_t>()))); break;
        case 0x8c: push(make_str(take(u8()))); break;
        case 0x8d: push(make_str(take(le<std::uint64_t>()))); break;
        case 'V': push(make_str(line())); break;
        case 'B': push(make_str(take(le<std::uint32_t>()), Value::Kind::Bytes)); break;
        case 'C': push(make_str(take(u8()), Value::Kind::Bytes)); break;
        case 0x8e:
        case 0x96: push(make_str(take(le<std::uint64_t>()), Value::Kind::Bytes)); break;
        case 'c': {
          auto module = line();
          auto name = line();
          push(global(module + "." + name));
          break;
        }
        case 0x93: {
          auto name = pop(at);
          auto module = pop(at);
          if (!module->is_string_like() || !name->is_string_like()) {
            fail(at, "STACK_GLOBAL expects two strings");
          }
          push(global(module->text + "." + name->text));
          break;
        }
        case 't': push(tuple_from(pop_mark(at))); break;
        case 0x85: tuple_n(1, at); break;
        case 0x86: tuple_n(2, at); break;
        case 0x87: tuple_n(3, at); break;
        case 'l': {
          auto v = make(Value::Kind::List);
          v->items = pop_mark(at);
          push(v);
          break;
        }
        case 'd': {
          auto items = pop_mark(at);
          auto v = make(Value::Kind::Dict);
          fill_dict(*v, items, at);
          push(v);
          break;
        }
        case 'R': {
          auto args = pop(at);
          auto fn = pop(at);
          push(call(fn, args));
          break;
        }
        case 0x81: {  // NEWOBJ
          auto args = pop(at);
          auto cls = pop(at);
          push(call(cls, args));
          break;
        }
        case 'b': {
          auto state = pop(at);
          auto target = top(at);
          target->state = state;
          break;
        }
        case 'p': memo_[std::stoull(line())] = top(at); break;
        case 'q': memo_[u8()] = top(at); break;
        case 'r': memo_[le<std::uint32_t>()] = top(at); break;
        case 0x94: memo_[memo_.size()] = top(at); break;
        case 'g': push(recall(std::stoull(line()), at)); break;
        case 'h': push(recall(u8(), at)); break;
        case 'j': push(recall(le<std::uint32_t>(), at)); break;
        case 's': {
          auto value = pop(at);
          auto key = pop(at);
          auto dict = top(at);
          if (dict->kind != Value::Kind::Dict) fail(at, "SETITEM target is not a dict");
          dict->entries.emplace_back(key, value);
          break;
        }
        case 'u': {
          auto items = pop_mark(at);
          auto dict = top(at);
          if (dict->kind != Value::Kind::Dict) fail(at, "SETITEMS target is not a dict");
          fill_dict(*dict, items, at);
          break;
        }
        case 'a': {
          auto value = pop(at);
          auto list = top(at);
          if (list->kind != Value::Kind::List) fail(at, "APPEND target is not a list");
          list->items.push_back(value);
          break;
        }
        case 'e': {
          auto items = pop_mark(at);
          auto list = top(at);
          if (list->kind != Value::Kind::List) fail(at, "APPENDS target is not a list");
          list->items.insert(list->items.end(), items.begin(), items.end());
          break;
        }
        case '0': pop(at); break;
        case '1': pop_mark(at); break;
        case '2': push(top(at)); break;
        case 0x98: break;  // READONLY_BUFFER: no-op for in-band data
        default: {
          std::ostringstream msg;
          msg << "unsupported opcode 0x" << std::hex << static_cast<int>(op);
          fail(at, msg.str());
        }
      }
    }
  }

 private:
  [[noreturn]] void fail(std::size_t at, const std::string& what) const {
    throw ParseError("pickle offset " + std::to_string(at) + ": " + what);
  }

  std::uint8_t u8() {
    if (pos_ >= bytes_.size()) fail(pos_, "unexpected end of stream");
    return bytes_[pos_++];
  }

  std::string take(std::uint64_t n) {
    if (n > bytes_.size() - pos_) fail(pos_, "unexpected end of stream");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), static_cast<std::size_t>(n));
    pos_ += static_cast<std::size_t>(n);
    return s;
  }

  template <typename T>
  T le() {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(u8()) << (8 * i));
    return v;
  }

  template <typename T>
  T be() {
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v = static_cast<T>((v << 8) | u8());
    return v;
  }

  std::int64_t long_bytes(std::uint64_t n) {
    if (n > 8) fail(pos_, "integer wider than 64 bits");
    const auto raw = take(n);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < raw.size(); ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(raw[i])) << (8 * i);
    }
    if (n > 0 && n < 8 && (static_cast<unsigned char>(raw.back()) & 0x80)) {
      v |= ~std::uint64_t{0} << (8 * n);
    }
    return static_cast<std::int64_t>(v);
  }

  std::string line() {
    std::string s;
    while (true) {
      const char c = static_cast<char>(u8());
      if (c == '\n') return s;
      s.push_back(c);
    }
  }

  static std::string unquote(const std::string& s) {
    if (s.size() < 2 || (s.front() != '\'' && s.front() != '"')) return s;
    std::string out;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] == '\\' && i + 2 < s.size()) {
        const char e = s[++i];
        if (e == 'x' && i + 2 < s.size()) {
          out.push_back(static_cast<char>(std::stoi(s.substr(i + 1, 2), nullptr, 16)));
          i += 2;
        } else if (e == 'n') {
          out.push_back('\n');
        } else {
          out.push_back(e);
        }
      } else {
        out.push_back(s[i]);
      }
    }
    return out;
  }

  void push(ValuePtr v) { stack_.push_back(std::move(v)); }

  void push_bool(bool b) {
    auto v = make(Value::Kind::Bool);
    v->integer = b ? 1 : 0;
    push(v);
  }

  void push_text_int(const std::string& s) {
    if (s == "01") return push_bool(true);
    if (s == "00") return push_bool(false);
    push(make_int(std::stoll(s)));
  }

  ValuePtr pop(std::size_t at) {
    if (stack_.empty() || (!marks_.empty() && stack_.size() <= marks_.back())) fail(at, "stack underflow");
    auto v = stack_.back();
    stack_.pop_back();
    return v;
  }

  ValuePtr top(std::size_t at) {
    if (stack_.empty()) fail(at, "stack underflow");
    return stack_.back();
  }

  std::vector<ValuePtr> pop_mark(std::size_t at) {
    if (marks_.empty()) fail(at, "MARK expected");
    const auto m = marks_.back();
    marks_.pop_back();
    std::vector<ValuePtr> items(stack_.begin() + static_cast<std::ptrdiff_t>(m), stack_.end());
    stack_.resize(m);
    return items;
  }

  static ValuePtr tuple_from(std::vector<ValuePtr> items) {
    auto v = make(Value::Kind::Tuple);
    v->items = std::move(items);
    return v;
  }

  void tuple_n(std::size_t n, std::size_t at) {
    std::vector<ValuePtr> items(n);
    for (std::size_t i = n; i-- > 0;) items[i] = pop(at);
    push(tuple_from(std::move(items)));
  }

  void fill_dict(Value& dict, const std::vector<ValuePtr>& items, std::size_t at) {
    if (items.size() % 2 != 0) fail(at, "odd number of dict items");
    for (std::size_t i = 0; i < items.size(); i += 2) dict.entries.emplace_back(items[i], items[i + 1]);
  }

  ValuePtr recall(std::uint64_t key, std::size_t at) {
    auto it = memo_.find(key);
    if (it == memo_.end()) fail(at, "memo key " + std::to_string(key) + " not set");
    return it->second;
  }

  static ValuePtr global(std::string name) {
    auto v = make(Value::Kind::Global);
    v->text = std::move(name);
    return v;
  }

  static ValuePtr call(const ValuePtr& fn, const ValuePtr& args) {
    // Byte-string constructors are evaluated so array payloads arrive as Bytes.
    if (fn->kind == Value::Kind::Global &&
        (fn->text == "_codecs.encode" || ends_with(fn->text, ".bytearray") ||
         ends_with(fn->text, ".bytes"))) {
      if (args->kind == Value::Kind::Tuple && args->items.empty()) {
        return make_str({}, Value::Kind::Bytes);
      }
      if (args->kind == Value::Kind::Tuple && !args->items.empty() && args->items[0]->is_string_like()) {
        const auto& payload = *args->items[0];
        return make_str(payload.kind == Value::Kind::Str ? utf8_to_latin1(payload.text) : payload.text,
                        Value::Kind::Bytes);
      }
    }
    auto obj = make(Value::Kind::Object);
    obj->callable = fn;
    obj->args = args;
    return obj;
  }

  ValuePtr stop(std::size_t at) {
    if (stack_.size() != 1) fail(at, "STOP with " + std::to_string(stack_.size()) + " stack items");
    return stack_.back();
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::vector<ValuePtr> stack_;
  std::vector<std::size_t> marks_;
  std::map<std::uint64_t, ValuePtr> memo_;
};

struct DType {
  int width = 4;
  bool little = true;
};

DType decode_dtype(const Value& v) {
  if (v.kind != Value::Kind::Object || !v.callable || !ends_with(v.callable->text, "dtype") ||
      !v.args || v.args->items.empty() || !v.args->items[0]->is_string_like()) {
    throw ParseError("array dtype is not a numpy dtype: " + v.describe());
  }
  std::string code = v.args->items[0]->text;
  char order = '<';
  if (!code.empty() && (code[0] == '<' || code[0] == '>' || code[0] == '=' || code[0] == '|')) {
    order = code[0];
    code.erase(0, 1);
  }
  if (v.state && v.state->kind == Value::Kind::Tuple && v.state->items.size() > 1 &&
      v.state->items[1]->is_string_like() && !v.state->items[1]->text.empty()) {
    order = v.state->items[1]->text[0];
  }
  DType d;
  if (code == "f4") {
    d.width = 4;
  } else if (code == "f8") {
    d.width = 8;
  } else {
    throw ParseError("unsupported array dtype '" + code + "' (expected f4 or f8)");
  }
  d.little = order != '>';
  return d;
}

std::vector<std::size_t> decode_shape(const Value& v) {
  if (v.kind != Value::Kind::Tuple) throw ParseError("array shape is not a tuple");
  std::vector<std::size_t> shape;
  for (const auto& item : v.items) {
    if (item->kind != Value::Kind::Int || item->integer < 0) throw ParseError("bad array dimension");
    shape.push_back(static_cast<std::size_t>(item->integer));
  }
  return shape;
}

Array decode_buffer(std::vector<std::size_t> shape, const DType& dtype, const std::string& raw,
                    bool fortran) {
  std::size_t count = 1;
  for (auto d : shape) count *= d;
  if (raw.size() != count * static_cast<std::size_t>(dtype.width)) {
    throw ParseError("array buffer holds " + std::to_string(raw.size()) + " bytes, shape needs " +
                     std::to_string(count * static_cast<std::size_t>(dtype.width)));
  }
  if (fortran && shape.size() > 1) throw ParseError("Fortran-ordered arrays are not supported");
  Array a;
  a.shape = std::move(shape);
  a.data.resize(count);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  const bool swap = dtype.little != (std::endian::native == std::endian::little);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char buf[8];
    std::memcpy(buf, p + i * static_cast<std::size_t>(dtype.width), static_cast<std::size_t>(dtype.width));
    if (swap) std::reverse(buf, buf + dtype.width);
    if (dtype.width == 4) {
      float f;
      std::memcpy(&f, buf, 4);
      a.data[i] = f;
    } else {
      double d;
      std::memcpy(&d, buf, 8);
      a.data[i] = static_cast<float>(d);
    }
  }
  return a;
}

}  // namespace

std::string Value::describe() const {
  switch (kind) {
    case Kind::None: return "None";
    case Kind::Bool: return integer ? "True" : "False";
    case Kind::Int: return std::to_string(integer);
    case Kind::Float: return std::to_string(real);
    case Kind::Str: return "'" + text + "'";
    case Kind::Bytes: return "b'" + (text.size() > 32 ? text.substr(0, 32) + "..." : text) + "'";
    case Kind::Global: return "<global " + text + ">";
    case Kind::Object: return "<object " + (callable ? callable->text : std::string("?")) + ">";
    case Kind::List:
    case Kind::Tuple: {
      std::string s = kind == Kind::Tuple ? "(" : "[";
      for (std::size_t i = 0; i < items.size(); ++i) s += (i ? ", " : "") + items[i]->describe();
      return s + (kind == Kind::Tuple ? ")" : "]");
    }
    case Kind::Dict: return "<dict of " + std::to_string(entries.size()) + ">";
  }
  return "?";
}

ValuePtr load(std::span<const std::uint8_t> bytes) { return Machine(bytes).run(); }

Array to_array(const Value& v) {
  if (v.kind != Value::Kind::Object || !v.callable) throw ParseError("value is not an array: " + v.describe());
  const auto& fn = v.callable->text;
  if (ends_with(fn, "_reconstruct")) {
    const auto* st = v.state.get();
    if (!st || st->kind != Value::Kind::Tuple || st->items.size() != 5) {
      throw ParseError("numpy array state must be a 5-tuple");
    }
    const auto shape = decode_shape(*st->items[1]);
    const auto dtype = decode_dtype(*st->items[2]);
    const bool fortran = st->items[3]->integer != 0;
    if (!st->items[4]->is_string_like()) throw ParseError("numpy array payload is not a byte string");
    return decode_buffer(shape, dtype, st->items[4]->text, fortran);
  }
  if (ends_with(fn, "_frombuffer")) {
    const auto* a = v.args.get();
    if (!a || a->kind != Value::Kind::Tuple || a->items.size() != 4 || !a->items[0]->is_string_like()) {
      throw ParseError("_frombuffer expects (buffer, dtype, shape, order)");
    }
    const bool fortran = a->items[3]->is_string_like() && a->items[3]->text == "F";
    return decode_buffer(decode_shape(*a->items[2]), decode_dtype(*a->items[1]), a->items[0]->text, fortran);
  }
  throw ParseError("value is not a numpy array: " + v.describe());
}

}  // namespace modcl::pickle
