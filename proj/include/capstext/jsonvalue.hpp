#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace capstext {

// Minimal JSON document builder. Object keys keep insertion order and
// doubles are printed with 17 significant digits, so serialization is
// deterministic byte for byte.
class JsonValue {
 public:
  JsonValue() : kind_(Kind::null) {}

  static JsonValue object();
  static JsonValue array();
  static JsonValue string(std::string v);
  static JsonValue number(double v);
  static JsonValue integer(std::int64_t v);
  static JsonValue boolean(bool v);

  JsonValue& set(const std::string& key, JsonValue v);  // object member
  JsonValue& push(JsonValue v);                         // array element

  std::string dump(int indent = 0) const;

 private:
  enum class Kind { null, object, array, string, number, integer, boolean };

  void dump_to(std::string& out, int indent, int depth) const;

  Kind kind_;
  std::string string_;
  double number_ = 0.0;
  std::int64_t integer_ = 0;
  bool boolean_ = false;
  std::vector<std::pair<std::string, JsonValue>> members_;
  std::vector<JsonValue> elements_;
};

}  // namespace capstext
