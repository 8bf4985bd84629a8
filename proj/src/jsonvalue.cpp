#include "capstext/jsonvalue.hpp"

#include <cmath>

#include "capstext/error.hpp"
#include "capstext/fileio.hpp"

namespace capstext {

JsonValue JsonValue::object() {
  JsonValue v;
  v.kind_ = Kind::object;
  return v;
}

JsonValue JsonValue::array() {
  JsonValue v;
  v.kind_ = Kind::array;
  return v;
}

JsonValue JsonValue::string(std::string s) {
  JsonValue v;
  v.kind_ = Kind::string;
  v.string_ = std::move(s);
  return v;
}

JsonValue JsonValue::number(double n) {
  if (!std::isfinite(n)) {
    throw InputError("json: non-finite number");
  }
  JsonValue v;
  v.kind_ = Kind::number;
  v.number_ = n;
  return v;
}

JsonValue JsonValue::integer(std::int64_t n) {
  JsonValue v;
  v.kind_ = Kind::integer;
  v.integer_ = n;
  return v;
}

JsonValue JsonValue::boolean(bool b) {
  JsonValue v;
  v.kind_ = Kind::boolean;
  v.boolean_ = b;
  return v;
}

JsonValue& JsonValue::set(const std::string& key, JsonValue v) {
  if (kind_ != Kind::object) throw ContractError("json: set on non-object");
  members_.emplace_back(key, std::move(v));
  return *this;
}

JsonValue& JsonValue::push(JsonValue v) {
  if (kind_ != Kind::array) throw ContractError("json: push on non-array");
  elements_.push_back(std::move(v));
  return *this;
}

namespace {

void escape_into(std::string& out, const std::string& s) {
  out.push_back('"');
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buffer[8];
          std::snprintf(buffer, sizeof(buffer), "\\u%04x", c);
          out += buffer;
        } else {
          out.push_back(c);
        }
    }
  }
  out.push_back('"');
}

void pad(std::string& out, int indent, int depth) {
  if (indent > 0) {
    out.push_back('\n');
    out.append(static_cast<std::size_t>(indent) * depth, ' ');
  }
}

}  // namespace

void JsonValue::dump_to(std::string& out, int indent, int depth) const {
  switch (kind_) {
    case Kind::null:
      out += "null";
      break;
    case Kind::string:
      escape_into(out, string_);
      break;
    case Kind::number:
      out += format_double(number_);
      break;
    case Kind::integer:
      out += std::to_string(integer_);
      break;
    case Kind::boolean:
      out += boolean_ ? "true" : "false";
      break;
    case Kind::object: {
      if (members_.empty()) {
        out += "{}";
        break;
      }
      out.push_back('{');
      for (std::size_t i = 0; i < members_.size(); ++i) {
        if (i) out.push_back(',');
        pad(out, indent, depth + 1);
        escape_into(out, members_[i].first);
        out += indent > 0 ? ": " : ":";
        members_[i].second.dump_to(out, indent, depth + 1);
      }
      pad(out, indent, depth);
      out.push_back('}');
      break;
    }
    case Kind::array: {
      if (elements_.empty()) {
        out += "[]";
        break;
      }
      out.push_back('[');
      for (std::size_t i = 0; i < elements_.size(); ++i) {
        if (i) out.push_back(',');
        pad(out, indent, depth + 1);
        elements_[i].dump_to(out, indent, depth + 1);
      }
      pad(out, indent, depth);
      out.push_back(']');
      break;
    }
  }
}

std::string JsonValue::dump(int indent) const {
  std::string out;
  dump_to(out, indent, 0);
  if (indent > 0) out.push_back('\n');
  return out;
}

}  // namespace capstext
