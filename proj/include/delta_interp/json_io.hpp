#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "json.hpp"

namespace delta_interp {

using Json = nlohmann::ordered_json;

namespace detail {

inline void append_indent(std::string& out, int indent, int level) {
  if (indent < 0) return;
  out += '\n';
  out.append(static_cast<std::size_t>(indent * level), ' ');
}

inline void write_json(const Json& j, std::string& out, int indent, int level) {
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        append_indent(out, indent, level + 1);
        out += Json(it.key()).dump();
        out += indent >= 0 ? ": " : ":";
        write_json(it.value(), out, indent, level + 1);
      }
      append_indent(out, indent, level);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // Arrays of scalars stay on one line.
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) { return e.is_primitive(); });
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += flat ? ", " : ",";
        first = false;
        if (!flat) append_indent(out, indent, level + 1);
        write_json(e, out, indent, level + 1);
      }
      if (!flat) append_indent(out, indent, level);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      // Keep floats recognizable as floats on re-read.
      if (std::string_view(buf).find_first_of(".eEn") == std::string_view::npos) out += ".0";
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace detail

/// Serializes with every floating-point number at 17 significant digits,
/// which round-trips IEEE doubles exactly.
inline std::string dump17(const Json& j, int indent = 2) {
  std::string out;
  detail::write_json(j, out, indent, 0);
  return out;
}

}  // namespace delta_interp
