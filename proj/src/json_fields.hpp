// Strict field readers for configuration documents: unknown keys and type
// mismatches become ConfigError naming the offending path.

#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "roadreg/error.hpp"

namespace roadreg::detail {

inline void require_object(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
}

inline void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                       const std::string& where) {
  require_object(j, where);
  for (const auto& item : j.items()) {
    bool known = false;
    for (const auto a : allowed) known = known || item.key() == a;
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_integer()) throw ConfigError("");
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!it->is_number()) throw ConfigError("");
    }
    out = it->get<T>();
  } catch (const std::exception&) {
    throw ConfigError(where + "." + key + ": wrong type (" + it->dump() + ")");
  }
}

inline void read_field(const nlohmann::json& j, const char* key, std::optional<double>& out,
                       const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_null()) {
    out.reset();
  } else if (it->is_number()) {
    out = it->get<double>();
  } else {
    throw ConfigError(where + "." + key + ": expected a number or null");
  }
}

inline nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace roadreg::detail
