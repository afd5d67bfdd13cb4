#pragma once

#include <nlohmann/json.hpp>

#include <string>

#include "imlc/errors.hpp"

namespace imlc::detail {

/// Required field; any absence or type mismatch names the field.
template <class T>
T field(const nlohmann::json& j, const std::string& key) {
  if (!j.is_object()) throw DeserializationError(key, "enclosing value is not an object");
  auto it = j.find(key);
  if (it == j.end()) throw DeserializationError(key, "missing");
  try {
    return it->template get<T>();
  } catch (const DeserializationError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw DeserializationError(key, e.what());
  }
}

/// Optional field; keeps `out` when absent.
template <class T>
void optional_field(const nlohmann::json& j, const std::string& key, T& out) {
  if (!j.is_object()) throw DeserializationError(key, "enclosing value is not an object");
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const DeserializationError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw DeserializationError(key, e.what());
  }
}

}  // namespace imlc::detail
