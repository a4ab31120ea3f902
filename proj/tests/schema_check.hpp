#pragma once

// Enough of JSON Schema for the published result schema: type, enum,
// required, properties, additionalProperties: false, items, minItems,
// maxItems, minimum, maximum, oneOf and local $ref.

#include <cmath>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

namespace testing {

class SchemaChecker {
 public:
  explicit SchemaChecker(nlohmann::json root) : root_(std::move(root)) {}

  std::vector<std::string> check(const nlohmann::json& doc) const {
    std::vector<std::string> errors;
    check(root_, doc, "$", errors);
    return errors;
  }

 private:
  const nlohmann::json& resolve(const nlohmann::json& schema) const {
    if (!schema.contains("$ref")) return schema;
    const std::string ref = schema["$ref"];
    return root_.at(nlohmann::json::json_pointer(ref.substr(1)));
  }

  static bool has_type(const nlohmann::json& v, const std::string& type) {
    if (type == "object") return v.is_object();
    if (type == "array") return v.is_array();
    if (type == "string") return v.is_string();
    if (type == "boolean") return v.is_boolean();
    if (type == "null") return v.is_null();
    if (type == "number") return v.is_number();
    if (type == "integer")
      return v.is_number_integer() || (v.is_number_float() && std::floor(v.get<double>()) == v.get<double>());
    return false;
  }

  void check(const nlohmann::json& raw, const nlohmann::json& v, const std::string& path,
             std::vector<std::string>& errors) const {
    const nlohmann::json& s = resolve(raw);
    if (s.contains("oneOf")) {
      int matches = 0;
      for (const auto& option : s["oneOf"]) {
        std::vector<std::string> sub;
        check(option, v, path, sub);
        matches += sub.empty();
      }
      if (matches != 1) errors.push_back(path + ": matches " + std::to_string(matches) + " oneOf branches");
    }
    if (s.contains("type") && !has_type(v, s["type"])) {
      errors.push_back(path + ": expected " + s["type"].get<std::string>());
      return;
    }
    if (s.contains("enum")) {
      bool found = false;
      for (const auto& e : s["enum"]) found = found || e == v;
      if (!found) errors.push_back(path + ": value not in enum");
    }
    if (v.is_number()) {
      if (s.contains("minimum") && v.get<double>() < s["minimum"].get<double>())
        errors.push_back(path + ": below minimum");
      if (s.contains("maximum") && v.get<double>() > s["maximum"].get<double>())
        errors.push_back(path + ": above maximum");
    }
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) errors.push_back(path + ": too short");
      if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) errors.push_back(path + ": too long");
      if (s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i) check(s["items"], v[i], path + "[" + std::to_string(i) + "]", errors);
    }
    if (v.is_object()) {
      if (s.contains("required"))
        for (const auto& key : s["required"])
          if (!v.contains(key.get<std::string>())) errors.push_back(path + ": missing " + key.get<std::string>());
      for (auto it = v.begin(); it != v.end(); ++it) {
        if (s.contains("properties") && s["properties"].contains(it.key())) {
          check(s["properties"][it.key()], it.value(), path + "." + it.key(), errors);
        } else if (s.contains("additionalProperties") && s["additionalProperties"] == false) {
          errors.push_back(path + ": unexpected key " + it.key());
        }
      }
    }
  }

  nlohmann::json root_;
};

}  // namespace testing
