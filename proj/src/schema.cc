#include "amodal/schema.h"

#include <fstream>

#include "amodal/error.h"

namespace amodal {

using nlohmann::json;

namespace {

bool HasType(const json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  if (type == "number") return v.is_number();
  if (type == "integer") {
    if (v.is_number_integer()) return true;
    return v.is_number_float() && v.get<double>() == static_cast<double>(static_cast<long long>(v.get<double>()));
  }
  Fail(ErrorKind::kFormat, "schema uses unknown type '" + type + "'");
}

void Check(const json& v, const json& s, const std::string& at,
           std::vector<std::string>& errs) {
  if (s.is_boolean()) {
    if (!s.get<bool>()) errs.push_back(at + ": not allowed");
    return;
  }
  if (s.contains("type")) {
    const json& t = s["type"];
    bool ok = false;
    if (t.is_string()) {
      ok = HasType(v, t.get<std::string>());
    } else {
      for (const json& one : t) ok = ok || HasType(v, one.get<std::string>());
    }
    if (!ok) {
      errs.push_back(at + ": expected type " + t.dump() + ", got " + v.type_name());
      return;
    }
  }
  if (s.contains("const") && v != s["const"]) {
    errs.push_back(at + ": expected " + s["const"].dump());
  }
  if (s.contains("enum")) {
    bool found = false;
    for (const json& e : s["enum"]) found = found || e == v;
    if (!found) errs.push_back(at + ": " + v.dump() + " not in " + s["enum"].dump());
  }
  if (v.is_number()) {
    const double x = v.get<double>();
    if (s.contains("minimum") && x < s["minimum"].get<double>()) {
      errs.push_back(at + ": below minimum " + s["minimum"].dump());
    }
    if (s.contains("maximum") && x > s["maximum"].get<double>()) {
      errs.push_back(at + ": above maximum " + s["maximum"].dump());
    }
  }
  if (v.is_string() && s.contains("minLength") &&
      v.get<std::string>().size() < s["minLength"].get<size_t>()) {
    errs.push_back(at + ": string too short");
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<size_t>()) {
      errs.push_back(at + ": fewer than " + s["minItems"].dump() + " items");
    }
    if (s.contains("maxItems") && v.size() > s["maxItems"].get<size_t>()) {
      errs.push_back(at + ": more than " + s["maxItems"].dump() + " items");
    }
    if (s.contains("items")) {
      for (size_t i = 0; i < v.size(); ++i) {
        Check(v[i], s["items"], at + "/" + std::to_string(i), errs);
      }
    }
  }
  if (v.is_object()) {
    if (s.contains("required")) {
      for (const json& key : s["required"]) {
        if (!v.contains(key.get<std::string>())) {
          errs.push_back(at + ": missing '" + key.get<std::string>() + "'");
        }
      }
    }
    const json props = s.value("properties", json::object());
    for (auto it = v.begin(); it != v.end(); ++it) {
      const std::string path = at + "/" + it.key();
      if (props.contains(it.key())) {
        Check(it.value(), props[it.key()], path, errs);
      } else if (s.contains("additionalProperties")) {
        Check(it.value(), s["additionalProperties"], path, errs);
      }
    }
  }
}

}  // namespace

std::vector<std::string> ValidateJson(const json& instance, const json& schema) {
  std::vector<std::string> errs;
  Check(instance, schema, "", errs);
  return errs;
}

void RequireValid(const json& instance, const std::string& schema_path) {
  std::ifstream is(schema_path);
  if (!is) Fail(ErrorKind::kIo, "cannot open schema " + schema_path);
  json schema;
  try {
    schema = json::parse(is);
  } catch (const json::parse_error& e) {
    Fail(ErrorKind::kFormat, schema_path + ": " + e.what());
  }
  const std::vector<std::string> errs = ValidateJson(instance, schema);
  if (errs.empty()) return;
  std::string msg = "document violates " + schema_path + ":";
  for (const std::string& e : errs) msg += "\n  " + (e.empty() ? std::string("/") : e);
  Fail(ErrorKind::kFormat, msg);
}

}  // namespace amodal
