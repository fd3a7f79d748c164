#ifndef AMODAL_SCHEMA_H_
#define AMODAL_SCHEMA_H_

#include <string>
#include <vector>

#include <json.hpp>

namespace amodal {

// Checks `instance` against a JSON Schema subset: type, enum, const,
// properties, required, additionalProperties (boolean or schema), items,
// minItems, maxItems, minimum, maximum, minLength. Returns one message per
// violation, each prefixed with a JSON pointer; empty means valid.
std::vector<std::string> ValidateJson(const nlohmann::json& instance,
                                      const nlohmann::json& schema);

// Reads a schema file and validates; throws kFormat listing the violations.
void RequireValid(const nlohmann::json& instance, const std::string& schema_path);

}  // namespace amodal

#endif  // AMODAL_SCHEMA_H_
