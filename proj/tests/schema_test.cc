#include "amodal/schema.h"

#include <fstream>

#include "amodal/denoiser.h"
#include "amodal/error.h"
#include "amodal/eval.h"
#include "doctest.h"

namespace amodal {
namespace {

using nlohmann::json;

json LoadSchema(const std::string& name) {
  std::ifstream f(std::string(AMODAL_SCHEMA_DIR) + "/" + name);
  REQUIRE(f.good());
  return json::parse(f);
}

TEST_CASE("validator keywords") {
  const json schema = json::parse(R"({
    "type": "object", "required": ["a"], "additionalProperties": false,
    "properties": {
      "a": {"type": "integer", "minimum": 1, "maximum": 3},
      "b": {"type": ["string", "null"], "minLength": 2},
      "c": {"type": "array", "minItems": 1, "maxItems": 2, "items": {"enum": [1, "x"]}},
      "d": {"const": "k"}
    }})");
  CHECK(ValidateJson(json::parse(R"({"a": 2})"), schema).empty());
  CHECK(ValidateJson(json::parse(R"({"a": 2, "b": null, "c": [1, "x"], "d": "k"})"),
                     schema).empty());
  CHECK(ValidateJson(json::parse(R"({"b": "xy"})"), schema).size() == 1);
  CHECK(ValidateJson(json::parse(R"({"a": 0})"), schema).size() == 1);
  CHECK(ValidateJson(json::parse(R"({"a": 2.5})"), schema).size() == 1);
  CHECK(ValidateJson(json::parse(R"({"a": 4, "b": "x"})"), schema).size() == 2);
  CHECK(ValidateJson(json::parse(R"({"a": 1, "c": []})"), schema).size() == 1);
  CHECK(ValidateJson(json::parse(R"({"a": 1, "c": [1, 2]})"), schema).size() == 1);
  CHECK(ValidateJson(json::parse(R"({"a": 1, "c": [1, 1, 1]})"), schema).size() == 1);
  CHECK(ValidateJson(json::parse(R"({"a": 1, "d": "j"})"), schema).size() == 1);
  CHECK(ValidateJson(json::parse(R"({"a": 1, "z": 0})"), schema).size() == 1);
  CHECK(ValidateJson(json::parse("[1]"), schema).size() == 1);
  // integers count as numbers, not the other way round
  CHECK(ValidateJson(json(3), json::parse(R"({"type": "number"})")).empty());
}

TEST_CASE("eval reports satisfy the report schema") {
  const json schema = LoadSchema("report.schema.json");
  EvalReport r;
  r.thresholds = DefaultThresholds();
  r.rows.push_back(MakeRow("full", {{"00000", 0.8, 0.2}, {"00001", 0.4, 0.7}},
                           r.thresholds));
  r.config["preset"] = "criteria";
  const json j = ReportToJson(r);
  CHECK(ValidateJson(j, schema).empty());

  json bad = j;
  bad["rows"][0]["buckets"][0]["n"] = -1;
  CHECK_FALSE(ValidateJson(bad, schema).empty());
  bad = j;
  bad["kind"] = "other";
  CHECK_FALSE(ValidateJson(bad, schema).empty());
}

TEST_CASE("checkpoint header satisfies its schema") {
  const json schema = LoadSchema("checkpoint_header.schema.json");
  UNetArch a;
  a.base_width = 2;
  a.levels = 2;
  a.time_dim = 4;
  a.groups = 1;
  a.image_size = 4;
  const NoiseSchedule s = BuildSchedule(50);
  Denoiser m(a, s);
  m.InitParams(1);
  const std::string file = "schema_test.ck";
  SaveCheckpoint(file, m, nullptr);
  const json header = json::parse(LoadCheckpoint(file, s).header_json);
  std::remove(file.c_str());
  CHECK(ValidateJson(header, schema).empty());
  CHECK_NOTHROW(RequireValid(header, std::string(AMODAL_SCHEMA_DIR) +
                                         "/checkpoint_header.schema.json"));
  json bad = header;
  bad.erase("num_params");
  CHECK_THROWS_AS(RequireValid(bad, std::string(AMODAL_SCHEMA_DIR) +
                                        "/checkpoint_header.schema.json"),
                  Error);
}

}  // namespace
}  // namespace amodal
