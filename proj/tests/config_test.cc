#include "amodal/config.h"

#include "doctest.h"

namespace amodal {
namespace {

using nlohmann::json;

TEST_CASE("defaults parse into the library defaults") {
  const json cfg = DefaultRunConfig();
  CHECK(ArchFromConfig(cfg) == UNetArch{});
  const NoiseSchedule s = ScheduleFromConfig(cfg);
  CHECK(s.Fingerprint() == BuildSchedule(1000, 1e-4, 0.02).Fingerprint());
  const PipelineConfig p = PipelineFromConfig(cfg);
  CHECK(p.sampler.s == 0.3);
  CHECK(p.sampler.w == 0.75);
  CHECK(p.sampler.steps == 20);
  CHECK(p.n_seeds == 9);
  CHECK(p.tol == 0.25);
  CHECK(p.depth_r == 10.0);
  CHECK(TrainFromConfig(cfg).p_drop == 0.1);
  CHECK(ThresholdsFromConfig(cfg) == DefaultThresholds());
  CHECK(EvalSceneFromConfig(cfg).max_objects == 4);
  CHECK(TrainSceneFromConfig(cfg).scene.max_objects == 3);
}

TEST_CASE("merging overrides nested keys and rejects unknown ones") {
  const json base = DefaultRunConfig();
  const json merged = MergeConfig(base, {{"sampler", {{"w", 7.5}}}, {"seed", 3}});
  CHECK(merged["sampler"]["w"] == 7.5);
  CHECK(merged["sampler"]["s"] == 0.3);
  CHECK(merged["seed"] == 3);
  CHECK_THROWS_AS(MergeConfig(base, {{"sampler", {{"wx", 1}}}}), Error);
  CHECK_THROWS_AS(MergeConfig(base, {{"nope", 1}}), Error);
  CHECK_THROWS_AS(MergeConfig(base, {{"seed", nullptr}}), Error);
  CHECK_THROWS_AS(MergeConfig(base, json::array()), Error);
}

TEST_CASE("invalid values are reported as invalid arguments") {
  auto kind = [](const json& patch, auto&& parse) {
    try {
      parse(MergeConfig(DefaultRunConfig(), patch));
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kUnreachable;
  };
  CHECK(kind({{"sampler", {{"s", 2.0}}}}, PipelineFromConfig) == ErrorKind::kInvalidArgument);
  CHECK(kind({{"sampler", {{"combine", "blend"}}}}, PipelineFromConfig) == ErrorKind::kInvalidArgument);
  CHECK(kind({{"segmenter", {{"mode", "median"}}}}, PipelineFromConfig) == ErrorKind::kInvalidArgument);
  CHECK(kind({{"model", {{"levels", 0}}}}, ArchFromConfig) == ErrorKind::kInvalidArgument);
  CHECK(kind({{"model", {{"levels", "three"}}}}, ArchFromConfig) == ErrorKind::kInvalidArgument);
}

}  // namespace
}  // namespace amodal
