#ifndef AMODAL_CONFIG_H_
#define AMODAL_CONFIG_H_

#include <string>

#include <json.hpp>

#include "amodal/denoiser.h"
#include "amodal/eval.h"
#include "amodal/scenegen.h"
#include "amodal/schedule.h"
#include "amodal/train_masks.h"
#include "amodal/unet.h"

namespace amodal {

// Run configuration as plain JSON. Every command reads the same document:
// defaults, then an optional config file, then flag overrides, and writes the
// resolved result next to its outputs.
//
// Seeds: "seed" is the root. Components derive their streams from it with
// DeriveSeed(seed, tag, index) using the tags "scene" (benchmark scene i),
// "train_image" (corpus image i), "init" (weights), "train" (training draws)
// and "infer" (per-scene inference streams).
nlohmann::json DefaultRunConfig();

// Applies `patch` onto `base` recursively. Keys absent from `base` are
// rejected so typos fail loudly; null values are not allowed.
nlohmann::json MergeConfig(const nlohmann::json& base,
                           const nlohmann::json& patch);

nlohmann::json LoadConfigFile(const std::string& path);
void WriteConfigFile(const std::string& path, const nlohmann::json& cfg);

UNetArch ArchFromConfig(const nlohmann::json& cfg);
NoiseSchedule ScheduleFromConfig(const nlohmann::json& cfg);
TrainConfig TrainFromConfig(const nlohmann::json& cfg);
TrainMaskConfig TrainMasksFromConfig(const nlohmann::json& cfg);
SceneConfig EvalSceneFromConfig(const nlohmann::json& cfg);
TrainingConfig TrainSceneFromConfig(const nlohmann::json& cfg);
PipelineConfig PipelineFromConfig(const nlohmann::json& cfg);
std::vector<double> ThresholdsFromConfig(const nlohmann::json& cfg);

}  // namespace amodal

#endif  // AMODAL_CONFIG_H_
