#ifndef AMODAL_EVAL_H_
#define AMODAL_EVAL_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "amodal/conditioning.h"
#include "amodal/denoiser.h"
#include "amodal/image.h"
#include "amodal/sampler.h"
#include "amodal/scenegen.h"
#include "amodal/segmenter.h"

namespace amodal {

// |pred & gt| / |pred | gt|; 1 when both are empty.
double Iou(const BinaryMask& pred, const BinaryMask& gt);

// Bucket thresholds, descending; bucket tau holds samples with rate <= tau.
std::vector<double> DefaultThresholds();

struct SampleResult {
  std::string id;
  double iou = 0.0;
  double occlusion_rate = 0.0;
};

struct BucketStat {
  double tau = 0.0;
  std::optional<double> miou;  // empty bucket -> no value
  size_t n = 0;
};

struct ReportRow {
  std::string variant;
  std::vector<BucketStat> buckets;
  double overall_miou = 0.0;
  size_t overall_n = 0;
  std::vector<SampleResult> samples;

  // mIoU of the bucket with threshold tau; throws if absent or empty.
  double Bucket(double tau) const;
};

struct EvalReport {
  std::vector<double> thresholds;
  std::vector<ReportRow> rows;
  nlohmann::json config = nlohmann::json::object();

  const ReportRow& Row(const std::string& variant) const;
};

inline constexpr int kReportSchemaVersion = 1;

ReportRow MakeRow(const std::string& variant,
                  std::vector<SampleResult> samples,
                  const std::vector<double>& thresholds);

struct MaskPair {
  BinaryMask pred;
  BinaryMask gt;
  double occlusion_rate = 0.0;
};

// One row from explicit (pred, gt, rate) triples.
EvalReport BucketedReport(const std::vector<MaskPair>& results,
                          const std::vector<double>& thresholds,
                          const std::string& variant = "result");

nlohmann::json ReportToJson(const EvalReport& report, bool with_samples = true);
EvalReport ReportFromJson(const nlohmann::json& j);
std::string ReportToText(const EvalReport& report);

// Writes report.json and report.txt into `dir`.
void WriteReport(const std::string& dir, const EvalReport& report);
EvalReport ReadReport(const std::string& json_path);

// ---------------------------------------------------------------------------
// Pipeline.

enum class MaskKind { kHull, kRectangle, kDepth, kFull };
const char* MaskKindName(MaskKind kind);
MaskKind MaskKindFromName(const std::string& name);
const char* BackgroundName(BackgroundKind kind);
BackgroundKind BackgroundFromName(const std::string& name);
const char* CombineName(CombineMode mode);
CombineMode CombineFromName(const std::string& name);

struct Variant {
  std::string label = "full";
  MaskKind mask = MaskKind::kHull;
  BackgroundKind background = BackgroundKind::kHistogram;
  double s = 0.3;
  CombineMode combine = CombineMode::kLeakage;
};

struct PipelineConfig {
  SamplerConfig sampler;  // s and combine are overridden per variant
  int n_seeds = kDefaultSeedCount;
  double tol = kDefaultTolerance;
  GrowMode grow = GrowMode::kRunningMean;
  double depth_r = 10.0;
};

struct PipelineOutput {
  BinaryMask m;
  ConditionImage cond;
  DiffusionState diffusion;
  SeedSet seeds;
  BinaryMask amodal;
};

// Inpainting area for a scene's target under the given mask kind.
BinaryMask InpaintingArea(const Scene& scene, MaskKind kind, double depth_r);

// Condition image -> soft inpainting -> seeded extraction for the target
// object. All randomness derives from scene_seed, so every variant of one
// scene shares its noise streams.
PipelineOutput RunPipeline(const Scene& scene, const Variant& variant,
                           const PipelineConfig& cfg, const Denoiser& model,
                           const NoiseSchedule& sched, uint64_t scene_seed,
                           Workspace* ws = nullptr);

struct Benchmark {
  std::vector<std::string> ids;
  std::vector<Scene> scenes;
};

// Loads every scene under <root>/scenes (first `limit` if limit > 0).
Benchmark LoadBenchmark(const std::string& root, size_t limit = 0);

// Per-scene seed for inference: DeriveSeed(root, "infer", scene index).
uint64_t SceneSeed(uint64_t root_seed, size_t index);

// Rows: modal baseline (prediction = V), hull baseline (prediction = M),
// then one row per variant in declaration order.
EvalReport RunAblation(const Benchmark& bench, const std::vector<Variant>& variants,
                       const PipelineConfig& cfg, const Denoiser& model,
                       const NoiseSchedule& sched, uint64_t root_seed, int jobs,
                       const std::vector<double>& thresholds,
                       bool verbose = false);

// Raw inpainting areas (hull, rectangle, depth) against the amodal ground
// truth, no diffusion; the modal baseline is included as the first row.
EvalReport MaskCoverageReport(const Benchmark& bench,
                              const std::vector<double>& thresholds,
                              double depth_r = 10.0);

// Named variant lists: "full", "components", "s_sweep", "mask_background",
// "criteria" (components + s_sweep) and "all".
std::vector<Variant> VariantPreset(const std::string& name);
std::vector<double> SGrid();

}  // namespace amodal

#endif  // AMODAL_EVAL_H_
