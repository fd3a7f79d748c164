#ifndef AMODAL_SCENEGEN_H_
#define AMODAL_SCENEGEN_H_

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "amodal/image.h"
#include "amodal/rng.h"

namespace amodal {

enum class ShapeKind { kCircle, kEllipse, kRectangle, kTriangle, kCapsule };
inline constexpr int kNumShapeKinds = 5;
const char* ShapeName(ShapeKind kind);
ShapeKind ShapeFromName(const std::string& name);

using Color = std::array<float, 3>;

// Geometry in pixel-centre coordinates (x = column, y = row).
//   circle     centre (cx, cy), radius rx
//   ellipse    centre, semi-axes rx, ry, rotation angle (radians)
//   rectangle  centre, half-extents rx, ry, rotation angle
//   triangle   vertices v[0..2]
//   capsule    segment v[0]-v[1], radius rx
struct ShapeSpec {
  ShapeKind kind = ShapeKind::kCircle;
  double cx = 0, cy = 0, rx = 0, ry = 0, angle = 0;
  std::array<std::array<double, 2>, 3> v{};

  bool Contains(double x, double y) const;
};

// Flat colour, or a linear ramp from c0 to c1 along `angle` across the
// object's extent.
struct Fill {
  bool gradient = false;
  Color c0{};
  Color c1{};
  double angle = 0.0;
};

struct SceneObject {
  ShapeSpec shape;
  Fill fill;
  BinaryMask amodal;
  BinaryMask visible;
  int depth_rank = 0;  // 0 = frontmost
  double occlusion_rate = 0.0;
};

struct Scene {
  ImageBuffer image;
  std::vector<SceneObject> objects;
  Fill background;
  int target = 0;  // index of the object the benchmark evaluates
  uint64_t seed = 0;
};

struct SceneConfig {
  int size = 64;
  int min_objects = 2;
  int max_objects = 4;
  // Relative frequencies of circle, ellipse, rectangle, triangle, capsule.
  std::array<double, kNumShapeKinds> shape_weights{1, 1, 1, 1, 1};
  double gradient_prob = 0.3;
  double background_gradient_prob = 0.5;
  double min_radius = 7.0;  // at 64 px; scaled with size
  double max_radius = 18.0;
  double min_color_distance = 0.6;  // mean-colour separation between layers
  double max_gradient_step = 0.3;   // per-channel |c1 - c0|
  int max_retries = 2000;
};

// Random shape fully inside the frame; with `anchor` its centre lies within
// `spread` pixels of (anchor[0], anchor[1]) per axis.
ShapeSpec RandomShape(const SceneConfig& cfg, Rng& rng, const double* anchor,
                      double spread);

// Rasterised mask of a shape (pixel centre inside or on the boundary).
BinaryMask RasterizeShape(const ShapeSpec& shape, int height, int width);

// Fill colour at pixel (x, y) of an object whose mask is `mask`; gradients
// span the mask's extent along the fill direction.
void PaintFill(ImageBuffer& image, const BinaryMask& mask, const Fill& fill);

// 1 - |V| / |A|; requires V subset of A and A non-empty.
double OcclusionRate(const BinaryMask& visible, const BinaryMask& amodal);

// ---------------------------------------------------------------------------
// Training corpus: 1..3 complete, pairwise separated shapes.

struct TrainingImage {
  ImageBuffer image;
  std::vector<BinaryMask> objects;
  std::vector<ShapeKind> kinds;
};

struct TrainingConfig {
  SceneConfig scene{.min_objects = 1, .max_objects = 3};
  int min_gap = 2;  // Chebyshev gap between distinct objects, in pixels
};

TrainingImage GenerateTrainingImage(const TrainingConfig& cfg, Rng& rng);

// ---------------------------------------------------------------------------
// Evaluation scenes.

struct OcclusionBand {
  double lo = 0.0;
  double hi = 0.5;
};

// Renders layered objects and rejection-samples until the target object's
// occlusion rate lies in `band`. Throws kUnreachable after cfg.max_retries.
Scene GenerateEvalScene(const SceneConfig& cfg, const OcclusionBand& band,
                        Rng& rng);

// Recomputes every visible mask from the amodal masks and depth ranks.
std::vector<BinaryMask> VisibleFromLayers(const std::vector<SceneObject>& objs);

// Default stratification of the benchmark over occlusion bands; scene i uses
// band i % size.
std::vector<OcclusionBand> DefaultBands();

// ---------------------------------------------------------------------------
// Disk layout. Version 1:
//   <root>/scenes/<id>/image.png, obj<k>_amodal.png, obj<k>_visible.png,
//   meta.json
//   <root>/train/<id>.png, <id>_labels.png, plus <root>/train/index.json

inline constexpr int kDatasetVersion = 1;

nlohmann::json SceneMeta(const Scene& scene, const std::string& id);
void WriteScene(const std::string& dir, const Scene& scene,
                const std::string& id);
// Reads image, masks and metadata; shape/fill descriptors come from meta.
Scene ReadScene(const std::string& dir);

std::string SceneId(size_t index);  // zero-padded, e.g. "00017"

// Writes `count` scenes under <root>/scenes with per-scene derived seeds.
void GenerateBenchmark(const std::string& root, size_t count,
                       uint64_t root_seed, const SceneConfig& cfg, int jobs);
// Scene directory paths under <root>/scenes, sorted by id.
std::vector<std::string> ListScenes(const std::string& root);

void GenerateTrainingCorpus(const std::string& root, size_t count,
                            uint64_t root_seed, const TrainingConfig& cfg,
                            int jobs);

struct Corpus {
  std::vector<ImageBuffer> images;
  std::vector<std::vector<BinaryMask>> objects;
};
Corpus ReadTrainingCorpus(const std::string& root);

}  // namespace amodal

#endif  // AMODAL_SCENEGEN_H_
