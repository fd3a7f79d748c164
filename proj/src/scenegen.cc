#include "amodal/scenegen.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "amodal/parallel.h"
#include "amodal/png_io.h"

namespace amodal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr size_t kMinObjectPixels = 20;

double Uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int UniformInt(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

bool Bernoulli(Rng& rng, double p) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

float GridColor(Rng& rng) {
  return DecodeByte(static_cast<uint8_t>(UniformInt(rng, 0, 255)));
}

Color RandomColor(Rng& rng) { return {GridColor(rng), GridColor(rng), GridColor(rng)}; }

Color MeanColor(const Fill& f) {
  if (!f.gradient) return f.c0;
  return {0.5f * (f.c0[0] + f.c1[0]), 0.5f * (f.c0[1] + f.c1[1]),
          0.5f * (f.c0[2] + f.c1[2])};
}

double ColorDistance(const Color& a, const Color& b) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
  return std::sqrt(s);
}

Fill RandomFill(const SceneConfig& cfg, double gradient_prob,
                const std::vector<Color>& avoid, Rng& rng) {
  Fill f;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    f.gradient = Bernoulli(rng, gradient_prob);
    f.c0 = RandomColor(rng);
    f.c1 = f.c0;
    if (f.gradient) {
      for (int c = 0; c < 3; ++c) {
        const double d = Uniform(rng, -cfg.max_gradient_step, cfg.max_gradient_step);
        f.c1[c] = DecodeByte(EncodeByte(static_cast<float>(
            std::clamp(f.c0[c] + d, -1.0, 1.0))));
      }
      f.angle = Uniform(rng, 0.0, 2.0 * kPi);
    }
    const Color m = MeanColor(f);
    bool ok = true;
    for (const Color& a : avoid) {
      if (ColorDistance(a, m) < cfg.min_color_distance) {
        ok = false;
        break;
      }
    }
    if (ok) return f;
  }
  Fail(ErrorKind::kUnreachable, "could not find a separated colour");
}

ShapeKind PickKind(const SceneConfig& cfg, Rng& rng) {
  std::discrete_distribution<int> pick(cfg.shape_weights.begin(),
                                       cfg.shape_weights.end());
  return static_cast<ShapeKind>(pick(rng));
}

// Shape whose bounding circle of radius r is centred at (cx, cy).
ShapeSpec MakeShape(ShapeKind kind, double cx, double cy, double r, Rng& rng) {
  ShapeSpec s;
  s.kind = kind;
  s.cx = cx;
  s.cy = cy;
  switch (kind) {
    case ShapeKind::kCircle:
      s.rx = s.ry = r;
      break;
    case ShapeKind::kEllipse:
      s.rx = r;
      s.ry = r * Uniform(rng, 0.45, 0.9);
      s.angle = Uniform(rng, 0.0, kPi);
      break;
    case ShapeKind::kRectangle: {
      const double phi = Uniform(rng, 0.2, 0.8) * kPi / 2;
      s.rx = r * std::cos(phi);
      s.ry = r * std::sin(phi);
      s.angle = Bernoulli(rng, 0.5) ? 0.0 : Uniform(rng, 0.0, kPi);
      break;
    }
    case ShapeKind::kTriangle: {
      const double a0 = Uniform(rng, 0.0, 2.0 * kPi);
      const double a1 = a0 + Uniform(rng, 1.5, 2.6);
      const double a2 = a1 + Uniform(rng, 1.5, std::min(2.6, a0 + 2 * kPi - a1 - 1.0));
      const double angles[3] = {a0, a1, a2};
      for (int i = 0; i < 3; ++i) {
        s.v[i] = {cx + r * std::cos(angles[i]), cy + r * std::sin(angles[i])};
      }
      break;
    }
    case ShapeKind::kCapsule: {
      s.rx = s.ry = r * Uniform(rng, 0.3, 0.5);
      const double half = r - s.rx;
      s.angle = Uniform(rng, 0.0, kPi);
      s.v[0] = {cx - half * std::cos(s.angle), cy - half * std::sin(s.angle)};
      s.v[1] = {cx + half * std::cos(s.angle), cy + half * std::sin(s.angle)};
      break;
    }
  }
  return s;
}

double Scale(const SceneConfig& cfg) { return cfg.size / 64.0; }

void PaintBackground(ImageBuffer& image, const Fill& fill) {
  const BinaryMask all(image.height(), image.width(), true);
  PaintFill(image, all, fill);
}

BinaryMask Dilate(const BinaryMask& m, int r) {
  BinaryMask out(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (!m.at(y, x)) continue;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (out.in_bounds(y + dy, x + dx)) out.set(y + dy, x + dx);
        }
      }
    }
  }
  return out;
}

json ShapeJson(const ShapeSpec& s) {
  json j = {{"kind", ShapeName(s.kind)}, {"cx", s.cx}, {"cy", s.cy},
            {"rx", s.rx}, {"ry", s.ry}, {"angle", s.angle}};
  if (s.kind == ShapeKind::kTriangle || s.kind == ShapeKind::kCapsule) {
    json v = json::array();
    const int n = s.kind == ShapeKind::kTriangle ? 3 : 2;
    for (int i = 0; i < n; ++i) v.push_back({s.v[i][0], s.v[i][1]});
    j["vertices"] = v;
  }
  return j;
}

ShapeSpec ShapeFromJson(const json& j) {
  ShapeSpec s;
  s.kind = ShapeFromName(j.at("kind").get<std::string>());
  s.cx = j.at("cx").get<double>();
  s.cy = j.at("cy").get<double>();
  s.rx = j.at("rx").get<double>();
  s.ry = j.at("ry").get<double>();
  s.angle = j.at("angle").get<double>();
  if (j.contains("vertices")) {
    const auto& v = j.at("vertices");
    for (size_t i = 0; i < v.size() && i < 3; ++i) {
      s.v[i] = {v[i][0].get<double>(), v[i][1].get<double>()};
    }
  }
  return s;
}

json FillJson(const Fill& f) {
  json j = {{"gradient", f.gradient}, {"c0", f.c0}};
  if (f.gradient) {
    j["c1"] = f.c1;
    j["angle"] = f.angle;
  }
  return j;
}

Fill FillFromJson(const json& j) {
  Fill f;
  f.gradient = j.at("gradient").get<bool>();
  f.c0 = j.at("c0").get<Color>();
  f.c1 = f.c0;
  if (f.gradient) {
    f.c1 = j.at("c1").get<Color>();
    f.angle = j.at("angle").get<double>();
  }
  return f;
}

void WriteJsonFile(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) Fail(ErrorKind::kIo, "cannot write " + path.string());
  os << j.dump(2) << "\n";
  if (!os) Fail(ErrorKind::kIo, "write failed: " + path.string());
}

json ReadJsonFile(const fs::path& path) {
  std::ifstream is(path);
  if (!is) Fail(ErrorKind::kIo, "cannot open " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    Fail(ErrorKind::kFormat, path.string() + ": " + e.what());
  }
}

json SceneConfigJson(const SceneConfig& c) {
  return {{"size", c.size},
          {"min_objects", c.min_objects},
          {"max_objects", c.max_objects},
          {"shape_weights", c.shape_weights},
          {"gradient_prob", c.gradient_prob},
          {"background_gradient_prob", c.background_gradient_prob},
          {"min_radius", c.min_radius},
          {"max_radius", c.max_radius},
          {"min_color_distance", c.min_color_distance},
          {"max_gradient_step", c.max_gradient_step},
          {"max_retries", c.max_retries}};
}

}  // namespace

ShapeSpec RandomShape(const SceneConfig& cfg, Rng& rng, const double* anchor,
                      double anchor_spread) {
  const double r = Uniform(rng, cfg.min_radius, cfg.max_radius) * Scale(cfg);
  const double lo = r, hi = cfg.size - 1 - r;
  double cx, cy;
  if (anchor != nullptr) {
    cx = std::clamp(anchor[0] + Uniform(rng, -anchor_spread, anchor_spread), lo, hi);
    cy = std::clamp(anchor[1] + Uniform(rng, -anchor_spread, anchor_spread), lo, hi);
  } else {
    cx = Uniform(rng, lo, hi);
    cy = Uniform(rng, lo, hi);
  }
  return MakeShape(PickKind(cfg, rng), cx, cy, r, rng);
}

const char* ShapeName(ShapeKind kind) {
  switch (kind) {
    case ShapeKind::kCircle: return "circle";
    case ShapeKind::kEllipse: return "ellipse";
    case ShapeKind::kRectangle: return "rectangle";
    case ShapeKind::kTriangle: return "triangle";
    case ShapeKind::kCapsule: return "capsule";
  }
  return "?";
}

ShapeKind ShapeFromName(const std::string& name) {
  for (int k = 0; k < kNumShapeKinds; ++k) {
    if (name == ShapeName(static_cast<ShapeKind>(k))) {
      return static_cast<ShapeKind>(k);
    }
  }
  Fail(ErrorKind::kFormat, "unknown shape kind '" + name + "'");
}

bool ShapeSpec::Contains(double x, double y) const {
  switch (kind) {
    case ShapeKind::kCircle: {
      const double dx = x - cx, dy = y - cy;
      return dx * dx + dy * dy <= rx * rx;
    }
    case ShapeKind::kEllipse:
    case ShapeKind::kRectangle: {
      const double c = std::cos(angle), s = std::sin(angle);
      const double u = (x - cx) * c + (y - cy) * s;
      const double w = -(x - cx) * s + (y - cy) * c;
      if (kind == ShapeKind::kRectangle) return std::abs(u) <= rx && std::abs(w) <= ry;
      return (u * u) / (rx * rx) + (w * w) / (ry * ry) <= 1.0;
    }
    case ShapeKind::kTriangle: {
      auto cross = [](const std::array<double, 2>& a,
                      const std::array<double, 2>& b, double px, double py) {
        return (b[0] - a[0]) * (py - a[1]) - (b[1] - a[1]) * (px - a[0]);
      };
      const double d0 = cross(v[0], v[1], x, y);
      const double d1 = cross(v[1], v[2], x, y);
      const double d2 = cross(v[2], v[0], x, y);
      const bool has_neg = d0 < 0 || d1 < 0 || d2 < 0;
      const bool has_pos = d0 > 0 || d1 > 0 || d2 > 0;
      return !(has_neg && has_pos);
    }
    case ShapeKind::kCapsule: {
      const double ax = v[0][0], ay = v[0][1], bx = v[1][0], by = v[1][1];
      const double ex = bx - ax, ey = by - ay;
      const double len2 = ex * ex + ey * ey;
      double t = len2 > 0 ? ((x - ax) * ex + (y - ay) * ey) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dx = x - (ax + t * ex), dy = y - (ay + t * ey);
      return dx * dx + dy * dy <= rx * rx;
    }
  }
  return false;
}

BinaryMask RasterizeShape(const ShapeSpec& shape, int height, int width) {
  BinaryMask m(height, width);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (shape.Contains(x, y)) m.set(y, x);
    }
  }
  return m;
}

void PaintFill(ImageBuffer& image, const BinaryMask& mask, const Fill& fill) {
  RequireSameResolution(image, mask, "PaintFill");
  const double dx = std::cos(fill.angle), dy = std::sin(fill.angle);
  double lo = 1e30, hi = -1e30;
  if (fill.gradient) {
    for (int y = 0; y < mask.height(); ++y) {
      for (int x = 0; x < mask.width(); ++x) {
        if (!mask.at(y, x)) continue;
        const double p = x * dx + y * dy;
        lo = std::min(lo, p);
        hi = std::max(hi, p);
      }
    }
  }
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(y, x)) continue;
      double t = 0.0;
      if (fill.gradient && hi > lo) t = (x * dx + y * dy - lo) / (hi - lo);
      for (int c = 0; c < 3; ++c) {
        const double v = fill.c0[c] + t * (fill.c1[c] - fill.c0[c]);
        image.at(c, y, x) = DecodeByte(EncodeByte(static_cast<float>(v)));
      }
    }
  }
}

double OcclusionRate(const BinaryMask& visible, const BinaryMask& amodal) {
  RequireSameShape(visible, amodal, "OcclusionRate");
  const size_t a = amodal.Count();
  Require(a > 0, ErrorKind::kInvalidArgument, "OcclusionRate: empty amodal mask");
  Require(visible.IsSubsetOf(amodal), ErrorKind::kInvalidArgument,
          "OcclusionRate: visible mask is not inside the amodal mask");
  return 1.0 - static_cast<double>(visible.Count()) / static_cast<double>(a);
}

TrainingImage GenerateTrainingImage(const TrainingConfig& cfg, Rng& rng) {
  const SceneConfig& sc = cfg.scene;
  TrainingImage out;
  out.image = ImageBuffer(sc.size, sc.size, 3);
  std::vector<Color> palette;
  Fill bg = RandomFill(sc, sc.background_gradient_prob, {}, rng);
  palette.push_back(MeanColor(bg));
  PaintBackground(out.image, bg);

  const int n = UniformInt(rng, sc.min_objects, sc.max_objects);
  BinaryMask occupied(sc.size, sc.size);
  for (int k = 0; k < n; ++k) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const ShapeSpec shape = RandomShape(sc, rng, nullptr, 0.0);
      const BinaryMask m = RasterizeShape(shape, sc.size, sc.size);
      if (m.Count() < kMinObjectPixels) continue;
      if (!Dilate(m, cfg.min_gap).Intersect(occupied).Empty()) continue;
      const Fill fill = RandomFill(sc, sc.gradient_prob, palette, rng);
      palette.push_back(MeanColor(fill));
      PaintFill(out.image, m, fill);
      occupied = occupied.Union(m);
      out.objects.push_back(m);
      out.kinds.push_back(shape.kind);
      break;
    }
  }
  Require(!out.objects.empty(), ErrorKind::kUnreachable,
          "could not place any training object");
  return out;
}

std::vector<BinaryMask> VisibleFromLayers(const std::vector<SceneObject>& objs) {
  std::vector<BinaryMask> out;
  for (const SceneObject& o : objs) {
    BinaryMask v = o.amodal;
    for (const SceneObject& p : objs) {
      if (p.depth_rank < o.depth_rank) v = v.Minus(p.amodal);
    }
    out.push_back(std::move(v));
  }
  return out;
}

Scene GenerateEvalScene(const SceneConfig& cfg, const OcclusionBand& band,
                        Rng& rng) {
  Require(band.lo <= band.hi && band.lo >= 0.0 && band.hi <= 1.0,
          ErrorKind::kInvalidArgument, "invalid occlusion band");
  Require(cfg.min_objects >= 1 && cfg.min_objects <= cfg.max_objects,
          ErrorKind::kInvalidArgument, "invalid object count range");
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    Scene scene;
    const int n = UniformInt(rng, cfg.min_objects, cfg.max_objects);
    // Object 0 is the target; the others cluster around it so that the
    // requested occlusion is reachable.
    double anchor[2] = {0.0, 0.0};
    std::vector<int> ranks(n);
    for (int k = 0; k < n; ++k) ranks[k] = k;
    std::shuffle(ranks.begin(), ranks.end(), rng);
    bool ok = true;
    for (int k = 0; k < n && ok; ++k) {
      SceneObject o;
      const bool near = k > 0 && Bernoulli(rng, 0.8);
      o.shape = RandomShape(cfg, rng, near ? anchor : nullptr,
                            cfg.max_radius * Scale(cfg) * 1.5);
      if (k == 0) {
        anchor[0] = o.shape.cx;
        anchor[1] = o.shape.cy;
      }
      o.amodal = RasterizeShape(o.shape, cfg.size, cfg.size);
      o.depth_rank = ranks[k];
      ok = o.amodal.Count() >= kMinObjectPixels;
      scene.objects.push_back(std::move(o));
    }
    if (!ok) continue;
    const std::vector<BinaryMask> vis = VisibleFromLayers(scene.objects);
    for (int k = 0; k < n; ++k) {
      scene.objects[k].visible = vis[k];
      scene.objects[k].occlusion_rate =
          OcclusionRate(vis[k], scene.objects[k].amodal);
    }
    const double rate = scene.objects[0].occlusion_rate;
    if (rate < band.lo || rate > band.hi || vis[0].Empty()) continue;

    // Colours: every layer separated from the background and all others.
    std::vector<Color> palette;
    scene.background = RandomFill(cfg, cfg.background_gradient_prob, {}, rng);
    palette.push_back(MeanColor(scene.background));
    for (auto& o : scene.objects) {
      o.fill = RandomFill(cfg, cfg.gradient_prob, palette, rng);
      palette.push_back(MeanColor(o.fill));
    }
    scene.image = ImageBuffer(cfg.size, cfg.size, 3);
    PaintBackground(scene.image, scene.background);
    std::vector<int> back_to_front(n);
    for (int k = 0; k < n; ++k) back_to_front[k] = k;
    std::sort(back_to_front.begin(), back_to_front.end(), [&](int a, int b) {
      return scene.objects[a].depth_rank > scene.objects[b].depth_rank;
    });
    for (int k : back_to_front) {
      PaintFill(scene.image, scene.objects[k].amodal, scene.objects[k].fill);
    }
    scene.target = 0;
    return scene;
  }
  char msg[128];
  std::snprintf(msg, sizeof(msg),
                "occlusion band [%.3f, %.3f] not reached after %d retries",
                band.lo, band.hi, cfg.max_retries);
  Fail(ErrorKind::kUnreachable, msg);
}

std::vector<OcclusionBand> DefaultBands() {
  return {{0.0, 0.05}, {0.05, 0.10}, {0.10, 0.20}, {0.20, 0.30},
          {0.30, 0.40}, {0.40, 0.50}, {0.50, 0.70}};
}

std::string SceneId(size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu", index);
  return buf;
}

json SceneMeta(const Scene& scene, const std::string& id) {
  json objs = json::array();
  for (size_t k = 0; k < scene.objects.size(); ++k) {
    const SceneObject& o = scene.objects[k];
    objs.push_back({{"k", k},
                    {"shape", ShapeJson(o.shape)},
                    {"fill", FillJson(o.fill)},
                    {"depth_rank", o.depth_rank},
                    {"occlusion_rate", o.occlusion_rate},
                    {"amodal_pixels", o.amodal.Count()},
                    {"visible_pixels", o.visible.Count()}});
  }
  return {{"format", "amodal-scene"},
          {"version", kDatasetVersion},
          {"id", id},
          {"seed", scene.seed},
          {"height", scene.image.height()},
          {"width", scene.image.width()},
          {"background", FillJson(scene.background)},
          {"target", scene.target},
          {"objects", objs}};
}

void WriteScene(const std::string& dir, const Scene& scene,
                const std::string& id) {
  // Write into a sibling temp directory and rename, so a scene directory is
  // either complete or absent.
  const fs::path final_dir(dir);
  const fs::path tmp = final_dir.string() + ".tmp";
  fs::remove_all(tmp);
  fs::create_directories(tmp);
  WritePngRgb((tmp / "image.png").string(), scene.image);
  for (size_t k = 0; k < scene.objects.size(); ++k) {
    const std::string stem = "obj" + std::to_string(k);
    WritePngMask((tmp / (stem + "_amodal.png")).string(), scene.objects[k].amodal);
    WritePngMask((tmp / (stem + "_visible.png")).string(), scene.objects[k].visible);
  }
  WriteJsonFile(tmp / "meta.json", SceneMeta(scene, id));
  fs::remove_all(final_dir);
  fs::rename(tmp, final_dir);
}

Scene ReadScene(const std::string& dir) {
  const fs::path d(dir);
  const json meta = ReadJsonFile(d / "meta.json");
  try {
    if (meta.at("format").get<std::string>() != "amodal-scene" ||
        meta.at("version").get<int>() != kDatasetVersion) {
      Fail(ErrorKind::kFormat, dir + ": unsupported scene format");
    }
    Scene s;
    s.image = ReadPngRgb((d / "image.png").string());
    s.seed = meta.at("seed").get<uint64_t>();
    s.target = meta.at("target").get<int>();
    s.background = FillFromJson(meta.at("background"));
    for (const json& o : meta.at("objects")) {
      SceneObject obj;
      const std::string stem = "obj" + std::to_string(o.at("k").get<int>());
      obj.shape = ShapeFromJson(o.at("shape"));
      obj.fill = FillFromJson(o.at("fill"));
      obj.depth_rank = o.at("depth_rank").get<int>();
      obj.occlusion_rate = o.at("occlusion_rate").get<double>();
      obj.amodal = ReadPngMask((d / (stem + "_amodal.png")).string());
      obj.visible = ReadPngMask((d / (stem + "_visible.png")).string());
      RequireSameResolution(s.image, obj.amodal, "ReadScene");
      RequireSameResolution(s.image, obj.visible, "ReadScene");
      s.objects.push_back(std::move(obj));
    }
    Require(s.target >= 0 && s.target < static_cast<int>(s.objects.size()),
            ErrorKind::kFormat, "scene target index out of range");
    return s;
  } catch (const json::exception& e) {
    Fail(ErrorKind::kFormat, dir + "/meta.json: " + e.what());
  }
}

void GenerateBenchmark(const std::string& root, size_t count,
                       uint64_t root_seed, const SceneConfig& cfg, int jobs) {
  Require(count > 0, ErrorKind::kInvalidArgument, "scene count must be > 0");
  const fs::path scenes = fs::path(root) / "scenes";
  fs::create_directories(scenes);
  const std::vector<OcclusionBand> bands = DefaultBands();
  ParallelFor(count, jobs, [&](size_t i) {
    const uint64_t seed = DeriveSeed(root_seed, "scene", i);
    Rng rng(seed);
    Scene s = GenerateEvalScene(cfg, bands[i % bands.size()], rng);
    s.seed = seed;
    WriteScene((scenes / SceneId(i)).string(), s, SceneId(i));
  });
  json bands_json = json::array();
  for (const auto& b : bands) bands_json.push_back({b.lo, b.hi});
  WriteJsonFile(fs::path(root) / "benchmark.json",
                {{"format", "amodal-benchmark"},
                 {"version", kDatasetVersion},
                 {"count", count},
                 {"root_seed", root_seed},
                 {"bands", bands_json},
                 {"scene_config", SceneConfigJson(cfg)}});
}

std::vector<std::string> ListScenes(const std::string& root) {
  const fs::path scenes = fs::path(root) / "scenes";
  if (!fs::is_directory(scenes)) {
    Fail(ErrorKind::kIo, "no scenes directory under " + root);
  }
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(scenes)) {
    if (e.is_directory() && fs::exists(e.path() / "meta.json")) {
      out.push_back(e.path().string());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) Fail(ErrorKind::kIo, "benchmark at " + root + " is empty");
  return out;
}

void GenerateTrainingCorpus(const std::string& root, size_t count,
                            uint64_t root_seed, const TrainingConfig& cfg,
                            int jobs) {
  Require(count > 0, ErrorKind::kInvalidArgument, "image count must be > 0");
  const fs::path dir = fs::path(root) / "train";
  fs::create_directories(dir);
  ParallelFor(count, jobs, [&](size_t i) {
    Rng rng(DeriveSeed(root_seed, "train_image", i));
    const TrainingImage t = GenerateTrainingImage(cfg, rng);
    LabelMap labels{t.image.height(), t.image.width(), {}};
    labels.labels.assign(static_cast<size_t>(labels.height) * labels.width, 0);
    for (size_t k = 0; k < t.objects.size(); ++k) {
      const auto bits = t.objects[k].data();
      for (size_t p = 0; p < bits.size(); ++p) {
        if (bits[p]) labels.labels[p] = static_cast<uint8_t>(k + 1);
      }
    }
    WritePngRgb((dir / (SceneId(i) + ".png")).string(), t.image);
    WritePngLabels((dir / (SceneId(i) + "_labels.png")).string(), labels);
  });
  WriteJsonFile(dir / "index.json", {{"format", "amodal-train-corpus"},
                                     {"version", kDatasetVersion},
                                     {"count", count},
                                     {"root_seed", root_seed},
                                     {"min_gap", cfg.min_gap},
                                     {"scene_config", SceneConfigJson(cfg.scene)}});
}

Corpus ReadTrainingCorpus(const std::string& root) {
  const fs::path dir = fs::path(root) / "train";
  const json index = ReadJsonFile(dir / "index.json");
  size_t count = 0;
  try {
    count = index.at("count").get<size_t>();
  } catch (const json::exception& e) {
    Fail(ErrorKind::kFormat, "train/index.json: " + std::string(e.what()));
  }
  Require(count > 0, ErrorKind::kInvalidArgument, "empty training corpus");
  Corpus c;
  c.images.reserve(count);
  c.objects.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    c.images.push_back(ReadPngRgb((dir / (SceneId(i) + ".png")).string()));
    const LabelMap lm = ReadPngLabels((dir / (SceneId(i) + "_labels.png")).string());
    int n = 0;
    for (uint8_t l : lm.labels) n = std::max<int>(n, l);
    std::vector<BinaryMask> objs(n, BinaryMask(lm.height, lm.width));
    for (size_t p = 0; p < lm.labels.size(); ++p) {
      if (lm.labels[p]) objs[lm.labels[p] - 1].data()[p] = 1;
    }
    c.objects.push_back(std::move(objs));
  }
  return c;
}

}  // namespace amodal
