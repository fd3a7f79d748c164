#include "amodal/scenegen.h"

#include <filesystem>
#include <unistd.h>

#include "amodal/png_io.h"
#include "amodal/train_masks.h"
#include "doctest.h"

namespace amodal {
namespace {

namespace fs = std::filesystem;

struct TempDir {
  fs::path path;
  explicit TempDir(const char* tag)
      : path(fs::temp_directory_path() /
             (std::string("amodal_") + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST_CASE("shape names round trip") {
  for (int k = 0; k < kNumShapeKinds; ++k) {
    const auto kind = static_cast<ShapeKind>(k);
    CHECK(ShapeFromName(ShapeName(kind)) == kind);
  }
  CHECK_THROWS_AS(ShapeFromName("hexagon"), Error);
}

TEST_CASE("rasterised circle") {
  ShapeSpec s;
  s.kind = ShapeKind::kCircle;
  s.cx = 10;
  s.cy = 10;
  s.rx = 3;
  const BinaryMask m = RasterizeShape(s, 21, 21);
  for (int y = 0; y < 21; ++y) {
    for (int x = 0; x < 21; ++x) {
      CHECK(m.at(y, x) == ((x - 10) * (x - 10) + (y - 10) * (y - 10) <= 9));
    }
  }
}

TEST_CASE("occlusion rate") {
  BinaryMask a(4, 4), v(4, 4);
  for (int x = 0; x < 4; ++x) a.set(0, x);
  v.set(0, 0);
  CHECK(OcclusionRate(v, a) == doctest::Approx(0.75));
  CHECK(OcclusionRate(a, a) == 0.0);
  CHECK_THROWS_AS(OcclusionRate(v, BinaryMask(4, 4)), Error);
}

TEST_CASE("evaluation scenes respect their band and layering") {
  SceneConfig cfg;
  for (const OcclusionBand& band : DefaultBands()) {
    for (uint64_t seed = 0; seed < 8; ++seed) {
      Rng rng(DeriveSeed(99, "scene_test", seed * 10 + static_cast<uint64_t>(band.hi * 100)));
      const Scene s = GenerateEvalScene(cfg, band, rng);
      REQUIRE(s.objects.size() >= 2);
      REQUIRE(s.objects.size() <= 4);
      const SceneObject& t = s.objects[s.target];
      CHECK(t.occlusion_rate >= band.lo);
      CHECK(t.occlusion_rate <= band.hi);
      CHECK_FALSE(t.visible.Empty());
      const std::vector<BinaryMask> vis = VisibleFromLayers(s.objects);
      for (size_t k = 0; k < s.objects.size(); ++k) {
        CHECK(vis[k] == s.objects[k].visible);
        CHECK(s.objects[k].visible.IsSubsetOf(s.objects[k].amodal));
        CHECK(s.objects[k].occlusion_rate ==
              doctest::Approx(OcclusionRate(s.objects[k].visible, s.objects[k].amodal)));
      }
      // Every pixel shows its frontmost covering object.
      for (int y = 0; y < cfg.size; y += 3) {
        for (int x = 0; x < cfg.size; x += 3) {
          int owners = 0;
          for (const SceneObject& o : s.objects) owners += o.visible.at(y, x);
          CHECK(owners <= 1);
        }
      }
    }
  }
}

TEST_CASE("generation is deterministic per seed") {
  SceneConfig cfg;
  Rng a(5), b(5), c(6);
  const Scene s1 = GenerateEvalScene(cfg, {0.2, 0.3}, a);
  const Scene s2 = GenerateEvalScene(cfg, {0.2, 0.3}, b);
  const Scene s3 = GenerateEvalScene(cfg, {0.2, 0.3}, c);
  CHECK(s1.image == s2.image);
  CHECK_FALSE(s1.image == s3.image);

  TrainingConfig tc;
  Rng d(1), e(1);
  CHECK(GenerateTrainingImage(tc, d).image == GenerateTrainingImage(tc, e).image);
}

TEST_CASE("unreachable bands fail loudly") {
  SceneConfig cfg;
  cfg.max_retries = 5;
  Rng rng(1);
  CHECK_THROWS_AS(GenerateEvalScene(cfg, {0.99, 1.0}, rng), Error);
}

TEST_CASE("training images hold separated complete objects") {
  TrainingConfig tc;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const TrainingImage t = GenerateTrainingImage(tc, rng);
    REQUIRE(t.objects.size() >= 1);
    REQUIRE(t.objects.size() <= 3);
    REQUIRE(t.kinds.size() == t.objects.size());
    for (size_t i = 0; i < t.objects.size(); ++i) {
      CHECK_FALSE(t.objects[i].Empty());
      for (size_t j = i + 1; j < t.objects.size(); ++j) {
        CHECK(t.objects[i].Intersect(t.objects[j]).Empty());
      }
    }
    const BinaryMask m = SampleTrainingMask(t.objects, 64, TrainMaskConfig{}, rng);
    CHECK_FALSE(m.Empty());
  }
}

TEST_CASE("scenes round trip through disk") {
  TempDir dir("scene");
  SceneConfig cfg;
  Rng rng(3);
  const Scene s = GenerateEvalScene(cfg, {0.3, 0.4}, rng);
  const std::string path = (dir.path / "00000").string();
  WriteScene(path, s, "00000");
  const Scene r = ReadScene(path);
  CHECK(r.image == s.image);
  CHECK(r.target == s.target);
  REQUIRE(r.objects.size() == s.objects.size());
  for (size_t k = 0; k < s.objects.size(); ++k) {
    CHECK(r.objects[k].amodal == s.objects[k].amodal);
    CHECK(r.objects[k].visible == s.objects[k].visible);
    CHECK(r.objects[k].depth_rank == s.objects[k].depth_rank);
    CHECK(r.objects[k].occlusion_rate == s.objects[k].occlusion_rate);
  }
  CHECK(SceneMeta(r, "00000") == SceneMeta(s, "00000"));
  CHECK_THROWS_AS(ReadScene((dir.path / "missing").string()), Error);
}

TEST_CASE("benchmark and corpus generation") {
  TempDir dir("bench");
  SceneConfig cfg;
  GenerateBenchmark(dir.path.string(), 9, 42, cfg, 2);
  std::vector<std::string> ids = ListScenes(dir.path.string());
  for (std::string& id : ids) id = fs::path(id).filename().string();
  REQUIRE(ids.size() == 9);
  CHECK(ids[0] == "00000");
  const std::vector<OcclusionBand> bands = DefaultBands();
  for (size_t i = 0; i < ids.size(); ++i) {
    const Scene s = ReadScene((dir.path / "scenes" / ids[i]).string());
    const double rate = s.objects[s.target].occlusion_rate;
    CHECK(rate >= bands[i % bands.size()].lo);
    CHECK(rate <= bands[i % bands.size()].hi);
  }
  TrainingConfig tc;
  GenerateTrainingCorpus(dir.path.string(), 5, 42, tc, 2);
  const Corpus c = ReadTrainingCorpus(dir.path.string());
  REQUIRE(c.images.size() == 5);
  Rng rng(DeriveSeed(42, "train_image", 3));
  const TrainingImage t = GenerateTrainingImage(tc, rng);
  CHECK(c.images[3] == t.image);
  CHECK(c.objects[3] == t.objects);
}

}  // namespace
}  // namespace amodal
