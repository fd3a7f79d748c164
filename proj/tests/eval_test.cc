#include "amodal/eval.h"

#include <filesystem>
#include <unistd.h>

#include "doctest.h"

namespace amodal {
namespace {

namespace fs = std::filesystem;

BinaryMask Cols(int from, int to) {
  BinaryMask m(1, 6);
  for (int x = from; x < to; ++x) m.set(0, x);
  return m;
}

TEST_CASE("iou fixtures") {
  CHECK(Iou(Cols(0, 3), Cols(0, 3)) == 1.0);
  CHECK(Iou(Cols(0, 3), Cols(3, 6)) == 0.0);
  // |A n B| = 2, |A u B| = 6.
  CHECK(Iou(Cols(0, 4), Cols(2, 6)) == 1.0 / 3.0);
  CHECK(Iou(BinaryMask(1, 6), BinaryMask(1, 6)) == 1.0);
  CHECK(Iou(Cols(0, 1), BinaryMask(1, 6)) == 0.0);
  CHECK_THROWS_AS(Iou(Cols(0, 1), BinaryMask(2, 6)), Error);
}

TEST_CASE("cumulative buckets") {
  const std::vector<SampleResult> s = {
      {"a", 1.0, 0.05}, {"b", 0.5, 0.10}, {"c", 0.0, 0.31}, {"d", 0.2, 0.60}};
  const ReportRow r = MakeRow("x", s, DefaultThresholds());
  REQUIRE(r.buckets.size() == 6);
  CHECK(r.buckets[0].tau == 0.50);
  CHECK(r.buckets[0].n == 3);
  CHECK(*r.buckets[0].miou == doctest::Approx(0.5));
  CHECK(r.buckets[1].n == 3);  // <= 0.40
  CHECK(r.buckets[2].n == 2);  // <= 0.30
  CHECK(*r.buckets[2].miou == doctest::Approx(0.75));
  CHECK(r.buckets[4].n == 2);  // <= 0.10 includes the boundary
  CHECK(r.buckets[5].n == 1);
  CHECK(r.Bucket(0.05) == 1.0);
  CHECK(r.overall_n == 4);
  CHECK(r.overall_miou == doctest::Approx(0.425));

  const ReportRow empty = MakeRow("y", {{"z", 1.0, 0.9}}, DefaultThresholds());
  CHECK_FALSE(empty.buckets[0].miou.has_value());
  CHECK_THROWS_AS(empty.Bucket(0.5), Error);
  CHECK_THROWS_AS(MakeRow("z", {}, DefaultThresholds()), Error);
  CHECK_THROWS_AS(MakeRow("z", s, {0.1, 0.2}), Error);
}

TEST_CASE("bucketed report from mask pairs") {
  const EvalReport r = BucketedReport(
      {{Cols(0, 4), Cols(2, 6), 0.2}, {Cols(0, 3), Cols(0, 3), 0.45}}, {0.5, 0.3});
  REQUIRE(r.rows.size() == 1);
  CHECK(r.rows[0].Bucket(0.5) == doctest::Approx((1.0 / 3 + 1.0) / 2));
  CHECK(r.rows[0].Bucket(0.3) == doctest::Approx(1.0 / 3));
}

TEST_CASE("report json round trip and text") {
  EvalReport r;
  r.thresholds = DefaultThresholds();
  r.rows.push_back(MakeRow("modal", {{"00000", 0.7, 0.3}, {"00001", 0.9, 0.1}}, r.thresholds));
  r.rows.push_back(MakeRow("full", {{"00000", 0.8, 0.3}, {"00001", 0.95, 0.1}}, r.thresholds));
  r.config = {{"w", 0.75}};
  const nlohmann::json j = ReportToJson(r);
  CHECK(j["schema_version"] == kReportSchemaVersion);
  CHECK(j["rows"][0]["buckets"][5]["miou"].is_null());
  const EvalReport back = ReportFromJson(j);
  CHECK(ReportToJson(back) == j);
  CHECK(back.Row("full").Bucket(0.5) == doctest::Approx(0.875));
  CHECK_THROWS_AS(back.Row("missing"), Error);
  const std::string text = ReportToText(r);
  CHECK(text.find("modal") != std::string::npos);
  CHECK(text.find("<= 50%") != std::string::npos);

  nlohmann::json bad = j;
  bad["schema_version"] = 99;
  CHECK_THROWS_AS(ReportFromJson(bad), Error);
  bad = j;
  bad["rows"][0].erase("buckets");
  CHECK_THROWS_AS(ReportFromJson(bad), Error);

  const fs::path dir = fs::temp_directory_path() / ("amodal_report_" + std::to_string(::getpid()));
  WriteReport(dir.string(), r);
  CHECK(ReportToJson(ReadReport((dir / "report.json").string())) == j);
  CHECK(fs::exists(dir / "report.txt"));
  fs::remove_all(dir);
}

TEST_CASE("variant presets and names") {
  CHECK(VariantPreset("full").size() == 1);
  const std::vector<Variant> comp = VariantPreset("components");
  REQUIRE(comp.size() == 4);
  CHECK(comp[1].label == "no_leakage");
  CHECK(comp[1].combine == CombineMode::kRepaint);
  CHECK(comp[2].background == BackgroundKind::kWhite);
  CHECK(comp[3].mask == MaskKind::kFull);
  const std::vector<Variant> sweep = VariantPreset("s_sweep");
  REQUIRE(sweep.size() == SGrid().size());
  CHECK(sweep.back().s == 0.9);
  CHECK(VariantPreset("criteria").size() == comp.size() + sweep.size());
  CHECK(VariantPreset("mask_background").size() == 5);
  CHECK_THROWS_AS(VariantPreset("bogus"), Error);
  for (MaskKind k : {MaskKind::kHull, MaskKind::kRectangle, MaskKind::kDepth, MaskKind::kFull}) {
    CHECK(MaskKindFromName(MaskKindName(k)) == k);
  }
  for (CombineMode c : {CombineMode::kLeakage, CombineMode::kRepaint, CombineMode::kNone}) {
    CHECK(CombineFromName(CombineName(c)) == c);
  }
  for (BackgroundKind b : {BackgroundKind::kHistogram, BackgroundKind::kWhite}) {
    CHECK(BackgroundFromName(BackgroundName(b)) == b);
  }
}

TEST_CASE("inpainting areas of a generated scene") {
  SceneConfig cfg;
  Rng rng(8);
  const Scene s = GenerateEvalScene(cfg, {0.3, 0.5}, rng);
  const BinaryMask& v = s.objects[s.target].visible;
  const BinaryMask hull = InpaintingArea(s, MaskKind::kHull, 10.0);
  const BinaryMask rect = InpaintingArea(s, MaskKind::kRectangle, 10.0);
  const BinaryMask depth = InpaintingArea(s, MaskKind::kDepth, 10.0);
  CHECK(v.IsSubsetOf(hull));
  CHECK(hull.IsSubsetOf(rect));
  CHECK(v.IsSubsetOf(depth));
  CHECK(InpaintingArea(s, MaskKind::kFull, 10.0).Count() == v.size());
}

}  // namespace
}  // namespace amodal
