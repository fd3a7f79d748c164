#include "amodal/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "amodal/maskgen.h"
#include "amodal/parallel.h"

namespace amodal {

namespace fs = std::filesystem;
using nlohmann::json;

double Iou(const BinaryMask& pred, const BinaryMask& gt) {
  RequireSameShape(pred, gt, "Iou");
  size_t inter = 0, uni = 0;
  const auto a = pred.data();
  const auto b = gt.data();
  for (size_t i = 0; i < a.size(); ++i) {
    inter += a[i] & b[i];
    uni += a[i] | b[i];
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<double> DefaultThresholds() {
  return {0.50, 0.40, 0.30, 0.20, 0.10, 0.05};
}

double ReportRow::Bucket(double tau) const {
  for (const BucketStat& b : buckets) {
    if (std::abs(b.tau - tau) < 1e-12) {
      if (!b.miou) Fail(ErrorKind::kInvalidArgument, "bucket is empty");
      return *b.miou;
    }
  }
  Fail(ErrorKind::kInvalidArgument, "no bucket with that threshold");
}

const ReportRow& EvalReport::Row(const std::string& variant) const {
  for (const ReportRow& r : rows) {
    if (r.variant == variant) return r;
  }
  Fail(ErrorKind::kInvalidArgument, "report has no row '" + variant + "'");
}

ReportRow MakeRow(const std::string& variant, std::vector<SampleResult> samples,
                  const std::vector<double>& thresholds) {
  Require(!samples.empty(), ErrorKind::kInvalidArgument,
          "cannot report on empty results");
  for (size_t i = 1; i < thresholds.size(); ++i) {
    Require(thresholds[i] < thresholds[i - 1], ErrorKind::kInvalidArgument,
            "thresholds must be sorted descending");
  }
  ReportRow row;
  row.variant = variant;
  double total = 0.0;
  for (const SampleResult& s : samples) total += s.iou;
  row.overall_n = samples.size();
  row.overall_miou = total / static_cast<double>(samples.size());
  for (double tau : thresholds) {
    BucketStat b;
    b.tau = tau;
    double sum = 0.0;
    for (const SampleResult& s : samples) {
      if (s.occlusion_rate <= tau) {
        sum += s.iou;
        ++b.n;
      }
    }
    if (b.n > 0) b.miou = sum / static_cast<double>(b.n);
    row.buckets.push_back(b);
  }
  row.samples = std::move(samples);
  return row;
}

EvalReport BucketedReport(const std::vector<MaskPair>& results,
                          const std::vector<double>& thresholds,
                          const std::string& variant) {
  std::vector<SampleResult> samples;
  for (size_t i = 0; i < results.size(); ++i) {
    samples.push_back({std::to_string(i), Iou(results[i].pred, results[i].gt),
                       results[i].occlusion_rate});
  }
  EvalReport r;
  r.thresholds = thresholds;
  r.rows.push_back(MakeRow(variant, std::move(samples), thresholds));
  return r;
}

json ReportToJson(const EvalReport& report, bool with_samples) {
  json rows = json::array();
  for (const ReportRow& r : report.rows) {
    json buckets = json::array();
    for (const BucketStat& b : r.buckets) {
      buckets.push_back({{"tau", b.tau},
                         {"miou", b.miou ? json(*b.miou) : json(nullptr)},
                         {"n", b.n}});
    }
    json row = {{"variant", r.variant},
                {"buckets", buckets},
                {"overall", {{"miou", r.overall_miou}, {"n", r.overall_n}}}};
    if (with_samples) {
      json samples = json::array();
      for (const SampleResult& s : r.samples) {
        samples.push_back(
            {{"id", s.id}, {"iou", s.iou}, {"occlusion_rate", s.occlusion_rate}});
      }
      row["samples"] = samples;
    }
    rows.push_back(row);
  }
  return {{"schema_version", kReportSchemaVersion},
          {"kind", "amodal-eval-report"},
          {"thresholds", report.thresholds},
          {"rows", rows},
          {"config", report.config}};
}

EvalReport ReportFromJson(const json& j) {
  try {
    if (j.at("schema_version").get<int>() != kReportSchemaVersion) {
      Fail(ErrorKind::kFormat, "unsupported report schema version");
    }
    EvalReport r;
    r.thresholds = j.at("thresholds").get<std::vector<double>>();
    r.config = j.at("config");
    for (const json& row : j.at("rows")) {
      ReportRow out;
      out.variant = row.at("variant").get<std::string>();
      for (const json& b : row.at("buckets")) {
        BucketStat s;
        s.tau = b.at("tau").get<double>();
        if (!b.at("miou").is_null()) s.miou = b.at("miou").get<double>();
        s.n = b.at("n").get<size_t>();
        out.buckets.push_back(s);
      }
      out.overall_miou = row.at("overall").at("miou").get<double>();
      out.overall_n = row.at("overall").at("n").get<size_t>();
      if (row.contains("samples")) {
        for (const json& s : row.at("samples")) {
          out.samples.push_back({s.at("id").get<std::string>(),
                                 s.at("iou").get<double>(),
                                 s.at("occlusion_rate").get<double>()});
        }
      }
      r.rows.push_back(std::move(out));
    }
    return r;
  } catch (const json::exception& e) {
    Fail(ErrorKind::kFormat, std::string("malformed report: ") + e.what());
  }
}

std::string ReportToText(const EvalReport& report) {
  size_t label_w = 8;
  for (const ReportRow& r : report.rows) label_w = std::max(label_w, r.variant.size());
  std::ostringstream os;
  char buf[64];
  os << std::string(label_w, ' ');
  for (double tau : report.thresholds) {
    std::snprintf(buf, sizeof(buf), "  <=%3.0f%%", tau * 100.0);
    os << buf;
  }
  os << "  overall\n";
  for (const ReportRow& r : report.rows) {
    os << r.variant << std::string(label_w - r.variant.size(), ' ');
    for (const BucketStat& b : r.buckets) {
      if (b.miou) {
        std::snprintf(buf, sizeof(buf), "  %6.1f", *b.miou * 100.0);
      } else {
        std::snprintf(buf, sizeof(buf), "  %6s", "-");
      }
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  %7.1f\n", r.overall_miou * 100.0);
    os << buf;
  }
  if (!report.rows.empty()) {
    os << std::string(label_w, ' ');
    for (const BucketStat& b : report.rows.front().buckets) {
      std::snprintf(buf, sizeof(buf), "  n=%-4zu", b.n);
      os << buf;
    }
    std::snprintf(buf, sizeof(buf), "  n=%zu\n", report.rows.front().overall_n);
    os << buf;
  }
  return os.str();
}

void WriteReport(const std::string& dir, const EvalReport& report) {
  fs::create_directories(dir);
  {
    std::ofstream os(fs::path(dir) / "report.json", std::ios::trunc);
    if (!os) Fail(ErrorKind::kIo, "cannot write report in " + dir);
    os << ReportToJson(report).dump(2) << "\n";
  }
  std::ofstream os(fs::path(dir) / "report.txt", std::ios::trunc);
  if (!os) Fail(ErrorKind::kIo, "cannot write report in " + dir);
  os << ReportToText(report);
}

EvalReport ReadReport(const std::string& json_path) {
  std::ifstream is(json_path);
  if (!is) Fail(ErrorKind::kIo, "cannot open " + json_path);
  try {
    return ReportFromJson(json::parse(is));
  } catch (const json::parse_error& e) {
    Fail(ErrorKind::kFormat, json_path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

const char* MaskKindName(MaskKind kind) {
  switch (kind) {
    case MaskKind::kHull: return "hull";
    case MaskKind::kRectangle: return "rectangle";
    case MaskKind::kDepth: return "depth";
    case MaskKind::kFull: return "full_frame";
  }
  return "?";
}

MaskKind MaskKindFromName(const std::string& name) {
  for (MaskKind k : {MaskKind::kHull, MaskKind::kRectangle, MaskKind::kDepth,
                     MaskKind::kFull}) {
    if (name == MaskKindName(k)) return k;
  }
  Fail(ErrorKind::kInvalidArgument, "unknown mask kind '" + name + "'");
}

const char* BackgroundName(BackgroundKind kind) {
  return kind == BackgroundKind::kWhite ? "white" : "histogram";
}

BackgroundKind BackgroundFromName(const std::string& name) {
  if (name == "white") return BackgroundKind::kWhite;
  if (name == "histogram") return BackgroundKind::kHistogram;
  Fail(ErrorKind::kInvalidArgument, "unknown background '" + name + "'");
}

const char* CombineName(CombineMode mode) {
  switch (mode) {
    case CombineMode::kLeakage: return "leakage";
    case CombineMode::kRepaint: return "repaint";
    case CombineMode::kNone: return "none";
  }
  return "?";
}

CombineMode CombineFromName(const std::string& name) {
  for (CombineMode m :
       {CombineMode::kLeakage, CombineMode::kRepaint, CombineMode::kNone}) {
    if (name == CombineName(m)) return m;
  }
  Fail(ErrorKind::kInvalidArgument, "unknown combine mode '" + name + "'");
}

BinaryMask InpaintingArea(const Scene& scene, MaskKind kind, double depth_r) {
  const SceneObject& target = scene.objects.at(scene.target);
  const BinaryMask& v = target.visible;
  switch (kind) {
    case MaskKind::kHull: return HullOf(v);
    case MaskKind::kRectangle: return RectangleMask(v);
    case MaskKind::kFull: return BinaryMask(v.height(), v.width(), true);
    case MaskKind::kDepth: {
      std::vector<RankedMask> others;
      for (size_t k = 0; k < scene.objects.size(); ++k) {
        if (static_cast<int>(k) == scene.target) continue;
        others.push_back({scene.objects[k].visible, scene.objects[k].depth_rank});
      }
      return DepthMask(v, others, target.depth_rank, depth_r);
    }
  }
  Fail(ErrorKind::kUnreachable, "unhandled mask kind");
}

PipelineOutput RunPipeline(const Scene& scene, const Variant& variant,
                           const PipelineConfig& cfg, const Denoiser& model,
                           const NoiseSchedule& sched, uint64_t scene_seed,
                           Workspace* ws) {
  const SceneObject& target = scene.objects.at(scene.target);
  PipelineOutput out;
  out.m = InpaintingArea(scene, variant.mask, cfg.depth_r);
  Rng cond_rng(DeriveSeed(scene_seed, "condition"));
  out.cond = BuildCondition(scene.image, target.visible, variant.s, cond_rng,
                            variant.background);
  SamplerConfig sc = cfg.sampler;
  sc.s = variant.s;
  sc.combine = variant.combine;
  sc.rng_seed = DeriveSeed(scene_seed, "sampler");
  out.diffusion = SoftInpaint(out.cond.x, out.m, sc, model, sched, ws);
  Rng seed_rng(DeriveSeed(scene_seed, "seeds"));
  out.seeds = SampleSeedPoints(target.visible, cfg.n_seeds, seed_rng);
  out.amodal = ExtractAmodalMask(out.diffusion.x_hat, out.seeds, cfg.tol, cfg.grow);
  return out;
}

Benchmark LoadBenchmark(const std::string& root, size_t limit) {
  std::vector<std::string> dirs = ListScenes(root);
  if (limit > 0 && dirs.size() > limit) dirs.resize(limit);
  Benchmark b;
  for (const std::string& d : dirs) {
    b.ids.push_back(fs::path(d).filename().string());
    b.scenes.push_back(ReadScene(d));
  }
  return b;
}

uint64_t SceneSeed(uint64_t root_seed, size_t index) {
  return DeriveSeed(root_seed, "infer", index);
}

namespace {

std::string VariantKey(const Variant& v) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), "%s|%s|%.6f|%s", MaskKindName(v.mask),
                BackgroundName(v.background), v.s, CombineName(v.combine));
  return buf;
}

json VariantJson(const Variant& v) {
  return {{"label", v.label},
          {"mask", MaskKindName(v.mask)},
          {"background", BackgroundName(v.background)},
          {"s", v.s},
          {"combine", CombineName(v.combine)}};
}

std::vector<SampleResult> ModalSamples(const Benchmark& bench) {
  std::vector<SampleResult> out;
  for (size_t i = 0; i < bench.scenes.size(); ++i) {
    const SceneObject& t = bench.scenes[i].objects.at(bench.scenes[i].target);
    out.push_back({bench.ids[i], Iou(t.visible, t.amodal), t.occlusion_rate});
  }
  return out;
}

// Baseline that predicts the raw inpainting area.
std::vector<SampleResult> AreaSamples(const Benchmark& bench, MaskKind kind,
                                      double depth_r) {
  std::vector<SampleResult> out;
  for (size_t i = 0; i < bench.scenes.size(); ++i) {
    const Scene& s = bench.scenes[i];
    const SceneObject& t = s.objects.at(s.target);
    out.push_back({bench.ids[i], Iou(InpaintingArea(s, kind, depth_r), t.amodal),
                   t.occlusion_rate});
  }
  return out;
}

}  // namespace

EvalReport RunAblation(const Benchmark& bench, const std::vector<Variant>& variants,
                       const PipelineConfig& cfg, const Denoiser& model,
                       const NoiseSchedule& sched, uint64_t root_seed, int jobs,
                       const std::vector<double>& thresholds, bool verbose) {
  Require(!bench.scenes.empty(), ErrorKind::kInvalidArgument, "empty benchmark");
  EvalReport report;
  report.thresholds = thresholds;
  report.rows.push_back(MakeRow("modal", ModalSamples(bench), thresholds));
  report.rows.push_back(MakeRow("hull", AreaSamples(bench, MaskKind::kHull, cfg.depth_r),
                                thresholds));
  json vjson = json::array();
  std::map<std::string, std::vector<SampleResult>> done;
  for (const Variant& v : variants) {
    vjson.push_back(VariantJson(v));
    const std::string key = VariantKey(v);
    auto it = done.find(key);
    if (it == done.end()) {
      std::vector<SampleResult> samples(bench.scenes.size());
      ParallelFor(bench.scenes.size(), jobs, [&](size_t i) {
        Workspace ws(model);
        const Scene& scene = bench.scenes[i];
        const PipelineOutput out = RunPipeline(scene, v, cfg, model, sched,
                                               SceneSeed(root_seed, i), &ws);
        const SceneObject& t = scene.objects.at(scene.target);
        samples[i] = {bench.ids[i], Iou(out.amodal, t.amodal), t.occlusion_rate};
      });
      it = done.emplace(key, std::move(samples)).first;
    }
    report.rows.push_back(MakeRow(v.label, it->second, thresholds));
    if (verbose) {
      const ReportRow& r = report.rows.back();
      std::fprintf(stderr, "variant %-18s mIoU(<=50%%) %.4f overall %.4f\n",
                   r.variant.c_str(),
                   r.buckets.empty() || !r.buckets[0].miou ? -1.0 : *r.buckets[0].miou,
                   r.overall_miou);
    }
  }
  report.config["variants"] = vjson;
  report.config["root_seed"] = root_seed;
  report.config["n_seeds"] = cfg.n_seeds;
  report.config["tol"] = cfg.tol;
  report.config["grow"] = cfg.grow == GrowMode::kRunningMean ? "running_mean" : "fixed_mean";
  report.config["w"] = cfg.sampler.w;
  report.config["steps"] = cfg.sampler.steps;
  report.config["guidance"] = cfg.sampler.guidance == GuidanceTarget::kNoise ? "noise" : "sample";
  report.config["depth_r"] = cfg.depth_r;
  report.config["scenes"] = bench.scenes.size();
  return report;
}

EvalReport MaskCoverageReport(const Benchmark& bench,
                              const std::vector<double>& thresholds,
                              double depth_r) {
  Require(!bench.scenes.empty(), ErrorKind::kInvalidArgument, "empty benchmark");
  EvalReport report;
  report.thresholds = thresholds;
  report.rows.push_back(MakeRow("modal", ModalSamples(bench), thresholds));
  for (MaskKind kind : {MaskKind::kHull, MaskKind::kRectangle, MaskKind::kDepth}) {
    report.rows.push_back(MakeRow(std::string("area_") + MaskKindName(kind),
                                  AreaSamples(bench, kind, depth_r), thresholds));
  }
  report.config["depth_r"] = depth_r;
  report.config["scenes"] = bench.scenes.size();
  return report;
}

std::vector<double> SGrid() { return {0.1, 0.15, 0.3, 0.45, 0.6, 0.9}; }

std::vector<Variant> VariantPreset(const std::string& name) {
  const Variant full;
  auto with = [&](const std::string& label, auto&& edit) {
    Variant v = full;
    v.label = label;
    edit(v);
    return v;
  };
  std::vector<Variant> components = {
      full,
      with("no_leakage", [](Variant& v) { v.combine = CombineMode::kRepaint; }),
      with("white_background", [](Variant& v) { v.background = BackgroundKind::kWhite; }),
      with("no_mask", [](Variant& v) { v.mask = MaskKind::kFull; }),
  };
  std::vector<Variant> sweep;
  for (double s : SGrid()) {
    char label[32];
    std::snprintf(label, sizeof(label), "s=%.2f", s);
    sweep.push_back(with(label, [s](Variant& v) { v.s = s; }));
  }
  std::vector<Variant> mask_bg = {
      with("hull+histogram", [](Variant&) {}),
      with("rect+histogram", [](Variant& v) { v.mask = MaskKind::kRectangle; }),
      with("hull+white", [](Variant& v) { v.background = BackgroundKind::kWhite; }),
      with("rect+white", [](Variant& v) {
        v.mask = MaskKind::kRectangle;
        v.background = BackgroundKind::kWhite;
      }),
      with("depth+histogram", [](Variant& v) { v.mask = MaskKind::kDepth; }),
  };
  if (name == "full") return {full};
  if (name == "components") return components;
  if (name == "s_sweep") return sweep;
  if (name == "mask_background") return mask_bg;
  auto cat = [](std::vector<Variant> a, const std::vector<Variant>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  if (name == "criteria") return cat(components, sweep);
  if (name == "all") return cat(cat(components, sweep), mask_bg);
  Fail(ErrorKind::kInvalidArgument, "unknown variant preset '" + name + "'");
}

}  // namespace amodal
