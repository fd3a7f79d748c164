// amodal: data generation, training, inference and evaluation front end.
//
// Every subcommand resolves its configuration as defaults <- --config file
// <- --set overrides <- dedicated flags, and writes the resolved document
// next to its outputs. Errors print "error[<category>]: message" on stderr.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "amodal/config.h"
#include "amodal/denoiser.h"
#include "amodal/error.h"
#include "amodal/eval.h"
#include "amodal/png_io.h"
#include "amodal/scenegen.h"
#include "amodal/train_masks.h"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace amodal;

namespace {

enum ExitCode {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,
  // 10 + ErrorKind for library errors
};

struct Common {
  std::string config_file;
  std::vector<std::string> sets;
  bool print_config = false;
  json flags = json::object();  // dedicated flags, applied last
};

// "a.b.c=value"; value is parsed as JSON and falls back to a string.
json SetToPatch(const std::string& spec) {
  const size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    Fail(ErrorKind::kInvalidArgument, "--set expects key.path=value, got '" + spec + "'");
  }
  const std::string path = spec.substr(0, eq);
  const std::string raw = spec.substr(eq + 1);
  json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = raw;
  json patch = json::object();
  json* cur = &patch;
  size_t start = 0;
  while (true) {
    const size_t dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (key.empty()) Fail(ErrorKind::kInvalidArgument, "bad key path '" + path + "'");
    if (dot == std::string::npos) {
      (*cur)[key] = value;
      break;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
  return patch;
}

void AddCommon(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_file, "JSON config file")
      ->check(CLI::ExistingFile);
  app->add_option("--set", c.sets, "override, e.g. --set sampler.w=7.5");
  app->add_flag("--print-config", c.print_config,
                "print the resolved config and exit");
}

// Registers a flag that writes into `key` of the config when given.
template <typename T>
void AddKey(CLI::App* app, Common& c, const std::string& flag,
            const std::string& key, const std::string& help) {
  app->add_option_function<T>(
      flag,
      [&c, key](const T& v) {
        json* cur = &c.flags;
        size_t start = 0;
        while (true) {
          const size_t dot = key.find('.', start);
          const std::string k = key.substr(start, dot - start);
          if (dot == std::string::npos) {
            (*cur)[k] = v;
            break;
          }
          cur = &(*cur)[k];
          start = dot + 1;
        }
      },
      help + " (" + key + ")");
}

json Resolve(const Common& c) {
  json cfg = DefaultRunConfig();
  if (!c.config_file.empty()) cfg = MergeConfig(cfg, LoadConfigFile(c.config_file));
  for (const std::string& s : c.sets) cfg = MergeConfig(cfg, SetToPatch(s));
  if (!c.flags.empty()) cfg = MergeConfig(cfg, c.flags);
  return cfg;
}

std::string NeedPath(const json& cfg, const char* key, const char* flag) {
  const std::string p = cfg.at("paths").at(key).get<std::string>();
  if (p.empty()) {
    Fail(ErrorKind::kInvalidArgument, std::string("missing ") + flag);
  }
  return p;
}

uint64_t RootSeed(const json& cfg) { return cfg.at("seed").get<uint64_t>(); }
int Jobs(const json& cfg) { return std::max(1, cfg.at("jobs").get<int>()); }

double Seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

int CmdGenData(const json& cfg) {
  const std::string out = NeedPath(cfg, "out", "--out");
  fs::create_directories(out);
  WriteConfigFile((fs::path(out) / "resolved_config.json").string(), cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const size_t n_train = cfg.at("data").at("train_images").get<size_t>();
  const size_t n_eval = cfg.at("data").at("eval_scenes").get<size_t>();
  if (n_train > 0) {
    GenerateTrainingCorpus(out, n_train, RootSeed(cfg), TrainSceneFromConfig(cfg),
                           Jobs(cfg));
  }
  if (n_eval > 0) {
    GenerateBenchmark(out, n_eval, RootSeed(cfg), EvalSceneFromConfig(cfg),
                      Jobs(cfg));
  }
  std::printf("wrote %zu training images and %zu scenes to %s (%.1fs)\n",
              n_train, n_eval, out.c_str(), Seconds(t0));
  return kExitOk;
}

int CmdTrain(const json& cfg) {
  const std::string data = NeedPath(cfg, "data", "--data");
  const std::string ckpt = NeedPath(cfg, "checkpoint", "--out");
  const std::string resume = cfg.at("paths").at("resume").get<std::string>();
  const NoiseSchedule sched = ScheduleFromConfig(cfg);
  const UNetArch arch = ArchFromConfig(cfg);
  TrainConfig tc = TrainFromConfig(cfg);
  const TrainMaskConfig masks = TrainMasksFromConfig(cfg);
  const int every = std::max(1, cfg.at("train").at("checkpoint_every").get<int>());

  const Corpus corpus = ReadTrainingCorpus(data);
  Require(!corpus.images.empty(), ErrorKind::kInvalidArgument, "empty corpus");
  Require(corpus.images[0].height() == arch.image_size, ErrorKind::kShapeMismatch,
          "corpus resolution differs from model.image_size");

  Denoiser model(arch, sched);
  OptimizerState state;
  if (!resume.empty()) {
    LoadedCheckpoint lc = LoadCheckpoint(resume, sched);
    Require(lc.model.arch() == arch, ErrorKind::kFingerprintMismatch,
            "resume checkpoint architecture differs from the config");
    Require(lc.state.has_value(), ErrorKind::kFormat,
            "resume checkpoint has no optimizer state");
    model = std::move(lc.model);
    state = std::move(*lc.state);
  } else {
    model.InitParams(tc.init_seed);
  }

  const fs::path ckpt_dir = fs::path(ckpt).parent_path();
  if (!ckpt_dir.empty()) fs::create_directories(ckpt_dir);
  const fs::path stem = fs::path(ckpt).replace_extension("");
  WriteConfigFile(stem.string() + ".config.json", cfg);
  const std::string loss_path = stem.string() + ".loss.csv";
  std::ofstream loss_csv(loss_path, state.step > 0 ? std::ios::app : std::ios::trunc);
  if (!loss_csv) Fail(ErrorKind::kIo, "cannot write " + loss_path);
  if (state.step == 0) loss_csv << "step,loss\n";

  const size_t n = corpus.images.size();
  const int64_t steps_per_epoch = static_cast<int64_t>((n + tc.batch_size - 1) / tc.batch_size);
  const int64_t total = tc.max_steps > 0 ? tc.max_steps : tc.epochs * steps_per_epoch;
  const uint64_t train_seed = DeriveSeed(RootSeed(cfg), "train");
  const ExampleSource source = CorpusSource(corpus, masks);
  std::fprintf(stderr, "train: %zu images, %zu params, %lld steps (from %lld)\n",
               n, model.params().size(), static_cast<long long>(total),
               static_cast<long long>(state.step));
  const auto t0 = std::chrono::steady_clock::now();
  while (state.step < total) {
    TrainConfig chunk = tc;
    chunk.max_steps = static_cast<int>(std::min<int64_t>(total, state.step + every));
    const TrainStats st = Train(model, state, n, source, chunk, sched, train_seed);
    double mean = 0.0;
    for (size_t i = 0; i < st.loss.size(); ++i) {
      loss_csv << st.first_step + static_cast<int64_t>(i) << ',' << st.loss[i] << '\n';
      mean += st.loss[i];
    }
    loss_csv.flush();
    SaveCheckpoint(ckpt, model, &state);
    std::fprintf(stderr, "step %lld/%lld  mean loss %.5f  %.0fs\n",
                 static_cast<long long>(state.step), static_cast<long long>(total),
                 st.loss.empty() ? 0.0 : mean / st.loss.size(), Seconds(t0));
  }
  if (total == 0 || state.step == total) SaveCheckpoint(ckpt, model, &state);
  std::printf("checkpoint %s (step %lld)\n", ckpt.c_str(),
              static_cast<long long>(state.step));
  return kExitOk;
}

Denoiser LoadModel(const json& cfg, NoiseSchedule& sched) {
  const std::string ckpt = NeedPath(cfg, "checkpoint", "--checkpoint");
  // Fails with fingerprint_mismatch unless the configured schedule is the
  // one the checkpoint was trained with.
  sched = ScheduleFromConfig(cfg);
  LoadedCheckpoint lc = LoadCheckpoint(ckpt, sched);
  return std::move(lc.model);
}

struct InferOpts {
  std::string mask = "hull";
  std::string background = "histogram";
  size_t index = 0;
  bool trace = false;
};

int CmdInfer(const json& cfg, const InferOpts& o) {
  const std::string scene_dir = NeedPath(cfg, "scene", "--scene");
  const std::string out = NeedPath(cfg, "out", "--out");
  NoiseSchedule sched;
  const Denoiser model = LoadModel(cfg, sched);
  PipelineConfig pc = PipelineFromConfig(cfg);
  pc.sampler.keep_trace = o.trace;
  const Scene scene = ReadScene(scene_dir);
  Variant v;
  v.label = "infer";
  v.mask = MaskKindFromName(o.mask);
  v.background = BackgroundFromName(o.background);
  v.s = pc.sampler.s;
  v.combine = pc.sampler.combine;
  const uint64_t seed = SceneSeed(RootSeed(cfg), o.index);
  const PipelineOutput r = RunPipeline(scene, v, pc, model, sched, seed);

  fs::create_directories(out);
  const fs::path d(out);
  WriteConfigFile((d / "resolved_config.json").string(), cfg);
  WritePngRgb((d / "condition.png").string(), r.cond.x);
  WritePngRgb((d / "x0.png").string(), r.diffusion.x_hat);
  WritePngMask((d / "inpaint_area.png").string(), r.m);
  WritePngMask((d / "amodal.png").string(), r.amodal);
  const SceneObject& target = scene.objects[scene.target];
  const BinaryMask& vis = target.visible;
  WritePngMask((d / "visible.png").string(), vis);
  if (!vis.Empty()) {
    WritePngMask((d / "area_rectangle.png").string(), InpaintingArea(scene, MaskKind::kRectangle, pc.depth_r));
    WritePngMask((d / "area_depth.png").string(), InpaintingArea(scene, MaskKind::kDepth, pc.depth_r));
  }
  for (size_t k = 0; k < r.diffusion.trace.size(); ++k) {
    char name[32];
    std::snprintf(name, sizeof(name), "trace_%03zu.png", k);
    WritePngRgb((d / name).string(), r.diffusion.trace[k]);
  }
  const double iou = Iou(r.amodal, target.amodal);
  const double modal = Iou(vis, target.amodal);
  json summary = {{"scene", scene_dir},
                  {"occlusion_rate", target.occlusion_rate},
                  {"iou", iou},
                  {"modal_iou", modal},
                  {"seeds", r.seeds.count},
                  {"scene_seed", seed}};
  WriteConfigFile((d / "summary.json").string(), summary);
  std::printf("occlusion %.3f  IoU %.4f  (modal %.4f)\n", target.occlusion_rate,
              iou, modal);
  return kExitOk;
}

int CmdEvaluate(const json& cfg, const std::string& preset, bool coverage) {
  const std::string data = NeedPath(cfg, "data", "--data");
  const std::string out = NeedPath(cfg, "out", "--out");
  NoiseSchedule sched;
  const Denoiser model = LoadModel(cfg, sched);
  const PipelineConfig pc = PipelineFromConfig(cfg);
  const std::vector<double> thresholds = ThresholdsFromConfig(cfg);
  const size_t limit = cfg.at("eval").at("limit").get<size_t>();
  const Benchmark bench = LoadBenchmark(data, limit);
  std::vector<Variant> variants = VariantPreset(preset);
  // The configured sampler strength applies to the s-independent variants.
  for (Variant& v : variants) {
    if (v.label.rfind("s=", 0) != 0) v.s = pc.sampler.s;
  }
  fs::create_directories(out);
  WriteConfigFile((fs::path(out) / "resolved_config.json").string(), cfg);
  const auto t0 = std::chrono::steady_clock::now();
  std::fprintf(stderr, "%s: %zu scenes, %zu variants, %d jobs\n", preset.c_str(),
               bench.scenes.size(), variants.size(), Jobs(cfg));
  EvalReport report = RunAblation(bench, variants, pc, model, sched, RootSeed(cfg),
                                  Jobs(cfg), thresholds, /*verbose=*/true);
  report.config["resolved"] = cfg;
  report.config["preset"] = preset;
  WriteReport(out, report);
  std::fputs(ReportToText(report).c_str(), stdout);
  if (coverage) {
    const EvalReport cov = MaskCoverageReport(bench, thresholds, pc.depth_r);
    WriteReport((fs::path(out) / "mask_coverage").string(), cov);
    std::fputs(ReportToText(cov).c_str(), stdout);
  }
  std::fprintf(stderr, "done in %.1fs\n", Seconds(t0));
  return kExitOk;
}

int ErrorExit(ErrorKind kind, const std::string& msg) {
  std::fprintf(stderr, "error[%s]: %s\n", std::string(ErrorKindName(kind)).c_str(),
               msg.c_str());
  return 10 + static_cast<int>(kind);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Amodal segmentation by leakage-conditioned diffusion inpainting"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "expand all help");

  // Flags shared by every subcommand.
  auto common_keys = [](CLI::App* sub, Common& c) {
    AddCommon(sub, c);
    AddKey<uint64_t>(sub, c, "--seed", "seed", "root seed");
    AddKey<int>(sub, c, "-j,--jobs", "jobs", "worker threads");
  };

  Common gen_c;
  CLI::App* gen = app.add_subcommand("gen-data", "generate training corpus and benchmark");
  common_keys(gen, gen_c);
  AddKey<std::string>(gen, gen_c, "-o,--out", "paths.out", "output root");
  AddKey<size_t>(gen, gen_c, "--train-images", "data.train_images", "corpus size");
  AddKey<size_t>(gen, gen_c, "--scenes", "data.eval_scenes", "benchmark size");

  Common train_c;
  CLI::App* train = app.add_subcommand("train", "train the masked denoiser");
  common_keys(train, train_c);
  AddKey<std::string>(train, train_c, "-d,--data", "paths.data", "dataset root");
  AddKey<std::string>(train, train_c, "-o,--out", "paths.checkpoint", "checkpoint file");
  AddKey<std::string>(train, train_c, "--resume", "paths.resume", "checkpoint to resume");
  AddKey<int>(train, train_c, "--steps", "train.max_steps", "optimizer steps");
  AddKey<int>(train, train_c, "--epochs", "train.epochs", "epochs when --steps is 0");
  AddKey<int>(train, train_c, "--width", "model.base_width", "U-Net base width");
  AddKey<double>(train, train_c, "--lr", "train.lr", "learning rate");

  Common infer_c;
  InferOpts infer_o;
  CLI::App* infer = app.add_subcommand("infer", "amodal mask for one scene");
  common_keys(infer, infer_c);
  AddKey<std::string>(infer, infer_c, "--checkpoint", "paths.checkpoint", "model");
  AddKey<std::string>(infer, infer_c, "--scene", "paths.scene", "scene directory");
  AddKey<std::string>(infer, infer_c, "-o,--out", "paths.out", "output directory");
  AddKey<double>(infer, infer_c, "-s,--strength", "sampler.s", "noise strength s");
  AddKey<double>(infer, infer_c, "-w,--guidance", "sampler.w", "guidance weight");
  AddKey<int>(infer, infer_c, "--steps", "sampler.steps", "sampling steps");
  AddKey<std::string>(infer, infer_c, "--combine", "sampler.combine",
                      "leakage | repaint | none");
  infer->add_option("--mask", infer_o.mask, "hull | rectangle | depth | full")
      ->check(CLI::IsMember({"hull", "rectangle", "depth", "full"}));
  infer->add_option("--background", infer_o.background, "histogram | white")
      ->check(CLI::IsMember({"histogram", "white"}));
  infer->add_option("--index", infer_o.index, "scene index for the seed stream");
  infer->add_flag("--trace", infer_o.trace, "write x_hat after every step");

  Common eval_c;
  std::string eval_preset = "full";
  CLI::App* ev = app.add_subcommand("eval", "benchmark mIoU per occlusion bucket");
  common_keys(ev, eval_c);
  AddKey<std::string>(ev, eval_c, "--checkpoint", "paths.checkpoint", "model");
  AddKey<std::string>(ev, eval_c, "-d,--data", "paths.data", "dataset root");
  AddKey<std::string>(ev, eval_c, "-o,--out", "paths.out", "report directory");
  AddKey<size_t>(ev, eval_c, "--limit", "eval.limit", "first N scenes only");
  AddKey<double>(ev, eval_c, "-s,--strength", "sampler.s", "noise strength s");
  AddKey<double>(ev, eval_c, "-w,--guidance", "sampler.w", "guidance weight");
  AddKey<double>(ev, eval_c, "--tol", "segmenter.tol", "region-growing tolerance");
  ev->add_option("--preset", eval_preset, "variant preset");

  Common abl_c;
  std::string abl_preset;
  CLI::App* abl = app.add_subcommand("ablate", "run an ablation preset");
  common_keys(abl, abl_c);
  AddKey<std::string>(abl, abl_c, "--checkpoint", "paths.checkpoint", "model");
  AddKey<std::string>(abl, abl_c, "-d,--data", "paths.data", "dataset root");
  AddKey<std::string>(abl, abl_c, "-o,--out", "paths.out", "report directory");
  AddKey<size_t>(abl, abl_c, "--limit", "eval.limit", "first N scenes only");
  AddKey<double>(abl, abl_c, "-w,--guidance", "sampler.w", "guidance weight");
  AddKey<double>(abl, abl_c, "--tol", "segmenter.tol", "region-growing tolerance");
  AddKey<std::string>(abl, abl_c, "--preset", "eval.preset",
                      "components | s_sweep | mask_background | criteria | all");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    auto run = [](const Common& c, auto&& fn) {
      const json cfg = Resolve(c);
      if (c.print_config) {
        std::cout << cfg.dump(2) << "\n";
        return static_cast<int>(kExitOk);
      }
      return fn(cfg);
    };
    if (*gen) return run(gen_c, CmdGenData);
    if (*train) return run(train_c, CmdTrain);
    if (*infer) return run(infer_c, [&](const json& cfg) { return CmdInfer(cfg, infer_o); });
    if (*ev) {
      return run(eval_c, [&](const json& cfg) { return CmdEvaluate(cfg, eval_preset, true); });
    }
    if (*abl) {
      return run(abl_c, [&](const json& cfg) {
        return CmdEvaluate(cfg, cfg.at("eval").at("preset").get<std::string>(), false);
      });
    }
  } catch (const Error& e) {
    return ErrorExit(e.kind(), e.what());
  } catch (const json::exception& e) {
    return ErrorExit(ErrorKind::kFormat, e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return ErrorExit(ErrorKind::kIo, e.what());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return kExitInternal;
  }
  return kExitInternal;
}
