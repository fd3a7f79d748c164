#include "amodal/config.h"

#include <fstream>

namespace amodal {

using nlohmann::json;

namespace {

json SceneJson(const SceneConfig& c) {
  return {{"min_objects", c.min_objects},
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

SceneConfig SceneFromJson(const json& j, int size) {
  SceneConfig c;
  c.size = size;
  c.min_objects = j.at("min_objects").get<int>();
  c.max_objects = j.at("max_objects").get<int>();
  c.shape_weights = j.at("shape_weights").get<std::array<double, kNumShapeKinds>>();
  c.gradient_prob = j.at("gradient_prob").get<double>();
  c.background_gradient_prob = j.at("background_gradient_prob").get<double>();
  c.min_radius = j.at("min_radius").get<double>();
  c.max_radius = j.at("max_radius").get<double>();
  c.min_color_distance = j.at("min_color_distance").get<double>();
  c.max_gradient_step = j.at("max_gradient_step").get<double>();
  c.max_retries = j.at("max_retries").get<int>();
  return c;
}

template <typename F>
auto Parse(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    Fail(ErrorKind::kInvalidArgument,
         std::string("config section '") + what + "': " + e.what());
  }
}

}  // namespace

json DefaultRunConfig() {
  const UNetArch arch;
  const TrainConfig train;
  const TrainMaskConfig masks;
  const SamplerConfig sampler;
  const PipelineConfig pipe;
  const TrainingConfig train_scene;
  const SceneConfig eval_scene;
  return {
      {"seed", 7},
      {"jobs", 1},
      {"paths",
       {{"data", ""}, {"checkpoint", ""}, {"out", ""}, {"scene", ""},
        {"resume", ""}}},
      {"data",
       {{"train_images", 5000},
        {"eval_scenes", 500},
        {"min_gap", train_scene.min_gap},
        {"train_scene", SceneJson(train_scene.scene)},
        {"eval_scene", SceneJson(eval_scene)}}},
      {"model",
       {{"base_width", arch.base_width},
        {"levels", arch.levels},
        {"time_dim", arch.time_dim},
        {"groups", arch.groups},
        {"image_size", arch.image_size}}},
      {"schedule", {{"T", 1000}, {"beta_start", 1e-4}, {"beta_end", 0.02}}},
      {"train",
       {{"epochs", train.epochs},
        {"batch_size", train.batch_size},
        {"max_steps", train.max_steps},
        {"lr", train.lr},
        {"warmup_steps", train.warmup_steps},
        {"p_drop", train.p_drop},
        {"grad_clip", train.grad_clip},
        {"log_every", 100},
        {"checkpoint_every", 1000},
        {"masks",
         {{"p_occluded_hull", masks.p_occluded_hull}, {"p_box", masks.p_box}}}}},
      {"sampler",
       {{"s", sampler.s},
        {"w", sampler.w},
        {"steps", sampler.steps},
        {"combine", CombineName(sampler.combine)},
        {"guidance", "noise"}}},
      {"segmenter",
       {{"n_seeds", pipe.n_seeds}, {"tol", pipe.tol}, {"mode", "running_mean"}}},
      {"eval",
       {{"thresholds", DefaultThresholds()},
        {"depth_r", pipe.depth_r},
        {"limit", 0},
        {"preset", "criteria"}}},
  };
}

json MergeConfig(const json& base, const json& patch) {
  Require(patch.is_object(), ErrorKind::kInvalidArgument,
          "config must be a JSON object");
  json out = base;
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!out.contains(it.key())) {
      Fail(ErrorKind::kInvalidArgument, "unknown config key '" + it.key() + "'");
    }
    json& slot = out[it.key()];
    if (it.value().is_null()) {
      Fail(ErrorKind::kInvalidArgument, "null value for config key '" + it.key() + "'");
    }
    if (slot.is_object()) {
      slot = MergeConfig(slot, it.value());
    } else {
      slot = it.value();
    }
  }
  return out;
}

json LoadConfigFile(const std::string& path) {
  std::ifstream is(path);
  if (!is) Fail(ErrorKind::kIo, "cannot open config " + path);
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    Fail(ErrorKind::kFormat, path + ": " + e.what());
  }
}

void WriteConfigFile(const std::string& path, const json& cfg) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) Fail(ErrorKind::kIo, "cannot write " + path);
  os << cfg.dump(2) << "\n";
}

UNetArch ArchFromConfig(const json& cfg) {
  return Parse("model", [&] {
    const json& m = cfg.at("model");
    UNetArch a;
    a.base_width = m.at("base_width").get<int>();
    a.levels = m.at("levels").get<int>();
    a.time_dim = m.at("time_dim").get<int>();
    a.groups = m.at("groups").get<int>();
    a.image_size = m.at("image_size").get<int>();
    const std::string problem = ValidateArch(a);
    if (!problem.empty()) Fail(ErrorKind::kInvalidArgument, problem);
    return a;
  });
}

NoiseSchedule ScheduleFromConfig(const json& cfg) {
  return Parse("schedule", [&] {
    const json& s = cfg.at("schedule");
    return BuildSchedule(s.at("T").get<int>(), s.at("beta_start").get<double>(),
                         s.at("beta_end").get<double>());
  });
}

TrainConfig TrainFromConfig(const json& cfg) {
  return Parse("train", [&] {
    const json& t = cfg.at("train");
    TrainConfig c;
    c.epochs = t.at("epochs").get<int>();
    c.batch_size = t.at("batch_size").get<int>();
    c.max_steps = t.at("max_steps").get<int>();
    c.lr = t.at("lr").get<double>();
    c.warmup_steps = t.at("warmup_steps").get<int>();
    c.p_drop = t.at("p_drop").get<double>();
    c.grad_clip = t.at("grad_clip").get<double>();
    c.log_every = t.at("log_every").get<int>();
    c.init_seed = DeriveSeed(cfg.at("seed").get<uint64_t>(), "init");
    return c;
  });
}

TrainMaskConfig TrainMasksFromConfig(const json& cfg) {
  return Parse("train.masks", [&] {
    const json& m = cfg.at("train").at("masks");
    TrainMaskConfig c;
    c.p_occluded_hull = m.at("p_occluded_hull").get<double>();
    c.p_box = m.at("p_box").get<double>();
    return c;
  });
}

SceneConfig EvalSceneFromConfig(const json& cfg) {
  return Parse("data.eval_scene", [&] {
    return SceneFromJson(cfg.at("data").at("eval_scene"),
                         cfg.at("model").at("image_size").get<int>());
  });
}

TrainingConfig TrainSceneFromConfig(const json& cfg) {
  return Parse("data.train_scene", [&] {
    TrainingConfig c;
    c.scene = SceneFromJson(cfg.at("data").at("train_scene"),
                            cfg.at("model").at("image_size").get<int>());
    c.min_gap = cfg.at("data").at("min_gap").get<int>();
    return c;
  });
}

PipelineConfig PipelineFromConfig(const json& cfg) {
  return Parse("sampler/segmenter", [&] {
    const json& s = cfg.at("sampler");
    const json& g = cfg.at("segmenter");
    PipelineConfig p;
    p.sampler.s = s.at("s").get<double>();
    p.sampler.w = s.at("w").get<double>();
    p.sampler.steps = s.at("steps").get<int>();
    p.sampler.combine = CombineFromName(s.at("combine").get<std::string>());
    const std::string guidance = s.at("guidance").get<std::string>();
    if (guidance == "noise") {
      p.sampler.guidance = GuidanceTarget::kNoise;
    } else if (guidance == "sample") {
      p.sampler.guidance = GuidanceTarget::kSample;
    } else {
      Fail(ErrorKind::kInvalidArgument, "sampler.guidance must be noise or sample");
    }
    ValidateSamplerConfig(p.sampler);
    p.n_seeds = g.at("n_seeds").get<int>();
    p.tol = g.at("tol").get<double>();
    const std::string mode = g.at("mode").get<std::string>();
    if (mode == "running_mean") {
      p.grow = GrowMode::kRunningMean;
    } else if (mode == "fixed_mean") {
      p.grow = GrowMode::kFixedMean;
    } else {
      Fail(ErrorKind::kInvalidArgument,
           "segmenter.mode must be running_mean or fixed_mean");
    }
    p.depth_r = cfg.at("eval").at("depth_r").get<double>();
    return p;
  });
}

std::vector<double> ThresholdsFromConfig(const json& cfg) {
  return Parse("eval", [&] {
    return cfg.at("eval").at("thresholds").get<std::vector<double>>();
  });
}

}  // namespace amodal
