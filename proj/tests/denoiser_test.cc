#include "amodal/denoiser.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "amodal/rng.h"
#include "doctest.h"

namespace amodal {
namespace {

namespace fs = std::filesystem;

UNetArch TinyArch() {
  UNetArch a;
  a.base_width = 4;
  a.levels = 2;
  a.time_dim = 8;
  a.groups = 2;
  a.image_size = 8;
  return a;
}

ImageBuffer Filled(float v) { return ImageBuffer(2, 2, 3, v); }

// alpha_2 = 0.99 and alpha_bar_2 = 0.9; references from 30-digit arithmetic.
NoiseSchedule HandSchedule() { return ScheduleFromBetas({1 - 0.9 / 0.99, 0.01}); }

TEST_CASE("DDPM mean by hand") {
  const NoiseSchedule s = HandSchedule();
  REQUIRE(s.alpha[2] == doctest::Approx(0.99).epsilon(1e-14));
  REQUIRE(s.alpha_bar[2] == doctest::Approx(0.9).epsilon(1e-14));
  const ImageBuffer mean = MeanFromNoise(Filled(0.5f), Filled(0.1f), 2, 1, s);
  for (float v : mean.data()) CHECK(v == doctest::Approx(0.499340698998787).epsilon(1e-6));
  CHECK(PosteriorSigma(2, 1, s) == doctest::Approx(0.0953462589245592).epsilon(1e-12));
}

TEST_CASE("a strided jump to 0 lands on the clean-image estimate") {
  const NoiseSchedule s = HandSchedule();
  const ImageBuffer mean = MeanFromNoise(Filled(0.5f), Filled(0.1f), 2, 0, s);
  for (float v : mean.data()) CHECK(v == doctest::Approx(0.493712943361397).epsilon(1e-6));
  CHECK(PosteriorSigma(2, 0, s) == 0.0);
}

TEST_CASE("strided sigma reduces to the table for unit strides") {
  const NoiseSchedule s = BuildSchedule(100);
  for (int t = 1; t <= 100; ++t) {
    CHECK(PosteriorSigma(t, t - 1, s) == s.sigma[t]);
  }
  CHECK_THROWS_AS(PosteriorSigma(5, 5, s), Error);
  CHECK_THROWS_AS(MeanFromNoise(Filled(0), Filled(0), 101, 0, s), Error);
}

TEST_CASE("null conditioning is the all-zero mask and context") {
  const NoiseSchedule s = BuildSchedule(100);
  Denoiser model(TinyArch(), s);
  Rng rng(5);
  std::normal_distribution<float> n(0.0f, 0.3f);
  for (float& p : model.params()) p = n(rng);
  const ImageBuffer x = GaussianImage(8, 8, 3, rng);
  const ImageBuffer a = PredictNoise(x, 40, Conditioning::Null(), model);
  const ImageBuffer b = PredictNoise(
      x, 40, Conditioning::Make(BinaryMask(8, 8), ImageBuffer(8, 8, 3)), model);
  CHECK(a == b);
  BinaryMask m(8, 8);
  m.set(2, 3);
  const ImageBuffer c = PredictNoise(
      x, 40, Conditioning::Make(m, GaussianImage(8, 8, 3, rng)), model);
  CHECK_FALSE(a == c);
}

TEST_CASE("fresh model predicts zero noise") {
  const NoiseSchedule s = BuildSchedule(100);
  Denoiser model(TinyArch(), s);
  model.InitParams(3);
  Rng rng(1);
  const ImageBuffer eps =
      PredictNoise(GaussianImage(8, 8, 3, rng), 10, Conditioning::Null(), model);
  for (float v : eps.data()) CHECK(v == 0.0f);
}

TEST_CASE("prediction rejects bad inputs") {
  const NoiseSchedule s = BuildSchedule(100);
  Denoiser model(TinyArch(), s);
  CHECK_THROWS_AS(PredictNoise(ImageBuffer(8, 8, 3), 0, Conditioning::Null(), model), Error);
  CHECK_THROWS_AS(PredictNoise(ImageBuffer(8, 8, 3), 101, Conditioning::Null(), model), Error);
  CHECK_THROWS_AS(PredictNoise(ImageBuffer(4, 4, 3), 5, Conditioning::Null(), model), Error);
  CHECK_THROWS_AS(model.RequireSchedule(BuildSchedule(99)), Error);
}

// A small synthetic task: a bright square on a dark ground, mask = square.
TrainExample SquareExample(size_t i) {
  TrainExample ex{ImageBuffer(8, 8, 3, -0.8f), BinaryMask(8, 8)};
  const int o = static_cast<int>(i % 3);
  for (int y = 2 + o; y < 5 + o; ++y) {
    for (int x = 1 + o; x < 4 + o; ++x) {
      ex.mask.set(y, x);
      for (int c = 0; c < 3; ++c) ex.image.at(c, y, x) = 0.6f - 0.2f * c;
    }
  }
  return ex;
}

ExampleSource SquareSource() {
  return [](size_t i, Rng&) { return SquareExample(i); };
}

TrainConfig SmallTrain(int steps) {
  TrainConfig c;
  c.batch_size = 4;
  c.max_steps = steps;
  c.lr = 3e-3;
  c.warmup_steps = 5;
  c.init_seed = 9;
  return c;
}

TEST_CASE("training is deterministic and resumable") {
  const NoiseSchedule s = BuildSchedule(100);
  auto run = [&](std::vector<int> chunks) {
    Denoiser m(TinyArch(), s);
    m.InitParams(9);
    OptimizerState st;
    std::vector<double> loss;
    for (int upto : chunks) {
      const TrainStats r = Train(m, st, 3, SquareSource(), SmallTrain(upto), s, 77);
      loss.insert(loss.end(), r.loss.begin(), r.loss.end());
    }
    return std::make_pair(m.params(), loss);
  };
  const auto a = run({6});
  const auto b = run({6});
  const auto c = run({2, 6});
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first == c.first);
  CHECK(a.second == c.second);
}

TEST_CASE("overfits a tiny dataset") {
  const NoiseSchedule s = BuildSchedule(100);
  Denoiser m(TinyArch(), s);
  m.InitParams(9);
  OptimizerState st;
  const TrainStats r = Train(m, st, 3, SquareSource(), SmallTrain(400), s, 1);
  auto mean = [&](size_t a, size_t b) {
    double t = 0;
    for (size_t i = a; i < b; ++i) t += r.loss[i];
    return t / (b - a);
  };
  MESSAGE("loss first 50 " << mean(0, 50) << ", last 50 " << mean(350, 400));
  CHECK(mean(350, 400) < 0.6 * mean(0, 50));
}

TEST_CASE("non-finite loss aborts with a numerical error") {
  const NoiseSchedule s = BuildSchedule(100);
  Denoiser m(TinyArch(), s);
  m.InitParams(9);
  m.params()[m.params().size() - 1] = std::nanf("");
  OptimizerState st;
  try {
    Train(m, st, 3, SquareSource(), SmallTrain(2), s, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNumerical);
  }
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / ("amodal_ck_" + std::to_string(::getpid()))) {
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

TEST_CASE("checkpoint round trip and corruption checks") {
  TempDir dir;
  const std::string file = (dir.path / "m.ck").string();
  const NoiseSchedule s = BuildSchedule(100);
  Denoiser m(TinyArch(), s);
  m.InitParams(4);
  OptimizerState st;
  Train(m, st, 3, SquareSource(), SmallTrain(3), s, 2);
  SaveCheckpoint(file, m, &st);

  LoadedCheckpoint lc = LoadCheckpoint(file, s);
  CHECK(lc.model.params() == m.params());
  CHECK(lc.model.arch() == m.arch());
  REQUIRE(lc.state.has_value());
  CHECK(lc.state->step == 3);
  CHECK(lc.state->m == st.m);
  CHECK(lc.state->v == st.v);
  CHECK(CheckpointSchedule(file).Fingerprint() == s.Fingerprint());

  // Continuing from the file matches continuing in memory.
  Train(m, st, 3, SquareSource(), SmallTrain(5), s, 2);
  Train(lc.model, *lc.state, 3, SquareSource(), SmallTrain(5), s, 2);
  CHECK(lc.model.params() == m.params());

  auto kind_of = [&](const NoiseSchedule& sched) {
    try {
      LoadCheckpoint(file, sched);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kUnreachable;
  };
  CHECK(kind_of(BuildSchedule(101)) == ErrorKind::kFingerprintMismatch);

  SaveCheckpoint(file, m, nullptr);
  CHECK_FALSE(LoadCheckpoint(file, s).state.has_value());

  // Flip one byte in the parameter block.
  {
    std::fstream f(file, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(-2, std::ios::end);
    char c;
    f.read(&c, 1);
    c ^= 0x5a;
    f.seekp(-2, std::ios::end);
    f.write(&c, 1);
  }
  CHECK(kind_of(s) == ErrorKind::kFormat);

  fs::resize_file(file, fs::file_size(file) - 8);
  CHECK(kind_of(s) == ErrorKind::kFormat);
  {
    std::ofstream f(file, std::ios::binary | std::ios::trunc);
    f << "NOTACKPT";
  }
  CHECK(kind_of(s) == ErrorKind::kFormat);
  CHECK_THROWS_AS(LoadCheckpoint((dir.path / "missing.ck").string(), s), Error);
}

}  // namespace
}  // namespace amodal
