#include "amodal/train_masks.h"

#include <algorithm>
#include <cmath>

#include "amodal/maskgen.h"

namespace amodal {
namespace {

BinaryMask RandomBox(int size, Rng& rng) {
  std::uniform_int_distribution<int> len(size / 8, size / 2);
  const int h = len(rng), w = len(rng);
  std::uniform_int_distribution<int> y0(0, size - h), x0(0, size - w);
  const int top = y0(rng), left = x0(rng);
  BinaryMask m(size, size);
  for (int y = top; y < top + h; ++y) {
    for (int x = left; x < left + w; ++x) m.set(y, x);
  }
  return m;
}

}  // namespace

BinaryMask SampleTrainingMask(const std::vector<BinaryMask>& objects, int size,
                              const TrainMaskConfig& cfg, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  SceneConfig sc;
  sc.size = size;
  if (u < cfg.p_occluded_hull && !objects.empty()) {
    std::uniform_int_distribution<size_t> pick(0, objects.size() - 1);
    const BinaryMask& a = objects[pick(rng)];
    double centre[2] = {0.0, 0.0};
    size_t n = 0;
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        if (a.at(y, x)) {
          centre[0] += x;
          centre[1] += y;
          ++n;
        }
      }
    }
    centre[0] /= static_cast<double>(n);
    centre[1] /= static_cast<double>(n);
    const ShapeSpec occluder = RandomShape(sc, rng, centre, sc.max_radius * 1.5);
    BinaryMask v = a.Minus(RasterizeShape(occluder, size, size));
    if (v.Empty()) v = a;
    return HullOf(v);
  }
  if (u < cfg.p_occluded_hull + cfg.p_box) return RandomBox(size, rng);
  const double scale = size / 64.0;
  std::uniform_real_distribution<double> radius(sc.min_radius * scale,
                                                sc.max_radius * scale);
  ShapeSpec blob;
  blob.kind = ShapeKind::kEllipse;
  blob.rx = radius(rng);
  blob.ry = radius(rng);
  std::uniform_real_distribution<double> pos(0.0, size - 1.0), turn(0.0, M_PI);
  blob.cx = pos(rng);
  blob.cy = pos(rng);
  blob.angle = turn(rng);
  return RasterizeShape(blob, size, size);
}

ExampleSource CorpusSource(const Corpus& corpus, const TrainMaskConfig& cfg) {
  return [&corpus, cfg](size_t index, Rng& rng) {
    const ImageBuffer& img = corpus.images.at(index);
    return TrainExample{
        img, SampleTrainingMask(corpus.objects.at(index), img.height(), cfg,
                                rng)};
  };
}

}  // namespace amodal
