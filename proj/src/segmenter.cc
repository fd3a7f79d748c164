#include "amodal/segmenter.h"

#include <cmath>
#include <deque>

namespace amodal {

SeedSet SampleSeedPoints(const BinaryMask& v, int n, Rng& rng) {
  Require(n >= 1, ErrorKind::kInvalidArgument, "seed count must be >= 1");
  std::vector<Point> pool;
  for (int y = 0; y < v.height(); ++y) {
    for (int x = 0; x < v.width(); ++x) {
      if (v.at(y, x)) pool.push_back({x, y});
    }
  }
  if (pool.empty()) Fail(ErrorKind::kInvalidArgument, "no visible pixels to seed");
  SeedSet out;
  out.count = n;
  if (pool.size() >= static_cast<size_t>(n)) {
    // Partial Fisher-Yates.
    for (int i = 0; i < n; ++i) {
      std::uniform_int_distribution<size_t> pick(i, pool.size() - 1);
      std::swap(pool[i], pool[pick(rng)]);
      out.points.push_back(pool[i]);
    }
  } else {
    std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
    for (int i = 0; i < n; ++i) out.points.push_back(pool[pick(rng)]);
  }
  return out;
}

BinaryMask GrowRegion(const ImageBuffer& image, Point seed, double tol,
                      GrowMode mode) {
  const int h = image.height(), w = image.width(), ch = image.channels();
  Require(seed.x >= 0 && seed.x < w && seed.y >= 0 && seed.y < h,
          ErrorKind::kOutOfRange, "seed outside the image");
  BinaryMask region(h, w);
  std::vector<double> sum(ch, 0.0), ref(ch, 0.0);
  size_t n = 0;
  auto add = [&](int x, int y) {
    region.set(y, x);
    for (int c = 0; c < ch; ++c) sum[c] += image.at(c, y, x);
    ++n;
  };
  add(seed.x, seed.y);
  for (int c = 0; c < ch; ++c) ref[c] = sum[c];
  const double tol2 = tol * tol;
  std::deque<Point> queue{seed};
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    for (int k = 0; k < 4; ++k) {
      const int nx = p.x + dx[k], ny = p.y + dy[k];
      if (!region.in_bounds(ny, nx) || region.at(ny, nx)) continue;
      if (mode == GrowMode::kRunningMean) {
        for (int c = 0; c < ch; ++c) ref[c] = sum[c] / static_cast<double>(n);
      }
      double d2 = 0.0;
      for (int c = 0; c < ch; ++c) {
        const double d = image.at(c, ny, nx) - ref[c];
        d2 += d * d;
      }
      if (d2 <= tol2) {
        add(nx, ny);
        queue.push_back({nx, ny});
      }
    }
  }
  return region;
}

BinaryMask FillHoles(const BinaryMask& m) {
  const int h = m.height(), w = m.width();
  BinaryMask outside(h, w);
  std::deque<Point> queue;
  auto visit = [&](int x, int y) {
    if (!m.in_bounds(y, x) || m.at(y, x) || outside.at(y, x)) return;
    outside.set(y, x);
    queue.push_back({x, y});
  };
  for (int x = 0; x < w; ++x) {
    visit(x, 0);
    visit(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    visit(0, y);
    visit(w - 1, y);
  }
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    visit(p.x + 1, p.y);
    visit(p.x - 1, p.y);
    visit(p.x, p.y + 1);
    visit(p.x, p.y - 1);
  }
  BinaryMask out(h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) out.set(y, x, !outside.at(y, x));
  }
  return out;
}

BinaryMask ExtractAmodalMask(const ImageBuffer& image, const SeedSet& seeds,
                             double tol, GrowMode mode) {
  Require(tol >= 0.0, ErrorKind::kInvalidArgument, "tolerance must be >= 0");
  BinaryMask out(image.height(), image.width());
  for (const Point& p : seeds.points) {
    out = out.Union(GrowRegion(image, p, tol, mode));
  }
  return FillHoles(out);
}

}  // namespace amodal
