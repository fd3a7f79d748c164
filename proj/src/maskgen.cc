#include "amodal/maskgen.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>

namespace amodal {
namespace {

// Clockwise neighbour ring starting at west (y grows downwards).
constexpr int kDx[8] = {-1, -1, 0, 1, 1, 1, 0, -1};
constexpr int kDy[8] = {0, -1, -1, -1, 0, 1, 1, 1};

int DirectionOf(int dx, int dy) {
  for (int d = 0; d < 8; ++d) {
    if (kDx[d] == dx && kDy[d] == dy) return d;
  }
  Fail(ErrorKind::kUnreachable, "Moore tracing lost its backtrack pixel");
}

bool Set(const BinaryMask& m, int x, int y) {
  return m.in_bounds(y, x) && m.at(y, x);
}

std::vector<Point> TraceBoundary(const BinaryMask& v, Point start) {
  std::vector<Point> contour{start};
  Point c = start;
  Point back{start.x - 1, start.y};  // background: start is first in raster order
  const Point first_back = back;
  const size_t limit = 4 * v.size() + 16;
  for (size_t iter = 0; iter < limit; ++iter) {
    const int d0 = DirectionOf(back.x - c.x, back.y - c.y);
    bool moved = false;
    for (int k = 1; k <= 8; ++k) {
      const int d = (d0 + k) % 8;
      const Point n{c.x + kDx[d], c.y + kDy[d]};
      if (Set(v, n.x, n.y)) {
        const int pd = (d0 + k - 1) % 8;
        back = {c.x + kDx[pd], c.y + kDy[pd]};
        c = n;
        moved = true;
        break;
      }
    }
    if (!moved) return contour;  // isolated pixel
    if (c == start && back == first_back) return contour;
    contour.push_back(c);
  }
  return contour;
}

int64_t Cross(Point o, Point a, Point b) {
  return static_cast<int64_t>(a.x - o.x) * (b.y - o.y) -
         static_cast<int64_t>(a.y - o.y) * (b.x - o.x);
}

void RequireNonEmpty(const BinaryMask& v, const char* what) {
  if (v.Empty()) Fail(ErrorKind::kInvalidArgument, std::string(what) + ": empty mask");
}

// Squared Euclidean distance transform to the set pixels of `m`
// (Felzenszwalb-Huttenlocher lower envelope, separable).
std::vector<double> SquaredDistanceTo(const BinaryMask& m) {
  const int h = m.height(), w = m.width();
  const double inf = 1e20;
  std::vector<double> f(static_cast<size_t>(h) * w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) f[y * w + x] = m.at(y, x) ? 0.0 : inf;
  }
  const int n_max = std::max(h, w);
  std::vector<double> in(n_max), out(n_max), z(n_max + 1);
  std::vector<int> idx(n_max);
  auto pass = [&](int n) {
    int k = 0;
    idx[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
      double s;
      while (true) {
        const int p = idx[k];
        s = ((in[q] + double(q) * q) - (in[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
        if (s <= z[k]) {
          --k;
          continue;
        }
        break;
      }
      ++k;
      idx[k] = q;
      z[k] = s;
      z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
      while (z[k + 1] < q) ++k;
      const double d = q - idx[k];
      out[q] = d * d + in[idx[k]];
    }
  };
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) in[y] = f[y * w + x];
    pass(h);
    for (int y = 0; y < h; ++y) f[y * w + x] = out[y];
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) in[x] = f[y * w + x];
    pass(w);
    for (int x = 0; x < w; ++x) f[y * w + x] = out[x];
  }
  return f;
}

}  // namespace

int LabelComponents(const BinaryMask& v, std::vector<int>& labels) {
  const int h = v.height(), w = v.width();
  labels.assign(static_cast<size_t>(h) * w, 0);
  int n = 0;
  std::vector<Point> stack;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!v.at(y, x) || labels[y * w + x] != 0) continue;
      ++n;
      labels[y * w + x] = n;
      stack.push_back({x, y});
      while (!stack.empty()) {
        const Point p = stack.back();
        stack.pop_back();
        for (int d = 0; d < 8; ++d) {
          const int nx = p.x + kDx[d], ny = p.y + kDy[d];
          if (Set(v, nx, ny) && labels[ny * w + nx] == 0) {
            labels[ny * w + nx] = n;
            stack.push_back({nx, ny});
          }
        }
      }
    }
  }
  return n;
}

ContourSet ExtractContours(const BinaryMask& v) {
  RequireNonEmpty(v, "ExtractContours");
  std::vector<int> labels;
  const int n = LabelComponents(v, labels);
  ContourSet cs;
  cs.height = v.height();
  cs.width = v.width();
  int next = 1;
  for (int y = 0; y < v.height() && next <= n; ++y) {
    for (int x = 0; x < v.width(); ++x) {
      if (labels[y * v.width() + x] == next) {
        cs.contours.push_back(TraceBoundary(v, {x, y}));
        ++next;
      }
    }
  }
  return cs;
}

std::vector<Point> ConvexHull(std::vector<Point> pts) {
  std::sort(pts.begin(), pts.end(), [](Point a, Point b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() <= 1) return pts;
  std::vector<Point> hull(2 * pts.size());
  size_t k = 0;
  for (const Point& p : pts) {
    while (k >= 2 && Cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && Cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

BinaryMask RasterizeHull(const std::vector<Point>& hull, int height,
                         int width) {
  BinaryMask m(height, width);
  if (hull.empty()) return m;
  int x0 = width, x1 = -1, y0 = height, y1 = -1;
  for (const Point& p : hull) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, width - 1);
  y1 = std::min(y1, height - 1);
  const size_t n = hull.size();
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Point p{x, y};
      bool inside = true;
      if (n == 1) {
        inside = p == hull[0];
      } else if (n == 2) {
        inside = Cross(hull[0], hull[1], p) == 0;  // bbox already enforced
      } else {
        for (size_t i = 0; i < n && inside; ++i) {
          inside = Cross(hull[i], hull[(i + 1) % n], p) >= 0;
        }
      }
      if (inside) m.set(y, x);
    }
  }
  return m;
}

BinaryMask ConvexHullMask(const ContourSet& cs) {
  Require(!cs.contours.empty(), ErrorKind::kInvalidArgument,
          "ConvexHullMask: no contours");
  std::vector<Point> pts;
  for (const auto& c : cs.contours) pts.insert(pts.end(), c.begin(), c.end());
  return RasterizeHull(ConvexHull(std::move(pts)), cs.height, cs.width);
}

BinaryMask HullOf(const BinaryMask& v) {
  return ConvexHullMask(ExtractContours(v));
}

BinaryMask RectangleMask(const BinaryMask& v) {
  RequireNonEmpty(v, "RectangleMask");
  int x0 = v.width(), x1 = -1, y0 = v.height(), y1 = -1;
  for (int y = 0; y < v.height(); ++y) {
    for (int x = 0; x < v.width(); ++x) {
      if (!v.at(y, x)) continue;
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y0 = std::min(y0, y);
      y1 = std::max(y1, y);
    }
  }
  BinaryMask r(v.height(), v.width());
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) r.set(y, x);
  }
  return r;
}

double MinPixelDistance(const BinaryMask& a, const BinaryMask& b) {
  RequireSameShape(a, b, "MinPixelDistance");
  if (a.Empty() || b.Empty()) return std::numeric_limits<double>::infinity();
  const std::vector<double> d2 = SquaredDistanceTo(b);
  double best = std::numeric_limits<double>::infinity();
  const auto bits = a.data();
  for (size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) best = std::min(best, d2[i]);
  }
  return std::sqrt(best);
}

BinaryMask DepthMask(const BinaryMask& v, const std::vector<RankedMask>& others,
                     int target_rank, double r) {
  Require(r > 0.0, ErrorKind::kInvalidArgument, "depth radius must be > 0");
  BinaryMask d = v;
  if (v.Empty()) return d;
  std::vector<double> d2;
  for (const RankedMask& o : others) {
    RequireSameShape(v, o.mask, "DepthMask");
    if (o.depth_rank >= target_rank || o.mask.Empty()) continue;
    if (d2.empty()) d2 = SquaredDistanceTo(v);
    double best = std::numeric_limits<double>::infinity();
    const auto bits = o.mask.data();
    for (size_t i = 0; i < bits.size(); ++i) {
      if (bits[i]) best = std::min(best, d2[i]);
    }
    if (best <= r * r) d = d.Union(o.mask);
  }
  return d;
}

}  // namespace amodal
