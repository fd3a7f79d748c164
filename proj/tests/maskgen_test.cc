#include "amodal/maskgen.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"

namespace amodal {
namespace {

BinaryMask FromRows(const std::vector<std::string>& rows) {
  BinaryMask m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (size_t y = 0; y < rows.size(); ++y) {
    for (size_t x = 0; x < rows[y].size(); ++x) {
      if (rows[y][x] == '#') m.set(static_cast<int>(y), static_cast<int>(x));
    }
  }
  return m;
}

std::set<std::pair<int, int>> AsSet(const std::vector<Point>& pts) {
  std::set<std::pair<int, int>> s;
  for (const Point& p : pts) s.insert({p.x, p.y});
  return s;
}

TEST_CASE("Moore tracing of a 3x3 square visits its 8 border pixels") {
  const BinaryMask m = FromRows({".....", ".###.", ".###.", ".###.", "....."});
  const ContourSet cs = ExtractContours(m);
  REQUIRE(cs.contours.size() == 1);
  const auto& c = cs.contours[0];
  CHECK(c.size() == 8);
  CHECK(c[0] == Point{1, 1});
  const std::set<std::pair<int, int>> want{{1, 1}, {2, 1}, {3, 1}, {3, 2},
                                           {3, 3}, {2, 3}, {1, 3}, {1, 2}};
  CHECK(AsSet(c) == want);
  // Consecutive contour pixels are 8-neighbours.
  for (size_t i = 0; i < c.size(); ++i) {
    const Point a = c[i], b = c[(i + 1) % c.size()];
    CHECK(std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) == 1);
  }
}

TEST_CASE("contour corner cases") {
  CHECK(ExtractContours(FromRows({"...", ".#.", "..."})).contours[0].size() == 1);
  // Diagonal pixels form one 8-connected component.
  const ContourSet diag = ExtractContours(FromRows({"#..", ".#.", "..#"}));
  REQUIRE(diag.contours.size() == 1);
  CHECK(AsSet(diag.contours[0]).size() == 3);
  // Two separate blobs, listed in raster order of their first pixel.
  const ContourSet two = ExtractContours(FromRows({"...##", "#..##", "#....", "....."}));
  REQUIRE(two.contours.size() == 2);
  CHECK(two.contours[0][0] == Point{3, 0});
  CHECK(two.contours[1][0] == Point{0, 1});
  // A ring traces only its outer boundary.
  const BinaryMask ring = FromRows({"#####", "#...#", "#...#", "#...#", "#####"});
  const ContourSet rc = ExtractContours(ring);
  REQUIRE(rc.contours.size() == 1);
  CHECK(AsSet(rc.contours[0]).size() == 16);
  // A shape touching the frame border.
  const ContourSet edge = ExtractContours(FromRows({"##", "##"}));
  CHECK(edge.contours[0].size() == 4);
  CHECK_THROWS_AS(ExtractContours(BinaryMask(3, 3)), Error);
}

TEST_CASE("contours cover every boundary pixel of random blobs") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    BinaryMask m(12, 12);
    std::uniform_int_distribution<int> coord(2, 9);
    // A union of small rectangles; usually one component, sometimes several.
    for (int k = 0; k < 3; ++k) {
      const int x = coord(rng), y = coord(rng);
      for (int yy = y - 1; yy <= y + 1; ++yy) {
        for (int xx = x - 1; xx <= x + 1; ++xx) m.set(yy, xx);
      }
    }
    std::vector<int> labels;
    const int n = LabelComponents(m, labels);
    const ContourSet cs = ExtractContours(m);
    CHECK(static_cast<int>(cs.contours.size()) == n);
    std::set<std::pair<int, int>> traced;
    for (const auto& c : cs.contours) {
      for (const Point& p : c) {
        CHECK(m.at(p.y, p.x));
        traced.insert({p.x, p.y});
      }
    }
    // The first set pixel of each row lies on the outer boundary.
    for (int y = 0; y < 12; ++y) {
      for (int x = 0; x < 12; ++x) {
        if (!m.at(y, x)) continue;
        bool leftmost = x == 0 || !m.at(y, x - 1);
        bool open = true;
        for (int xx = 0; xx < x; ++xx) open = open && !m.at(y, xx);
        if (leftmost && open) CHECK(traced.count({x, y}) == 1);
      }
    }
  }
}

int64_t Cross(Point o, Point a, Point b) {
  return int64_t(a.x - o.x) * (b.y - o.y) - int64_t(a.y - o.y) * (b.x - o.x);
}

// Brute force: p is a hull vertex iff it is not inside or on any triangle or
// segment formed by other points.
std::set<std::pair<int, int>> BruteHullVertices(const std::vector<Point>& raw) {
  std::vector<Point> pts;
  for (const Point& p : raw) {
    if (std::find(pts.begin(), pts.end(), p) == pts.end()) pts.push_back(p);
  }
  std::set<std::pair<int, int>> out;
  for (size_t i = 0; i < pts.size(); ++i) {
    const Point p = pts[i];
    bool covered = false;
    for (size_t a = 0; a < pts.size() && !covered; ++a) {
      for (size_t b = 0; b < pts.size() && !covered; ++b) {
        if (a == i || b == i || a == b) continue;
        // On the closed segment a-b.
        if (Cross(pts[a], pts[b], p) == 0 &&
            std::min(pts[a].x, pts[b].x) <= p.x && p.x <= std::max(pts[a].x, pts[b].x) &&
            std::min(pts[a].y, pts[b].y) <= p.y && p.y <= std::max(pts[a].y, pts[b].y)) {
          covered = true;
        }
        for (size_t c = 0; c < pts.size() && !covered; ++c) {
          if (c == i || c == a || c == b) continue;
          const int64_t d1 = Cross(pts[a], pts[b], p), d2 = Cross(pts[b], pts[c], p),
                        d3 = Cross(pts[c], pts[a], p);
          const bool neg = d1 < 0 || d2 < 0 || d3 < 0, pos = d1 > 0 || d2 > 0 || d3 > 0;
          if (!(neg && pos) && Cross(pts[a], pts[b], pts[c]) != 0) covered = true;
        }
      }
    }
    if (!covered) out.insert({p.x, p.y});
  }
  return out;
}

TEST_CASE("monotone-chain hull matches brute force") {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    std::uniform_int_distribution<int> n_pts(1, 14), coord(0, 9);
    std::vector<Point> pts(n_pts(rng));
    for (Point& p : pts) p = {coord(rng), coord(rng)};
    const std::vector<Point> hull = ConvexHull(pts);
    CHECK(AsSet(hull) == BruteHullVertices(pts));
    if (hull.size() >= 3) {
      for (size_t i = 0; i < hull.size(); ++i) {
        // Strictly convex, one orientation.
        CHECK(Cross(hull[i], hull[(i + 1) % hull.size()], hull[(i + 2) % hull.size()]) > 0);
      }
      for (const Point& p : pts) {
        for (size_t i = 0; i < hull.size(); ++i) {
          CHECK(Cross(hull[i], hull[(i + 1) % hull.size()], p) >= 0);
        }
      }
    }
  }
}

TEST_CASE("hull rasterisation matches a point-in-polygon oracle") {
  std::mt19937 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    std::uniform_int_distribution<int> coord(0, 15);
    std::vector<Point> pts(6);
    for (Point& p : pts) p = {coord(rng), coord(rng)};
    const std::vector<Point> hull = ConvexHull(pts);
    const BinaryMask m = RasterizeHull(hull, 16, 16);
    for (int y = 0; y < 16; ++y) {
      for (int x = 0; x < 16; ++x) {
        bool inside;
        if (hull.size() >= 3) {
          // Winding test in doubles, independent of the orientation used above.
          double angle = 0;
          bool on_edge = false;
          for (size_t i = 0; i < hull.size(); ++i) {
            const Point a = hull[i], b = hull[(i + 1) % hull.size()];
            if (Cross(a, b, {x, y}) == 0 && std::min(a.x, b.x) <= x &&
                x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= y && y <= std::max(a.y, b.y)) {
              on_edge = true;
            }
            const double a1 = std::atan2(a.y - y, a.x - x), a2 = std::atan2(b.y - y, b.x - x);
            double d = a2 - a1;
            while (d > M_PI) d -= 2 * M_PI;
            while (d < -M_PI) d += 2 * M_PI;
            angle += d;
          }
          inside = on_edge || std::abs(angle) > M_PI;
        } else if (hull.size() == 2) {
          const Point a = hull[0], b = hull[1];
          inside = Cross(a, b, {x, y}) == 0 && std::min(a.x, b.x) <= x &&
                   x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= y && y <= std::max(a.y, b.y);
        } else {
          inside = hull[0] == Point{x, y};
        }
        CHECK(m.at(y, x) == inside);
      }
    }
  }
}

TEST_CASE("hull mask contains V and is convex for convex V") {
  const BinaryMask l = FromRows({"#....", "#....", "#....", "####."});
  const BinaryMask h = HullOf(l);
  CHECK(l.IsSubsetOf(h));
  CHECK(h == FromRows({"#....", "##...", "###..", "####."}));
  const BinaryMask rect = FromRows({".....", ".###.", ".###.", "....."});
  CHECK(HullOf(rect) == rect);
  // Two components share one hull.
  const BinaryMask two = FromRows({"#...#", ".....", "....."});
  CHECK(HullOf(two) == FromRows({"#####", ".....", "....."}));
}

TEST_CASE("rectangle mask") {
  const BinaryMask m = FromRows({"......", "..#...", "....#.", "...#..", "......"});
  CHECK(RectangleMask(m) == FromRows({"......", "..###.", "..###.", "..###.", "......"}));
  CHECK_THROWS_AS(RectangleMask(BinaryMask(2, 2)), Error);
}

TEST_CASE("pixel distance matches brute force") {
  std::mt19937 rng(2);
  std::bernoulli_distribution on(0.05);
  for (int trial = 0; trial < 30; ++trial) {
    BinaryMask a(20, 17), b(20, 17);
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 17; ++x) {
        if (on(rng)) a.set(y, x);
        if (on(rng)) b.set(y, x);
      }
    }
    if (a.Empty() || b.Empty()) continue;
    double best = 1e9;
    for (int y = 0; y < 20; ++y) {
      for (int x = 0; x < 17; ++x) {
        if (!a.at(y, x)) continue;
        for (int v = 0; v < 20; ++v) {
          for (int u = 0; u < 17; ++u) {
            if (b.at(v, u)) best = std::min(best, std::hypot(x - u, y - v));
          }
        }
      }
    }
    CHECK(MinPixelDistance(a, b) == doctest::Approx(best).epsilon(1e-12));
  }
}

TEST_CASE("depth mask joins nearby occluders in front") {
  BinaryMask v(20, 40);
  for (int y = 5; y < 10; ++y) v.set(y, 5);
  auto column = [](int x) {
    BinaryMask m(20, 40);
    for (int y = 0; y < 20; ++y) m.set(y, x);
    return m;
  };
  const std::vector<RankedMask> others{
      {column(15), 0},  // distance 10, in front
      {column(16), 0},  // distance 11
      {column(8), 3},   // near but behind the target
      {column(9), 1},   // near, in front
  };
  const BinaryMask d = DepthMask(v, others, 2, 10.0);
  CHECK(d == v.Union(column(15)).Union(column(9)));
  CHECK(DepthMask(v, others, 0, 10.0) == v);
  CHECK_THROWS_AS(DepthMask(v, others, 2, 0.0), Error);
}

}  // namespace
}  // namespace amodal
