#ifndef AMODAL_MASKGEN_H_
#define AMODAL_MASKGEN_H_

#include <vector>

#include "amodal/image.h"

namespace amodal {

// Pixel coordinate; x is the column, y the row. Geometry treats a pixel as
// its centre point (x, y).
struct Point {
  int x = 0;
  int y = 0;
  bool operator==(const Point&) const = default;
};

struct ContourSet {
  std::vector<std::vector<Point>> contours;
  int height = 0;
  int width = 0;
};

// One closed boundary per 8-connected component, found by Moore-neighbour
// tracing from the component's first pixel in raster order. Components are
// listed in raster order of that pixel.
ContourSet ExtractContours(const BinaryMask& v);

// Labels 8-connected components (0 = background, 1..n in raster order of the
// first pixel) and returns the component count.
int LabelComponents(const BinaryMask& v, std::vector<int>& labels);

// Monotone-chain convex hull, counter-clockwise in image coordinates with
// collinear points dropped. Degenerate inputs give 1 or 2 points.
std::vector<Point> ConvexHull(std::vector<Point> points);

// Pixels whose centres lie inside or on the polygon.
BinaryMask RasterizeHull(const std::vector<Point>& hull, int height,
                         int width);

// Inpainting area M: filled convex hull of all contour vertices.
BinaryMask ConvexHullMask(const ContourSet& cs);

// Convenience: ConvexHullMask(ExtractContours(v)).
BinaryMask HullOf(const BinaryMask& v);

// Filled tight bounding box of V.
BinaryMask RectangleMask(const BinaryMask& v);

struct RankedMask {
  BinaryMask mask;
  int depth_rank = 0;  // 0 = frontmost
};

// V united with every other mask that is strictly in front of target_rank and
// whose closest pixel lies within Euclidean distance r of V.
BinaryMask DepthMask(const BinaryMask& v, const std::vector<RankedMask>& others,
                     int target_rank, double r = 10.0);

// Smallest Euclidean distance between set pixels of a and b (infinity if
// either is empty).
double MinPixelDistance(const BinaryMask& a, const BinaryMask& b);

}  // namespace amodal

#endif  // AMODAL_MASKGEN_H_
