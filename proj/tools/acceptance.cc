// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero when any evaluated criterion fails.
//
//   acceptance                       criteria 1-4 and 8
//   acceptance --criteria 5,6,7 --e2e-dir DIR
//
// DIR holds seed_*/ directories written by tools/run_e2e.sh, each with
// model.config.json (training config) and ablate/report.json.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "amodal/config.h"
#include "amodal/denoiser.h"
#include "amodal/error.h"
#include "amodal/eval.h"
#include "amodal/maskgen.h"
#include "amodal/rng.h"
#include "amodal/sampler.h"
#include "amodal/scenegen.h"
#include "amodal/schedule.h"
#include "amodal/schema.h"
#include "amodal/unet.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace amodal {
namespace {

// Pinned tolerances and budgets.
constexpr double kC1Seconds = 1.0;
constexpr double kC2Seconds = 120.0;
constexpr double kC3Seconds = 60.0;
constexpr double kC4Seconds = 10.0;
constexpr double kC8Seconds = 300.0;
constexpr int kForwardSamples = 10000;
constexpr double kSigmas = 3.0;
constexpr double kGradRelTol = 1e-4;
constexpr size_t kMaxGradParams = 1000;
constexpr int kHullGrid = 6;
constexpr int kHullMaxPoints = 4;
constexpr int kRandomMasks = 1000;
constexpr int kOracleScenes = 200;
constexpr size_t kBenchScenes = 500;
constexpr double kDepthR = 10.0;
constexpr size_t kMinTrainImages = 5000;
constexpr size_t kMinEvalScenes = 500;
constexpr double kBucket = 0.5;
constexpr double kMarginPoints = 0.05;  // 5 mIoU points on the [0, 1] scale
constexpr int kSeedsRequired = 2;
constexpr int kSeedsExpected = 3;
// Dips smaller than this are treated as noise when checking unimodality.
constexpr double kSweepNoise = 0.02;

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;
  std::vector<std::string> failures;

  void Check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
    }
  }
  void Note(const std::string& s) { notes.push_back(s); }
};

std::string Fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

double Since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Distance in representable floats; same-sign ordering trick.
int64_t UlpDistance(float a, float b) {
  auto key = [](float f) {
    const int32_t i = std::bit_cast<int32_t>(f);
    return i < 0 ? static_cast<int64_t>(INT32_MIN) - i : static_cast<int64_t>(i);
  };
  return std::llabs(key(a) - key(b));
}

bool BitEqual(float a, float b) {
  return std::bit_cast<uint32_t>(a) == std::bit_cast<uint32_t>(b);
}

ImageBuffer WideRandom(int h, int w, Rng& rng) {
  // Mix of magnitudes so the blend sees cancellation and large exponents.
  ImageBuffer img(h, w, 3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_int_distribution<int> e(-12, 6);
  for (float& v : img.data()) v = static_cast<float>(n(rng) * std::ldexp(1.0, e(rng)));
  return img;
}

BinaryMask RandomMask(int h, int w, double p, Rng& rng) {
  BinaryMask m(h, w);
  std::bernoulli_distribution b(p);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) m.set(y, x, b(rng));
  }
  return m;
}

// ---------------------------------------------------------------------------

Outcome Criterion1() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(DeriveSeed(1, "acceptance-combine"));
  const int h = 64, w = 64;
  int64_t worst_ulp = 0;
  size_t masked = 0, unmasked_bad = 0, masked_bad = 0;
  for (double s : {0.1, 0.15, 0.3, 0.45, 0.6, 0.9, 0.37, 0.999}) {
    const ImageBuffer xk = WideRandom(h, w, rng), xt = WideRandom(h, w, rng);
    const BinaryMask m = RandomMask(h, w, 0.4, rng);
    const ImageBuffer out = LeakageCombine(xk, xt, m, s);
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!m.at(y, x)) {
            unmasked_bad += !BitEqual(out.at(c, y, x), xt.at(c, y, x));
            continue;
          }
          ++masked;
          const long double ref = static_cast<long double>(s) * xk.at(c, y, x) +
                                  (1.0L - static_cast<long double>(s)) * xt.at(c, y, x);
          const int64_t d = UlpDistance(out.at(c, y, x), static_cast<float>(ref));
          worst_ulp = std::max(worst_ulp, d);
          masked_bad += d > 1;
        }
      }
    }
  }
  o.Check(unmasked_bad == 0, Fmt("%zu unmasked pixels differ from x_t", unmasked_bad));
  o.Check(masked_bad == 0, Fmt("%zu of %zu masked pixels beyond 1 ulp", masked_bad, masked));
  o.Note(Fmt("combine worst %lld ulp over %zu masked px", static_cast<long long>(worst_ulp),
             masked));

  // s = 1: known region from x_t, generated sample inside M.
  {
    const ImageBuffer xk = WideRandom(h, w, rng), xt = WideRandom(h, w, rng);
    const BinaryMask m = RandomMask(h, w, 0.5, rng);
    const ImageBuffer one = LeakageCombine(xk, xt, m, 1.0);
    const ImageBuffer zero = LeakageCombine(xk, xt, m, 0.0);
    size_t bad1 = 0, bad0 = 0;
    for (int c = 0; c < 3; ++c) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const float want = m.at(y, x) ? xk.at(c, y, x) : xt.at(c, y, x);
          bad1 += !BitEqual(one.at(c, y, x), want);
          bad0 += !BitEqual(zero.at(c, y, x), xt.at(c, y, x));
        }
      }
    }
    o.Check(bad1 == 0, Fmt("s=1 differs from the hard paste at %zu px", bad1));
    o.Check(bad0 == 0, Fmt("s=0 differs from x_t at %zu px", bad0));
  }

  // Guidance.
  {
    const ImageBuffer c = WideRandom(8, 8, rng), n = WideRandom(8, 8, rng);
    const ImageBuffer g0 = CfgCombine(c, n, 0.0);
    bool same = g0.SameShape(c);
    for (size_t i = 0; same && i < c.size(); ++i) same = BitEqual(g0.data()[i], c.data()[i]);
    o.Check(same, "w=0 is not the identity on the conditional prediction");

    ImageBuffer pc(1, 4, 1), pn(1, 4, 1);
    const float cv[4] = {1.0f, -0.5f, 2.0f, 0.0f}, nv[4] = {0.5f, 0.25f, 2.0f, 1.0f};
    std::copy(cv, cv + 4, pc.data().begin());
    std::copy(nv, nv + 4, pn.data().begin());
    const std::map<double, std::vector<float>> fixtures = {
        {0.75, {1.375f, -1.0625f, 2.0f, -0.75f}},
        {1.0, {1.5f, -1.25f, 2.0f, -1.0f}},
        {7.5, {4.75f, -6.125f, 2.0f, -7.5f}},
    };
    for (const auto& [wv, want] : fixtures) {
      const ImageBuffer g = CfgCombine(pc, pn, wv);
      for (int i = 0; i < 4; ++i) {
        o.Check(BitEqual(g.data()[i], want[i]),
                Fmt("guidance fixture w=%.2f index %d: %.9g != %.9g", wv, i, g.data()[i],
                    want[i]));
      }
    }
  }
  const double sec = Since(t0);
  o.Check(sec < kC1Seconds, Fmt("runtime %.2fs >= %.0fs", sec, kC1Seconds));
  o.Note(Fmt("%.3fs", sec));
  return o;
}

// ---------------------------------------------------------------------------

UNetArch MiniArch() {
  UNetArch a;
  a.base_width = 1;
  a.levels = 2;
  a.time_dim = 4;
  a.groups = 1;
  a.image_size = 4;
  return a;
}

Outcome Criterion2() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const NoiseSchedule sched = BuildSchedule(1000);

  // Iterated single steps vs the closed form, per checkpoint t.
  const std::vector<int> checkpoints = {1, 10, 100, 300, 500, 1000};
  const double x0 = 0.5;
  const int n = kForwardSamples;
  std::vector<double> x(n, x0);
  Rng rng(DeriveSeed(2, "acceptance-forward"));
  std::normal_distribution<double> z(0.0, 1.0);
  // Closed-form samples through ForwardDiffuse, one pixel per sample.
  const ImageBuffer clean(1, n, 1, static_cast<float>(x0));
  size_t next = 0;
  double worst_z = 0;
  auto moments = [](std::span<const double> v) {
    double m = 0;
    for (double a : v) m += a;
    m /= v.size();
    double q = 0;
    for (double a : v) q += (a - m) * (a - m);
    return std::pair{m, q / (v.size() - 1)};
  };
  for (int t = 1; t <= sched.T && next < checkpoints.size(); ++t) {
    const double a = std::sqrt(sched.alpha[t]), b = std::sqrt(sched.beta[t]);
    for (double& v : x) v = a * v + b * z(rng);
    if (t != checkpoints[next]) continue;
    ++next;
    const double mean = std::sqrt(sched.alpha_bar[t]) * x0;
    const double var = 1.0 - sched.alpha_bar[t];
    const double se_mean = std::sqrt(var / n);
    const double se_var = var * std::sqrt(2.0 / (n - 1));

    const ImageBuffer eps = GaussianImage(1, n, 1, rng);
    const ImageBuffer xt = ForwardDiffuse(clean, t, eps, sched);
    std::vector<double> closed(xt.data().begin(), xt.data().end());

    for (const auto& [name, v] : {std::pair<const char*, std::span<const double>>{"iterated", x},
                                  {"closed", closed}}) {
      const auto [m, s2] = moments(v);
      const double zm = std::abs(m - mean) / se_mean, zv = std::abs(s2 - var) / se_var;
      worst_z = std::max({worst_z, zm, zv});
      o.Check(zm <= kSigmas, Fmt("%s t=%d mean %.6g vs %.6g (%.2f sigma)", name, t, m, mean, zm));
      o.Check(zv <= kSigmas, Fmt("%s t=%d var %.6g vs %.6g (%.2f sigma)", name, t, s2, var, zv));
    }
    // Two-sample comparison of the iterated and closed-form populations.
    const auto [mi, vi] = moments(x);
    const auto [mc, vc] = moments(closed);
    const double zd = std::abs(mi - mc) / std::sqrt(2 * var / n);
    const double zdv = std::abs(vi - vc) / (se_var * std::sqrt(2.0));
    worst_z = std::max({worst_z, zd, zdv});
    o.Check(zd <= kSigmas && zdv <= kSigmas,
            Fmt("t=%d iterated vs closed differ (%.2f, %.2f sigma)", t, zd, zdv));
  }
  o.Note(Fmt("forward worst %.2f sigma", worst_z));

  // Training-loss gradient: eps-prediction MSE on a packed [x_t, M, (1-M) x0]
  // input, all parameters against a fourth-order central difference.
  UNet<double> net(MiniArch());
  o.Check(net.num_params() <= kMaxGradParams,
          Fmt("gradient network has %zu params", net.num_params()));
  const int hw = 16;
  std::normal_distribution<double> g(0.0, 0.5);
  std::vector<double> p(net.num_params());
  for (double& v : p) v = g(rng);
  std::vector<double> clean4(3 * hw), eps4(3 * hw), in(7 * hw);
  for (double& v : clean4) v = std::tanh(g(rng));
  for (double& v : eps4) v = z(rng);
  const int t = 137;
  const double sa = std::sqrt(sched.alpha_bar[t]), sb = std::sqrt(1 - sched.alpha_bar[t]);
  std::bernoulli_distribution coin(0.5);
  std::vector<double> mask(hw);
  for (double& v : mask) v = coin(rng) ? 1.0 : 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < hw; ++i) {
      in[c * hw + i] = sa * clean4[c * hw + i] + sb * eps4[c * hw + i];
      in[(4 + c) * hw + i] = (1 - mask[i]) * clean4[c * hw + i];
    }
  }
  for (int i = 0; i < hw; ++i) in[3 * hw + i] = mask[i];
  auto loss = [&](const std::vector<double>& params) {
    std::vector<double> out(eps4.size());
    net.Forward(params, in, t, out, nullptr);
    double l = 0;
    for (size_t i = 0; i < out.size(); ++i) l += (out[i] - eps4[i]) * (out[i] - eps4[i]);
    return l / out.size();
  };
  auto cache = net.NewCache();
  std::vector<double> out(eps4.size());
  net.Forward(p, in, t, out, cache.get());
  std::vector<double> dout(out.size());
  for (size_t i = 0; i < out.size(); ++i) dout[i] = 2.0 * (out[i] - eps4[i]) / out.size();
  std::vector<double> grad(p.size(), 0.0);
  net.Backward(p, *cache, dout, grad);
  double worst = 0;
  size_t bad = 0;
  // Step 1e-3: stencil roundoff (~eps |L| / h) stays near 1e-13, so even the
  // structurally zero gradients sit well inside the 1e-8 denominator floor,
  // while the h^4 truncation term is negligible.
  const double h = 1e-3;
  for (size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    auto at = [&](double d) {
      p[i] = saved + d;
      return loss(p);
    };
    const double num = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    p[i] = saved;
    const double rel =
        std::abs(num - grad[i]) / std::max({std::abs(num), std::abs(grad[i]), 1e-8});
    worst = std::max(worst, rel);
    if (rel >= kGradRelTol) {
      ++bad;
      if (bad <= 3) o.Check(false, Fmt("param %zu analytic %.9g numeric %.9g", i, grad[i], num));
    }
  }
  o.Check(bad == 0, Fmt("%zu of %zu gradients beyond %.0e relative", bad, p.size(), kGradRelTol));
  o.Note(Fmt("grad worst rel %.2e over %zu params", worst, p.size()));
  const double sec = Since(t0);
  o.Check(sec < kC2Seconds, Fmt("runtime %.1fs >= %.0fs", sec, kC2Seconds));
  o.Note(Fmt("%.1fs", sec));
  return o;
}

// ---------------------------------------------------------------------------

int64_t Cross(Point o, Point a, Point b) {
  return static_cast<int64_t>(a.x - o.x) * (b.y - o.y) -
         static_cast<int64_t>(a.y - o.y) * (b.x - o.x);
}

// p lies in the convex hull of pts iff it lies in some closed triangle, segment
// or point spanned by them; each test is a set of half-plane sign checks.
bool InHullBrute(Point p, const std::vector<Point>& pts) {
  const size_t n = pts.size();
  for (size_t i = 0; i < n; ++i) {
    if (pts[i] == p) return true;
    for (size_t j = i + 1; j < n; ++j) {
      const Point a = pts[i], b = pts[j];
      if (Cross(a, b, p) == 0 && std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
          std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y)) {
        return true;
      }
      for (size_t k = j + 1; k < n; ++k) {
        const Point c = pts[k];
        if (Cross(a, b, c) == 0) continue;  // degenerate: covered by segments
        const int64_t d1 = Cross(a, b, p), d2 = Cross(b, c, p), d3 = Cross(c, a, p);
        if ((d1 >= 0 && d2 >= 0 && d3 >= 0) || (d1 <= 0 && d2 <= 0 && d3 <= 0)) return true;
      }
    }
  }
  return false;
}

BinaryMask RectOracle(const BinaryMask& v) {
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

std::vector<Point> Pixels(const BinaryMask& m) {
  std::vector<Point> out;
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      if (m.at(y, x)) out.push_back({x, y});
    }
  }
  return out;
}

bool WithinPairwise(const std::vector<Point>& a, const std::vector<Point>& b, double r) {
  const double r2 = r * r;
  for (const Point& p : a) {
    for (const Point& q : b) {
      const double dx = p.x - q.x, dy = p.y - q.y;
      if (dx * dx + dy * dy <= r2) return true;
    }
  }
  return false;
}

Outcome Criterion3() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const int g = kHullGrid;
  std::vector<Point> cells;
  for (int y = 0; y < g; ++y) {
    for (int x = 0; x < g; ++x) cells.push_back({x, y});
  }
  size_t subsets = 0, hull_bad = 0;
  std::vector<int> idx;
  std::function<void(int)> rec = [&](int start) {
    if (!idx.empty()) {
      ++subsets;
      std::vector<Point> pts;
      BinaryMask v(g, g);
      for (int i : idx) {
        pts.push_back(cells[i]);
        v.set(cells[i].y, cells[i].x);
      }
      const BinaryMask via_mask = HullOf(v);
      const BinaryMask via_points = RasterizeHull(ConvexHull(pts), g, g);
      bool ok = true;
      for (const Point& c : cells) {
        const bool want = InHullBrute(c, pts);
        ok = ok && via_mask.at(c.y, c.x) == want && via_points.at(c.y, c.x) == want;
      }
      if (!ok) ++hull_bad;
    }
    if (static_cast<int>(idx.size()) == kHullMaxPoints) return;
    for (int i = start; i < g * g; ++i) {
      idx.push_back(i);
      rec(i + 1);
      idx.pop_back();
    }
  };
  rec(0);
  o.Check(subsets == 66711, Fmt("enumerated %zu subsets", subsets));
  o.Check(hull_bad == 0, Fmt("%zu point sets rasterise differently from the oracle", hull_bad));
  o.Note(Fmt("%zu point sets", subsets));

  // M contains V on random masks: scattered pixels and unions of blobs.
  Rng rng(DeriveSeed(3, "acceptance-masks"));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  size_t contain_bad = 0;
  for (int k = 0; k < kRandomMasks; ++k) {
    const int hgt = 8 + static_cast<int>(u(rng) * 57), wid = 8 + static_cast<int>(u(rng) * 57);
    BinaryMask v;
    if (k % 2 == 0) {
      v = RandomMask(hgt, wid, 0.01 + 0.3 * u(rng), rng);
    } else {
      v = BinaryMask(hgt, wid);
      const int blobs = 1 + static_cast<int>(u(rng) * 4);
      for (int b = 0; b < blobs; ++b) {
        const double cx = u(rng) * wid, cy = u(rng) * hgt, r = 1 + u(rng) * 8;
        for (int y = 0; y < hgt; ++y) {
          for (int x = 0; x < wid; ++x) {
            if ((x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r) v.set(y, x);
          }
        }
      }
    }
    if (v.Empty()) v.set(hgt / 2, wid / 2);
    contain_bad += !v.IsSubsetOf(HullOf(v));
  }
  o.Check(contain_bad == 0, Fmt("M misses V on %zu of %d masks", contain_bad, kRandomMasks));

  // R and D against scan and pairwise oracles.
  const json cfg = DefaultRunConfig();
  const SceneConfig sc = EvalSceneFromConfig(cfg);
  const std::vector<OcclusionBand> bands = DefaultBands();
  size_t rect_bad = 0, depth_bad = 0, depth_grew = 0;
  for (int i = 0; i < kOracleScenes; ++i) {
    Rng srng(DeriveSeed(3, "acceptance-scene", i));
    const Scene s = GenerateEvalScene(sc, bands[i % bands.size()], srng);
    const SceneObject& tgt = s.objects[s.target];
    rect_bad += !(InpaintingArea(s, MaskKind::kRectangle, kDepthR) == RectOracle(tgt.visible));
    BinaryMask d = tgt.visible;
    const std::vector<Point> vp = Pixels(tgt.visible);
    for (size_t k = 0; k < s.objects.size(); ++k) {
      if (static_cast<int>(k) == s.target) continue;
      if (s.objects[k].depth_rank >= tgt.depth_rank) continue;
      if (WithinPairwise(vp, Pixels(s.objects[k].visible), kDepthR)) {
        d = d.Union(s.objects[k].visible);
      }
    }
    depth_grew += !(d == tgt.visible);
    depth_bad += !(InpaintingArea(s, MaskKind::kDepth, kDepthR) == d);
  }
  o.Check(rect_bad == 0, Fmt("R differs from the scan oracle on %zu scenes", rect_bad));
  o.Check(depth_bad == 0, Fmt("D differs from the pairwise oracle on %zu scenes", depth_bad));
  o.Note(Fmt("D adds occluders in %zu/%d scenes", depth_grew, kOracleScenes));
  const double sec = Since(t0);
  o.Check(sec < kC3Seconds, Fmt("runtime %.1fs >= %.0fs", sec, kC3Seconds));
  o.Note(Fmt("%.1fs", sec));
  return o;
}

// ---------------------------------------------------------------------------

// Buckets must be nested by threshold and agree with the per-sample data.
void CheckNesting(const ReportRow& row, Outcome& o) {
  for (size_t b = 0; b < row.buckets.size(); ++b) {
    const double tau = row.buckets[b].tau;
    size_t n = 0;
    double sum = 0;
    for (const SampleResult& s : row.samples) {
      if (s.occlusion_rate <= tau) {
        ++n;
        sum += s.iou;
      }
    }
    o.Check(n == row.buckets[b].n, Fmt("%s bucket %.2f count %zu != %zu", row.variant.c_str(),
                                       tau, row.buckets[b].n, n));
    if (n > 0) {
      o.Check(row.buckets[b].miou && std::abs(*row.buckets[b].miou - sum / n) < 1e-12,
              Fmt("%s bucket %.2f mean disagrees", row.variant.c_str(), tau));
    }
    if (b > 0) {
      o.Check(row.buckets[b - 1].tau > tau && row.buckets[b - 1].n >= row.buckets[b].n,
              Fmt("%s bucket %.2f not nested in %.2f", row.variant.c_str(), tau,
                  row.buckets[b - 1].tau));
    }
  }
}

Outcome Criterion4() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  auto cols = [](int from, int to) {
    BinaryMask m(1, 6);
    for (int x = from; x < to; ++x) m.set(0, x);
    return m;
  };
  o.Check(Iou(cols(0, 3), cols(0, 3)) == 1.0, "identical masks do not give 1");
  o.Check(Iou(cols(0, 3), cols(3, 6)) == 0.0, "disjoint masks do not give 0");
  o.Check(Iou(cols(0, 4), cols(2, 6)) == 1.0 / 3.0, "overlap fixture is not exactly 1/3");

  const json cfg = DefaultRunConfig();
  const SceneConfig sc = EvalSceneFromConfig(cfg);
  const uint64_t root = cfg.at("seed").get<uint64_t>();
  const std::vector<OcclusionBand> bands = DefaultBands();
  Benchmark bench;
  for (size_t i = 0; i < kBenchScenes; ++i) {
    Rng rng(DeriveSeed(root, "scene", i));
    bench.scenes.push_back(GenerateEvalScene(sc, bands[i % bands.size()], rng));
    bench.ids.push_back(SceneId(i));
  }
  const EvalReport rep = MaskCoverageReport(bench, DefaultThresholds(), kDepthR);
  for (const ReportRow& row : rep.rows) CheckNesting(row, o);

  const ReportRow& modal = rep.Row("modal");
  size_t modal_bad = 0;
  for (size_t i = 0; i < bench.scenes.size(); ++i) {
    const SceneObject& t = bench.scenes[i].objects[bench.scenes[i].target];
    const double want = static_cast<double>(t.visible.Count()) / t.amodal.Count();
    modal_bad += !(modal.samples.at(i).id == bench.ids[i] && modal.samples[i].iou == want);
  }
  o.Check(modal_bad == 0, Fmt("modal IoU != |V|/|A| on %zu scenes", modal_bad));
  o.Note(Fmt("%zu scenes, %zu rows", bench.scenes.size(), rep.rows.size()));
  const double sec = Since(t0);
  o.Check(sec < kC4Seconds, Fmt("runtime %.1fs >= %.0fs", sec, kC4Seconds));
  o.Note(Fmt("%.1fs", sec));
  return o;
}

// ---------------------------------------------------------------------------

struct SeedRun {
  std::string name;
  EvalReport report;
  size_t train_images = 0;
};

std::vector<SeedRun> LoadSeedRuns(const std::string& dir, Outcome& o) {
  std::vector<SeedRun> runs;
  if (dir.empty() || !fs::is_directory(dir)) {
    o.Check(false, "no end-to-end directory '" + dir + "'");
    return runs;
  }
  std::vector<fs::path> seeds;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0) {
      seeds.push_back(e.path());
    }
  }
  std::sort(seeds.begin(), seeds.end());
  for (const fs::path& p : seeds) {
    SeedRun r;
    r.name = p.filename().string();
    try {
      r.report = ReadReport((p / "ablate" / "report.json").string());
      std::ifstream f(p / "model.config.json");
      const json tc = json::parse(f);
      std::ifstream idx(fs::path(tc.at("paths").at("data").get<std::string>()) / "train" /
                        "index.json");
      r.train_images = json::parse(idx).at("count").get<size_t>();
    } catch (const std::exception& e) {
      o.Check(false, r.name + ": " + e.what());
      continue;
    }
    const size_t scenes = r.report.config.value("scenes", size_t{0});
    o.Check(r.train_images >= kMinTrainImages,
            Fmt("%s trained on %zu images", r.name.c_str(), r.train_images));
    o.Check(scenes >= kMinEvalScenes, Fmt("%s evaluated %zu scenes", r.name.c_str(), scenes));
    runs.push_back(std::move(r));
  }
  o.Check(runs.size() == kSeedsExpected,
          Fmt("found %zu seed runs, expected %d", runs.size(), kSeedsExpected));
  return runs;
}

Outcome SeedPolicy(const std::string& dir,
                   const std::function<bool(const EvalReport&, std::string&)>& per_seed) {
  Outcome o;
  const std::vector<SeedRun> runs = LoadSeedRuns(dir, o);
  int ok = 0;
  for (const SeedRun& r : runs) {
    std::string detail;
    bool pass = false;
    try {
      pass = per_seed(r.report, detail);
    } catch (const std::exception& e) {
      detail = e.what();
    }
    ok += pass;
    o.Note(r.name + (pass ? " ok: " : " FAIL: ") + detail);
  }
  o.Check(ok >= kSeedsRequired, Fmt("%d of %zu seeds pass, need %d", ok, runs.size(),
                                    kSeedsRequired));
  return o;
}

Outcome Criterion5(const std::string& dir) {
  return SeedPolicy(dir, [](const EvalReport& r, std::string& d) {
    const double full = r.Row("full").Bucket(kBucket);
    const double modal = r.Row("modal").Bucket(kBucket);
    const double hull = r.Row("hull").Bucket(kBucket);
    d = Fmt("full %.1f modal %.1f hull %.1f", 100 * full, 100 * modal, 100 * hull);
    return full >= modal + kMarginPoints && full >= hull + kMarginPoints;
  });
}

Outcome Criterion6(const std::string& dir) {
  return SeedPolicy(dir, [](const EvalReport& r, std::string& d) {
    const double full = r.Row("full").Bucket(kBucket);
    const double nl = r.Row("no_leakage").Bucket(kBucket);
    const double wb = r.Row("white_background").Bucket(kBucket);
    const double nm = r.Row("no_mask").Bucket(kBucket);
    d = Fmt("full %.1f no_leakage %.1f white_background %.1f no_mask %.1f", 100 * full,
            100 * nl, 100 * wb, 100 * nm);
    return nl < wb && nl < nm && nl < full && wb < full && nm < full;
  });
}

Outcome Criterion7(const std::string& dir) {
  return SeedPolicy(dir, [](const EvalReport& r, std::string& d) {
    const std::vector<double> grid = SGrid();
    std::vector<double> v;
    for (double s : grid) v.push_back(r.Row(Fmt("s=%.2f", s)).Bucket(kBucket));
    const size_t arg = std::max_element(v.begin(), v.end()) - v.begin();
    // Unimodal up to noise: no rise of more than kSweepNoise while walking
    // away from the peak on either side.
    bool unimodal = true;
    for (size_t i = arg + 1; i < v.size(); ++i) {
      unimodal = unimodal && v[i] <= *std::min_element(v.begin() + arg, v.begin() + i) + kSweepNoise;
    }
    for (size_t i = arg; i-- > 0;) {
      unimodal = unimodal &&
                 v[i] <= *std::min_element(v.begin() + i + 1, v.begin() + arg + 1) + kSweepNoise;
    }
    // "Not at 0.9" with one grid point of slack: the argmax must stay at
    // least two grid points below the last.
    const bool away = arg + 2 < grid.size();
    d = "mIoU";
    for (size_t i = 0; i < v.size(); ++i) d += Fmt(" %.2f:%.1f", grid[i], 100 * v[i]);
    d += Fmt(" argmax %.2f", grid[arg]);
    if (!unimodal) d += " (not unimodal)";
    return away && unimodal;
  });
}

// ---------------------------------------------------------------------------

struct CliEnv {
  std::string cli;
  std::string schemas;
  fs::path work;
};

int Run(const CliEnv& env, const std::string& args, const std::string& log) {
  const std::string cmd =
      "\"" + env.cli + "\" " + args + " >>\"" + (env.work / log).string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string ReadBytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Lists files that differ between two trees (by relative path and bytes).
std::vector<std::string> TreeDiff(const fs::path& a, const fs::path& b) {
  std::set<std::string> names;
  for (const fs::path& root : {a, b}) {
    if (!fs::exists(root)) continue;
    if (fs::is_regular_file(root)) {
      names.insert("");
      continue;
    }
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) names.insert(fs::relative(e.path(), root).string());
    }
  }
  std::vector<std::string> diff;
  for (const std::string& n : names) {
    const fs::path pa = n.empty() ? a : a / n, pb = n.empty() ? b : b / n;
    if (!fs::exists(pa) || !fs::exists(pb) || ReadBytes(pa) != ReadBytes(pb)) {
      diff.push_back(n.empty() ? a.filename().string() : n);
    }
  }
  return diff;
}

// Runs `args` twice into the same output path and compares the results.
void Rerun(const CliEnv& env, const std::string& what, const std::string& args,
           const std::vector<fs::path>& outputs, Outcome& o) {
  for (const fs::path& p : outputs) fs::remove_all(p);
  if (Run(env, args, what + ".log") != 0) {
    o.Check(false, what + " failed, see " + (env.work / (what + ".log")).string());
    return;
  }
  for (const fs::path& p : outputs) {
    fs::remove_all(p.string() + ".first");
    fs::rename(p, p.string() + ".first");
  }
  if (Run(env, args, what + ".log") != 0) {
    o.Check(false, what + " rerun failed");
    return;
  }
  size_t files = 0;
  for (const fs::path& p : outputs) {
    const std::vector<std::string> d = TreeDiff(p.string() + ".first", p);
    std::string list;
    for (const std::string& s : d) list += " " + s;
    o.Check(d.empty(), what + " reruns differ:" + list);
    files += fs::is_directory(p)
                 ? std::distance(fs::recursive_directory_iterator(p),
                                 fs::recursive_directory_iterator())
                 : 1;
  }
  o.Note(Fmt("%s identical (%zu entries)", what.c_str(), files));
}

void CheckSchema(const json& j, const std::string& schema, const std::string& what,
                 Outcome& o) {
  try {
    RequireValid(j, schema);
  } catch (const Error& e) {
    o.Check(false, what + ": " + e.what());
  }
}

Outcome Criterion8(const CliEnv& env) {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  fs::remove_all(env.work);
  fs::create_directories(env.work);
  const fs::path data = env.work / "data", ck = env.work / "model.ck";
  const std::string model_flags =
      " --set model.base_width=4 --set model.levels=2 --set model.time_dim=8"
      " --set model.groups=2";
  const std::string w = env.work.string();

  Rerun(env, "gen-data",
        "gen-data --seed 11 -o \"" + data.string() + "\" --train-images 24 --scenes 6", {data},
        o);
  Rerun(env, "train",
        "train --seed 11 -d \"" + data.string() + "\" -o \"" + ck.string() +
            "\" --steps 4 --set train.batch_size=2 --set train.checkpoint_every=2" +
            model_flags,
        {ck, env.work / "model.loss.csv", env.work / "model.config.json"}, o);
  Rerun(env, "infer",
        "infer --seed 11 --checkpoint \"" + ck.string() + "\" --scene \"" +
            (data / "scenes" / "00001").string() + "\" --index 1 -o \"" + w +
            "/infer\" --steps 3 --trace" + model_flags,
        {env.work / "infer"}, o);
  Rerun(env, "eval",
        "eval --seed 11 --checkpoint \"" + ck.string() + "\" -d \"" + data.string() +
            "\" -o \"" + w + "/eval\" --limit 4 --set sampler.steps=3" + model_flags,
        {env.work / "eval"}, o);
  if (!o.pass) return o;

  const std::string schemas = env.schemas;
  try {
    // Checkpoint: header validates, and load -> save reproduces the file.
    const NoiseSchedule sched = CheckpointSchedule(ck.string());
    const LoadedCheckpoint lc = LoadCheckpoint(ck.string(), sched);
    CheckSchema(json::parse(lc.header_json), schemas + "/checkpoint_header.schema.json",
                "checkpoint header", o);
    const fs::path rt = env.work / "roundtrip.ck";
    SaveCheckpoint(rt.string(), lc.model, lc.state ? &*lc.state : nullptr);
    o.Check(ReadBytes(rt) == ReadBytes(ck), "checkpoint load/save round trip changed bytes");

    // Reports: validate, read back and rewrite byte-identically.
    for (const fs::path& rep : {env.work / "eval", env.work / "eval" / "mask_coverage"}) {
      const fs::path file = rep / "report.json";
      std::ifstream f(file);
      CheckSchema(json::parse(f), schemas + "/report.schema.json", file.string(), o);
      const fs::path again = env.work / ("roundtrip_" + rep.filename().string());
      WriteReport(again.string(), ReadReport(file.string()));
      o.Check(ReadBytes(again / "report.json") == ReadBytes(file),
              file.string() + " round trip changed bytes");
    }
    for (const auto& e : fs::directory_iterator(data / "scenes")) {
      std::ifstream f(e.path() / "meta.json");
      CheckSchema(json::parse(f), schemas + "/scene_meta.schema.json",
                  (e.path() / "meta.json").string(), o);
    }
  } catch (const std::exception& e) {
    o.Check(false, e.what());
  }
  const double sec = Since(t0);
  o.Check(sec < kC8Seconds, Fmt("runtime %.1fs >= %.0fs", sec, kC8Seconds));
  o.Note(Fmt("%.1fs", sec));
  return o;
}

}  // namespace
}  // namespace amodal

int main(int argc, char** argv) {
  using namespace amodal;
  CLI::App app{"Acceptance criteria"};
  std::vector<int> criteria = {1, 2, 3, 4, 8};
  std::string e2e_dir;
  CliEnv env;
  env.cli = AMODAL_CLI_PATH;
  env.schemas = AMODAL_SCHEMA_DIR;
  std::string work = (fs::temp_directory_path() / "amodal_acceptance").string();
  app.add_option("--criteria", criteria, "criteria to evaluate (1-8)")
      ->delimiter(',')
      ->check(CLI::Range(1, 8));
  app.add_option("--e2e-dir", e2e_dir, "directory of seed_* end-to-end runs");
  app.add_option("--cli", env.cli, "amodal binary");
  app.add_option("--schemas", env.schemas, "schema directory");
  app.add_option("--work", work, "scratch directory for criterion 8");
  CLI11_PARSE(app, argc, argv);
  env.work = work;

  const std::map<int, std::pair<const char*, std::function<Outcome()>>> table = {
      {1, {"combine and guidance exactness", Criterion1}},
      {2, {"forward process and loss gradients", Criterion2}},
      {3, {"geometry oracles", Criterion3}},
      {4, {"metric oracles", Criterion4}},
      {5, {"end-to-end margins over modal and hull", [&] { return Criterion5(e2e_dir); }}},
      {6, {"ablation direction", [&] { return Criterion6(e2e_dir); }}},
      {7, {"s-sweep shape", [&] { return Criterion7(e2e_dir); }}},
      {8, {"determinism and formats", [&] { return Criterion8(env); }}},
  };
  std::sort(criteria.begin(), criteria.end());
  criteria.erase(std::unique(criteria.begin(), criteria.end()), criteria.end());
  int failed = 0;
  for (int c : criteria) {
    const auto& [name, fn] = table.at(c);
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.Check(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::string line = Fmt("%s criterion %d: %s", o.pass ? "PASS" : "FAIL", c, name);
    std::string detail;
    for (const std::string& n : o.notes) detail += (detail.empty() ? "" : "; ") + n;
    if (!o.pass) {
      for (const std::string& f : o.failures) detail += (detail.empty() ? "" : "; ") + f;
    }
    std::printf("%s [%s]\n", line.c_str(), detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
