#include "amodal/unet.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <random>

#include "amodal/error.h"

namespace amodal {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

constexpr double kNormEps = 1e-5;

struct Dims {
  int c = 0;
  int h = 0;
  int w = 0;
  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t size() const { return static_cast<size_t>(c) * plane(); }
};

struct ConvDesc {
  int cin = 0, cout = 0, k = 3, stride = 1, pad = 1;
  size_t w_off = 0, b_off = 0;
  int K() const { return cin * k * k; }
  Dims Out(Dims in) const {
    return {cout, (in.h + 2 * pad - k) / stride + 1,
            (in.w + 2 * pad - k) / stride + 1};
  }
};

struct NormDesc {
  int c = 0, groups = 1;
  size_t g_off = 0, b_off = 0;
};

struct LinDesc {
  int in = 0, out = 0;
  size_t w_off = 0, b_off = 0;
};

struct ResDesc {
  int cin = 0, cout = 0;
  NormDesc n1;
  ConvDesc c1;
  LinDesc proj;
  NormDesc n2;
  ConvDesc c2;
  bool has_skip = false;
  ConvDesc skip;
};

struct NetLayout {
  LinDesc t1, t2;
  ConvDesc conv_in;
  std::vector<ResDesc> down;
  std::vector<ConvDesc> downsample;
  ResDesc mid;
  std::vector<ConvDesc> upconv;  // upconv[l]: width(l+1) -> width(l)
  std::vector<ResDesc> up;       // up[l]: 2 * width(l) -> width(l)
  NormDesc n_out;
  ConvDesc conv_out;
  size_t total = 0;

  // Ranges that start at zero in InitParams.
  std::vector<std::pair<size_t, size_t>> zero_ranges;
  // Weight ranges with their fan-in, for uniform init.
  struct Fan {
    size_t off, count;
    int fan_in;
  };
  std::vector<Fan> fans;
  std::vector<std::pair<size_t, size_t>> unit_ranges;  // group-norm gammas
};

class Allocator {
 public:
  explicit Allocator(NetLayout& layout) : l_(layout) {}

  ConvDesc Conv(int cin, int cout, int k, int stride, bool zero = false) {
    ConvDesc d;
    d.cin = cin;
    d.cout = cout;
    d.k = k;
    d.stride = stride;
    d.pad = k / 2;
    d.w_off = Take(static_cast<size_t>(cout) * cin * k * k);
    d.b_off = Take(cout);
    const size_t wcount = static_cast<size_t>(cout) * cin * k * k;
    if (zero) {
      l_.zero_ranges.push_back({d.w_off, wcount + cout});
    } else {
      l_.fans.push_back({d.w_off, wcount + cout, cin * k * k});
    }
    return d;
  }

  LinDesc Linear(int in, int out) {
    LinDesc d{in, out, Take(static_cast<size_t>(in) * out), 0};
    d.b_off = Take(out);
    l_.fans.push_back({d.w_off, static_cast<size_t>(in) * out + out, in});
    return d;
  }

  NormDesc Norm(int c, int groups) {
    NormDesc d;
    d.c = c;
    d.groups = std::max(1, std::min(groups, c));
    while (c % d.groups != 0) --d.groups;
    d.g_off = Take(c);
    d.b_off = Take(c);
    l_.unit_ranges.push_back({d.g_off, static_cast<size_t>(c)});
    return d;
  }

  ResDesc Res(int cin, int cout, int emb, int groups) {
    ResDesc r;
    r.cin = cin;
    r.cout = cout;
    r.n1 = Norm(cin, groups);
    r.c1 = Conv(cin, cout, 3, 1);
    r.proj = Linear(emb, cout);
    r.n2 = Norm(cout, groups);
    r.c2 = Conv(cout, cout, 3, 1, /*zero=*/true);
    r.has_skip = cin != cout;
    if (r.has_skip) r.skip = Conv(cin, cout, 1, 1);
    return r;
  }

 private:
  size_t Take(size_t n) {
    const size_t off = l_.total;
    l_.total += n;
    return off;
  }
  NetLayout& l_;
};

// ---------------------------------------------------------------------------
// Layer kernels.

template <typename T>
void Im2Col(const T* in, Dims d, const ConvDesc& cd, Dims od, T* cols) {
  const int k = cd.k;
  const size_t n = od.plane();
  for (int ci = 0; ci < d.c; ++ci) {
    const T* src = in + static_cast<size_t>(ci) * d.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = cols + ((static_cast<size_t>(ci) * k + ky) * k + kx) * n;
        // Output columns whose input column falls inside the image.
        const int shift = kx - cd.pad;
        int lo = 0;
        while (lo < od.w && lo * cd.stride + shift < 0) ++lo;
        int hi = od.w;
        while (hi > lo && (hi - 1) * cd.stride + shift >= d.w) --hi;
        for (int oy = 0; oy < od.h; ++oy) {
          const int iy = oy * cd.stride - cd.pad + ky;
          T* dst = row + static_cast<size_t>(oy) * od.w;
          if (iy < 0 || iy >= d.h) {
            std::fill(dst, dst + od.w, T(0));
            continue;
          }
          const T* line = src + static_cast<size_t>(iy) * d.w;
          std::fill(dst, dst + lo, T(0));
          if (cd.stride == 1) {
            std::copy(line + lo + shift, line + hi + shift, dst + lo);
          } else {
            for (int ox = lo; ox < hi; ++ox) {
              dst[ox] = line[ox * cd.stride + shift];
            }
          }
          std::fill(dst + hi, dst + od.w, T(0));
        }
      }
    }
  }
}

template <typename T>
void Col2Im(const T* cols, Dims d, const ConvDesc& cd, Dims od, T* din) {
  const int k = cd.k;
  const size_t n = od.plane();
  for (int ci = 0; ci < d.c; ++ci) {
    T* dst = din + static_cast<size_t>(ci) * d.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row =
            cols + ((static_cast<size_t>(ci) * k + ky) * k + kx) * n;
        for (int oy = 0; oy < od.h; ++oy) {
          const int iy = oy * cd.stride - cd.pad + ky;
          if (iy < 0 || iy >= d.h) continue;
          T* line = dst + static_cast<size_t>(iy) * d.w;
          const T* src = row + static_cast<size_t>(oy) * od.w;
          for (int ox = 0; ox < od.w; ++ox) {
            const int ix = ox * cd.stride - cd.pad + kx;
            if (ix >= 0 && ix < d.w) line[ix] += src[ox];
          }
        }
      }
    }
  }
}

template <typename T>
struct ConvCache {
  Dims in;
  std::vector<T> cols;
};

// out must hold cd.Out(d).size() values.
template <typename T>
void ConvForward(const ConvDesc& cd, const T* p, const T* in, Dims d, T* out,
                 ConvCache<T>& cache) {
  const Dims od = cd.Out(d);
  const int K = cd.K();
  const auto n = static_cast<Eigen::Index>(od.plane());
  cache.in = d;
  if (cd.k == 1 && cd.stride == 1) {
    cache.cols.assign(in, in + d.size());
  } else {
    cache.cols.resize(static_cast<size_t>(K) * n);
    Im2Col(in, d, cd, od, cache.cols.data());
  }
  CMapM<T> w(p + cd.w_off, cd.cout, K);
  CMapM<T> cols(cache.cols.data(), K, n);
  MapM<T> o(out, cd.cout, n);
  o.noalias() = w * cols;
  for (int co = 0; co < cd.cout; ++co) o.row(co).array() += p[cd.b_off + co];
}

// Accumulates parameter gradients into g and, when din is non-null, the input
// gradient into din.
template <typename T>
void ConvBackward(const ConvDesc& cd, const T* p, const ConvCache<T>& cache,
                  const T* dout, T* g, T* din) {
  const Dims d = cache.in;
  const Dims od = cd.Out(d);
  const int K = cd.K();
  const auto n = static_cast<Eigen::Index>(od.plane());
  CMapM<T> dy(dout, cd.cout, n);
  CMapM<T> cols(cache.cols.data(), K, n);
  MapM<T> dw(g + cd.w_off, cd.cout, K);
  dw.noalias() += dy * cols.transpose();
  // Plain loop: Eigen's vectorised sum peels by address, so its rounding
  // would depend on buffer alignment.
  for (int co = 0; co < cd.cout; ++co) {
    const T* row = dout + static_cast<size_t>(co) * n;
    T acc = T(0);
    for (Eigen::Index i = 0; i < n; ++i) acc += row[i];
    g[cd.b_off + co] += acc;
  }
  if (din == nullptr) return;
  CMapM<T> w(p + cd.w_off, cd.cout, K);
  if (cd.k == 1 && cd.stride == 1) {
    MapM<T> dx(din, K, n);
    dx.noalias() += w.transpose() * dy;
    return;
  }
  Mat<T> dcols = w.transpose() * dy;
  Col2Im(dcols.data(), d, cd, od, din);
}

template <typename T>
struct NormCache {
  std::vector<T> xhat;
  std::vector<T> inv_std;
};

template <typename T>
void NormForward(const NormDesc& nd, const T* p, const T* in, Dims d, T* out,
                 NormCache<T>& cache) {
  const int cpg = nd.c / nd.groups;
  const size_t n = static_cast<size_t>(cpg) * d.plane();
  cache.xhat.resize(d.size());
  cache.inv_std.resize(nd.groups);
  for (int g = 0; g < nd.groups; ++g) {
    const size_t base = static_cast<size_t>(g) * n;
    double mean = 0.0;
    for (size_t i = 0; i < n; ++i) mean += in[base + i];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const double dv = in[base + i] - mean;
      var += dv * dv;
    }
    var /= static_cast<double>(n);
    const T inv = static_cast<T>(1.0 / std::sqrt(var + kNormEps));
    cache.inv_std[g] = inv;
    const T m = static_cast<T>(mean);
    for (int cc = 0; cc < cpg; ++cc) {
      const int c = g * cpg + cc;
      const T gamma = p[nd.g_off + c];
      const T beta = p[nd.b_off + c];
      const size_t off = static_cast<size_t>(c) * d.plane();
      for (size_t i = 0; i < d.plane(); ++i) {
        const T xh = (in[off + i] - m) * inv;
        cache.xhat[off + i] = xh;
        out[off + i] = gamma * xh + beta;
      }
    }
  }
}

template <typename T>
void NormBackward(const NormDesc& nd, const T* p, const NormCache<T>& cache,
                  Dims d, const T* dout, T* g, T* din) {
  const int cpg = nd.c / nd.groups;
  const size_t n = static_cast<size_t>(cpg) * d.plane();
  for (int grp = 0; grp < nd.groups; ++grp) {
    T sum_dxh = 0;
    T sum_dxh_xh = 0;
    for (int cc = 0; cc < cpg; ++cc) {
      const int c = grp * cpg + cc;
      const T gamma = p[nd.g_off + c];
      const size_t off = static_cast<size_t>(c) * d.plane();
      T dg = 0;
      T db = 0;
      for (size_t i = 0; i < d.plane(); ++i) {
        const T dy = dout[off + i];
        const T xh = cache.xhat[off + i];
        dg += dy * xh;
        db += dy;
        sum_dxh += dy * gamma;
        sum_dxh_xh += dy * gamma * xh;
      }
      g[nd.g_off + c] += dg;
      g[nd.b_off + c] += db;
    }
    const T inv = cache.inv_std[grp];
    const T nn = static_cast<T>(n);
    for (int cc = 0; cc < cpg; ++cc) {
      const int c = grp * cpg + cc;
      const T gamma = p[nd.g_off + c];
      const size_t off = static_cast<size_t>(c) * d.plane();
      for (size_t i = 0; i < d.plane(); ++i) {
        const T dxh = dout[off + i] * gamma;
        din[off + i] += inv / nn *
                        (nn * dxh - sum_dxh - cache.xhat[off + i] * sum_dxh_xh);
      }
    }
  }
}

// Eigen's packet exp and its scalar fallback differ in the last ulp, and which
// elements take the scalar path depends on buffer alignment. Staging through
// an aligned block keeps every element on the packet path, so results do not
// depend on where the buffers live.
inline constexpr int kSiluBlock = 64;

template <typename T>
using Block = Eigen::Array<T, kSiluBlock, 1>;

template <typename T, typename F>
void Blockwise(size_t n, F&& f) {
  for (size_t i = 0; i < n; i += kSiluBlock) {
    f(i, std::min<size_t>(kSiluBlock, n - i));
  }
}

template <typename T>
void SiluForward(const T* in, size_t n, T* out) {
  Blockwise<T>(n, [&](size_t i, size_t len) {
    Block<T> x = Block<T>::Zero();
    std::copy(in + i, in + i + len, x.data());
    const Block<T> y = x / (T(1) + (-x).exp());
    std::copy(y.data(), y.data() + len, out + i);
  });
}

// din[i] = dout[i] * silu'(pre[i]) (overwrites).
template <typename T>
void SiluBackward(const T* pre, const T* dout, size_t n, T* din) {
  Blockwise<T>(n, [&](size_t i, size_t len) {
    Block<T> x = Block<T>::Zero(), dy = Block<T>::Zero();
    std::copy(pre + i, pre + i + len, x.data());
    std::copy(dout + i, dout + i + len, dy.data());
    const Block<T> sig = T(1) / (T(1) + (-x).exp());
    const Block<T> d = dy * sig * (T(1) + x * (T(1) - sig));
    std::copy(d.data(), d.data() + len, din + i);
  });
}

template <typename T>
void LinearForward(const LinDesc& ld, const T* p, const T* in, T* out) {
  for (int o = 0; o < ld.out; ++o) {
    T acc = p[ld.b_off + o];
    const T* w = p + ld.w_off + static_cast<size_t>(o) * ld.in;
    for (int i = 0; i < ld.in; ++i) acc += w[i] * in[i];
    out[o] = acc;
  }
}

template <typename T>
void LinearBackward(const LinDesc& ld, const T* p, const T* in, const T* dout,
                    T* g, T* din) {
  for (int o = 0; o < ld.out; ++o) {
    g[ld.b_off + o] += dout[o];
    T* gw = g + ld.w_off + static_cast<size_t>(o) * ld.in;
    const T* w = p + ld.w_off + static_cast<size_t>(o) * ld.in;
    for (int i = 0; i < ld.in; ++i) {
      gw[i] += dout[o] * in[i];
      if (din != nullptr) din[i] += dout[o] * w[i];
    }
  }
}

template <typename T>
void Upsample2(const T* in, Dims d, T* out) {
  const int wo = d.w * 2;
  for (int c = 0; c < d.c; ++c) {
    const T* src = in + static_cast<size_t>(c) * d.plane();
    T* dst = out + static_cast<size_t>(c) * d.plane() * 4;
    for (int y = 0; y < d.h * 2; ++y) {
      for (int x = 0; x < wo; ++x) {
        dst[static_cast<size_t>(y) * wo + x] = src[(y / 2) * d.w + x / 2];
      }
    }
  }
}

// Adjoint of Upsample2: sums each 2x2 block of dout into din.
template <typename T>
void Upsample2Backward(const T* dout, Dims d, T* din) {
  const int wo = d.w * 2;
  for (int c = 0; c < d.c; ++c) {
    const T* src = dout + static_cast<size_t>(c) * d.plane() * 4;
    T* dst = din + static_cast<size_t>(c) * d.plane();
    for (int y = 0; y < d.h * 2; ++y) {
      for (int x = 0; x < wo; ++x) {
        dst[(y / 2) * d.w + x / 2] += src[static_cast<size_t>(y) * wo + x];
      }
    }
  }
}

template <typename T>
void TimestepEmbedding(int t, int dim, T* out) {
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq =
        std::exp(-std::log(10000.0) * static_cast<double>(i) / half);
    out[i] = static_cast<T>(std::sin(t * freq));
    out[half + i] = static_cast<T>(std::cos(t * freq));
  }
}

template <typename T>
struct ResCache {
  Dims in;
  NormCache<T> n1;
  std::vector<T> h1;  // norm1 output (pre-activation)
  ConvCache<T> c1;
  NormCache<T> n2;
  std::vector<T> h2;  // norm2 output (pre-activation)
  ConvCache<T> c2;
  ConvCache<T> skip;
  std::vector<T> act, z, proj, s;  // scratch
};

template <typename T>
void ResForward(const ResDesc& r, const T* p, const T* in, Dims d,
                const T* temb, int emb_dim, T* out, ResCache<T>& c) {
  (void)emb_dim;
  c.in = d;
  const Dims od{r.cout, d.h, d.w};
  c.h1.resize(d.size());
  NormForward(r.n1, p, in, d, c.h1.data(), c.n1);
  std::vector<T>& a = c.act;
  a.resize(std::max(d.size(), od.size()));
  SiluForward(c.h1.data(), d.size(), a.data());
  std::vector<T>& z = c.z;
  z.resize(od.size());
  ConvForward(r.c1, p, a.data(), d, z.data(), c.c1);
  std::vector<T>& proj = c.proj;
  proj.resize(r.cout);
  LinearForward(r.proj, p, temb, proj.data());
  for (int co = 0; co < r.cout; ++co) {
    T* zp = z.data() + static_cast<size_t>(co) * od.plane();
    for (size_t i = 0; i < od.plane(); ++i) zp[i] += proj[co];
  }
  c.h2.resize(od.size());
  NormForward(r.n2, p, z.data(), od, c.h2.data(), c.n2);
  SiluForward(c.h2.data(), od.size(), a.data());
  ConvForward(r.c2, p, a.data(), od, out, c.c2);
  if (r.has_skip) {
    std::vector<T>& s = c.s;
    s.resize(od.size());
    ConvForward(r.skip, p, in, d, s.data(), c.skip);
    for (size_t i = 0; i < od.size(); ++i) out[i] += s[i];
  } else {
    for (size_t i = 0; i < od.size(); ++i) out[i] += in[i];
  }
}

// din (size of input) and dtemb (emb_dim) are accumulated into.
template <typename T>
void ResBackward(const ResDesc& r, const T* p, const ResCache<T>& c,
                 const T* temb, const T* dout, T* g, T* din, T* dtemb) {
  const Dims d = c.in;
  const Dims od{r.cout, d.h, d.w};
  std::vector<T> da(od.size(), T(0));
  ConvBackward(r.c2, p, c.c2, dout, g, da.data());
  std::vector<T> dh(od.size());
  SiluBackward(c.h2.data(), da.data(), od.size(), dh.data());
  std::vector<T> dz(od.size(), T(0));
  NormBackward(r.n2, p, c.n2, od, dh.data(), g, dz.data());
  std::vector<T> dproj(r.cout, T(0));
  for (int co = 0; co < r.cout; ++co) {
    const T* zp = dz.data() + static_cast<size_t>(co) * od.plane();
    T acc = 0;
    for (size_t i = 0; i < od.plane(); ++i) acc += zp[i];
    dproj[co] = acc;
  }
  LinearBackward(r.proj, p, temb, dproj.data(), g, dtemb);
  std::vector<T> da1(d.size(), T(0));
  ConvBackward(r.c1, p, c.c1, dz.data(), g, da1.data());
  std::vector<T> dh1(d.size());
  SiluBackward(c.h1.data(), da1.data(), d.size(), dh1.data());
  NormBackward(r.n1, p, c.n1, d, dh1.data(), g, din);
  if (r.has_skip) {
    ConvBackward(r.skip, p, c.skip, dout, g, din);
  } else {
    for (size_t i = 0; i < d.size(); ++i) din[i] += dout[i];
  }
}

NetLayout BuildLayout(const UNetArch& a) {
  NetLayout l;
  Allocator alloc(l);
  const int emb = a.base_width * 4;
  l.t1 = alloc.Linear(a.time_dim, emb);
  l.t2 = alloc.Linear(emb, emb);
  l.conv_in = alloc.Conv(a.in_channels, a.Width(0), 3, 1);
  for (int lv = 0; lv < a.levels; ++lv) {
    l.down.push_back(alloc.Res(a.Width(lv), a.Width(lv), emb, a.groups));
    if (lv + 1 < a.levels) {
      l.downsample.push_back(alloc.Conv(a.Width(lv), a.Width(lv + 1), 3, 2));
    }
  }
  const int deepest = a.Width(a.levels - 1);
  l.mid = alloc.Res(deepest, deepest, emb, a.groups);
  l.up.resize(a.levels);
  l.upconv.resize(a.levels > 1 ? a.levels - 1 : 0);
  for (int lv = a.levels - 1; lv >= 0; --lv) {
    if (lv + 1 < a.levels) {
      l.upconv[lv] = alloc.Conv(a.Width(lv + 1), a.Width(lv), 3, 1);
    }
    l.up[lv] = alloc.Res(2 * a.Width(lv), a.Width(lv), emb, a.groups);
  }
  l.n_out = alloc.Norm(a.Width(0), a.groups);
  l.conv_out = alloc.Conv(a.Width(0), a.out_channels, 3, 1, /*zero=*/true);
  return l;
}

}  // namespace

std::string ValidateArch(const UNetArch& a) {
  if (a.in_channels <= 0 || a.out_channels <= 0) return "channel counts";
  if (a.base_width <= 0) return "base_width must be positive";
  if (a.levels < 1 || a.levels > 6) return "levels must be in [1, 6]";
  if (a.time_dim < 2 || a.time_dim % 2 != 0) return "time_dim must be even";
  if (a.groups < 1) return "groups must be positive";
  if (a.image_size <= 0 || a.image_size % (1 << (a.levels - 1)) != 0) {
    return "image_size must be divisible by 2^(levels-1)";
  }
  return {};
}

template <typename T>
struct UNet<T>::Layout : NetLayout {};

template <typename T>
struct UNet<T>::Cache {
  std::vector<T> temb0, e1, a1, e2, temb;
  ConvCache<T> conv_in;
  std::vector<Dims> level_dims;
  std::vector<ResCache<T>> down;
  std::vector<ConvCache<T>> downsample;
  ResCache<T> mid;
  std::vector<ConvCache<T>> upconv;
  std::vector<ResCache<T>> up;
  NormCache<T> n_out;
  std::vector<T> h_out;
  ConvCache<T> conv_out;
};

template <typename T>
UNet<T>::UNet(const UNetArch& arch) : arch_(arch) {
  const std::string err = ValidateArch(arch);
  if (!err.empty()) Fail(ErrorKind::kInvalidArgument, "UNetArch: " + err);
  layout_ = std::make_unique<Layout>();
  static_cast<NetLayout&>(*layout_) = BuildLayout(arch);
}

template <typename T>
UNet<T>::~UNet() = default;
template <typename T>
UNet<T>::UNet(UNet&&) noexcept = default;
template <typename T>
UNet<T>& UNet<T>::operator=(UNet&&) noexcept = default;

template <typename T>
size_t UNet<T>::num_params() const {
  return layout_->total;
}

template <typename T>
std::vector<T> UNet<T>::InitParams(uint64_t seed) const {
  std::vector<T> p(layout_->total, T(0));
  std::mt19937_64 rng(seed);
  for (const auto& f : layout_->fans) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(f.fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (size_t i = 0; i < f.count; ++i) p[f.off + i] = static_cast<T>(u(rng));
  }
  for (const auto& [off, count] : layout_->unit_ranges) {
    std::fill(p.begin() + off, p.begin() + off + count, T(1));
  }
  for (const auto& [off, count] : layout_->zero_ranges) {
    std::fill(p.begin() + off, p.begin() + off + count, T(0));
  }
  return p;
}

template <typename T>
void UNet<T>::CacheDeleter::operator()(Cache* cache) const {
  delete cache;
}

template <typename T>
typename UNet<T>::CachePtr UNet<T>::NewCache() const {
  return CachePtr(new Cache());
}

template <typename T>
void UNet<T>::Forward(std::span<const T> params, std::span<const T> input,
                      int t, std::span<T> output, Cache* cache) const {
  const NetLayout& l = *layout_;
  const UNetArch& a = arch_;
  Require(params.size() == l.total, ErrorKind::kShapeMismatch,
          "UNet: parameter count mismatch");
  const size_t plane = input.size() / a.in_channels;
  const int side = static_cast<int>(std::lround(std::sqrt(plane)));
  Require(static_cast<size_t>(side) * side * a.in_channels == input.size(),
          ErrorKind::kShapeMismatch, "UNet: input must be square");
  Require(side % (1 << (a.levels - 1)) == 0, ErrorKind::kShapeMismatch,
          "UNet: input side not divisible by 2^(levels-1)");
  Require(output.size() == plane * a.out_channels, ErrorKind::kShapeMismatch,
          "UNet: output size mismatch");

  CachePtr scratch;
  if (cache == nullptr) {
    scratch = NewCache();
    cache = scratch.get();
  }
  Cache& c = *cache;
  const T* p = params.data();
  const int emb = a.base_width * 4;

  c.temb0.resize(a.time_dim);
  TimestepEmbedding(t, a.time_dim, c.temb0.data());
  c.e1.resize(emb);
  LinearForward(l.t1, p, c.temb0.data(), c.e1.data());
  c.a1.resize(emb);
  SiluForward(c.e1.data(), emb, c.a1.data());
  c.e2.resize(emb);
  LinearForward(l.t2, p, c.a1.data(), c.e2.data());
  c.temb.resize(emb);
  SiluForward(c.e2.data(), emb, c.temb.data());

  Dims d{a.in_channels, side, side};
  Dims hd = l.conv_in.Out(d);
  std::vector<T> h(hd.size());
  ConvForward(l.conv_in, p, input.data(), d, h.data(), c.conv_in);

  c.level_dims.assign(a.levels, Dims{});
  c.down.resize(a.levels);
  c.downsample.resize(l.downsample.size());
  std::vector<std::vector<T>> skips(a.levels);
  for (int lv = 0; lv < a.levels; ++lv) {
    c.level_dims[lv] = hd;
    std::vector<T> o(hd.size());
    ResForward(l.down[lv], p, h.data(), hd, c.temb.data(), emb, o.data(),
               c.down[lv]);
    skips[lv] = o;
    if (lv + 1 < a.levels) {
      const Dims nd = l.downsample[lv].Out(hd);
      h.assign(nd.size(), T(0));
      ConvForward(l.downsample[lv], p, o.data(), hd, h.data(),
                  c.downsample[lv]);
      hd = nd;
    } else {
      h = std::move(o);
    }
  }
  {
    std::vector<T> o(hd.size());
    ResForward(l.mid, p, h.data(), hd, c.temb.data(), emb, o.data(), c.mid);
    h = std::move(o);
  }
  c.up.resize(a.levels);
  c.upconv.resize(l.upconv.size());
  for (int lv = a.levels - 1; lv >= 0; --lv) {
    const Dims ld = c.level_dims[lv];
    if (lv + 1 < a.levels) {
      const Dims sd{hd.c, hd.h * 2, hd.w * 2};
      std::vector<T> upsampled(sd.size());
      Upsample2(h.data(), hd, upsampled.data());
      h.assign(ld.size(), T(0));
      ConvForward(l.upconv[lv], p, upsampled.data(), sd, h.data(),
                  c.upconv[lv]);
    }
    const Dims cat{2 * ld.c, ld.h, ld.w};
    std::vector<T> catv(cat.size());
    std::copy(h.begin(), h.end(), catv.begin());
    std::copy(skips[lv].begin(), skips[lv].end(), catv.begin() + ld.size());
    std::vector<T> o(ld.size());
    ResForward(l.up[lv], p, catv.data(), cat, c.temb.data(), emb, o.data(),
               c.up[lv]);
    h = std::move(o);
    hd = ld;
  }
  c.h_out.resize(hd.size());
  NormForward(l.n_out, p, h.data(), hd, c.h_out.data(), c.n_out);
  std::vector<T> act(hd.size());
  SiluForward(c.h_out.data(), hd.size(), act.data());
  ConvForward(l.conv_out, p, act.data(), hd, output.data(), c.conv_out);
}

template <typename T>
void UNet<T>::Backward(std::span<const T> params, const Cache& c,
                       std::span<const T> d_output, std::span<T> grad) const {
  const NetLayout& l = *layout_;
  const UNetArch& a = arch_;
  Require(grad.size() == l.total, ErrorKind::kShapeMismatch,
          "UNet: gradient size mismatch");
  const T* p = params.data();
  T* g = grad.data();
  const int emb = a.base_width * 4;
  std::vector<T> dtemb(emb, T(0));

  const Dims top = c.level_dims[0];
  std::vector<T> dact(top.size(), T(0));
  ConvBackward(l.conv_out, p, c.conv_out, d_output.data(), g, dact.data());
  std::vector<T> dh_out(top.size());
  SiluBackward(c.h_out.data(), dact.data(), top.size(), dh_out.data());
  std::vector<T> dh(top.size(), T(0));
  NormBackward(l.n_out, p, c.n_out, top, dh_out.data(), g, dh.data());

  // Up path, shallow to deep.
  std::vector<std::vector<T>> dskip(a.levels);
  std::vector<T> dmid;
  for (int lv = 0; lv < a.levels; ++lv) {
    const Dims ld = c.level_dims[lv];
    std::vector<T> dcat(2 * ld.size(), T(0));
    ResBackward(l.up[lv], p, c.up[lv], c.temb.data(), dh.data(), g,
                dcat.data(), dtemb.data());
    dskip[lv].assign(dcat.begin() + ld.size(), dcat.end());
    if (lv + 1 < a.levels) {
      const Dims deeper = c.level_dims[lv + 1];
      const Dims sd{deeper.c, ld.h, ld.w};
      std::vector<T> dup(sd.size(), T(0));
      ConvBackward(l.upconv[lv], p, c.upconv[lv], dcat.data(), g, dup.data());
      dh.assign(deeper.size(), T(0));
      Upsample2Backward(dup.data(), deeper, dh.data());
    } else {
      dmid.assign(dcat.begin(), dcat.begin() + ld.size());
    }
  }

  // Mid block feeds from the deepest skip.
  const int deepest = a.levels - 1;
  {
    const Dims dd = c.level_dims[deepest];
    std::vector<T> din(dd.size(), T(0));
    ResBackward(l.mid, p, c.mid, c.temb.data(), dmid.data(), g, din.data(),
                dtemb.data());
    for (size_t i = 0; i < din.size(); ++i) dskip[deepest][i] += din[i];
  }

  // Down path, deep to shallow. dskip[lv] holds the full gradient of the
  // level's residual-block output once the deeper level has been processed.
  for (int lv = deepest; lv >= 0; --lv) {
    const Dims ld = c.level_dims[lv];
    std::vector<T> din(ld.size(), T(0));
    ResBackward(l.down[lv], p, c.down[lv], c.temb.data(), dskip[lv].data(), g,
                din.data(), dtemb.data());
    if (lv == 0) {
      ConvBackward(l.conv_in, p, c.conv_in, din.data(), g,
                   static_cast<T*>(nullptr));
    } else {
      ConvBackward(l.downsample[lv - 1], p, c.downsample[lv - 1], din.data(),
                   g, dskip[lv - 1].data());
    }
  }

  std::vector<T> de2(emb);
  SiluBackward(c.e2.data(), dtemb.data(), emb, de2.data());
  std::vector<T> da1(emb, T(0));
  LinearBackward(l.t2, p, c.a1.data(), de2.data(), g, da1.data());
  std::vector<T> de1(emb);
  SiluBackward(c.e1.data(), da1.data(), emb, de1.data());
  LinearBackward(l.t1, p, c.temb0.data(), de1.data(), g,
                 static_cast<T*>(nullptr));
}

template class UNet<float>;
template class UNet<double>;

}  // namespace amodal
