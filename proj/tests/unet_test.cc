#include "amodal/unet.h"

#include <cmath>
#include <random>
#include <vector>

#include "doctest.h"

namespace amodal {
namespace {

UNetArch MiniArch() {
  UNetArch a;
  a.base_width = 1;
  a.levels = 2;
  a.time_dim = 4;
  a.groups = 1;
  a.image_size = 4;
  return a;
}

TEST_CASE("mini network stays under 1k parameters") {
  UNet<double> net(MiniArch());
  MESSAGE("mini params: " << net.num_params());
  CHECK(net.num_params() <= 1000);
}

}  // namespace
}  // namespace amodal

namespace amodal {
namespace {

double Loss(const UNet<double>& net, const std::vector<double>& p,
            const std::vector<double>& in, const std::vector<double>& target,
            int t) {
  std::vector<double> out(target.size());
  net.Forward(p, in, t, out, nullptr);
  double l = 0;
  for (size_t i = 0; i < out.size(); ++i) {
    l += (out[i] - target[i]) * (out[i] - target[i]);
  }
  return l / out.size();
}

TEST_CASE("analytic gradients match central differences") {
  UNet<double> net(MiniArch());
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 0.5);
  std::vector<double> p(net.num_params());
  for (double& v : p) v = n(rng);
  std::vector<double> in(7 * 16), target(3 * 16);
  for (double& v : in) v = n(rng);
  for (double& v : target) v = n(rng);
  const int t = 37;

  auto cache = net.NewCache();
  std::vector<double> out(target.size());
  net.Forward(p, in, t, out, cache.get());
  std::vector<double> dout(out.size());
  for (size_t i = 0; i < out.size(); ++i) {
    dout[i] = 2.0 * (out[i] - target[i]) / out.size();
  }
  std::vector<double> grad(p.size(), 0.0);
  net.Backward(p, *cache, dout, grad);

  std::uniform_int_distribution<size_t> pick(0, p.size() - 1);
  double worst = 0;
  for (int k = 0; k < 100; ++k) {
    const size_t i = pick(rng);
    // Fourth-order central stencil keeps roundoff and truncation error well
    // below the tolerance even for tiny gradients.
    const double h = 1e-4;
    const double saved = p[i];
    auto at = [&](double delta) {
      p[i] = saved + delta;
      return Loss(net, p, in, target, t);
    };
    const double numeric =
        (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
    p[i] = saved;
    const double rel = std::abs(numeric - grad[i]) /
                       std::max({std::abs(numeric), std::abs(grad[i]), 1e-8});
    worst = std::max(worst, rel);
    INFO("coord " << i << " analytic " << grad[i] << " numeric " << numeric);
    CHECK(rel < 1e-4);
  }
  MESSAGE("worst relative error " << worst);
}

}  // namespace
}  // namespace amodal
