#ifndef AMODAL_UNET_H_
#define AMODAL_UNET_H_

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace amodal {

// Layer description of the noise-prediction network.
struct UNetArch {
  int in_channels = 7;  // noisy image (3) + mask (1) + masked context (3)
  int out_channels = 3;
  int base_width = 32;
  int levels = 3;        // resolution levels; widths base * 2^level
  int time_dim = 32;     // sinusoidal embedding size (even)
  int groups = 8;        // group-norm groups, clamped to the channel count
  int image_size = 64;   // square training resolution

  int Width(int level) const { return base_width << level; }
  bool operator==(const UNetArch&) const = default;
};

std::string ValidateArch(const UNetArch& arch);  // empty when valid

// Small encoder/decoder with skip connections, residual blocks with
// group norm and SiLU, and a sinusoidal timestep embedding fed through an MLP
// into every residual block. Forward and backward passes are written out by
// hand; T is float for training/inference and double for gradient checks.
//
// Parameters live in one flat vector owned by the caller; the network only
// holds the layout.
template <typename T>
class UNet {
 public:
  explicit UNet(const UNetArch& arch);
  ~UNet();
  UNet(UNet&&) noexcept;
  UNet& operator=(UNet&&) noexcept;

  const UNetArch& arch() const { return arch_; }
  size_t num_params() const;

  // Deterministic initialisation. The output convolution and the second
  // convolution of every residual block start at zero, so a fresh network
  // predicts exactly zero.
  std::vector<T> InitParams(uint64_t seed) const;

  // Activations recorded by Forward for Backward.
  struct Cache;
  struct CacheDeleter {
    void operator()(Cache* cache) const;
  };
  using CachePtr = std::unique_ptr<Cache, CacheDeleter>;
  CachePtr NewCache() const;

  // input: in_channels x H x W planar; output: out_channels x H x W.
  // H and W must be divisible by 2^(levels-1). cache may be null.
  void Forward(std::span<const T> params, std::span<const T> input, int t,
               std::span<T> output, Cache* cache) const;

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  void Backward(std::span<const T> params, const Cache& cache,
                std::span<const T> d_output, std::span<T> grad) const;

 private:
  struct Layout;
  UNetArch arch_;
  std::unique_ptr<Layout> layout_;
};

extern template class UNet<float>;
extern template class UNet<double>;

}  // namespace amodal

#endif  // AMODAL_UNET_H_
