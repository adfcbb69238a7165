#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "metaspectra/domain.hpp"
#include "metaspectra/propagation.hpp"

namespace msp {

struct SubImage {
  std::vector<Image> planes;  // one per sensor color
  int channel_index = 0;
  double gain = 1.0;
  double exposure_s = 1.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::uint8_t> saturated;  // per pixel, any plane at full well
  std::vector<std::uint8_t> valid;      // 0 within the PSF support of the border

  int rows() const { return planes.empty() ? 0 : planes.front().rows; }
  int cols() const { return planes.empty() ? 0 : planes.front().cols; }
};

struct Snapshot {
  std::vector<SubImage> sub_images;
  const SystemConfig* system = nullptr;
  std::uint64_t rng_seed = 0;
};

// |a1 b_i F_i|^2 with b_i the second layer's first order times b_efficiency
double channel_efficiency(const ChannelConfig& channel, const SpectralGrid& grid, double lambda_nm,
                          const Polarization& pol = {});

// share of the pupil routed to each channel by equal-weight interleaving
double split_fraction(const SystemConfig& system);

// kernel cropped to the bounding box of its support plus its origin pixel
struct CroppedKernel {
  Image kernel;
  int origin_r = 0;
  int origin_c = 0;
};
CroppedKernel crop_kernel(const Image& plane, int origin_r, int origin_c);

// linear convolution out(r, c) = sum k(m, n) x(r - (m - or), c - (n - oc)) on a
// zero-padded FFT grid large enough that nothing wraps; the adjoint is the
// matching correlation
class ConvolutionGrid {
 public:
  ConvolutionGrid(int rows, int cols, int max_krows, int max_kcols);

  std::vector<cplx> image_spectrum(const Image& img) const;
  std::vector<cplx> kernel_spectrum(const CroppedKernel& k) const;
  Image crop_inverse(std::vector<cplx> acc) const;
  std::size_t spectrum_size() const { return std::size_t(L_) * (Lc_ / 2 + 1); }

  Image convolve(const Image& img, const CroppedKernel& k) const;
  Image correlate(const Image& img, const CroppedKernel& k) const;

 private:
  int rows_, cols_, L_, Lc_;
};

// noiseless, linear image formation for all channels and colors over a fixed
// image size; the measurement vector is [channel][color] planes
class RenderOperator {
 public:
  RenderOperator(const SystemConfig& system, const PSFStack& psfs, int rows, int cols,
                 const Polarization& pol = {});

  std::vector<Image> forward(const HyperspectralCube& cube) const;
  HyperspectralCube adjoint(const std::vector<Image>& planes) const;

  // signal of a single channel, one image per color
  std::vector<Image> forward_channel(const HyperspectralCube& cube, int channel_index) const;

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t num_planes() const { return V_ * J_; }
  double weight(int channel_index, std::size_t color, std::size_t band) const {
    return w_[(std::size_t(channel_index - 1) * J_ + color) * B_ + band];
  }
  const std::vector<int>& border_margin() const { return margin_; }

 private:
  const SystemConfig* sys_;
  int rows_, cols_;
  std::size_t V_, J_, B_;
  std::vector<double> w_;                // t * trapezoid * eta * c * split, gain applied in forward
  std::unique_ptr<ConvolutionGrid> grid_;
  std::vector<std::vector<cplx>> kspec_;  // [channel * B + band]
  std::vector<int> margin_;               // rows/cols lost to the PSF support: top, bottom, left, right
};

SubImage render_subimage(const HyperspectralCube& cube, const PSFStack& psfs, const SystemConfig& system,
                         int channel_index, bool noiseless, std::uint64_t rng_seed, const Polarization& pol = {});

Snapshot render_snapshot(const HyperspectralCube& cube, const PSFStack& psfs, const SystemConfig& system,
                         std::uint64_t rng_seed, bool noiseless = false, const Polarization& pol = {});

// G Poisson(P S) / P + N(0, sigma^2), clipped to [0, full_well]; S is the pre-gain signal
Image add_noise(const Image& signal, const SensorModel& sensor, std::mt19937_64& rng,
                std::vector<std::uint8_t>* saturated = nullptr);

double sample_noise_sigma(std::mt19937_64& rng);

// independent per-channel stream derived from a snapshot seed
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace msp
