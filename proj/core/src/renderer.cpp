#include "metaspectra/renderer.hpp"

#include <algorithm>
#include <cmath>

#include "metaspectra/fft.hpp"
#include "metaspectra/metasurface.hpp"
#include "metaspectra/parallel.hpp"

namespace msp {

double channel_efficiency(const ChannelConfig& ch, const SpectralGrid& grid, double lambda_nm, const Polarization& pol) {
  double a1 = std::norm(blazed_order(1, ch.design_wavelength_nm, lambda_nm));
  double b = 1.0;
  if (!ch.b_efficiency.empty()) {
    if (ch.b_efficiency.size() != grid.size()) throw Error(ErrorCode::GridMismatch, "b_efficiency length");
    auto k = grid.find(lambda_nm);
    if (k) {
      b = ch.b_efficiency[*k];
    } else {
      const auto& wl = grid.wavelengths();
      double l = std::clamp(lambda_nm, wl.front(), wl.back());
      std::size_t j = std::size_t(std::upper_bound(wl.begin(), wl.end(), l) - wl.begin());
      j = std::min(j == 0 ? 0 : j - 1, wl.size() - 2);
      double f = (l - wl[j]) / (wl[j + 1] - wl[j]);
      b = ch.b_efficiency[j] + f * (ch.b_efficiency[j + 1] - ch.b_efficiency[j]);
    }
  }
  double b1 = std::norm(blazed_order(1, ch.design_wavelength_nm, lambda_nm)) * b * b;
  return a1 * b1 * ch.filter.transmittance(pol);
}

double split_fraction(const SystemConfig& sys) { return 1.0 / double(sys.num_channels()); }

CroppedKernel crop_kernel(const Image& plane, int origin_r, int origin_c) {
  int r0 = origin_r, r1 = origin_r, c0 = origin_c, c1 = origin_c;
  for (int r = 0; r < plane.rows; ++r)
    for (int c = 0; c < plane.cols; ++c)
      if (plane(r, c) != 0.0) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  CroppedKernel k;
  k.kernel = Image(r1 - r0 + 1, c1 - c0 + 1);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      if (r >= 0 && r < plane.rows && c >= 0 && c < plane.cols) k.kernel(r - r0, c - c0) = plane(r, c);
  k.origin_r = origin_r - r0;
  k.origin_c = origin_c - c0;
  return k;
}

ConvolutionGrid::ConvolutionGrid(int rows, int cols, int kr, int kc)
    : rows_(rows), cols_(cols), L_(good_fft_size(rows + kr - 1)), Lc_(good_fft_size(cols + kc - 1)) {
  if (Lc_ % 2) Lc_ = good_fft_size(Lc_ + 1);
}

std::vector<cplx> ConvolutionGrid::image_spectrum(const Image& img) const {
  if (img.rows != rows_ || img.cols != cols_) throw Error(ErrorCode::ShapeMismatch, "image size");
  std::vector<double> buf(std::size_t(L_) * Lc_, 0.0);
  for (int r = 0; r < rows_; ++r) std::copy_n(&img.data[std::size_t(r) * cols_], cols_, &buf[std::size_t(r) * Lc_]);
  std::vector<cplx> out;
  rfft2(buf, out, L_, Lc_);
  return out;
}

std::vector<cplx> ConvolutionGrid::kernel_spectrum(const CroppedKernel& k) const {
  if (k.kernel.rows + rows_ - 1 > L_ || k.kernel.cols + cols_ - 1 > Lc_)
    throw Error(ErrorCode::ShapeMismatch, "kernel larger than the convolution grid allows");
  std::vector<double> buf(std::size_t(L_) * Lc_, 0.0);
  for (int m = 0; m < k.kernel.rows; ++m) {
    int r = ((m - k.origin_r) % L_ + L_) % L_;
    for (int n = 0; n < k.kernel.cols; ++n) {
      int c = ((n - k.origin_c) % Lc_ + Lc_) % Lc_;
      buf[std::size_t(r) * Lc_ + c] = k.kernel(m, n);
    }
  }
  std::vector<cplx> out;
  rfft2(buf, out, L_, Lc_);
  return out;
}

Image ConvolutionGrid::crop_inverse(std::vector<cplx> acc) const {
  std::vector<double> buf;
  irfft2(acc, buf, L_, Lc_);
  Image out(rows_, cols_);
  const double scale = 1.0 / (double(L_) * Lc_);
  for (int r = 0; r < rows_; ++r)
    for (int c = 0; c < cols_; ++c) out(r, c) = buf[std::size_t(r) * Lc_ + c] * scale;
  return out;
}

Image ConvolutionGrid::convolve(const Image& img, const CroppedKernel& k) const {
  auto x = image_spectrum(img);
  auto h = kernel_spectrum(k);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= h[i];
  return crop_inverse(std::move(x));
}

Image ConvolutionGrid::correlate(const Image& img, const CroppedKernel& k) const {
  auto x = image_spectrum(img);
  auto h = kernel_spectrum(k);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= std::conj(h[i]);
  return crop_inverse(std::move(x));
}

namespace {

std::vector<double> channel_weights(const SystemConfig& sys, int i, const Polarization& pol) {
  const auto& ch = sys.channel(i);
  const auto trap = sys.grid.trapezoid_weights();
  const std::size_t B = sys.grid.size(), J = sys.sensor.colors();
  const double split = split_fraction(sys);
  std::vector<double> w(J * B);
  for (std::size_t j = 0; j < J; ++j)
    for (std::size_t b = 0; b < B; ++b)
      w[j * B + b] = sys.sensor.exposure_s * trap[b] * sys.sensor.eta[j][b] *
                     channel_efficiency(ch, sys.grid, sys.grid[b], pol) * split;
  return w;
}

void check_inputs(const HyperspectralCube& cube, const PSFStack& psfs, const SystemConfig& sys) {
  if (!(cube.grid.wavelengths() == sys.grid.wavelengths())) throw Error(ErrorCode::GridMismatch, "cube grid differs from system grid");
  if (!(psfs.grid.wavelengths() == sys.grid.wavelengths())) throw Error(ErrorCode::GridMismatch, "PSF grid differs from system grid");
  if (std::abs(psfs.pitch_um - sys.sensor.pitch_um) > 1e-9) throw Error(ErrorCode::GridMismatch, "PSF pitch differs from sensor pitch");
  if (psfs.V != int(sys.num_channels())) throw Error(ErrorCode::GridMismatch, "PSF stack channel count");
}

// rows/cols affected by the kernel support: top, bottom, left, right
std::vector<int> support_margin(const std::vector<CroppedKernel>& ks) {
  std::vector<int> m(4, 0);
  for (const auto& k : ks) {
    m[0] = std::max(m[0], k.kernel.rows - 1 - k.origin_r);
    m[1] = std::max(m[1], k.origin_r);
    m[2] = std::max(m[2], k.kernel.cols - 1 - k.origin_c);
    m[3] = std::max(m[3], k.origin_c);
  }
  return m;
}

std::vector<std::uint8_t> valid_mask(int rows, int cols, const std::vector<int>& m) {
  std::vector<std::uint8_t> v(std::size_t(rows) * cols, 0);
  for (int r = m[0]; r < rows - m[1]; ++r)
    for (int c = m[2]; c < cols - m[3]; ++c) v[std::size_t(r) * cols + c] = 1;
  return v;
}

}  // namespace

RenderOperator::RenderOperator(const SystemConfig& sys, const PSFStack& psfs, int rows, int cols, const Polarization& pol)
    : sys_(&sys), rows_(rows), cols_(cols), V_(sys.num_channels()), J_(sys.sensor.colors()), B_(sys.grid.size()) {
  validate_system(sys);
  if (!(psfs.grid.wavelengths() == sys.grid.wavelengths())) throw Error(ErrorCode::GridMismatch, "PSF grid differs from system grid");
  for (std::size_t i = 0; i < V_; ++i) {
    auto w = channel_weights(sys, int(i) + 1, pol);
    w_.insert(w_.end(), w.begin(), w.end());
  }
  std::vector<CroppedKernel> ks;
  int kr = 1, kc = 1;
  for (std::size_t k = 0; k < V_ * B_; ++k) {
    ks.push_back(crop_kernel(psfs.planes[k], psfs.rows / 2, psfs.cols / 2));
    kr = std::max(kr, ks.back().kernel.rows);
    kc = std::max(kc, ks.back().kernel.cols);
  }
  margin_ = support_margin(ks);
  grid_ = std::make_unique<ConvolutionGrid>(rows, cols, kr, kc);
  kspec_.resize(ks.size());
  parallel_for(ks.size(), [&](std::size_t k) { kspec_[k] = grid_->kernel_spectrum(ks[k]); });
}

std::vector<Image> RenderOperator::forward(const HyperspectralCube& cube) const {
  if (cube.rows != rows_ || cube.cols != cols_ || cube.bands() != B_) throw Error(ErrorCode::ShapeMismatch, "cube shape");
  std::vector<std::vector<cplx>> X(B_);
  parallel_for(B_, [&](std::size_t b) { X[b] = grid_->image_spectrum(cube.band_image(b)); });
  std::vector<Image> out(V_ * J_);
  const double G = sys_->sensor.gain;
  parallel_for(V_ * J_, [&](std::size_t p) {
    std::size_t i = p / J_, j = p % J_;
    std::vector<cplx> acc(grid_->spectrum_size());
    for (std::size_t b = 0; b < B_; ++b) {
      double w = G * w_[(i * J_ + j) * B_ + b];
      if (w == 0.0) continue;
      const auto& k = kspec_[i * B_ + b];
      const auto& x = X[b];
      for (std::size_t q = 0; q < acc.size(); ++q) acc[q] += w * x[q] * k[q];
    }
    out[p] = grid_->crop_inverse(std::move(acc));
  });
  return out;
}

std::vector<Image> RenderOperator::forward_channel(const HyperspectralCube& cube, int channel_index) const {
  auto all = forward(cube);
  std::size_t i = std::size_t(channel_index - 1);
  return {all.begin() + std::ptrdiff_t(i * J_), all.begin() + std::ptrdiff_t((i + 1) * J_)};
}

HyperspectralCube RenderOperator::adjoint(const std::vector<Image>& planes) const {
  if (planes.size() != V_ * J_) throw Error(ErrorCode::ShapeMismatch, "measurement plane count");
  std::vector<std::vector<cplx>> R(planes.size());
  parallel_for(planes.size(), [&](std::size_t p) { R[p] = grid_->image_spectrum(planes[p]); });
  HyperspectralCube out(rows_, cols_, sys_->grid, sys_->sensor.pitch_um);
  const double G = sys_->sensor.gain;
  std::vector<Image> bands(B_);
  parallel_for(B_, [&](std::size_t b) {
    std::vector<cplx> acc(grid_->spectrum_size());
    for (std::size_t i = 0; i < V_; ++i) {
      const auto& k = kspec_[i * B_ + b];
      for (std::size_t j = 0; j < J_; ++j) {
        double w = G * w_[(i * J_ + j) * B_ + b];
        if (w == 0.0) continue;
        const auto& r = R[i * J_ + j];
        for (std::size_t q = 0; q < acc.size(); ++q) acc[q] += w * r[q] * std::conj(k[q]);
      }
    }
    bands[b] = grid_->crop_inverse(std::move(acc));
  });
  for (std::size_t b = 0; b < B_; ++b) out.set_band(b, bands[b]);
  return out;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Image add_noise(const Image& S, const SensorModel& sensor, std::mt19937_64& rng, std::vector<std::uint8_t>* saturated) {
  Image out(S.rows, S.cols);
  const double P = sensor.photons_per_unit, G = sensor.gain;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < S.data.size(); ++k) {
    double mean = std::max(0.0, S.data[k]) * P;
    double counts = 0.0;
    if (mean > 0.0) {
      std::poisson_distribution<long long> pois(mean);
      counts = double(pois(rng));
    }
    double v = G * counts / P;
    if (sensor.sigma > 0.0) v += sensor.sigma * gauss(rng);
    if (v >= sensor.full_well) {
      v = sensor.full_well;
      if (saturated) (*saturated)[k] = 1;
    }
    out.data[k] = std::max(0.0, v);
  }
  return out;
}

SubImage render_subimage(const HyperspectralCube& cube, const PSFStack& psfs, const SystemConfig& sys, int i,
                         bool noiseless, std::uint64_t seed, const Polarization& pol) {
  validate_system(sys);
  check_inputs(cube, psfs, sys);
  const std::size_t B = sys.grid.size(), J = sys.sensor.colors();
  auto w = channel_weights(sys, i, pol);

  std::vector<CroppedKernel> ks(B);
  int kr = 1, kc = 1;
  for (std::size_t b = 0; b < B; ++b) {
    ks[b] = crop_kernel(psfs.plane(i, b), psfs.rows / 2, psfs.cols / 2);
    kr = std::max(kr, ks[b].kernel.rows);
    kc = std::max(kc, ks[b].kernel.cols);
  }
  ConvolutionGrid grid(cube.rows, cube.cols, kr, kc);
  std::vector<std::vector<cplx>> acc(J, std::vector<cplx>(grid.spectrum_size()));
  for (std::size_t b = 0; b < B; ++b) {
    bool any = false;
    for (std::size_t j = 0; j < J; ++j) any = any || w[j * B + b] != 0.0;
    if (!any) continue;
    Image band = cube.band_image(b);
    if (std::all_of(band.data.begin(), band.data.end(), [](double v) { return v == 0.0; })) continue;
    auto x = grid.image_spectrum(band);
    auto h = grid.kernel_spectrum(ks[b]);
    for (std::size_t j = 0; j < J; ++j) {
      double wb = w[j * B + b];
      if (wb == 0.0) continue;
      for (std::size_t q = 0; q < x.size(); ++q) acc[j][q] += wb * x[q] * h[q];
    }
  }

  SubImage out;
  out.channel_index = i;
  out.gain = sys.sensor.gain;
  out.exposure_s = sys.sensor.exposure_s;
  out.sigma = sys.sensor.sigma;
  out.seed = seed;
  out.saturated.assign(std::size_t(cube.rows) * cube.cols, 0);
  out.valid = valid_mask(cube.rows, cube.cols, support_margin(ks));
  std::mt19937_64 rng(seed);
  for (std::size_t j = 0; j < J; ++j) {
    Image S = grid.crop_inverse(std::move(acc[j]));
    if (noiseless) {
      for (std::size_t k = 0; k < S.data.size(); ++k) {
        double v = std::max(0.0, sys.sensor.gain * S.data[k]);
        if (v >= sys.sensor.full_well) {
          v = sys.sensor.full_well;
          out.saturated[k] = 1;
        }
        S.data[k] = v;
      }
      out.planes.push_back(std::move(S));
    } else {
      out.planes.push_back(add_noise(S, sys.sensor, rng, &out.saturated));
    }
  }
  return out;
}

Snapshot render_snapshot(const HyperspectralCube& cube, const PSFStack& psfs, const SystemConfig& sys,
                         std::uint64_t seed, bool noiseless, const Polarization& pol) {
  Snapshot snap;
  snap.system = &sys;
  snap.rng_seed = seed;
  snap.sub_images.resize(sys.num_channels());
  parallel_for(sys.num_channels(), [&](std::size_t k) {
    snap.sub_images[k] = render_subimage(cube, psfs, sys, int(k) + 1, noiseless, derive_seed(seed, k), pol);
  });
  return snap;
}

double sample_noise_sigma(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.001, 0.01);
  return u(rng);
}

}  // namespace msp
