#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "metaspectra/domain.hpp"
#include "metaspectra/propagation.hpp"
#include "metaspectra/renderer.hpp"

namespace msp {

struct Homography {
  std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major, h[8] == 1

  double operator()(int r, int c) const { return h[std::size_t(r) * 3 + c]; }
  Vec2 apply(const Vec2& p) const;
  Homography inverse() const;
  double det() const;
  static Homography identity() { return {}; }
};

struct PointPair {
  Vec2 src;
  Vec2 dst;  // dst ~ H src
};

struct HomographyFit {
  Homography H;
  std::vector<std::uint8_t> inliers;
  double rms_inlier_error = 0.0;
};

struct RansacOptions {
  double threshold_px = 1.0;
  int iterations = 1000;
  std::uint64_t seed = 0x5eedULL;
};

Homography estimate_homography(const std::vector<PointPair>& pairs, bool robust = false,
                               const RansacOptions& opt = {});
HomographyFit estimate_homography_fit(const std::vector<PointPair>& pairs, bool robust = false,
                                      const RansacOptions& opt = {});

double reprojection_error(const Homography& H, const PointPair& p);

struct WarpResult {
  Image image;
  std::vector<std::uint8_t> valid;
};

// out(p) = in(H^-1 p), bilinear; coordinates are (x = col, y = row)
WarpResult warp_subimage(const Image& image, const Homography& H);

struct SpectralResponse {
  SpectralGrid grid;
  std::vector<std::vector<double>> alpha;  // [channel][band]
};

// eta * E_i / E, elementwise; E_i is [channel][band]
SpectralResponse spectral_response(const std::vector<std::vector<double>>& E_i, const std::vector<double>& E,
                                   const std::vector<double>& eta, const SpectralGrid& grid);

struct CalibrationCapture {
  std::vector<double> E_i;  // per channel
  double E = 0.0;
};

// noiseless monochromatic point source, with and without the optical chain
CalibrationCapture simulate_calibration_capture(const SystemConfig& system, const PSFStack& psfs, double lambda_nm);

// full sweep over the system grid using the sensor's mean response as eta
SpectralResponse calibrate_spectral_response(const SystemConfig& system, const PSFStack& psfs);

// what calibration should recover: eta * split * c
std::vector<std::vector<double>> planted_response(const SystemConfig& system);

}  // namespace msp
