#pragma once

#include <cstdint>
#include <vector>

#include "metaspectra/domain.hpp"
#include "metaspectra/renderer.hpp"

namespace msp {

// g(z) = gamma ln z; gamma = 1 is a linear sensor
struct CameraResponse {
  double gamma = 1.0;
  double g(double z) const;
};

struct HdrOptions {
  double full_well = 1.0;
  double floor = 1e-3;  // normalised level below which a frame carries no information
};

struct HdrResult {
  Image radiance;                        // in units of the low (dim) frame's exposure
  std::vector<std::uint8_t> valid;
  std::vector<std::uint8_t> saturated;  // saturated in both frames
  double dynamic_range_db = 0.0;         // 20 log10(Emax / Emin) over valid pixels
};

// Debevec-Malik log-domain average with hat weights; the high frame has
// `exposure_ratio` times the exposure of the low frame
HdrResult hdr_fuse(const Image& low, const Image& high, double exposure_ratio, const CameraResponse& response = {},
                   const HdrOptions& options = {});
// per color plane
std::vector<HdrResult> hdr_fuse(const SubImage& low, const SubImage& high, double exposure_ratio,
                                const CameraResponse& response = {}, const HdrOptions& options = {});

// dynamic range of one frame over pixels in [floor, full_well)
double single_frame_dynamic_range(const Image& frame, const CameraResponse& response = {}, const HdrOptions& options = {});

// least-squares gamma of the linear-plus-gamma family from a registered bracket
CameraResponse fit_gamma_response(const Image& low, const Image& high, double exposure_ratio,
                                  const HdrOptions& options = {});

// |I3 - I4| / max(I3 + I4, eps)
Image dolp_hv(const Image& i3, const Image& i4, double eps = 1e-6);

}  // namespace msp
