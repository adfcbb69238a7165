#include "metaspectra/hdr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace msp {

double CameraResponse::g(double z) const { return gamma * std::log(z); }

namespace {

void same_shape(const Image& a, const Image& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw Error(ErrorCode::ShapeMismatch, "frames differ in size");
}

bool usable(double z, const HdrOptions& o) { return z >= o.floor && z < 1.0; }

double hat(double z) { return std::min(z, 1.0 - z); }

}  // namespace

HdrResult hdr_fuse(const Image& low, const Image& high, double ratio, const CameraResponse& resp, const HdrOptions& o) {
  same_shape(low, high);
  if (!(ratio > 0.0)) throw Error(ErrorCode::InvalidArgument, "exposure ratio must be > 0");
  if (!(o.full_well > 0.0)) throw Error(ErrorCode::InvalidArgument, "full well must be > 0");
  HdrResult out;
  out.radiance = Image(low.rows, low.cols);
  out.valid.assign(low.data.size(), 0);
  out.saturated.assign(low.data.size(), 0);
  const double lt[2] = {0.0, std::log(ratio)};
  double emax = 0.0, emin = std::numeric_limits<double>::infinity();
  std::size_t n_sat = 0;
  for (std::size_t i = 0; i < low.data.size(); ++i) {
    const double z[2] = {low.data[i] / o.full_well, high.data[i] / o.full_well};
    double num = 0.0, den = 0.0;
    for (int f = 0; f < 2; ++f) {
      if (!usable(z[f], o)) continue;
      double w = hat(z[f]);
      num += w * (resp.g(z[f]) - lt[f]);
      den += w;
    }
    if (den > 0.0) {
      double e = std::exp(num / den);
      out.radiance.data[i] = e;
      out.valid[i] = 1;
      emax = std::max(emax, e);
      emin = std::min(emin, e);
    } else if (z[0] >= 1.0 && z[1] >= 1.0) {
      out.saturated[i] = 1;
      ++n_sat;
    }
  }
  if (emax == 0.0) {
    if (n_sat > 0) throw Error(ErrorCode::AllSaturated, "no pixel is usable in either frame");
    throw Error(ErrorCode::AllSaturated, "no pixel lies inside the usable range of either frame");
  }
  out.dynamic_range_db = 20.0 * std::log10(emax / emin);
  return out;
}

std::vector<HdrResult> hdr_fuse(const SubImage& low, const SubImage& high, double ratio, const CameraResponse& resp,
                                const HdrOptions& o) {
  if (low.planes.size() != high.planes.size()) throw Error(ErrorCode::ShapeMismatch, "sub-images differ in colors");
  std::vector<HdrResult> out;
  for (std::size_t j = 0; j < low.planes.size(); ++j) out.push_back(hdr_fuse(low.planes[j], high.planes[j], ratio, resp, o));
  return out;
}

double single_frame_dynamic_range(const Image& frame, const CameraResponse& resp, const HdrOptions& o) {
  double emax = 0.0, emin = std::numeric_limits<double>::infinity();
  for (double v : frame.data) {
    double z = v / o.full_well;
    if (!usable(z, o)) continue;
    double e = std::exp(resp.g(z));
    emax = std::max(emax, e);
    emin = std::min(emin, e);
  }
  if (emax == 0.0) throw Error(ErrorCode::AllSaturated, "frame has no usable pixel");
  return 20.0 * std::log10(emax / emin);
}

CameraResponse fit_gamma_response(const Image& low, const Image& high, double ratio, const HdrOptions& o) {
  same_shape(low, high);
  if (!(ratio > 0.0) || ratio == 1.0) throw Error(ErrorCode::InvalidArgument, "exposure ratio must be > 0 and != 1");
  // gamma (ln z_h - ln z_l) = ln ratio for every pixel usable in both frames
  double sxx = 0.0, sxy = 0.0;
  const double y = std::log(ratio);
  for (std::size_t i = 0; i < low.data.size(); ++i) {
    double zl = low.data[i] / o.full_well, zh = high.data[i] / o.full_well;
    if (!usable(zl, o) || !usable(zh, o)) continue;
    double x = std::log(zh) - std::log(zl);
    sxx += x * x;
    sxy += x * y;
  }
  if (!(sxx > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "no pixel is usable in both frames");
  return {sxy / sxx};
}

Image dolp_hv(const Image& i3, const Image& i4, double eps) {
  same_shape(i3, i4);
  Image out(i3.rows, i3.cols);
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    double a = std::max(0.0, i3.data[i]), b = std::max(0.0, i4.data[i]);
    out.data[i] = std::abs(a - b) / std::max(a + b, eps);
  }
  return out;
}

}  // namespace msp
