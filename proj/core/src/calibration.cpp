#include "metaspectra/calibration.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace msp {

Vec2 Homography::apply(const Vec2& p) const {
  double x = h[0] * p[0] + h[1] * p[1] + h[2];
  double y = h[3] * p[0] + h[4] * p[1] + h[5];
  double w = h[6] * p[0] + h[7] * p[1] + h[8];
  return {x / w, y / w};
}

double Homography::det() const {
  return h[0] * (h[4] * h[8] - h[5] * h[7]) - h[1] * (h[3] * h[8] - h[5] * h[6]) + h[2] * (h[3] * h[7] - h[4] * h[6]);
}

Homography Homography::inverse() const {
  double d = det();
  if (!(std::abs(d) > 1e-12)) throw Error(ErrorCode::SingularHomography, "homography is not invertible");
  Eigen::Matrix3d m;
  m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
  Eigen::Matrix3d inv = m.inverse();
  inv /= inv(2, 2);
  Homography out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.h[std::size_t(r) * 3 + c] = inv(r, c);
  return out;
}

double reprojection_error(const Homography& H, const PointPair& p) {
  Vec2 q = H.apply(p.src);
  return std::hypot(q[0] - p.dst[0], q[1] - p.dst[1]);
}

namespace {

Eigen::Matrix3d normalizer(const std::vector<Vec2>& pts) {
  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p[0];
    my += p[1];
  }
  mx /= double(pts.size());
  my /= double(pts.size());
  double d = 0;
  for (const auto& p : pts) d += std::hypot(p[0] - mx, p[1] - my);
  d /= double(pts.size());
  if (!(d > 0.0)) throw Error(ErrorCode::DegenerateConfiguration, "all points coincide");
  double s = std::sqrt(2.0) / d;
  Eigen::Matrix3d T;
  T << s, 0, -s * mx, 0, s, -s * my, 0, 0, 1;
  return T;
}

bool collinear(const Vec2& a, const Vec2& b, const Vec2& c) {
  double cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  double scale = std::max({std::hypot(b[0] - a[0], b[1] - a[1]), std::hypot(c[0] - a[0], c[1] - a[1]), 1e-300});
  return std::abs(cross) <= 1e-9 * scale * scale;
}

Homography dlt(const std::vector<PointPair>& pairs) {
  const std::size_t n = pairs.size();
  if (n < 4) throw Error(ErrorCode::TooFewPoints, "homography needs at least 4 correspondences");
  std::vector<Vec2> src(n), dst(n);
  for (std::size_t i = 0; i < n; ++i) {
    src[i] = pairs[i].src;
    dst[i] = pairs[i].dst;
  }
  // all-collinear source or destination sets cannot fix a homography
  auto all_collinear = [](const std::vector<Vec2>& p) {
    for (std::size_t i = 2; i < p.size(); ++i)
      if (!collinear(p[0], p[1], p[i])) return false;
    return true;
  };
  if (all_collinear(src) || all_collinear(dst))
    throw Error(ErrorCode::DegenerateConfiguration, "correspondences are collinear");
  Eigen::Matrix3d Ts = normalizer(src), Td = normalizer(dst);
  Eigen::MatrixXd A(2 * n, 9);
  for (std::size_t i = 0; i < n; ++i) {
    Eigen::Vector3d s = Ts * Eigen::Vector3d(src[i][0], src[i][1], 1.0);
    Eigen::Vector3d d = Td * Eigen::Vector3d(dst[i][0], dst[i][1], 1.0);
    double x = s(0) / s(2), y = s(1) / s(2), u = d(0) / d(2), v = d(1) / d(2);
    A.row(Eigen::Index(2 * i)) << -x, -y, -1, 0, 0, 0, u * x, u * y, u;
    A.row(Eigen::Index(2 * i + 1)) << 0, 0, 0, -x, -y, -1, v * x, v * y, v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv.size() >= 8 && sv(7) < 1e-12 * sv(0))
    throw Error(ErrorCode::DegenerateConfiguration, "correspondences do not determine a homography");
  Eigen::VectorXd h = svd.matrixV().col(8);
  Eigen::Matrix3d Hn;
  Hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  Eigen::Matrix3d H = Td.inverse() * Hn * Ts;
  if (!(std::abs(H(2, 2)) > 1e-15)) throw Error(ErrorCode::DegenerateConfiguration, "homography at infinity");
  H /= H(2, 2);
  Homography out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.h[std::size_t(r) * 3 + c] = H(r, c);
  if (!(std::abs(out.det()) > 1e-12)) throw Error(ErrorCode::DegenerateConfiguration, "singular homography");
  return out;
}

std::vector<std::uint8_t> inlier_mask(const Homography& H, const std::vector<PointPair>& pairs, double thr) {
  std::vector<std::uint8_t> m(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    double e = reprojection_error(H, pairs[i]);
    m[i] = std::isfinite(e) && e < thr;
  }
  return m;
}

}  // namespace

HomographyFit estimate_homography_fit(const std::vector<PointPair>& pairs, bool robust, const RansacOptions& opt) {
  if (pairs.size() < 4) throw Error(ErrorCode::TooFewPoints, "homography needs at least 4 correspondences");
  HomographyFit fit;
  if (!robust) {
    fit.H = dlt(pairs);
    fit.inliers.assign(pairs.size(), 1);
  } else {
    std::mt19937_64 rng(opt.seed);
    std::size_t best_count = 0;
    std::vector<std::uint8_t> best;
    std::vector<std::size_t> idx(pairs.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int it = 0; it < opt.iterations; ++it) {
      for (std::size_t k = 0; k < 4; ++k) {
        std::uniform_int_distribution<std::size_t> d(k, idx.size() - 1);
        std::swap(idx[k], idx[d(rng)]);
      }
      std::vector<PointPair> sample{pairs[idx[0]], pairs[idx[1]], pairs[idx[2]], pairs[idx[3]]};
      bool degenerate = false;
      for (int a = 0; a < 4 && !degenerate; ++a)
        for (int b = a + 1; b < 4 && !degenerate; ++b)
          for (int c = b + 1; c < 4 && !degenerate; ++c)
            degenerate = collinear(sample[a].src, sample[b].src, sample[c].src) ||
                         collinear(sample[a].dst, sample[b].dst, sample[c].dst);
      if (degenerate) continue;
      Homography H;
      try {
        H = dlt(sample);
      } catch (const Error&) {
        continue;
      }
      auto m = inlier_mask(H, pairs, opt.threshold_px);
      std::size_t count = std::size_t(std::count(m.begin(), m.end(), 1));
      if (count > best_count) {
        best_count = count;
        best = std::move(m);
      }
    }
    if (best_count < 4) throw Error(ErrorCode::DegenerateConfiguration, "no consensus set of 4 or more inliers");
    std::vector<PointPair> in;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (best[i]) in.push_back(pairs[i]);
    fit.H = dlt(in);
    fit.inliers = inlier_mask(fit.H, pairs, opt.threshold_px);
  }
  double se = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i)
    if (fit.inliers[i]) {
      double e = reprojection_error(fit.H, pairs[i]);
      se += e * e;
      ++n;
    }
  fit.rms_inlier_error = n ? std::sqrt(se / double(n)) : 0.0;
  return fit;
}

Homography estimate_homography(const std::vector<PointPair>& pairs, bool robust, const RansacOptions& opt) {
  return estimate_homography_fit(pairs, robust, opt).H;
}

WarpResult warp_subimage(const Image& img, const Homography& H) {
  Homography inv = H.inverse();
  WarpResult out;
  out.image = Image(img.rows, img.cols);
  out.valid.assign(img.data.size(), 0);
  for (int r = 0; r < img.rows; ++r)
    for (int c = 0; c < img.cols; ++c) {
      Vec2 s = inv.apply({double(c), double(r)});
      double x = s[0], y = s[1];
      if (!(x >= 0.0 && y >= 0.0 && x <= img.cols - 1 && y <= img.rows - 1)) continue;
      int x0 = std::min(int(std::floor(x)), img.cols - 1), y0 = std::min(int(std::floor(y)), img.rows - 1);
      double fx = x - x0, fy = y - y0;
      int x1 = std::min(x0 + 1, img.cols - 1), y1 = std::min(y0 + 1, img.rows - 1);
      double v = (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) + fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
      out.image(r, c) = v;
      out.valid[std::size_t(r) * img.cols + c] = 1;
    }
  return out;
}

SpectralResponse spectral_response(const std::vector<std::vector<double>>& E_i, const std::vector<double>& E,
                                   const std::vector<double>& eta, const SpectralGrid& grid) {
  if (E.size() != grid.size() || eta.size() != grid.size()) throw Error(ErrorCode::GridMismatch, "response lengths");
  for (double e : E)
    if (!(e > 0.0)) throw Error(ErrorCode::ZeroReference, "reference energy must be > 0");
  SpectralResponse out;
  out.grid = grid;
  for (const auto& ei : E_i) {
    if (ei.size() != grid.size()) throw Error(ErrorCode::GridMismatch, "channel energy length");
    std::vector<double> a(grid.size());
    for (std::size_t b = 0; b < a.size(); ++b) a[b] = eta[b] * ei[b] / E[b];
    out.alpha.push_back(std::move(a));
  }
  return out;
}

namespace {

HyperspectralCube point_source(const SystemConfig& sys, int size, std::size_t band) {
  HyperspectralCube cube(size, size, sys.grid, sys.sensor.pitch_um);
  cube(size / 2, size / 2, band) = 1.0;
  return cube;
}

double energy(const SubImage& s) {
  double e = 0.0;
  for (const auto& p : s.planes) e += p.sum();
  return e;
}

}  // namespace

CalibrationCapture simulate_calibration_capture(const SystemConfig& sys, const PSFStack& psfs, double lambda_nm) {
  auto band = sys.grid.find(lambda_nm);
  if (!band) throw Error(ErrorCode::GridMismatch, "calibration wavelength not in the system grid");
  const int size = psfs.rows;
  auto cube = point_source(sys, size, *band);
  CalibrationCapture cap;
  for (std::size_t i = 0; i < sys.num_channels(); ++i)
    cap.E_i.push_back(energy(render_subimage(cube, psfs, sys, int(i) + 1, true, 0)));

  // bare sensor: a single lossless pass-through channel and a delta PSF
  SystemConfig bare = sys;
  ChannelConfig pass;
  pass.index = 1;
  pass.design_wavelength_nm = lambda_nm;
  pass.lens_focal_mm = sys.channels.front().lens_focal_mm;
  bare.channels = {pass};
  PSFStack delta;
  delta.V = 1;
  delta.rows = delta.cols = 1;
  delta.pitch_um = sys.sensor.pitch_um;
  delta.grid = sys.grid;
  delta.planes.assign(sys.grid.size(), Image(1, 1, 1.0));
  delta.chain.assign(sys.grid.size(), cplx{1.0, 0.0});
  delta.throughput.assign(sys.grid.size(), 1.0);
  cap.E = energy(render_subimage(cube, delta, bare, 1, true, 0));
  return cap;
}

SpectralResponse calibrate_spectral_response(const SystemConfig& sys, const PSFStack& psfs) {
  const std::size_t B = sys.grid.size(), V = sys.num_channels();
  std::vector<std::vector<double>> Ei(V, std::vector<double>(B));
  std::vector<double> E(B);
  for (std::size_t b = 0; b < B; ++b) {
    auto cap = simulate_calibration_capture(sys, psfs, sys.grid[b]);
    for (std::size_t i = 0; i < V; ++i) Ei[i][b] = cap.E_i[i];
    E[b] = cap.E;
  }
  return spectral_response(Ei, E, sys.sensor.mean_response(), sys.grid);
}

std::vector<std::vector<double>> planted_response(const SystemConfig& sys) {
  auto eta = sys.sensor.mean_response();
  std::vector<std::vector<double>> out;
  for (const auto& ch : sys.channels) {
    std::vector<double> a(sys.grid.size());
    for (std::size_t b = 0; b < a.size(); ++b)
      a[b] = eta[b] * split_fraction(sys) * channel_efficiency(ch, sys.grid, sys.grid[b]);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace msp
