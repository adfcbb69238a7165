#include "metaspectra/propagation.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "metaspectra/fft.hpp"
#include "metaspectra/parallel.hpp"

namespace msp {

namespace {
constexpr double kTwoPi = 2.0 * M_PI;

double band_weight(const ChannelConfig& ch, const SpectralGrid& grid, double lambda) {
  if (ch.b_efficiency.empty()) return 1.0;
  if (auto b = grid.find(lambda)) return ch.b_efficiency[*b];
  const auto& wl = grid.wavelengths();
  if (lambda <= wl.front()) return ch.b_efficiency.front();
  if (lambda >= wl.back()) return ch.b_efficiency.back();
  auto it = std::upper_bound(wl.begin(), wl.end(), lambda);
  std::size_t j = std::size_t(it - wl.begin()) - 1;
  double f = (lambda - wl[j]) / (wl[j + 1] - wl[j]);
  return ch.b_efficiency[j] + f * (ch.b_efficiency[j + 1] - ch.b_efficiency[j]);
}
}  // namespace

PupilFunction disc_pupil(double diameter_mm, int samples) {
  PupilFunction p;
  p.diameter_mm = diameter_mm;
  p.pitch_um = diameter_mm * 1000.0 / samples;
  p.amplitude = Image(samples, samples);
  double R = diameter_mm * 500.0;
  for (int r = 0; r < samples; ++r)
    for (int c = 0; c < samples; ++c) {
      double x = (c - 0.5 * (samples - 1)) * p.pitch_um;
      double y = (r - 0.5 * (samples - 1)) * p.pitch_um;
      p.amplitude(r, c) = x * x + y * y < R * R ? 1.0 : 0.0;
    }
  return p;
}

ComplexField angular_spectrum_propagate(const ComplexField& field, double distance_mm, double lambda_nm,
                                        bool check_sampling) {
  if (!(field.pitch_um > 0.0)) throw Error(ErrorCode::InvalidArgument, "field pitch must be > 0");
  if (distance_mm == 0.0) return field;
  const int R = field.rows, C = field.cols;
  const double lam = lambda_nm * 1e-3, z = distance_mm * 1e3, p = field.pitch_um;
  std::vector<cplx> spectrum = field.values;
  fft2(spectrum, R, C, false);

  auto freq = [](int k, int n, double pitch) { return (k < (n + 1) / 2 ? k : k - n) / (n * pitch); };
  if (check_sampling) {
    double total = 0.0, edge = 0.0;
    const double fnx = 0.5 / p;
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) {
        double e = std::norm(spectrum[std::size_t(r) * C + c]);
        total += e;
        if (std::abs(freq(c, C, p)) > 0.95 * fnx || std::abs(freq(r, R, p)) > 0.95 * fnx) edge += e;
      }
    if (total > 0.0 && edge / total > 0.05)
      throw Error(ErrorCode::UndersampledField, "field energy concentrated at the sampling band limit");
  }
  for (int r = 0; r < R; ++r) {
    double fy = freq(r, R, p);
    for (int c = 0; c < C; ++c) {
      double fx = freq(c, C, p);
      double k2 = 1.0 - lam * lam * (fx * fx + fy * fy);
      auto& s = spectrum[std::size_t(r) * C + c];
      s = k2 > 0.0 ? s * std::polar(1.0 / double(R * C), kTwoPi * z / lam * std::sqrt(k2)) : cplx{};
    }
  }
  fft2(spectrum, R, C, true);
  ComplexField out = field;
  out.wavelength_nm = lambda_nm;
  out.values = std::move(spectrum);
  return out;
}

ComplexField apply_metasurface(const ComplexField& field, const PhaseProfile& profile, double lambda_nm) {
  if (field.rows != profile.rows || field.cols != profile.cols)
    throw Error(ErrorCode::ShapeMismatch, "field and profile grids differ");
  ComplexField out = field;
  const double rho = profile.design_wavelength_nm / lambda_nm;
  for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] *= std::polar(1.0, rho * profile.phase_rad[k]);
  return out;
}

ComplexField apply_metasurface(const ComplexField& field, const InterleavedSurface& surface, double lambda_nm) {
  if (field.rows != surface.rows || field.cols != surface.cols)
    throw Error(ErrorCode::ShapeMismatch, "field and surface grids differ");
  ComplexField out = field;
  auto t = surface.transmission(lambda_nm);
  for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] *= t[k];
  return out;
}

ComplexField thin_lens_phase(const GridSpec& g, double focal_mm, const Vec2& center_mm, double radius_mm,
                             double lambda_nm) {
  if (!(focal_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal length must be > 0");
  ComplexField m(g.rows, g.cols, g.pitch_um, lambda_nm);
  const double lam = lambda_nm * 1e-3, f = focal_mm * 1e3, rad = radius_mm * 1e3;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      double dx = (c - g.cols / 2) * g.pitch_um - center_mm[0] * 1e3;
      double dy = (r - g.rows / 2) * g.pitch_um - center_mm[1] * 1e3;
      double d2 = dx * dx + dy * dy;
      if (d2 < rad * rad) m(r, c) = std::polar(1.0, -M_PI * d2 / (lam * f));
    }
  return m;
}

Vec2 predicted_shift(const ChannelConfig& ch, double lambda_nm) {
  double k = lambda_nm * ch.lens_focal_mm / ch.design_wavelength_nm;
  return {k * (ch.alpha[0] + ch.beta[0]), k * (ch.alpha[1] + ch.beta[1])};
}

Vec2 beam_displacement(const ChannelConfig& ch, double spacing_mm, double lambda_nm, const Vec2& n_perp) {
  double rho = lambda_nm / ch.design_wavelength_nm;
  Vec2 s{rho * ch.alpha[0] + n_perp[0], rho * ch.alpha[1] + n_perp[1]};
  double kz2 = 1.0 - s[0] * s[0] - s[1] * s[1];
  if (!(kz2 > 0.0)) throw Error(ErrorCode::InvalidArgument, "deflected beam is evanescent");
  double kz = std::sqrt(kz2);
  return {spacing_mm * s[0] / kz, spacing_mm * s[1] / kz};
}

Image far_field_intensity(const ComplexField& field, int M) {
  if (M < field.rows || M < field.cols) throw Error(ErrorCode::InvalidArgument, "padded size smaller than field");
  std::vector<cplx> buf(std::size_t(M) * M);
  int r0 = (M - field.rows) / 2, c0 = (M - field.cols) / 2;
  for (int r = 0; r < field.rows; ++r)
    for (int c = 0; c < field.cols; ++c) buf[std::size_t(r + r0) * M + c + c0] = field(r, c);
  fft2(buf, M, M, false);
  Image out(M, M);
  for (std::size_t k = 0; k < buf.size(); ++k) out.data[k] = std::norm(buf[k]);
  fftshift2(out.data, M, M);
  return out;
}

PsfPlane synthesize_psf(const SystemConfig& sys, int channel_index, double lambda_nm, const Vec2& n_perp,
                        const PsfOptions& opt) {
  const auto& ch = sys.channel(channel_index);
  const double lam = lambda_nm * 1e-3;
  const double f = ch.lens_focal_mm * 1e3;
  const double ps = sys.sensor.pitch_um;
  const double D = sys.entrance_pupil_diameter_mm * 1e3;
  if (ps >= lam * f / D) throw Error(ErrorCode::UndersampledField, "sensor pitch exceeds the PSF Nyquist limit");
  const int N = opt.plane_px;
  const int S = std::min(opt.support_px, N);

  // pupil spacing small enough that the DFT period spans twice the window
  int Np = opt.pupil_samples;
  int need = int(std::ceil(D * 2.0 * S * ps / (lam * f)));
  Np = std::max(Np, need);
  PupilFunction pupil = disc_pupil(sys.entrance_pupil_diameter_mm, Np);

  Vec2 d = beam_displacement(ch, sys.layer_spacing_mm, lambda_nm, n_perp);
  const double rad = ch.lens_radius_mm * 1e3;
  Eigen::MatrixXd A(Np, Np);
  double full = 0.0, kept = 0.0;
  for (int r = 0; r < Np; ++r)
    for (int c = 0; c < Np; ++c) {
      double a = pupil.amplitude(r, c);
      double x = (c - 0.5 * (Np - 1)) * pupil.pitch_um + d[0] * 1e3 - ch.lens_center_mm[0] * 1e3;
      double y = (r - 0.5 * (Np - 1)) * pupil.pitch_um + d[1] * 1e3 - ch.lens_center_mm[1] * 1e3;
      full += a;
      if (x * x + y * y >= rad * rad) a = 0.0;
      kept += a;
      A(r, c) = a;
    }
  if (kept <= 0.0) throw Error(ErrorCode::ZeroPSF, "lens aperture blocks the whole pupil");

  Vec2 shift = predicted_shift(ch, lambda_nm);
  double u0 = (shift[0] + ch.lens_focal_mm * n_perp[0]) * 1e3;
  double v0 = (shift[1] + ch.lens_focal_mm * n_perp[1]) * 1e3;
  PsfPlane out;
  out.center_px = {N / 2 + u0 / ps, N / 2 + v0 / ps};
  int cc = int(std::lround(out.center_px[0])), cr = int(std::lround(out.center_px[1]));
  if (cc < 0 || cc >= N || cr < 0 || cr >= N)
    throw Error(ErrorCode::InvalidArgument, "PSF centre falls outside the plane; enlarge plane_px");
  int c_lo = std::max(0, cc - S / 2), c_hi = std::min(N, cc - S / 2 + S);
  int r_lo = std::max(0, cr - S / 2), r_hi = std::min(N, cr - S / 2 + S);

  auto kernel = [&](int lo, int hi, int center_idx, double off_um) {
    Eigen::MatrixXcd E(hi - lo, Np);
    for (int a = lo; a < hi; ++a) {
      double u = (a - center_idx) * ps - off_um;
      for (int k = 0; k < Np; ++k) {
        double x = (k - 0.5 * (Np - 1)) * pupil.pitch_um;
        E(a - lo, k) = std::polar(1.0, -kTwoPi * x * u / (lam * f));
      }
    }
    return E;
  };
  Eigen::MatrixXcd Ev = kernel(r_lo, r_hi, N / 2, v0);
  Eigen::MatrixXcd Eu = kernel(c_lo, c_hi, N / 2, u0);
  Eigen::MatrixXcd F = Ev * A.cast<cplx>() * Eu.transpose();

  out.plane = Image(N, N);
  double total = 0.0;
  for (int r = r_lo; r < r_hi; ++r)
    for (int c = c_lo; c < c_hi; ++c) {
      double v = std::norm(F(r - r_lo, c - c_lo));
      out.plane(r, c) = v;
      total += v;
    }
  for (auto& v : out.plane.data) v /= total;
  out.chain = blazed_order(1, ch.design_wavelength_nm, lambda_nm) * blazed_order(1, ch.design_wavelength_nm, lambda_nm) *
              band_weight(ch, sys.grid, lambda_nm);
  out.throughput = kept / full;
  return out;
}

PSFStack psf_stack(const SystemConfig& sys, const PsfOptions& opt) {
  validate_system(sys);
  PSFStack st;
  st.V = int(sys.num_channels());
  st.rows = st.cols = opt.plane_px;
  st.pitch_um = sys.sensor.pitch_um;
  st.grid = sys.grid;
  const std::size_t B = sys.grid.size();
  st.planes.resize(std::size_t(st.V) * B);
  st.chain.resize(st.planes.size());
  st.throughput.resize(st.planes.size());
  parallel_for(st.planes.size(), [&](std::size_t k) {
    int i = int(k / B) + 1;
    auto p = synthesize_psf(sys, i, sys.grid[k % B], {0, 0}, opt);
    st.planes[k] = std::move(p.plane);
    st.chain[k] = p.chain;
    st.throughput[k] = p.throughput;
  });
  return st;
}

Vec2 centroid(const Image& plane) {
  double s = 0.0, sx = 0.0, sy = 0.0;
  for (int r = 0; r < plane.rows; ++r)
    for (int c = 0; c < plane.cols; ++c) {
      double v = plane(r, c);
      s += v;
      sx += v * c;
      sy += v * r;
    }
  if (!(s > 0.0)) throw Error(ErrorCode::EmptyPlane, "plane has no positive mass");
  return {sx / s, sy / s};
}

Vec2 local_centroid(const Image& plane, Vec2 start, double radius, int iterations) {
  Vec2 c = start;
  for (int it = 0; it < iterations; ++it) {
    int r0 = std::max(0, int(std::floor(c[1] - radius))), r1 = std::min(plane.rows - 1, int(std::ceil(c[1] + radius)));
    int c0 = std::max(0, int(std::floor(c[0] - radius))), c1 = std::min(plane.cols - 1, int(std::ceil(c[0] + radius)));
    double s = 0.0, sx = 0.0, sy = 0.0;
    for (int r = r0; r <= r1; ++r)
      for (int k = c0; k <= c1; ++k) {
        double dx = k - c[0], dy = r - c[1];
        if (dx * dx + dy * dy >= radius * radius) continue;
        double v = plane(r, k);
        s += v;
        sx += v * k;
        sy += v * r;
      }
    if (!(s > 0.0)) throw Error(ErrorCode::EmptyPlane, "no mass inside the centroid window");
    Vec2 n{sx / s, sy / s};
    bool done = std::abs(n[0] - c[0]) < 1e-9 && std::abs(n[1] - c[1]) < 1e-9;
    c = n;
    if (done) break;
  }
  return c;
}

}  // namespace msp
