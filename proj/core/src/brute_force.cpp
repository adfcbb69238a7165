#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>

#include "metaspectra/fft.hpp"
#include "metaspectra/parallel.hpp"
#include "metaspectra/propagation.hpp"

namespace msp {

namespace {

double landing_um(double sine_axis, double sine_other, double spacing_um) {
  return spacing_um * sine_axis / std::sqrt(1.0 - sine_axis * sine_axis - sine_other * sine_other);
}

double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b) {
  double dx = b[0] - a[0], dy = b[1] - a[1];
  double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? std::clamp(((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2, 0.0, 1.0) : 0.0;
  return std::hypot(p[0] - a[0] - t * dx, p[1] - a[1] - t * dy);
}

double fold(double f, double fs) { return f - fs * std::floor(f / fs + 0.5); }

}  // namespace

BruteForceResult brute_force_centroids(const SystemConfig& sys, const BruteForceOptions& opt, std::vector<int> channels) {
  validate_system(sys);
  if (channels.empty())
    for (std::size_t i = 0; i < sys.num_channels(); ++i) channels.push_back(int(i) + 1);
  const int N = opt.grid;
  const std::size_t B = sys.grid.size();

  double pitch = opt.pitch_um;
  if (pitch <= 0.0) {
    double fmax = 0.0;
    for (const auto& ch : sys.channels) {
      double lc = ch.design_wavelength_nm * 1e-3;
      for (int a = 0; a < 2; ++a) fmax = std::max({fmax, std::abs(ch.alpha[a]) / lc, std::abs(ch.beta[a]) / lc});
    }
    pitch = fmax > 0.0 ? opt.band_limit_fraction / (2.0 * fmax) : 0.3;
  }
  const double W = N * pitch;
  const double Rp = opt.pupil_frac * W;
  const double rap = Rp + opt.margin_frac * Rp;
  const double guard = opt.guard_frac * Rp;

  BruteForceResult res;
  res.channels = channels;
  res.pitch_um = pitch;
  res.pupil_radius_um = Rp;
  res.aperture_radius_um = rap;

  // per channel: landing path between the band edges (per unit spacing) and the
  // shortest spacing whose stadium clears the undeflected beam
  const std::size_t V = sys.num_channels();
  std::vector<std::array<Vec2, 2>> path(V);
  std::vector<double> spacing(V);
  const double l0 = sys.grid.front(), l1 = sys.grid.back();
  for (std::size_t i = 0; i < V; ++i) {
    const auto& ch = sys.channels[i];
    Vec2 a0{l0 / ch.design_wavelength_nm * ch.alpha[0], l0 / ch.design_wavelength_nm * ch.alpha[1]};
    Vec2 a1{l1 / ch.design_wavelength_nm * ch.alpha[0], l1 / ch.design_wavelength_nm * ch.alpha[1]};
    Vec2 g0{landing_um(a0[0], a0[1], 1.0), landing_um(a0[1], a0[0], 1.0)};
    Vec2 g1{landing_um(a1[0], a1[1], 1.0), landing_um(a1[1], a1[0], 1.0)};
    double near = std::min(std::hypot(g0[0], g0[1]), std::hypot(g1[0], g1[1]));
    double far = std::max({std::abs(g0[0]), std::abs(g0[1]), std::abs(g1[0]), std::abs(g1[1])});
    double s_min = near > 0.0 ? (Rp + rap + guard) / near : opt.spacing_frac * W;
    double s_max = far > 0.0 ? (0.5 * W - rap - guard) / far : s_min;
    spacing[i] = opt.spacing_frac > 0.0 ? opt.spacing_frac * W : std::min(s_min, s_max);
    path[i][0] = {g0[0] * spacing[i], g0[1] * spacing[i]};
    path[i][1] = {g1[0] * spacing[i], g1[1] * spacing[i]};
  }
  for (int i : channels) res.spacing_um.push_back(spacing[std::size_t(i - 1)]);

  std::vector<PhaseProfile> m0, m2;
  for (const auto& ch : sys.channels) {
    m0.push_back(linear_phase_profile(ch.alpha, ch.design_wavelength_nm, N, N, pitch));
    m2.push_back(linear_phase_profile(ch.beta, ch.design_wavelength_nm, N, N, pitch));
  }
  InterleavedSurface surface = interleave_surface(m0, opt.regular_interleave, opt.seed);

  ComplexField pupil(N, N, pitch, 550.0);
  double pupil_power = 0.0;
  for (int r = 0; r < N; ++r)
    for (int c = 0; c < N; ++c) {
      double x = pupil.x_um(c), y = pupil.y_um(r);
      if (x * x + y * y < Rp * Rp) {
        pupil(r, c) = 1.0;
        pupil_power += 1.0;
      }
    }

  const int M = 2 * N;
  res.offset_px.assign(channels.size(), std::vector<Vec2>(B));
  res.predicted_px.assign(channels.size(), std::vector<Vec2>(B));
  res.roi_power.assign(channels.size(), std::vector<double>(B));

  parallel_for(B, [&](std::size_t b) {
    const double lam = sys.grid[b];
    ComplexField u = pupil;
    u.wavelength_nm = lam;
    u = apply_metasurface(u, surface, lam);
    const double df = 1.0 / (M * pitch);  // cycles/um per padded bin
    const double roi = opt.roi_airy * 1.22 / (2.0 * Rp) / df;
    for (std::size_t k = 0; k < channels.size(); ++k) {
      const int i = channels[k];
      const auto& ch = sys.channel(i);
      const auto& seg = path[std::size_t(i - 1)];
      ComplexField ui = angular_spectrum_propagate(u, spacing[std::size_t(i - 1)] * 1e-3, lam, false);
      for (int r = 0; r < N; ++r)
        for (int c = 0; c < N; ++c)
          if (segment_distance({ui.x_um(c), ui.y_um(r)}, seg[0], seg[1]) >= rap) ui(r, c) = 0.0;
      ui = apply_metasurface(ui, m2[std::size_t(i - 1)], lam);
      Image ff = far_field_intensity(ui, M);
      double lc = ch.design_wavelength_nm * 1e-3;
      Vec2 fpred{(ch.alpha[0] + ch.beta[0]) / lc, (ch.alpha[1] + ch.beta[1]) / lc};
      Vec2 start{M / 2 + fpred[0] / df, M / 2 + fpred[1] / df};
      Vec2 cen = local_centroid(ff, start, roi);
      // sensor position u = f * lambda * spatial frequency
      const double scale = ch.lens_focal_mm * 1e3 * lam * 1e-3 * df / sys.sensor.pitch_um;
      res.offset_px[k][b] = {(cen[0] - M / 2) * scale, (cen[1] - M / 2) * scale};
      Vec2 pred = predicted_shift(ch, lam);
      res.predicted_px[k][b] = {pred[0] * 1e3 / sys.sensor.pitch_um, pred[1] * 1e3 / sys.sensor.pitch_um};
      double pw = 0.0;
      for (int r = 0; r < M; ++r)
        for (int c = 0; c < M; ++c) {
          double dx = c - cen[0], dy = r - cen[1];
          if (dx * dx + dy * dy < roi * roi) pw += ff(r, c);
        }
      res.roi_power[k][b] = pw / (double(M) * M * pupil_power);
    }
  });
  return res;
}

InterleaveAnalysis analyze_interleaving(const SystemConfig& sys, const InterleaveAnalysisOptions& opt) {
  validate_system(sys);
  const int N = opt.grid, M = 2 * N;
  std::vector<PhaseProfile> profiles;
  for (const auto& ch : sys.channels)
    profiles.push_back(linear_phase_profile(ch.alpha, ch.design_wavelength_nm, N, N, opt.pitch_um));
  const double fs = 1.0 / opt.pitch_um, df = 1.0 / (M * opt.pitch_um);

  // every order of every constituent grating, folded into the sampled band
  std::vector<Vec2> orders;
  for (const auto& ch : sys.channels)
    for (int n = -opt.max_order; n <= opt.max_order; ++n) {
      double lc = ch.design_wavelength_nm * 1e-3;
      orders.push_back({M / 2 + fold(n * ch.alpha[0] / lc, fs) / df, M / 2 + fold(n * ch.alpha[1] / lc, fs) / df});
    }
  auto near_order = [&](int r, int c) {
    for (const auto& o : orders) {
      double dx = std::remainder(c - o[0], double(M)), dy = std::remainder(r - o[1], double(M));
      if (dx * dx + dy * dy <= opt.exclusion_bins * opt.exclusion_bins) return true;
    }
    return false;
  };
  std::vector<std::uint8_t> excluded(std::size_t(M) * M);
  for (int r = 0; r < M; ++r)
    for (int c = 0; c < M; ++c) excluded[std::size_t(r) * M + c] = near_order(r, c);

  auto spectrum = [&](bool regular) {
    InterleavedSurface surf = interleave_surface(profiles, regular, opt.seed);
    auto t = surf.transmission(opt.lambda_nm);
    ComplexField u(N, N, opt.pitch_um, opt.lambda_nm);
    for (int r = 0; r < N; ++r)
      for (int c = 0; c < N; ++c) {
        double w = std::sin(std::numbers::pi * (r + 0.5) / N) * std::sin(std::numbers::pi * (c + 0.5) / N);
        u(r, c) = w * w * t[std::size_t(r) * N + c];
      }
    Image ff = far_field_intensity(u, M);
    double total = ff.sum();
    for (double& v : ff.data) v /= total;
    return ff;
  };
  auto spurious = [&](const Image& ff) {
    double m = 0.0;
    for (std::size_t k = 0; k < ff.data.size(); ++k)
      if (!excluded[k]) m = std::max(m, ff.data[k]);
    return m;
  };

  InterleaveAnalysis out;
  Image reg = spectrum(true), rnd = spectrum(false);
  out.regular_replica_peak = spurious(reg);
  out.random_spurious_peak = spurious(rnd);
  for (const auto& ch : sys.channels) {
    double lc = ch.design_wavelength_nm * 1e-3;
    int c = int(std::lround(M / 2 + fold(ch.alpha[0] / lc, fs) / df)), r = int(std::lround(M / 2 + fold(ch.alpha[1] / lc, fs) / df));
    for (int dr = -2; dr <= 2; ++dr)
      for (int dc = -2; dc <= 2; ++dc) {
        int rr = (r + dr + M) % M, cc = (c + dc + M) % M;
        out.design_peak = std::max(out.design_peak, rnd(rr, cc));
      }
  }
  out.ratio = out.random_spurious_peak > 0.0 ? out.regular_replica_peak / out.random_spurious_peak : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace msp
