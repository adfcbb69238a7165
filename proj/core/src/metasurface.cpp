#include "metaspectra/metasurface.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "metaspectra/fft.hpp"

namespace msp {

namespace {

constexpr double kTwoPi = 2.0 * M_PI;

double wrap_phase(double p) {
  double w = std::fmod(p, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

double phase_distance(double a, double b) {
  double d = std::fmod(std::abs(a - b), kTwoPi);
  return std::min(d, kTwoPi - d);
}

void require_same_grid(const std::vector<PhaseProfile>& profiles, bool same_lc) {
  if (profiles.empty()) throw Error(ErrorCode::ShapeMismatch, "no profiles to interleave");
  const auto& p0 = profiles.front();
  for (const auto& p : profiles) {
    if (p.rows != p0.rows || p.cols != p0.cols || p.pitch_um != p0.pitch_um)
      throw Error(ErrorCode::ShapeMismatch, "profiles differ in shape or pitch");
    if (same_lc && p.design_wavelength_nm != p0.design_wavelength_nm)
      throw Error(ErrorCode::ShapeMismatch, "profiles differ in design wavelength");
  }
}

PhaseProfile gather(const std::vector<PhaseProfile>& profiles, const std::vector<std::uint8_t>& assign) {
  PhaseProfile out = profiles.front();
  for (std::size_t i = 0; i < assign.size(); ++i) out.phase_rad[i] = profiles[assign[i]].phase_rad[i];
  return out;
}

// smallest M such that seq[k + M] == seq[k] (mod 2pi) for every valid k
int detect_period(const std::vector<double>& seq) {
  const int L = int(seq.size());
  for (int M = 1; 2 * M <= L; ++M) {
    bool ok = true;
    for (int k = 0; k + M < L && ok; ++k) ok = phase_distance(seq[k + M], seq[k]) < 1e-6;
    if (ok) return M;
  }
  return 0;
}

}  // namespace

double sinc(double u) {
  if (std::abs(u) < 1e-12) return 1.0;
  return std::sin(M_PI * u) / (M_PI * u);
}

cplx blazed_order(int n, double lambda_c, double lambda) {
  double u = lambda_c / lambda - n;
  return std::polar(sinc(u), M_PI * u);
}

double deflection_angle_deg(const Vec2& alpha) { return std::asin(norm2(alpha)) * 180.0 / M_PI; }

PhaseProfile linear_phase_profile(const Vec2& alpha, double lambda_c, int rows, int cols, double pitch_um) {
  if (!(norm2(alpha) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|alpha| must be < 1");
  if (!(pitch_um > 0.0) || rows <= 0 || cols <= 0) throw Error(ErrorCode::InvalidArgument, "profile grid");
  const double lc_um = lambda_c * 1e-3;
  for (double a : alpha)
    if (kTwoPi / lc_um * std::abs(a) * pitch_um >= M_PI)
      throw Error(ErrorCode::AliasedProfile, "phase step per sample >= pi; reduce pitch");
  PhaseProfile p(rows, cols, pitch_um, lambda_c);
  for (int r = 0; r < rows; ++r) {
    double y = (r - rows / 2) * pitch_um;
    for (int c = 0; c < cols; ++c) {
      double x = (c - cols / 2) * pitch_um;
      p(r, c) = wrap_phase(kTwoPi / lc_um * (alpha[0] * x + alpha[1] * y));
    }
  }
  return p;
}

PhaseProfile linear_phase_profile(const Vec2& alpha, double lambda_c, double extent_mm, double pitch_um) {
  int n = int(std::lround(extent_mm * 1000.0 / pitch_um));
  return linear_phase_profile(alpha, lambda_c, n, n, pitch_um);
}

DiffractionSpectrum diffraction_orders(const PhaseProfile& profile, double lambda_nm, int max_order) {
  DiffractionSpectrum out;
  out.wavelength_nm = lambda_nm;
  const double rho = profile.design_wavelength_nm / lambda_nm;

  std::vector<double> row(profile.phase_rad.begin(), profile.phase_rad.begin() + profile.cols);
  std::vector<double> col(std::size_t(profile.rows));
  for (int r = 0; r < profile.rows; ++r) col[std::size_t(r)] = profile(r, 0);
  auto is_const = [](const std::vector<double>& s) {
    for (double v : s)
      if (phase_distance(v, s.front()) > 1e-9) return false;
    return true;
  };
  const std::vector<double>* seq = &row;
  if (is_const(row)) seq = &col;
  if (is_const(*seq)) {
    // unmodulated profile: single zeroth order
    for (int n = -max_order; n <= max_order; ++n)
      out.orders[n] = n == 0 ? std::polar(1.0, rho * seq->front()) : cplx{};
    out.total_power = 1.0;
    out.samples_per_period = 1;
    return out;
  }

  const int M = detect_period(*seq);
  if (M == 0) throw Error(ErrorCode::NonPeriodic, "no integer period found along the profile");

  // cycles per period from the unwrapped phase advance
  double advance = 0.0;
  for (int k = 0; k < M; ++k) {
    double d = (*seq)[std::size_t((k + 1) % M)] - (*seq)[std::size_t(k)];
    d = std::remainder(d, kTwoPi);
    advance += d;
  }
  int K = int(std::lround(advance / kTwoPi));
  if (K == 0) throw Error(ErrorCode::NonPeriodic, "zero net phase advance over the period");

  std::vector<cplx> g(static_cast<std::size_t>(M));
  for (int k = 0; k < M; ++k) g[std::size_t(k)] = std::polar(1.0, rho * (*seq)[std::size_t(k)]);
  fft2(g, 1, M, false);
  double total = 0.0;
  for (auto& v : g) {
    v /= double(M);
    total += std::norm(v);
  }
  for (int n = -max_order; n <= max_order; ++n) {
    long idx = (long(n) * K) % M;
    if (idx < 0) idx += M;
    out.orders[n] = g[std::size_t(idx)];
  }
  out.total_power = total;
  out.samples_per_period = M / std::abs(K);
  return out;
}

std::vector<std::uint8_t> random_assignment(int rows, int cols, int V, std::uint64_t seed) {
  if (V < 1 || V > 255) throw Error(ErrorCode::InvalidArgument, "channel count");
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> a(std::size_t(rows) * cols);
  for (auto& v : a) v = std::uint8_t(rng() % std::uint64_t(V));
  return a;
}

std::vector<std::uint8_t> regular_assignment(int rows, int cols) {
  static const std::uint8_t table[2][2] = {{0, 1}, {3, 2}};
  std::vector<std::uint8_t> a(std::size_t(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) a[std::size_t(r) * cols + c] = table[r & 1][c & 1];
  return a;
}

PhaseProfile interleave_random(const std::vector<PhaseProfile>& profiles, std::uint64_t seed) {
  require_same_grid(profiles, true);
  const auto& p0 = profiles.front();
  return gather(profiles, random_assignment(p0.rows, p0.cols, int(profiles.size()), seed));
}

PhaseProfile interleave_regular(const std::vector<PhaseProfile>& profiles) {
  if (profiles.size() != 4) throw Error(ErrorCode::WrongChannelCount, "regular interleave needs 4 profiles");
  require_same_grid(profiles, true);
  const auto& p0 = profiles.front();
  return gather(profiles, regular_assignment(p0.rows, p0.cols));
}

InterleavedSurface interleave_surface(const std::vector<PhaseProfile>& profiles, bool regular, std::uint64_t seed) {
  require_same_grid(profiles, false);
  if (regular && profiles.size() != 4) throw Error(ErrorCode::WrongChannelCount, "regular interleave needs 4 profiles");
  InterleavedSurface s;
  s.rows = profiles.front().rows;
  s.cols = profiles.front().cols;
  s.pitch_um = profiles.front().pitch_um;
  s.profiles = profiles;
  s.assignment = regular ? regular_assignment(s.rows, s.cols)
                         : random_assignment(s.rows, s.cols, int(profiles.size()), seed);
  return s;
}

std::vector<cplx> InterleavedSurface::transmission(double lambda_nm) const {
  std::vector<double> rho(profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) rho[i] = profiles[i].design_wavelength_nm / lambda_nm;
  std::vector<cplx> t(assignment.size());
  for (std::size_t k = 0; k < t.size(); ++k) {
    auto a = assignment[k];
    t[k] = std::polar(1.0, rho[a] * profiles[a].phase_rad[k]);
  }
  return t;
}

std::vector<double> InterleavedSurface::channel_fractions() const {
  std::vector<double> f(profiles.size(), 0.0);
  for (auto a : assignment) f[a] += 1.0;
  for (auto& v : f) v /= double(assignment.size());
  return f;
}

void NanocellLibrary::validate() const {
  if (radii_nm.empty()) throw Error(ErrorCode::EmptyLibrary, "library has no entries");
  if (transmission.size() != radii_nm.size()) throw Error(ErrorCode::ShapeMismatch, "library entries");
  for (std::size_t i = 0; i < radii_nm.size(); ++i) {
    if (i > 0 && !(radii_nm[i] > radii_nm[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "library radii must be strictly increasing");
    if (transmission[i].size() != grid.size()) throw Error(ErrorCode::GridMismatch, "library transmission length");
    for (const auto& t : transmission[i])
      if (std::abs(t) > 1.0 + 1e-12) throw Error(ErrorCode::InvalidArgument, "|transmission| > 1");
  }
}

RadiusMap nanocell_lookup(const PhaseProfile& target, const NanocellLibrary& lib) {
  if (lib.radii_nm.empty()) throw Error(ErrorCode::EmptyLibrary, "library has no entries");
  lib.validate();
  auto band = lib.grid.find(target.design_wavelength_nm);
  if (!band) throw Error(ErrorCode::DesignWavelengthMissing, "design wavelength not in library grid");
  std::vector<cplx> m(lib.radii_nm.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = lib.transmission[i][*band];

  RadiusMap out;
  out.rows = target.rows;
  out.cols = target.cols;
  out.cell_width_nm = lib.cell_width_nm;
  out.radii_nm.resize(target.phase_rad.size());
  for (std::size_t k = 0; k < target.phase_rad.size(); ++k) {
    cplx want = std::polar(1.0, target.phase_rad[k]);
    std::size_t best = 0;
    double best_d = std::abs(want - m[0]);
    for (std::size_t i = 1; i < m.size(); ++i) {
      double d = std::abs(want - m[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    out.radii_nm[k] = lib.radii_nm[best];
  }
  return out;
}

std::vector<DeflectionPair> default_deflection_vectors(double a, const std::vector<double>& lc) {
  if (lc.size() < 2) throw Error(ErrorCode::InvalidArgument, "need at least two design wavelengths");
  std::vector<DeflectionPair> out;
  for (std::size_t k = 0; k < lc.size(); ++k) {
    int i = int(k) + 1;
    double s1 = (i / 2 + 1) % 2 == 0 ? 1.0 : -1.0;
    double s2 = ((i - 1) / 2 + 1) % 2 == 0 ? 1.0 : -1.0;
    double scale = lc[k] / lc[1] * a;
    Vec2 alpha{s1 * scale, s2 * scale};
    Vec2 res{0.0, 0.0};
    if (i <= 2) res = {0.017, (i % 2 == 1 ? 1.0 : -1.0) * 0.017};
    out.push_back({alpha, {-alpha[0] + res[0], -alpha[1] + res[1]}, lc[k]});
  }
  return out;
}

}  // namespace msp
