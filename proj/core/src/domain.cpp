#include "metaspectra/domain.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "metaspectra/metasurface.hpp"

namespace msp {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NegativeRadiance: return "NegativeRadiance";
    case ErrorCode::BandMismatch: return "BandMismatch";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::OutOfBand: return "OutOfBand";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::AliasedProfile: return "AliasedProfile";
    case ErrorCode::NonPeriodic: return "NonPeriodic";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::WrongChannelCount: return "WrongChannelCount";
    case ErrorCode::EmptyLibrary: return "EmptyLibrary";
    case ErrorCode::DesignWavelengthMissing: return "DesignWavelengthMissing";
    case ErrorCode::UndersampledField: return "UndersampledField";
    case ErrorCode::EmptyPlane: return "EmptyPlane";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::SingularHomography: return "SingularHomography";
    case ErrorCode::ZeroReference: return "ZeroReference";
    case ErrorCode::ZeroPSF: return "ZeroPSF";
    case ErrorCode::AllSaturated: return "AllSaturated";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UnreadableCube: return "UnreadableCube";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::ZeroGradient: return "ZeroGradient";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

SpectralGrid::SpectralGrid(std::vector<double> wl, std::pair<double, double> band)
    : wl_(std::move(wl)), band_(band) {
  if (wl_.size() < 2) throw Error(ErrorCode::InvalidArgument, "spectral grid needs at least 2 samples");
  for (std::size_t i = 0; i < wl_.size(); ++i) {
    if (!std::isfinite(wl_[i])) throw Error(ErrorCode::InvalidArgument, "non-finite wavelength");
    if (i > 0 && !(wl_[i] > wl_[i - 1]))
      throw Error(ErrorCode::InvalidArgument, "wavelengths must be strictly increasing");
    if (wl_[i] < band_.first || wl_[i] > band_.second)
      throw Error(ErrorCode::InvalidArgument, "wavelength outside band");
  }
}

SpectralGrid::SpectralGrid(std::vector<double> wl)
    : SpectralGrid(wl, {wl.empty() ? 0.0 : wl.front(), wl.empty() ? 0.0 : wl.back()}) {}

SpectralGrid SpectralGrid::uniform(double lo, double hi, std::size_t count) {
  if (count < 2) throw Error(ErrorCode::InvalidArgument, "spectral grid needs at least 2 samples");
  std::vector<double> wl(count);
  for (std::size_t i = 0; i < count; ++i) wl[i] = lo + (hi - lo) * double(i) / double(count - 1);
  wl.back() = hi;
  return SpectralGrid(std::move(wl), {lo, hi});
}

std::optional<std::size_t> SpectralGrid::find(double lambda, double tol) const {
  for (std::size_t i = 0; i < wl_.size(); ++i)
    if (std::abs(wl_[i] - lambda) <= tol) return i;
  return std::nullopt;
}

std::vector<double> SpectralGrid::trapezoid_weights() const {
  std::vector<double> w(wl_.size(), 0.0);
  for (std::size_t i = 0; i + 1 < wl_.size(); ++i) {
    double h = 0.5 * (wl_[i + 1] - wl_[i]);
    w[i] += h;
    w[i + 1] += h;
  }
  return w;
}

SpectralGrid default_grid() { return SpectralGrid::uniform(450.0, 700.0, 26); }

double Image::sum() const { return std::accumulate(data.begin(), data.end(), 0.0); }

HyperspectralCube::HyperspectralCube(int r, int c, SpectralGrid g, double pitch, double fill)
    : rows(r), cols(c), grid(std::move(g)), pitch_um(pitch), data(std::size_t(r) * c * grid.size(), fill) {}

Image HyperspectralCube::band_image(std::size_t b) const {
  Image img(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) img(r, c) = (*this)(r, c, b);
  return img;
}

void HyperspectralCube::set_band(std::size_t b, const Image& img) {
  if (img.rows != rows || img.cols != cols) throw Error(ErrorCode::ShapeMismatch, "band image shape");
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) (*this)(r, c, b) = img(r, c);
}

double ComplexField::energy() const {
  double e = 0.0;
  for (const auto& v : values) e += std::norm(v);
  return e;
}

FilterSpec FilterSpec::neutral_density(double od) {
  if (!(od >= 0.0)) throw Error(ErrorCode::InvalidArgument, "optical density must be >= 0");
  FilterSpec f;
  f.kind = Kind::NeutralDensity;
  f.od = od;
  return f;
}

FilterSpec FilterSpec::linear_polarizer(double angle_deg) {
  FilterSpec f;
  f.kind = Kind::LinearPolarizer;
  f.angle_deg = angle_deg;
  return f;
}

double FilterSpec::transmittance(const Polarization& pol) const {
  switch (kind) {
    case Kind::None: return 1.0;
    case Kind::NeutralDensity: return std::pow(10.0, -od);
    case Kind::LinearPolarizer: {
      if (!pol.polarized) return 0.5;
      double d = (pol.angle_deg - angle_deg) * M_PI / 180.0;
      double c = std::cos(d);
      return c * c;
    }
  }
  return 1.0;
}

std::vector<double> SensorModel::mean_response() const {
  if (eta.empty()) return {};
  std::vector<double> m(eta.front().size(), 0.0);
  for (const auto& e : eta)
    for (std::size_t b = 0; b < m.size(); ++b) m[b] += e[b];
  for (auto& v : m) v /= double(eta.size());
  return m;
}

SensorModel default_rgb_sensor(const SpectralGrid& grid, double half_width) {
  SensorModel s;
  const double peaks[3] = {610.0, 540.0, 470.0};  // R, G, B
  for (double mu : peaks) {
    std::vector<double> e(grid.size(), 0.0);
    for (std::size_t b = 0; b < grid.size(); ++b) {
      double d = grid[b] - mu;
      if (std::abs(d) < half_width) e[b] = 0.5 * (1.0 + std::cos(M_PI * d / half_width));
    }
    s.eta.push_back(std::move(e));
  }
  return s;
}

SensorModel mono_sensor(const SpectralGrid& grid) {
  SensorModel s;
  s.eta.assign(1, std::vector<double>(grid.size(), 1.0));
  return s;
}

const ChannelConfig& SystemConfig::channel(int index) const {
  if (index < 1 || index > int(channels.size()))
    throw Error(ErrorCode::InvalidArgument, "channel index out of range: " + std::to_string(index));
  return channels[std::size_t(index - 1)];
}

double norm2(const Vec2& v) { return std::hypot(v[0], v[1]); }

void validate_system(const SystemConfig& sys) {
  if (sys.channels.empty()) throw Error(ErrorCode::InvalidArgument, "system needs at least one channel");
  if (sys.grid.size() < 2) throw Error(ErrorCode::InvalidArgument, "system grid not set");
  for (const auto& ch : sys.channels) {
    if (!(ch.lens_focal_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal length must be > 0");
    if (!(ch.lens_radius_mm > 0.0)) throw Error(ErrorCode::InvalidArgument, "lens radius must be > 0");
    if (!(norm2(ch.alpha) < 1.0)) throw Error(ErrorCode::InvalidArgument, "|alpha| must be < 1");
    if (!(ch.design_wavelength_nm > 0.0)) throw Error(ErrorCode::InvalidArgument, "design wavelength must be > 0");
    if (!ch.b_efficiency.empty() && ch.b_efficiency.size() != sys.grid.size())
      throw Error(ErrorCode::GridMismatch, "b_efficiency length differs from grid");
  }
  const auto& s = sys.sensor;
  if (s.eta.empty()) throw Error(ErrorCode::InvalidArgument, "sensor has no color response");
  for (const auto& e : s.eta) {
    if (e.size() != sys.grid.size()) throw Error(ErrorCode::GridMismatch, "sensor eta length differs from grid");
    for (double v : e)
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::InvalidArgument, "eta must lie in [0, 1]");
  }
  if (!(s.gain > 0.0) || !(s.exposure_s > 0.0)) throw Error(ErrorCode::InvalidArgument, "gain and exposure must be > 0");
  if (!(s.sigma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be >= 0");
  if (!(s.pitch_um > 0.0)) throw Error(ErrorCode::InvalidArgument, "sensor pitch must be > 0");
  if (!(s.photons_per_unit > 0.0)) throw Error(ErrorCode::InvalidArgument, "photons_per_unit must be > 0");
  if (!(sys.entrance_pupil_diameter_mm > 0.0) || !(sys.layer_spacing_mm >= 0.0))
    throw Error(ErrorCode::InvalidArgument, "pupil diameter / layer spacing");
}

SystemConfig default_system() {
  SystemConfig sys;
  sys.grid = default_grid();
  sys.sensor = default_rgb_sensor(sys.grid);
  auto vecs = default_deflection_vectors();
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    ChannelConfig ch;
    ch.index = int(i) + 1;
    ch.alpha = vecs[i].alpha;
    ch.beta = vecs[i].beta;
    ch.design_wavelength_nm = vecs[i].design_wavelength_nm;
    ch.lens_focal_mm = 12.0;
    ch.lens_radius_mm = 2.0;
    ch.lens_center_mm = {2.5 * (ch.alpha[0] < 0 ? -1.0 : 1.0), 2.5 * (ch.alpha[1] < 0 ? -1.0 : 1.0)};
    sys.channels.push_back(ch);
  }
  return sys;
}

std::optional<Error> validate_cube(const HyperspectralCube& cube) {
  if (cube.data.size() != std::size_t(cube.rows) * cube.cols * cube.grid.size())
    return Error(ErrorCode::BandMismatch, "sample count does not match rows*cols*bands");
  for (double v : cube.data) {
    if (!std::isfinite(v)) return Error(ErrorCode::NonFinite, "cube holds a non-finite value");
  }
  for (double v : cube.data) {
    if (v < 0.0) return Error(ErrorCode::NegativeRadiance, "cube holds a negative value");
  }
  return std::nullopt;
}

HyperspectralCube resample_cube(const HyperspectralCube& cube, const SpectralGrid& target) {
  const auto& src = cube.grid;
  const double tol = 1e-9;
  if (target.front() < src.front() - tol || target.back() > src.back() + tol)
    throw Error(ErrorCode::OutOfBand, "target grid exceeds source coverage");
  if (target.wavelengths() == src.wavelengths()) {
    HyperspectralCube out = cube;
    out.grid = target;
    return out;
  }
  const std::size_t nb = target.size(), sb = src.size();
  std::vector<std::size_t> lo(nb);
  std::vector<double> frac(nb);
  for (std::size_t k = 0; k < nb; ++k) {
    double l = std::clamp(target[k], src.front(), src.back());
    auto it = std::upper_bound(src.wavelengths().begin(), src.wavelengths().end(), l);
    std::size_t j = std::size_t(it - src.wavelengths().begin());
    j = j == 0 ? 0 : j - 1;
    if (j >= sb - 1) j = sb - 2;
    lo[k] = j;
    frac[k] = (l - src[j]) / (src[j + 1] - src[j]);
  }
  HyperspectralCube out(cube.rows, cube.cols, target, cube.pitch_um);
  for (int r = 0; r < cube.rows; ++r)
    for (int c = 0; c < cube.cols; ++c)
      for (std::size_t k = 0; k < nb; ++k) {
        double a = cube(r, c, lo[k]), b = cube(r, c, lo[k] + 1);
        double f = frac[k];
        out(r, c, k) = f == 0.0 ? a : (f == 1.0 ? b : a + f * (b - a));
      }
  return out;
}

}  // namespace msp
