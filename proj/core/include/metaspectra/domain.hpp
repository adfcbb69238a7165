#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace msp {

using Vec2 = std::array<double, 2>;
using cplx = std::complex<double>;

enum class ErrorCode {
  NegativeRadiance,
  BandMismatch,
  NonFinite,
  OutOfBand,
  InvalidArgument,
  AliasedProfile,
  NonPeriodic,
  ShapeMismatch,
  WrongChannelCount,
  EmptyLibrary,
  DesignWavelengthMissing,
  UndersampledField,
  EmptyPlane,
  GridMismatch,
  DegenerateConfiguration,
  TooFewPoints,
  SingularHomography,
  ZeroReference,
  ZeroPSF,
  AllSaturated,
  EmptyDataset,
  UnreadableCube,
  BadMagic,
  TruncatedFile,
  SizeMismatch,
  ConfigError,
  IoError,
  ImageTooSmall,
  ZeroGradient,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class SpectralGrid {
 public:
  SpectralGrid() = default;
  // throws InvalidArgument unless strictly increasing, >= 2 samples, inside band
  SpectralGrid(std::vector<double> wavelengths_nm, std::pair<double, double> band);
  explicit SpectralGrid(std::vector<double> wavelengths_nm);

  static SpectralGrid uniform(double lo_nm, double hi_nm, std::size_t count);

  std::size_t size() const { return wl_.size(); }
  double operator[](std::size_t i) const { return wl_[i]; }
  const std::vector<double>& wavelengths() const { return wl_; }
  std::pair<double, double> band() const { return band_; }
  double front() const { return wl_.front(); }
  double back() const { return wl_.back(); }

  // band index whose wavelength equals lambda within tol, if any
  std::optional<std::size_t> find(double lambda_nm, double tol = 1e-6) const;
  // trapezoidal quadrature weights (nm)
  std::vector<double> trapezoid_weights() const;

  bool operator==(const SpectralGrid& o) const { return wl_ == o.wl_ && band_ == o.band_; }

 private:
  std::vector<double> wl_;
  std::pair<double, double> band_{0.0, 0.0};
};

// 450-700 nm, 26 bands
SpectralGrid default_grid();

struct Image {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Image() = default;
  Image(int r, int c, double fill = 0.0) : rows(r), cols(c), data(std::size_t(r) * c, fill) {}

  double& operator()(int r, int c) { return data[std::size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return data[std::size_t(r) * cols + c]; }
  std::size_t size() const { return data.size(); }
  double sum() const;
};

struct HyperspectralCube {
  int rows = 0;
  int cols = 0;
  SpectralGrid grid;
  double pitch_um = 2.0;
  std::vector<double> data;  // (row, col, band)

  HyperspectralCube() = default;
  HyperspectralCube(int r, int c, SpectralGrid g, double pitch = 2.0, double fill = 0.0);

  std::size_t bands() const { return grid.size(); }
  std::size_t index(int r, int c, std::size_t b) const {
    return (std::size_t(r) * cols + c) * grid.size() + b;
  }
  double& operator()(int r, int c, std::size_t b) { return data[index(r, c, b)]; }
  double operator()(int r, int c, std::size_t b) const { return data[index(r, c, b)]; }

  Image band_image(std::size_t b) const;
  void set_band(std::size_t b, const Image& img);
};

struct ComplexField {
  int rows = 0;
  int cols = 0;
  double pitch_um = 1.0;
  double wavelength_nm = 550.0;
  std::vector<cplx> values;

  ComplexField() = default;
  ComplexField(int r, int c, double pitch, double wl, cplx fill = {0.0, 0.0})
      : rows(r), cols(c), pitch_um(pitch), wavelength_nm(wl), values(std::size_t(r) * c, fill) {}

  cplx& operator()(int r, int c) { return values[std::size_t(r) * cols + c]; }
  const cplx& operator()(int r, int c) const { return values[std::size_t(r) * cols + c]; }
  double energy() const;
  // physical coordinate (um) of sample index, origin at index n/2
  double x_um(int c) const { return (c - cols / 2) * pitch_um; }
  double y_um(int r) const { return (r - rows / 2) * pitch_um; }
};

struct PhaseProfile {
  int rows = 0;
  int cols = 0;
  double pitch_um = 0.3;
  double design_wavelength_nm = 550.0;
  std::vector<double> phase_rad;  // wrapped to [0, 2pi)

  PhaseProfile() = default;
  PhaseProfile(int r, int c, double pitch, double lc)
      : rows(r), cols(c), pitch_um(pitch), design_wavelength_nm(lc), phase_rad(std::size_t(r) * c, 0.0) {}

  double& operator()(int r, int c) { return phase_rad[std::size_t(r) * cols + c]; }
  double operator()(int r, int c) const { return phase_rad[std::size_t(r) * cols + c]; }
};

struct Polarization {
  bool polarized = false;
  double angle_deg = 0.0;

  static Polarization unpolarized() { return {}; }
  static Polarization linear(double deg) { return {true, deg}; }
};

struct FilterSpec {
  enum class Kind { None, NeutralDensity, LinearPolarizer };
  Kind kind = Kind::None;
  double od = 0.0;
  double angle_deg = 0.0;

  static FilterSpec none() { return {}; }
  static FilterSpec neutral_density(double od);
  static FilterSpec linear_polarizer(double angle_deg);

  // power transmittance |F|^2
  double transmittance(const Polarization& pol = {}) const;
};

struct SensorModel {
  std::vector<std::vector<double>> eta;  // [color][band]
  double gain = 1.0;
  double exposure_s = 0.01;
  double sigma = 0.0;
  double pitch_um = 2.0;
  double full_well = 1.0;
  double photons_per_unit = 1e4;

  std::size_t colors() const { return eta.size(); }
  // mean response over color planes, used as eta(lambda) in calibration
  std::vector<double> mean_response() const;
};

// raised-cosine lobes peaked at 470/540/610 nm
SensorModel default_rgb_sensor(const SpectralGrid& grid, double half_width_nm = 120.0);
SensorModel mono_sensor(const SpectralGrid& grid);

struct ChannelConfig {
  int index = 1;
  Vec2 alpha{0.0, 0.0};
  Vec2 beta{0.0, 0.0};
  double design_wavelength_nm = 550.0;
  double lens_focal_mm = 12.0;
  Vec2 lens_center_mm{0.0, 0.0};
  double lens_radius_mm = 2.0;
  FilterSpec filter;
  std::vector<double> b_efficiency;  // empty means all ones
};

struct SystemConfig {
  std::vector<ChannelConfig> channels;
  SensorModel sensor;
  SpectralGrid grid;
  double entrance_pupil_diameter_mm = 2.0;
  double layer_spacing_mm = 4.0;

  std::size_t num_channels() const { return channels.size(); }
  const ChannelConfig& channel(int index) const;  // 1-based
};

void validate_system(const SystemConfig& sys);

// 4-channel prototype: deflection vectors, 12 mm eyepieces on a 5 mm grid
SystemConfig default_system();

std::optional<Error> validate_cube(const HyperspectralCube& cube);
HyperspectralCube resample_cube(const HyperspectralCube& cube, const SpectralGrid& target);

double norm2(const Vec2& v);

}  // namespace msp
