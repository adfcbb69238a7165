#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "metaspectra/domain.hpp"

namespace msp {

struct DiffractionSpectrum {
  double wavelength_nm = 0.0;
  std::map<int, cplx> orders;   // n -> a_n for |n| <= max_order
  double total_power = 0.0;     // sum of |a_n|^2 over every order of the period
  int samples_per_period = 0;   // M / K of the detected period
};

struct NanocellLibrary {
  SpectralGrid grid;
  std::vector<double> radii_nm;                 // strictly increasing
  std::vector<std::vector<cplx>> transmission;  // [entry][band]
  double cell_width_nm = 300.0;
  double pillar_height_nm = 775.0;

  void validate() const;
};

struct RadiusMap {
  int rows = 0;
  int cols = 0;
  double cell_width_nm = 300.0;
  std::vector<double> radii_nm;

  double operator()(int r, int c) const { return radii_nm[std::size_t(r) * cols + c]; }
};

struct DeflectionPair {
  Vec2 alpha;
  Vec2 beta;
  double design_wavelength_nm;
};

// per-pixel channel assignment (0-based) plus the per-channel profiles it draws from
struct InterleavedSurface {
  int rows = 0;
  int cols = 0;
  double pitch_um = 0.3;
  std::vector<std::uint8_t> assignment;
  std::vector<PhaseProfile> profiles;

  // complex transmission exp(j * phase * lambda_c / lambda) of the owning profile
  std::vector<cplx> transmission(double lambda_nm) const;
  std::vector<double> channel_fractions() const;
};

PhaseProfile linear_phase_profile(const Vec2& alpha, double lambda_c_nm, double extent_mm, double pitch_um);
PhaseProfile linear_phase_profile(const Vec2& alpha, double lambda_c_nm, int rows, int cols, double pitch_um);

DiffractionSpectrum diffraction_orders(const PhaseProfile& profile, double lambda_nm, int max_order = 5);

// analytic blazed-sawtooth coefficient: exp(j pi (rho - n)) sinc(rho - n), rho = lambda_c / lambda
cplx blazed_order(int n, double lambda_c_nm, double lambda_nm);
double sinc(double u);

std::vector<std::uint8_t> random_assignment(int rows, int cols, int V, std::uint64_t seed);
// 2x2 comb: (even row, even col) -> 0, (even, odd) -> 1, (odd, odd) -> 2, (odd, even) -> 3
std::vector<std::uint8_t> regular_assignment(int rows, int cols);

PhaseProfile interleave_random(const std::vector<PhaseProfile>& profiles, std::uint64_t seed);
PhaseProfile interleave_regular(const std::vector<PhaseProfile>& profiles);

InterleavedSurface interleave_surface(const std::vector<PhaseProfile>& profiles, bool regular, std::uint64_t seed);

RadiusMap nanocell_lookup(const PhaseProfile& target, const NanocellLibrary& library);

std::vector<DeflectionPair> default_deflection_vectors(double a_magnitude = 0.385,
                                                       const std::vector<double>& lambda_c_nm = {450.0, 550.0, 600.0, 750.0});

double deflection_angle_deg(const Vec2& alpha);

}  // namespace msp
