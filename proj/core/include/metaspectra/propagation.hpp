#pragma once

#include <cstdint>
#include <vector>

#include "metaspectra/domain.hpp"
#include "metaspectra/metasurface.hpp"

namespace msp {

struct GridSpec {
  int rows = 0;
  int cols = 0;
  double pitch_um = 1.0;  // sample (r, c) sits at ((c - cols/2), (r - rows/2)) * pitch
};

struct PupilFunction {
  Image amplitude;
  double pitch_um = 1.0;
  double diameter_mm = 2.0;
};

// uniform disc sampled on `samples` points across its diameter, symmetric about the origin
PupilFunction disc_pupil(double diameter_mm, int samples);

ComplexField angular_spectrum_propagate(const ComplexField& field, double distance_mm, double lambda_nm,
                                        bool check_sampling = true);

ComplexField apply_metasurface(const ComplexField& field, const PhaseProfile& profile, double lambda_nm);
ComplexField apply_metasurface(const ComplexField& field, const InterleavedSurface& surface, double lambda_nm);

ComplexField thin_lens_phase(const GridSpec& grid, double focal_mm, const Vec2& center_mm, double radius_mm,
                             double lambda_nm);

// (lambda f / lambda_c) (alpha + beta), millimetres
Vec2 predicted_shift(const ChannelConfig& channel, double lambda_nm);

// lateral walk-off of the deflected beam at the second layer (exact ray), millimetres
Vec2 beam_displacement(const ChannelConfig& channel, double spacing_mm, double lambda_nm, const Vec2& n_perp = {0, 0});

// |DFT|^2 of a zero-padded field, fftshifted so zero frequency is at (M/2, M/2)
Image far_field_intensity(const ComplexField& field, int padded_size);

struct PsfOptions {
  int plane_px = 512;
  int support_px = 160;     // computed window around the PSF centre; zero beyond
  int pupil_samples = 256;  // raised automatically when the window would alias
};

struct PsfPlane {
  Image plane;          // sums to 1
  cplx chain;           // a1(lambda) * b_i(lambda)
  Vec2 center_px;       // analytic centre (col, row) in plane coordinates
  double throughput;    // fraction of pupil area passing the lens aperture
};

PsfPlane synthesize_psf(const SystemConfig& system, int channel_index, double lambda_nm,
                        const Vec2& n_perp = {0, 0}, const PsfOptions& options = {});

struct PSFStack {
  int V = 0;
  int rows = 0;
  int cols = 0;
  double pitch_um = 2.0;
  SpectralGrid grid;
  std::vector<Image> planes;  // [channel * bands + band]
  std::vector<cplx> chain;
  std::vector<double> throughput;

  std::size_t bands() const { return grid.size(); }
  const Image& plane(int channel_index, std::size_t band) const {
    return planes[std::size_t(channel_index - 1) * grid.size() + band];
  }
};

PSFStack psf_stack(const SystemConfig& system, const PsfOptions& options = {});

// intensity-weighted mean (x = col, y = row)
Vec2 centroid(const Image& plane);

// iterated centroid restricted to a disc of `radius` samples, seeded at `start`
Vec2 local_centroid(const Image& plane, Vec2 start, double radius, int iterations = 30);

struct BruteForceOptions {
  int grid = 512;
  double pitch_um = 0.0;              // 0 selects band_limit_fraction of the sampling limit
  double band_limit_fraction = 0.6;
  double spacing_frac = 0.0;          // layer spacing / window width; 0 picks it per channel
  double guard_frac = 0.5;            // clearance from the undeflected beam, in pupil radii
  double pupil_frac = 0.1;           // pupil radius / window width
  double margin_frac = 0.6;           // aperture margin around the beam path, in pupil radii
  double roi_airy = 1.0;              // centroid disc radius, in Airy radii
  bool regular_interleave = false;
  std::uint64_t seed = 7;
};

struct BruteForceResult {
  std::vector<int> channels;
  std::vector<std::vector<Vec2>> offset_px;   // [k][band], sensor pixels from the lens centre
  std::vector<std::vector<Vec2>> predicted_px;
  std::vector<std::vector<double>> roi_power;  // far-field power in the centroid disc / pupil power
  double pitch_um = 0.0;
  std::vector<double> spacing_um;  // per simulated channel
  double pupil_radius_um = 0.0;
  double aperture_radius_um = 0.0;  // half-width of the stadium around each beam's landing path
};

// two-plane propagation through the interleaved beamsplitter and each
// channel's second layer, scaled to a desk-sized window
BruteForceResult brute_force_centroids(const SystemConfig& system, const BruteForceOptions& options = {},
                                       std::vector<int> channels = {});

struct InterleaveAnalysisOptions {
  int grid = 512;
  double pitch_um = 0.3;
  double lambda_nm = 550.0;
  double exclusion_bins = 6.0;  // radius kept clear around every diffraction order n * alpha_i / lambda_c
  int max_order = 4;
  std::uint64_t seed = 7;
};

struct InterleaveAnalysis {
  double design_peak = 0.0;         // largest first-order peak, fraction of total power
  double regular_replica_peak = 0.0;
  double random_spurious_peak = 0.0;
  double ratio = 0.0;               // regular / random
};

// far-field of the four first-layer profiles interleaved regularly and at
// random; peaks away from every order of the constituent gratings are spurious
InterleaveAnalysis analyze_interleaving(const SystemConfig& system, const InterleaveAnalysisOptions& options = {});

}  // namespace msp
