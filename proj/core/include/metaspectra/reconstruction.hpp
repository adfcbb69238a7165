#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "metaspectra/domain.hpp"
#include "metaspectra/propagation.hpp"
#include "metaspectra/renderer.hpp"

namespace msp {

// H*(f) / (|H(f)|^2 + nsr), circular over the image size; PSF origin at (rows/2, cols/2)
Image wiener_deconvolve(const Image& image, const Image& psf_plane, double nsr);
// sigma^2 / var(image), floored at 1e-12
double estimate_nsr(const Image& image, double sigma);

struct DiffusionSchedule {
  int T = 1000;
  std::vector<double> beta;     // beta[t], t = 1..T; beta[0] = 0
  std::vector<double> upsilon;  // cumulative prod(1 - beta), upsilon[0] = 1

  static DiffusionSchedule linear(int T = 1000, double beta_start = 1e-4, double beta_end = 2e-2);
  double gamma(int t) const;  // sqrt(t / T)
  // `steps` descending timesteps from T, evenly spaced, ending above 0
  std::vector<int> subsample(int steps) const;
};

enum class DenoiseMode { Standard, Literal };

// x0 estimate: (s - sqrt(1-u) eps) / sqrt(u), or / sqrt(1-u) in literal mode
HyperspectralCube denoise_to_estimate(const HyperspectralCube& state, const HyperspectralCube& eps,
                                      const DiffusionSchedule& schedule, int t,
                                      DenoiseMode mode = DenoiseMode::Standard);
// d H / d s of the above
double estimate_slope(const DiffusionSchedule& schedule, int t, DenoiseMode mode);

struct Patch {
  int r0 = 0, c0 = 0, rows = 0, cols = 0;
};

struct PatchPartition {
  int rows = 0, cols = 0, size = 128;
  std::vector<Patch> patches;
};

// non-overlapping tiling; border patches shrink to fit
PatchPartition make_patches(int rows, int cols, int size = 128);

class Denoiser {
 public:
  virtual ~Denoiser() = default;
  // noise estimate with the shape of `state`
  virtual HyperspectralCube predict_noise(const HyperspectralCube& state, const Patch& patch,
                                          const std::vector<Image>& measurements, int t,
                                          const DiffusionSchedule& schedule) const = 0;
  virtual bool thread_safe() const { return true; }
  virtual std::string name() const = 0;
};

// returns the noise that maps the state exactly onto the ground truth
class OracleDenoiser : public Denoiser {
 public:
  explicit OracleDenoiser(HyperspectralCube truth) : truth_(std::move(truth)) {}
  HyperspectralCube predict_noise(const HyperspectralCube& state, const Patch& patch, const std::vector<Image>&, int t,
                                  const DiffusionSchedule& schedule) const override;
  std::string name() const override { return "oracle"; }

 private:
  HyperspectralCube truth_;
};

// estimate H = smooth(s) / sqrt(u): separable gaussian over rows, cols and bands
class SmootherDenoiser : public Denoiser {
 public:
  explicit SmootherDenoiser(double sigma_px = 1.0, double sigma_bands = 1.0) : sp_(sigma_px), sb_(sigma_bands) {}
  HyperspectralCube predict_noise(const HyperspectralCube& state, const Patch& patch, const std::vector<Image>&, int t,
                                  const DiffusionSchedule& schedule) const override;
  std::string name() const override { return "smoother"; }

 private:
  double sp_, sb_;
};

HyperspectralCube gaussian_smooth(const HyperspectralCube& cube, double sigma_px, double sigma_bands);

struct ScaleOffset {
  double a = 1.0;
  double b = 0.0;
};

// argmin over (a, b) of |a R(H) + b R(1) - I|^2; (1, 0) if the normal matrix is singular
ScaleOffset fit_scale_offset(const std::vector<Image>& rendered_estimate, const std::vector<Image>& rendered_ones,
                             const std::vector<Image>& measured);
ScaleOffset fit_scale_offset(const HyperspectralCube& estimate, const std::vector<Image>& measured,
                             const RenderOperator& op);

double measurement_loss(const std::vector<Image>& rendered_estimate, const std::vector<Image>& rendered_ones,
                        const std::vector<Image>& measured, const ScaleOffset& ab);

// per-patch forward model plus the rendered all-ones cube
struct PatchContext {
  Patch patch;
  const RenderOperator* op = nullptr;
  std::vector<Image> measured;  // [channel * colors + color], cropped to the patch
  std::vector<Image> ones;      // op->forward(1)
};

struct GuidanceOutcome {
  HyperspectralCube state;
  HyperspectralCube estimate;  // H before the step
  ScaleOffset ab;
  double loss = 0.0;
  double step_norm = 0.0;
};

// refit (a, b), then s <- s - gamma grad / |grad| with the denoiser held constant
GuidanceOutcome guidance_step(const HyperspectralCube& state, const Denoiser& denoiser, const PatchContext& ctx,
                              const DiffusionSchedule& schedule, int t, double gamma,
                              DenoiseMode mode = DenoiseMode::Standard);

struct GuidedOptions {
  int steps = 50;
  int guidance_iters = 20;
  int patch_size = 128;
  std::uint64_t seed = 0;
  DenoiseMode mode = DenoiseMode::Standard;
  int T = 1000;
};

struct StepRecord {
  int t = 0;
  double gamma = 0.0;
  double loss_first = 0.0;  // before the first guidance iteration
  double loss_last = 0.0;   // after the last refit
  double a_mean = 0.0;
  double b_mean = 0.0;
  int loss_increases = 0;   // guidance iterations whose loss rose
};

struct ReconstructionTrace {
  std::vector<StepRecord> steps;
  double initial_residual = 0.0;  // |I^(H) - I| at the first estimate of the first step
  double final_residual = 0.0;    // same for the returned cube
};

// measurements are [channel * colors + color] planes aligned to the cube grid
HyperspectralCube reconstruct_guided(const std::vector<Image>& measurements, const SystemConfig& system,
                                     const PSFStack& psfs, const Denoiser& denoiser, const GuidedOptions& options = {},
                                     ReconstructionTrace* trace = nullptr);
HyperspectralCube reconstruct_guided(const Snapshot& snapshot, const PSFStack& psfs, const Denoiser& denoiser,
                                     const GuidedOptions& options = {}, ReconstructionTrace* trace = nullptr);

std::vector<Image> snapshot_planes(const Snapshot& snapshot);

// |R(H) - I| over all planes, (a, b) = (1, 0)
double measurement_residual(const std::vector<Image>& rendered, const std::vector<Image>& measured);

std::string trace_csv(const ReconstructionTrace& trace);

// compact system for small scenes: the dispersive channels shift by a few pixels
struct ToySystem {
  SystemConfig system;
  PsfOptions psf;
};
ToySystem toy_system(double residual = 0.0004, int plane_px = 33);

}  // namespace msp
