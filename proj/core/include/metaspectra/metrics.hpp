#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "metaspectra/domain.hpp"
#include "metaspectra/propagation.hpp"
#include "metaspectra/reconstruction.hpp"

namespace msp {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// 10 log10(peak^2 / MSE); +inf for identical inputs
double psnr(const Image& reference, const Image& estimate, double peak = 1.0);
// per band, averaged over the bands that differ; +inf if none differ
double psnr(const HyperspectralCube& reference, const HyperspectralCube& estimate, double peak = 1.0);

// gaussian 11x11, sigma 1.5, K1 0.01, K2 0.03, L = 1, averaged over the valid window positions
double ssim(const Image& reference, const Image& estimate);
double ssim(const HyperspectralCube& reference, const HyperspectralCube& estimate);

// mean spectral angle (radians); pixels where either spectrum has zero norm are skipped
double sam(const HyperspectralCube& reference, const HyperspectralCube& estimate);

struct SceneMetrics {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
  double sam = 0.0;
};

struct MetricReport {
  std::vector<SceneMetrics> scenes;
  double psnr = 0.0;
  double ssim = 0.0;
  double sam = 0.0;
  std::optional<double> dynamic_range_db;
  std::string reconstructor;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string averaging = "per-band";
};

std::string report_json(const MetricReport& report);
std::string report_csv(const MetricReport& report);
std::string format_db(double v);

struct BenchmarkOptions {
  GuidedOptions guided;
  bool noiseless = true;
  std::string config_hash;
};

// every *.hsc cube in the directory, in name order: resample to the system
// grid, render, reconstruct, score. Reconstructors: identity, oracle, smoother
MetricReport benchmark_run(const std::string& dataset_dir, const SystemConfig& system, const PSFStack& psfs,
                           const std::string& reconstructor_id, std::uint64_t seed,
                           const BenchmarkOptions& options = {});

}  // namespace msp
