#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "metaspectra/domain.hpp"

namespace msp::fixtures {

// smooth blobs with distinct spectra on a floor, values in [0.05, 0.8]
inline HyperspectralCube blob_scene(int rows, int cols, const SpectralGrid& grid, std::uint64_t seed = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HyperspectralCube cube(rows, cols, grid);
  struct Blob {
    double r, c, w, mu, sw, amp;
  };
  Blob blobs[3];
  for (auto& b : blobs) b = {u(rng) * rows, u(rng) * cols, 3.0 + 4.0 * u(rng), 470.0 + 200.0 * u(rng), 40.0 + 40.0 * u(rng), 0.3 + 0.4 * u(rng)};
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      for (std::size_t k = 0; k < grid.size(); ++k) {
        double v = 0.05;
        for (const auto& b : blobs) {
          double d2 = (r - b.r) * (r - b.r) + (c - b.c) * (c - b.c);
          double s = (grid[k] - b.mu) / b.sw;
          v += b.amp * std::exp(-d2 / (2.0 * b.w * b.w)) * std::exp(-0.5 * s * s);
        }
        cube(r, c, k) = std::min(v, 0.8);
      }
  return cube;
}

inline HyperspectralCube random_cube(int rows, int cols, const SpectralGrid& grid, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  HyperspectralCube cube(rows, cols, grid);
  for (auto& v : cube.data) v = u(rng);
  return cube;
}

inline double max_abs_diff(const Image& a, const Image& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
  return m;
}

}  // namespace msp::fixtures
