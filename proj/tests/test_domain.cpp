#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "common.hpp"
#include "metaspectra/domain.hpp"

using namespace msp;

TEST(SpectralGrid, RejectsInvalid) {
  EXPECT_THROW(SpectralGrid({500.0}), Error);
  EXPECT_THROW(SpectralGrid({500.0, 500.0}), Error);
  EXPECT_THROW(SpectralGrid({600.0, 500.0}), Error);
  EXPECT_THROW(SpectralGrid({440.0, 500.0}, {450.0, 700.0}), Error);
  EXPECT_NO_THROW(SpectralGrid({450.0, 700.0}, {450.0, 700.0}));
}

TEST(SpectralGrid, DefaultIs26BandsAt10nm) {
  auto g = default_grid();
  ASSERT_EQ(g.size(), 26u);
  EXPECT_DOUBLE_EQ(g.front(), 450.0);
  EXPECT_DOUBLE_EQ(g.back(), 700.0);
  EXPECT_DOUBLE_EQ(g[1] - g[0], 10.0);
}

TEST(SpectralGrid, TrapezoidIntegratesLinearExactly) {
  auto g = SpectralGrid({450.0, 470.0, 520.0, 700.0});
  auto w = g.trapezoid_weights();
  double s = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) s += w[i] * (2.0 * g[i] + 1.0);
  EXPECT_NEAR(s, (700.0 * 700.0 + 700.0) - (450.0 * 450.0 + 450.0), 1e-9);
}

TEST(ValidateCube, ZeroCubeIsValid) {
  HyperspectralCube c(4, 4, SpectralGrid({450.0, 575.0, 700.0}));
  EXPECT_FALSE(validate_cube(c).has_value());
}

TEST(ValidateCube, NaNIsNonFinite) {
  HyperspectralCube c(4, 4, SpectralGrid({450.0, 575.0, 700.0}));
  c(1, 2, 1) = std::numeric_limits<double>::quiet_NaN();
  auto e = validate_cube(c);
  ASSERT_TRUE(e.has_value());
  EXPECT_EQ(e->code(), ErrorCode::NonFinite);
}

TEST(ValidateCube, BandCountMismatch) {
  HyperspectralCube c(4, 4, SpectralGrid({450.0, 575.0, 700.0}));
  c.data.resize(4 * 4 * 5);
  auto e = validate_cube(c);
  ASSERT_TRUE(e.has_value());
  EXPECT_EQ(e->code(), ErrorCode::BandMismatch);
}

TEST(ValidateCube, ExhaustiveSmallCases) {
  // every assignment of {-1, 0, 1, nan, inf} to a 1x1x2 cube
  const double vals[] = {-1.0, 0.0, 1.0, std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::infinity()};
  for (double a : vals)
    for (double b : vals) {
      HyperspectralCube c(1, 1, SpectralGrid({450.0, 700.0}));
      c.data = {a, b};
      bool finite = std::isfinite(a) && std::isfinite(b);
      bool nonneg = finite && a >= 0.0 && b >= 0.0;
      auto e = validate_cube(c);
      EXPECT_EQ(!e.has_value(), nonneg) << a << "," << b;
      if (!finite) {
        ASSERT_TRUE(e.has_value());
        EXPECT_EQ(e->code(), ErrorCode::NonFinite);
      } else if (!nonneg) {
        ASSERT_TRUE(e.has_value());
        EXPECT_EQ(e->code(), ErrorCode::NegativeRadiance);
      }
    }
}

TEST(Resample, IdenticalGridIsBitwiseEqual) {
  auto g = default_grid();
  auto c = fixtures::random_cube(5, 6, g, 3);
  auto r = resample_cube(c, g);
  EXPECT_EQ(r.data, c.data);
}

TEST(Resample, LinearInterpolationMidpoint) {
  HyperspectralCube c(1, 1, SpectralGrid({450.0, 700.0}));
  c.data = {0.0, 1.0};
  auto r = resample_cube(c, SpectralGrid({450.0, 575.0, 700.0}));
  EXPECT_NEAR(r(0, 0, 1), 0.5, 1e-12);
}

TEST(Resample, OutOfBand) {
  HyperspectralCube c(1, 1, SpectralGrid({460.0, 700.0}));
  EXPECT_THROW(resample_cube(c, default_grid()), Error);
}

TEST(ResampleProperty, ConstantSpectrumStaysConstant) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> wl{400.0};
    while (wl.back() < 750.0) wl.push_back(wl.back() + 1.0 + 40.0 * u(rng));
    HyperspectralCube c(2, 3, SpectralGrid(wl), 2.0, 0.37 + trial);
    auto r = resample_cube(c, default_grid());
    for (double v : r.data) ASSERT_NEAR(v, 0.37 + trial, 1e-12);
  }
}

TEST(ResampleProperty, Idempotent) {
  auto src = fixtures::random_cube(3, 3, SpectralGrid::uniform(400.0, 760.0, 37), 5);
  auto once = resample_cube(src, default_grid());
  auto twice = resample_cube(once, default_grid());
  EXPECT_EQ(once.data, twice.data);
}

TEST(Filter, NdRatioAndMalus) {
  double r = FilterSpec::neutral_density(0.3).transmittance() / FilterSpec::neutral_density(0.9).transmittance();
  EXPECT_NEAR(r, std::pow(10.0, 0.6), 1e-12);
  EXPECT_NEAR(r, 3.98, 0.01);
  EXPECT_NEAR(FilterSpec::linear_polarizer(90.0).transmittance(Polarization::linear(0.0)), 0.0, 1e-15);
  EXPECT_NEAR(FilterSpec::linear_polarizer(0.0).transmittance(Polarization::linear(0.0)), 1.0, 1e-15);
  EXPECT_NEAR(FilterSpec::linear_polarizer(30.0).transmittance(), 0.5, 1e-15);
}

TEST(DefaultSystem, Valid) {
  auto s = default_system();
  EXPECT_NO_THROW(validate_system(s));
  EXPECT_EQ(s.num_channels(), 4u);
  EXPECT_EQ(s.sensor.colors(), 3u);
  EXPECT_THROW(s.channel(5), Error);
}

TEST(DefaultSystem, RejectsBadChannel) {
  auto s = default_system();
  s.channels[0].lens_focal_mm = 0.0;
  EXPECT_THROW(validate_system(s), Error);
  s = default_system();
  s.channels[1].alpha = {0.8, 0.8};
  EXPECT_THROW(validate_system(s), Error);
}
