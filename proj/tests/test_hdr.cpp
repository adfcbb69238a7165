#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "metaspectra/hdr.hpp"

using namespace msp;

namespace {

// log ramp of scene radiance across the frame
Image ramp(int n, double lo, double hi) {
  Image img(1, n);
  for (int k = 0; k < n; ++k) img.data[std::size_t(k)] = lo * std::pow(hi / lo, double(k) / (n - 1));
  return img;
}

Image expose(const Image& e, double t, double gamma = 1.0) {
  Image z = e;
  for (auto& v : z.data) v = std::min(1.0, std::pow(v * t, 1.0 / gamma));
  return z;
}

}  // namespace

TEST(Hdr, ConstantBracketRecoversRadiance) {
  Image low(4, 4, 0.2), high(4, 4, 0.8);
  auto r = hdr_fuse(low, high, 4.0);
  for (std::size_t k = 0; k < r.radiance.data.size(); ++k) {
    EXPECT_TRUE(r.valid[k]);
    EXPECT_NEAR(r.radiance.data[k], 0.2, 1e-15);
  }
  EXPECT_NEAR(r.dynamic_range_db, 0.0, 1e-12);
}

TEST(Hdr, SaturatedHighFallsBackToLow) {
  auto e = ramp(400, 0.002, 0.95);
  auto low = expose(e, 1.0), high = expose(e, 3.98);
  auto r = hdr_fuse(low, high, 3.98);
  double worst = 0.0;
  for (std::size_t k = 0; k < e.data.size(); ++k) {
    ASSERT_TRUE(r.valid[k]);
    worst = std::max(worst, std::abs(r.radiance.data[k] - e.data[k]) / e.data[k]);
  }
  EXPECT_LT(worst, 0.01);
}

TEST(Hdr, ExtendsRangeByBracketRatio) {
  auto e = ramp(4000, 1e-3 / 3.98, 0.999);
  auto low = expose(e, 1.0), high = expose(e, 3.98);
  double single = single_frame_dynamic_range(low);
  auto r = hdr_fuse(low, high, 3.98);
  EXPECT_NEAR(r.dynamic_range_db - single, 20.0 * std::log10(3.98), 0.05);
}

TEST(Hdr, AllSaturated) {
  Image z(3, 3, 1.0);
  try {
    hdr_fuse(z, z, 4.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::AllSaturated);
  }
  EXPECT_THROW(hdr_fuse(Image(2, 2, 1e-5), Image(2, 2, 1e-5), 4.0), Error);
}

TEST(Hdr, BothSaturatedPixelsAreFlagged) {
  Image low(1, 3), high(1, 3);
  low.data = {0.1, 1.0, 0.0};
  high.data = {0.4, 1.0, 0.0};
  auto r = hdr_fuse(low, high, 4.0);
  EXPECT_EQ(r.valid, (std::vector<std::uint8_t>{1, 0, 0}));
  EXPECT_EQ(r.saturated, (std::vector<std::uint8_t>{0, 1, 0}));
}

TEST(Hdr, BadArguments) {
  EXPECT_THROW(hdr_fuse(Image(2, 2, 0.5), Image(2, 3, 0.5), 4.0), Error);
  EXPECT_THROW(hdr_fuse(Image(2, 2, 0.5), Image(2, 2, 0.5), 0.0), Error);
}

TEST(Hdr, GammaFitRecoversExponent) {
  for (double g : {1.0, 1.8, 2.2}) {
    auto e = ramp(300, 0.01, 0.2);
    auto fit = fit_gamma_response(expose(e, 1.0, g), expose(e, 4.0, g), 4.0);
    EXPECT_NEAR(fit.gamma, g, 1e-9);
    auto r = hdr_fuse(expose(e, 1.0, g), expose(e, 4.0, g), 4.0, fit);
    for (std::size_t k = 0; k < e.data.size(); ++k) ASSERT_NEAR(r.radiance.data[k], e.data[k], 1e-9 * e.data[k]);
  }
}

TEST(Hdr, SingleFrameRange) {
  Image f(1, 3);
  f.data = {0.01, 0.5, 0.1};
  EXPECT_NEAR(single_frame_dynamic_range(f), 20.0 * std::log10(50.0), 1e-12);
  EXPECT_THROW(single_frame_dynamic_range(Image(2, 2, 1.0)), Error);
}

TEST(Dolp, KnownValues) {
  Image a(1, 4), b(1, 4);
  a.data = {1.0, 0.0, 0.5, 0.0};
  b.data = {0.0, 1.0, 0.5, 0.0};
  auto d = dolp_hv(a, b);
  EXPECT_NEAR(d.data[0], 1.0, 1e-15);
  EXPECT_NEAR(d.data[1], 1.0, 1e-15);
  EXPECT_NEAR(d.data[2], 0.0, 1e-15);
  EXPECT_NEAR(d.data[3], 0.0, 1e-15);
}

TEST(DolpProperty, InUnitRangeAndSymmetric) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image a(20, 20), b(20, 20);
  for (auto& v : a.data) v = u(rng);
  for (auto& v : b.data) v = u(rng);
  auto d = dolp_hv(a, b), e = dolp_hv(b, a);
  for (std::size_t k = 0; k < d.data.size(); ++k) {
    ASSERT_GE(d.data[k], 0.0);
    ASSERT_LE(d.data[k], 1.0);
    ASSERT_EQ(d.data[k], e.data[k]);
  }
}
