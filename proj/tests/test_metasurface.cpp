#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "metaspectra/metasurface.hpp"

using namespace msp;

namespace {

// one row holding `periods` periods of `spp` samples each
PhaseProfile sampled_blaze(double lc, int spp, int periods = 2) {
  const double alpha = 0.3;
  double pitch = lc * 1e-3 / (alpha * spp);
  return linear_phase_profile({alpha, 0.0}, lc, 1, spp * periods, pitch);
}

}  // namespace

TEST(LinearProfile, ZeroAlphaIsFlat) {
  auto p = linear_phase_profile({0.0, 0.0}, 550.0, 16, 16, 0.3);
  for (double v : p.phase_rad) EXPECT_EQ(v, 0.0);
}

TEST(LinearProfile, PeriodMatchesLambdaOverAlpha) {
  // 5.5 um period sampled at 0.11 um: 50 samples per period
  auto p = linear_phase_profile({0.1, 0.0}, 550.0, 1, 400, 0.11);
  for (int c = 0; c + 50 < 400; ++c) {
    double d = std::remainder(p(0, c + 50) - p(0, c), 2.0 * std::numbers::pi);
    ASSERT_NEAR(d, 0.0, 1e-9);
  }
  int wraps = 0;
  for (int c = 1; c < 400; ++c) wraps += p(0, c) < p(0, c - 1);
  EXPECT_EQ(wraps, 7);
}

TEST(LinearProfile, AliasedRejected) {
  EXPECT_THROW(linear_phase_profile({0.385, 0.0}, 450.0, 4, 4, 1.0), Error);
}

TEST(DiffractionOrders, PerfectBlazeAtDesign) {
  auto s = diffraction_orders(sampled_blaze(550.0, 1024), 550.0);
  EXPECT_NEAR(std::abs(s.orders.at(1)), 1.0, 1e-9);
  for (auto& [n, a] : s.orders)
    if (n != 1) EXPECT_LT(std::abs(a), 1e-9) << n;
  EXPECT_EQ(s.samples_per_period, 1024);
}

TEST(DiffractionOrders, MatchesSincOracle) {
  for (double lc : {450.0, 550.0, 600.0, 750.0}) {
    auto p = sampled_blaze(lc, 1024);
    for (double lam = 450.0; lam <= 700.0; lam += 10.0) {
      auto s = diffraction_orders(p, lam, 5);
      for (int n = -5; n <= 5; ++n) {
        double oracle = std::abs(std::sin(std::numbers::pi * (n - lc / lam)) / (std::numbers::pi * (n - lc / lam)));
        if (std::abs(n - lc / lam) < 1e-12) oracle = 1.0;
        ASSERT_NEAR(std::abs(s.orders.at(n)), oracle, 1e-3) << lc << " " << lam << " " << n;
      }
    }
  }
}

TEST(DiffractionOrders, ClosedFormAgreesWithDft) {
  auto p = sampled_blaze(600.0, 2048);
  auto s = diffraction_orders(p, 480.0, 3);
  for (int n = -3; n <= 3; ++n) EXPECT_NEAR(std::abs(s.orders.at(n) - blazed_order(n, 600.0, 480.0)), 0.0, 2e-3);
}

TEST(DiffractionOrders, ZeroOrderVanishesAtDesign) {
  EXPECT_NEAR(std::abs(blazed_order(0, 550.0, 550.0)), 0.0, 1e-15);
  EXPECT_NEAR(std::abs(blazed_order(1, 550.0, 550.0)), 1.0, 1e-15);
}

TEST(DiffractionOrders, ParsevalOverBand) {
  for (double lc : {450.0, 550.0, 600.0, 750.0})
    for (int spp : {7, 64, 1024})
      for (double lam = 450.0; lam <= 700.0; lam += 25.0) {
        auto s = diffraction_orders(sampled_blaze(lc, spp), lam);
        ASSERT_NEAR(s.total_power, 1.0, 1e-6);
      }
}

TEST(DiffractionOrders, FirstOrderPeaksAtDesign) {
  for (double lc : {450.0, 550.0, 600.0}) {
    double prev_gap = -1.0, prev_a1 = 2.0;
    std::vector<std::pair<double, double>> pts;
    for (double lam = 450.0; lam <= 700.0; lam += 10.0) pts.push_back({std::abs(lc / lam - 1.0), std::abs(blazed_order(1, lc, lam))});
    std::sort(pts.begin(), pts.end());
    for (auto [gap, a1] : pts) {
      if (gap > prev_gap + 1e-12) EXPECT_LT(a1, prev_a1 + 1e-15);
      prev_gap = gap;
      prev_a1 = a1;
    }
    EXPECT_NEAR(std::abs(blazed_order(1, lc, lc)), 1.0, 1e-15);
  }
}

TEST(DiffractionOrders, NonPeriodicRejected) {
  PhaseProfile p(1, 16, 0.3, 550.0);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  for (auto& v : p.phase_rad) v = u(rng);
  EXPECT_THROW(diffraction_orders(p, 550.0), Error);
}

TEST(Interleave, SingleProfileIsIdentity) {
  auto p = linear_phase_profile({0.2, 0.1}, 550.0, 32, 32, 0.3);
  auto q = interleave_random({p}, 9);
  EXPECT_EQ(q.phase_rad, p.phase_rad);
}

TEST(Interleave, RandomFractionsConcentrate) {
  auto a = random_assignment(512, 512, 4, 123);
  std::vector<double> f(4, 0.0);
  for (auto v : a) f[v] += 1.0;
  const double N = 512.0 * 512.0, p = 0.25, tol = 3.0 * std::sqrt(p * (1 - p) / N);
  for (double v : f) EXPECT_NEAR(v / N, 0.25, tol);
}

TEST(Interleave, Deterministic) {
  EXPECT_EQ(random_assignment(64, 64, 4, 77), random_assignment(64, 64, 4, 77));
  EXPECT_NE(random_assignment(64, 64, 4, 77), random_assignment(64, 64, 4, 78));
}

TEST(Interleave, PixelsComeFromInputs) {
  std::vector<PhaseProfile> ps;
  for (int i = 0; i < 4; ++i) ps.push_back(linear_phase_profile({0.05 * (i + 1), -0.03 * i}, 550.0, 40, 40, 0.3));
  auto q = interleave_random(ps, 5);
  for (std::size_t k = 0; k < q.phase_rad.size(); ++k) {
    bool hit = false;
    for (const auto& p : ps) hit = hit || p.phase_rad[k] == q.phase_rad[k];
    ASSERT_TRUE(hit);
  }
}

TEST(Interleave, RegularOfCopiesIsIdentity) {
  auto p = linear_phase_profile({0.2, 0.1}, 550.0, 16, 16, 0.3);
  EXPECT_EQ(interleave_regular({p, p, p, p}).phase_rad, p.phase_rad);
}

TEST(Interleave, RegularTilePattern) {
  std::vector<PhaseProfile> ps;
  const double off[4] = {0.0, std::numbers::pi / 2, std::numbers::pi, 3 * std::numbers::pi / 2};
  for (double o : off) {
    PhaseProfile p(6, 6, 0.3, 550.0);
    for (auto& v : p.phase_rad) v = o;
    ps.push_back(p);
  }
  auto q = interleave_regular(ps);
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) {
      int expect = (r % 2 == 0) ? (c % 2 == 0 ? 0 : 1) : (c % 2 == 0 ? 3 : 2);
      EXPECT_EQ(q(r, c), off[expect]);
    }
  EXPECT_THROW(interleave_regular({ps[0], ps[1]}), Error);
}

TEST(Nanocell, SingleEntry) {
  NanocellLibrary lib;
  lib.grid = SpectralGrid({450.0, 550.0, 700.0});
  lib.radii_nm = {80.0};
  lib.transmission = {{cplx(1, 0), cplx(0, 1), cplx(-1, 0)}};
  auto m = nanocell_lookup(linear_phase_profile({0.2, 0.0}, 550.0, 8, 8, 0.3), lib);
  for (double r : m.radii_nm) EXPECT_EQ(r, 80.0);
}

TEST(Nanocell, NearestInComplexPlane) {
  NanocellLibrary lib;
  lib.grid = SpectralGrid({450.0, 550.0, 700.0});
  lib.radii_nm = {60.0, 120.0};
  lib.transmission = {{cplx(1, 0), std::polar(1.0, 0.1), cplx(1, 0)}, {cplx(1, 0), std::polar(1.0, 3.0), cplx(1, 0)}};
  PhaseProfile p(4, 4, 0.3, 550.0);
  auto m = nanocell_lookup(p, lib);
  for (double r : m.radii_nm) EXPECT_EQ(r, 60.0);
}

TEST(Nanocell, EightLevelRoundTrip) {
  NanocellLibrary lib;
  lib.grid = SpectralGrid({450.0, 550.0, 700.0});
  for (int k = 0; k < 8; ++k) {
    lib.radii_nm.push_back(50.0 + 10.0 * k);
    lib.transmission.push_back({cplx(1, 0), std::polar(1.0, 2.0 * std::numbers::pi * k / 8.0), cplx(1, 0)});
  }
  PhaseProfile p(8, 8, 0.3, 550.0);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) p(r, c) = 2.0 * std::numbers::pi * ((r + c) % 8) / 8.0;
  auto m = nanocell_lookup(p, lib);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) EXPECT_EQ(m(r, c), 50.0 + 10.0 * ((r + c) % 8));
}

TEST(Nanocell, ChoiceIsOptimalEverywhere) {
  NanocellLibrary lib;
  lib.grid = SpectralGrid({450.0, 550.0, 700.0});
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 2.0 * std::numbers::pi), a(0.3, 1.0);
  for (int k = 0; k < 13; ++k) {
    lib.radii_nm.push_back(40.0 + 7.0 * k);
    lib.transmission.push_back({cplx(1, 0), std::polar(a(rng), u(rng)), cplx(1, 0)});
  }
  auto p = linear_phase_profile({0.21, -0.13}, 550.0, 24, 24, 0.3);
  auto m = nanocell_lookup(p, lib);
  for (std::size_t k = 0; k < p.phase_rad.size(); ++k) {
    cplx want = std::polar(1.0, p.phase_rad[k]);
    std::size_t chosen = std::size_t(std::find(lib.radii_nm.begin(), lib.radii_nm.end(), m.radii_nm[k]) - lib.radii_nm.begin());
    double best = std::abs(want - lib.transmission[chosen][1]);
    for (const auto& t : lib.transmission) ASSERT_LE(best, std::abs(want - t[1]) + 1e-15);
  }
}

TEST(Nanocell, Errors) {
  NanocellLibrary lib;
  lib.grid = SpectralGrid({450.0, 700.0});
  EXPECT_THROW(nanocell_lookup(PhaseProfile(2, 2, 0.3, 550.0), lib), Error);
  lib.radii_nm = {50.0};
  lib.transmission = {{cplx(1, 0), cplx(1, 0)}};
  try {
    nanocell_lookup(PhaseProfile(2, 2, 0.3, 550.0), lib);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DesignWavelengthMissing);
  }
}

TEST(DeflectionVectors, PrototypeValues) {
  auto v = default_deflection_vectors();
  ASSERT_EQ(v.size(), 4u);
  EXPECT_NEAR(v[1].alpha[0], 0.385, 1e-15);
  EXPECT_NEAR(v[1].alpha[1], -0.385, 1e-15);
  EXPECT_NEAR(v[2].alpha[0] + v[2].beta[0], 0.0, 1e-15);
  EXPECT_NEAR(v[2].alpha[1] + v[2].beta[1], 0.0, 1e-15);
  EXPECT_NEAR(v[3].alpha[0] + v[3].beta[0], 0.0, 1e-15);
  Vec2 r1{v[0].alpha[0] + v[0].beta[0], v[0].alpha[1] + v[0].beta[1]};
  Vec2 r2{v[1].alpha[0] + v[1].beta[0], v[1].alpha[1] + v[1].beta[1]};
  EXPECT_NEAR(r1[0], 0.017, 1e-12);
  EXPECT_NEAR(r1[1], 0.017, 1e-12);
  EXPECT_NEAR(r2[0], 0.017, 1e-12);
  EXPECT_NEAR(r2[1], -0.017, 1e-12);
  EXPECT_NEAR(r1[0] * r2[0] + r1[1] * r2[1], 0.0, 1e-15);
}

TEST(DeflectionVectors, ChannelTwoAngle) {
  // arcsin(0.385 sqrt 2) = 32.9937 deg
  EXPECT_NEAR(deflection_angle_deg({0.385, -0.385}), 32.99, 0.01);
}
