#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "common.hpp"
#include "metaspectra/config.hpp"
#include "metaspectra/io.hpp"
#include "metaspectra/reconstruction.hpp"

using namespace msp;
namespace fs = std::filesystem;

namespace {

ErrorCode decode_error(const std::string& bytes) {
  try {
    decode_cube(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return ErrorCode::IoError;
}

fs::path tmp(const std::string& name) { return fs::temp_directory_path() / ("msp_io_" + name); }

}  // namespace

TEST(CubeIo, RandomRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> dim(1, 9), bands(2, 12);
  for (int trial = 0; trial < 30; ++trial) {
    auto grid = SpectralGrid::uniform(400.0, 760.0, std::size_t(bands(rng)));
    auto c = fixtures::random_cube(dim(rng), dim(rng), grid, std::uint64_t(trial));
    c.pitch_um = 1.5 + trial;
    for (auto& v : c.data) v = double(float(v));
    auto d = decode_cube(encode_cube(c));
    ASSERT_EQ(d.rows, c.rows);
    ASSERT_EQ(d.cols, c.cols);
    ASSERT_EQ(d.pitch_um, c.pitch_um);
    ASSERT_EQ(d.data, c.data);
    for (std::size_t b = 0; b < grid.size(); ++b) ASSERT_NEAR(d.grid[b], grid[b], 1e-4);
  }
}

TEST(CubeIo, FileRoundTrip) {
  auto c = fixtures::random_cube(3, 4, default_grid(), 2);
  for (auto& v : c.data) v = double(float(v));
  write_cube(c, tmp("cube.hsc").string());
  EXPECT_EQ(read_cube(tmp("cube.hsc").string()).data, c.data);
  fs::remove(tmp("cube.hsc"));
}

TEST(CubeIo, Corruptions) {
  auto bytes = encode_cube(fixtures::random_cube(3, 3, default_grid(), 3));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(decode_error(bad), ErrorCode::BadMagic);
  EXPECT_EQ(decode_error("HS"), ErrorCode::BadMagic);
  EXPECT_EQ(decode_error(bytes.substr(0, bytes.size() - 3)), ErrorCode::TruncatedFile);
  EXPECT_EQ(decode_error(bytes.substr(0, 10)), ErrorCode::TruncatedFile);
  EXPECT_EQ(decode_error(bytes + "tail"), ErrorCode::SizeMismatch);
}

TEST(CubeIo, MissingFile) {
  try {
    read_cube("/nonexistent/none.hsc");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(PsfIo, RoundTrip) {
  auto ts = toy_system();
  auto p = psf_stack(ts.system, ts.psf);
  for (auto& pl : p.planes)
    for (auto& v : pl.data) v = double(float(v));
  write_psf(p, tmp("stack.psf").string());
  auto q = read_psf(tmp("stack.psf").string());
  fs::remove(tmp("stack.psf"));
  EXPECT_EQ(q.V, p.V);
  EXPECT_EQ(q.rows, p.rows);
  EXPECT_EQ(q.cols, p.cols);
  EXPECT_EQ(q.pitch_um, p.pitch_um);
  ASSERT_EQ(q.planes.size(), p.planes.size());
  for (std::size_t k = 0; k < p.planes.size(); ++k) ASSERT_EQ(q.planes[k].data, p.planes[k].data);
}

TEST(Netpbm, PgmRoundTripWithinQuantisation) {
  Image img(7, 5);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (auto& v : img.data) v = u(rng);
  write_pgm(img, tmp("a.pgm").string(), 2.0);
  auto back = read_netpbm(tmp("a.pgm").string(), 2.0);
  fs::remove(tmp("a.pgm"));
  ASSERT_EQ(back.size(), 1u);
  EXPECT_LE(fixtures::max_abs_diff(back[0], img), 2.0 / 65535.0);
}

TEST(Netpbm, PpmHasThreePlanes) {
  std::vector<Image> rgb{Image(3, 4, 0.1), Image(3, 4, 0.5), Image(3, 4, 1.0)};
  write_ppm(rgb, tmp("a.ppm").string());
  auto back = read_netpbm(tmp("a.ppm").string());
  fs::remove(tmp("a.ppm"));
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_LE(fixtures::max_abs_diff(back[j], rgb[j]), 1.0 / 65535.0);
  EXPECT_THROW(write_ppm({Image(2, 2)}, tmp("b.ppm").string()), Error);
}

TEST(Netpbm, RejectsOtherFormats) {
  write_text(tmp("c.pgm").string(), "P2\n2 2\n255\n0 0 0 0\n");
  try {
    read_netpbm(tmp("c.pgm").string());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadMagic);
  }
  fs::remove(tmp("c.pgm"));
}

TEST(Config, EmptyIsDefault) {
  auto c = parse_run_config("{}");
  EXPECT_EQ(c.system.num_channels(), 4u);
  EXPECT_EQ(c.system.grid.size(), 26u);
  EXPECT_EQ(c.preset, "default");
}

TEST(Config, UnknownKeysRejected) {
  for (const char* text : {R"({"sead": 1})", R"({"system": {"sensor": {"gian": 2}}})",
                           R"({"reconstruction": {"stepz": 3}})", R"({"seed": "seven"})", "[1, 2",
                           R"({"preset": "nope"})"}) {
    try {
      parse_run_config(text);
      ADD_FAILURE() << text;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ConfigError) << text;
    }
  }
}

TEST(Config, JsonRoundTripKeepsHash) {
  auto c = parse_run_config(R"({"preset": "toy", "seed": 9, "reconstruction": {"steps": 12}})");
  EXPECT_EQ(c.reconstruction.steps, 12);
  auto d = parse_run_config(run_config_to_json(c));
  EXPECT_EQ(config_hash(c), config_hash(d));
  EXPECT_EQ(config_hash(c).size(), 64u);
  c.seed = 10;
  EXPECT_NE(config_hash(c), config_hash(d));
}

TEST(Config, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Config, SystemJsonRoundTrip) {
  auto s = default_system();
  auto t = system_from_json(system_to_json(s));
  EXPECT_EQ(system_to_json(s), system_to_json(t));
  EXPECT_EQ(t.channels[2].filter.kind, s.channels[2].filter.kind);
}

TEST(Homography, JsonRoundTrip) {
  Homography h;
  h.h = {1.01, 0.02, 3.0, -0.01, 0.99, -2.0, 1e-4, 2e-4, 1.0};
  auto back = homography_from_json(homography_to_json({h, Homography::identity()}));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].h, h.h);
  EXPECT_THROW(homography_from_json("{]"), Error);
}
