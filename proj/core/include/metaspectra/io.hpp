#pragma once

#include <string>
#include <vector>

#include "metaspectra/calibration.hpp"
#include "metaspectra/domain.hpp"
#include "metaspectra/propagation.hpp"

namespace msp {

// HSC1: "HSC1", u32 version, u32 H, u32 W, u32 bands, f64 pitch_um,
// f32 wavelengths[bands], f32 samples[H][W][bands]; little-endian
void write_cube(const HyperspectralCube& cube, const std::string& path);
HyperspectralCube read_cube(const std::string& path);
std::string encode_cube(const HyperspectralCube& cube);
HyperspectralCube decode_cube(const std::string& bytes);

// PSF1: "PSF1", u32 version, u32 V, u32 bands, u32 H, u32 W, f64 pitch_um,
// f32 wavelengths[bands], f32 planes[V][bands][H][W]; little-endian
void write_psf(const PSFStack& psfs, const std::string& path);
PSFStack read_psf(const std::string& path);

// 16-bit binary netpbm, samples scaled so `full_scale` maps to 65535
void write_pgm(const Image& image, const std::string& path, double full_scale = 1.0);
void write_ppm(const std::vector<Image>& rgb, const std::string& path, double full_scale = 1.0);
// returns samples divided by maxval, times full_scale; PPM yields three planes
std::vector<Image> read_netpbm(const std::string& path, double full_scale = 1.0);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

std::string homography_to_json(const std::vector<Homography>& hs);
std::vector<Homography> homography_from_json(const std::string& text);

}  // namespace msp
