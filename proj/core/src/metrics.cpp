#include "metaspectra/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

#include <nlohmann/json.hpp>

#include "metaspectra/io.hpp"
#include "metaspectra/renderer.hpp"

namespace msp {

namespace {

void same_shape(const Image& a, const Image& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw Error(ErrorCode::ShapeMismatch, "images differ in size");
}

void same_shape(const HyperspectralCube& a, const HyperspectralCube& b) {
  if (a.rows != b.rows || a.cols != b.cols || a.bands() != b.bands())
    throw Error(ErrorCode::ShapeMismatch, "cubes differ in shape");
}

}  // namespace

double psnr(const Image& x, const Image& y, double peak) {
  same_shape(x, y);
  if (!(peak > 0.0)) throw Error(ErrorCode::InvalidArgument, "peak must be > 0");
  double se = 0.0;
  for (std::size_t i = 0; i < x.data.size(); ++i) se += (x.data[i] - y.data[i]) * (x.data[i] - y.data[i]);
  if (se == 0.0) return kInf;
  return 10.0 * std::log10(peak * peak / (se / double(x.data.size())));
}

double psnr(const HyperspectralCube& x, const HyperspectralCube& y, double peak) {
  same_shape(x, y);
  double s = 0.0;
  int n = 0;
  for (std::size_t b = 0; b < x.bands(); ++b) {
    double p = psnr(x.band_image(b), y.band_image(b), peak);
    if (std::isinf(p)) continue;
    s += p;
    ++n;
  }
  return n ? s / n : kInf;
}

double ssim(const Image& x, const Image& y) {
  same_shape(x, y);
  constexpr int W = 11;
  if (x.rows < W || x.cols < W) throw Error(ErrorCode::ImageTooSmall, "SSIM needs at least 11x11 pixels");
  double w[W];
  double ws = 0.0;
  for (int i = 0; i < W; ++i) {
    w[i] = std::exp(-0.5 * (i - 5) * (i - 5) / (1.5 * 1.5));
    ws += w[i];
  }
  for (double& v : w) v /= ws;
  const double C1 = 0.01 * 0.01, C2 = 0.03 * 0.03;
  double total = 0.0;
  int count = 0;
  for (int r = 0; r + W <= x.rows; ++r)
    for (int c = 0; c + W <= x.cols; ++c) {
      double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
      for (int i = 0; i < W; ++i)
        for (int j = 0; j < W; ++j) {
          double g = w[i] * w[j], a = x(r + i, c + j), b = y(r + i, c + j);
          mx += g * a;
          my += g * b;
          sxx += g * a * a;
          syy += g * b * b;
          sxy += g * a * b;
        }
      sxx -= mx * mx;
      syy -= my * my;
      sxy -= mx * my;
      total += ((2 * mx * my + C1) * (2 * sxy + C2)) / ((mx * mx + my * my + C1) * (sxx + syy + C2));
      ++count;
    }
  return total / count;
}

double ssim(const HyperspectralCube& x, const HyperspectralCube& y) {
  same_shape(x, y);
  double s = 0.0;
  for (std::size_t b = 0; b < x.bands(); ++b) s += ssim(x.band_image(b), y.band_image(b));
  return s / double(x.bands());
}

double sam(const HyperspectralCube& x, const HyperspectralCube& y) {
  same_shape(x, y);
  const std::size_t B = x.bands(), P = std::size_t(x.rows) * x.cols;
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t p = 0; p < P; ++p) {
    double xy = 0, xx = 0, yy = 0;
    for (std::size_t b = 0; b < B; ++b) {
      double a = x.data[p * B + b], c = y.data[p * B + b];
      xy += a * c;
      xx += a * a;
      yy += c * c;
    }
    if (xx == 0.0 || yy == 0.0) continue;
    total += std::acos(std::clamp(xy / std::sqrt(xx * yy), -1.0, 1.0));
    ++n;
  }
  return n ? total / double(n) : 0.0;
}

std::string format_db(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << v;
  return os.str();
}

namespace {

nlohmann::json num(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
}

}  // namespace

std::string report_json(const MetricReport& r) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& s : r.scenes) scenes.push_back({{"name", s.name}, {"psnr_db", num(s.psnr)}, {"ssim", num(s.ssim)}, {"sam_rad", num(s.sam)}});
  nlohmann::json j{{"scenes", scenes},
                   {"psnr_db", num(r.psnr)},
                   {"ssim", num(r.ssim)},
                   {"sam_rad", num(r.sam)},
                   {"reconstructor", r.reconstructor},
                   {"config_hash", r.config_hash},
                   {"seed", r.seed},
                   {"averaging", r.averaging}};
  if (r.dynamic_range_db) j["dynamic_range_db"] = num(*r.dynamic_range_db);
  return j.dump(2);
}

std::string report_csv(const MetricReport& r) {
  std::ostringstream os;
  os.precision(10);
  os << "scene,psnr_db,ssim,sam_rad\n";
  for (const auto& s : r.scenes) os << s.name << ',' << format_db(s.psnr) << ',' << s.ssim << ',' << s.sam << '\n';
  os << "mean," << format_db(r.psnr) << ',' << r.ssim << ',' << r.sam << '\n';
  return os.str();
}

MetricReport benchmark_run(const std::string& dir, const SystemConfig& sys, const PSFStack& psfs,
                           const std::string& id, std::uint64_t seed, const BenchmarkOptions& opt) {
  namespace fs = std::filesystem;
  if (id != "identity" && id != "oracle" && id != "smoother")
    throw Error(ErrorCode::InvalidArgument, "unknown reconstructor '" + id + "'");
  std::vector<fs::path> files;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(dir, ec))
    if (e.is_regular_file() && e.path().extension() == ".hsc") files.push_back(e.path());
  if (ec) throw Error(ErrorCode::EmptyDataset, "cannot list " + dir);
  if (files.empty()) throw Error(ErrorCode::EmptyDataset, "no .hsc cubes in " + dir);
  std::sort(files.begin(), files.end());

  MetricReport rep;
  rep.reconstructor = id;
  rep.seed = seed;
  rep.config_hash = opt.config_hash;
  for (std::size_t k = 0; k < files.size(); ++k) {
    HyperspectralCube cube;
    try {
      cube = read_cube(files[k].string());
    } catch (const Error& e) {
      throw Error(ErrorCode::UnreadableCube, files[k].filename().string() + ": " + e.what());
    }
    if (auto err = validate_cube(cube)) throw Error(ErrorCode::UnreadableCube, files[k].filename().string() + ": " + err->what());
    HyperspectralCube truth = resample_cube(cube, sys.grid);
    truth.pitch_um = sys.sensor.pitch_um;
    HyperspectralCube est;
    if (id == "identity") {
      est = truth;
    } else {
      std::uint64_t s = derive_seed(seed, k);
      auto snap = render_snapshot(truth, psfs, sys, s, opt.noiseless);
      GuidedOptions g = opt.guided;
      g.seed = derive_seed(s, 0xbe7c);
      if (id == "oracle") est = reconstruct_guided(snap, psfs, OracleDenoiser(truth), g);
      else est = reconstruct_guided(snap, psfs, SmootherDenoiser(), g);
    }
    SceneMetrics m{files[k].stem().string(), psnr(truth, est), ssim(truth, est), sam(truth, est)};
    rep.scenes.push_back(m);
  }
  double ps = 0.0;
  int finite = 0;
  for (const auto& s : rep.scenes) {
    rep.ssim += s.ssim / double(rep.scenes.size());
    rep.sam += s.sam / double(rep.scenes.size());
    if (std::isfinite(s.psnr)) {
      ps += s.psnr;
      ++finite;
    }
  }
  rep.psnr = finite ? ps / finite : kInf;
  return rep;
}

}  // namespace msp
