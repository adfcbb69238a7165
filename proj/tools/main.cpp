#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "metaspectra/calibration.hpp"
#include "metaspectra/config.hpp"
#include "metaspectra/hdr.hpp"
#include "metaspectra/io.hpp"
#include "metaspectra/metasurface.hpp"
#include "metaspectra/metrics.hpp"
#include "metaspectra/parallel.hpp"
#include "metaspectra/propagation.hpp"
#include "metaspectra/reconstruction.hpp"
#include "metaspectra/renderer.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

msp::RunConfig load(const std::string& path) {
  return path.empty() ? msp::parse_run_config("{}") : msp::load_run_config(path);
}

msp::PSFStack psfs_for(const msp::RunConfig& cfg, const std::string& path) {
  if (path.empty()) return msp::psf_stack(cfg.system, cfg.psf);
  msp::PSFStack s = msp::read_psf(path);
  if (s.V != int(cfg.system.num_channels()) || !(s.grid.wavelengths() == cfg.system.grid.wavelengths()))
    throw msp::Error(msp::ErrorCode::GridMismatch, path + " was computed for a different system");
  return s;
}

std::string fixed(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

std::string plane_path(const std::string& dir, int channel, std::size_t colors) {
  return (fs::path(dir) / ("channel_" + std::to_string(channel) + (colors == 3 ? ".ppm" : ".pgm"))).string();
}

void write_planes(const std::vector<msp::Image>& planes, const std::string& path, double full) {
  if (planes.size() == 3) msp::write_ppm(planes, path, full);
  else if (planes.size() == 1) msp::write_pgm(planes.front(), path, full);
  else throw msp::Error(msp::ErrorCode::ShapeMismatch, "netpbm export needs one or three color planes");
}

std::vector<msp::PointPair> read_pairs(const std::string& path) {
  std::istringstream in(msp::read_text(path));
  std::vector<msp::PointPair> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#' || std::isalpha(static_cast<unsigned char>(line[0]))) continue;
    for (char& ch : line)
      if (ch == ',') ch = ' ';
    std::istringstream ls(line);
    msp::PointPair p;
    if (!(ls >> p.src[0] >> p.src[1] >> p.dst[0] >> p.dst[1]))
      throw msp::Error(msp::ErrorCode::ConfigError, path + ": expected src_x,src_y,dst_x,dst_y");
    out.push_back(p);
  }
  return out;
}

// a grayscale radiance is stored flat across the band edges
msp::HyperspectralCube radiance_cube(const std::vector<msp::HdrResult>& rs) {
  const int R = rs.front().radiance.rows, C = rs.front().radiance.cols;
  std::vector<double> wl = rs.size() == 3 ? std::vector<double>{470.0, 540.0, 610.0} : std::vector<double>{450.0, 700.0};
  msp::HyperspectralCube cube(R, C, msp::SpectralGrid(wl));
  for (std::size_t b = 0; b < wl.size(); ++b) cube.set_band(b, rs[rs.size() == 3 ? 2 - b : 0].radiance);
  return cube;
}

int cmd_design(const std::string& cfg_path, const std::string& out, const std::string& profile, int size,
               double pitch, bool regular, std::uint64_t seed) {
  auto cfg = load(cfg_path);
  const auto& sys = cfg.system;
  json ch = json::array();
  for (const auto& c : sys.channels) {
    json eff = json::array();
    for (double l : sys.grid.wavelengths())
      eff.push_back({{"wavelength_nm", l},
                     {"a1_power", std::norm(msp::blazed_order(1, c.design_wavelength_nm, l))},
                     {"a0_power", std::norm(msp::blazed_order(0, c.design_wavelength_nm, l))},
                     {"channel_efficiency", msp::channel_efficiency(c, sys.grid, l)}});
    ch.push_back({{"index", c.index},
                  {"alpha", c.alpha},
                  {"beta", c.beta},
                  {"design_wavelength_nm", c.design_wavelength_nm},
                  {"deflection_deg", msp::deflection_angle_deg(c.alpha)},
                  {"grating_period_um", c.design_wavelength_nm * 1e-3 / std::hypot(c.alpha[0], c.alpha[1])},
                  {"efficiency", eff}});
  }
  json doc{{"channels", ch}, {"split_fraction", msp::split_fraction(sys)}, {"config_hash", msp::config_hash(cfg)}};
  msp::write_text(out, doc.dump(2) + "\n");
  if (!profile.empty()) {
    std::vector<msp::PhaseProfile> ps;
    for (const auto& c : sys.channels) ps.push_back(msp::linear_phase_profile(c.alpha, c.design_wavelength_nm, size, size, pitch));
    auto surf = msp::interleave_surface(ps, regular, seed);
    msp::Image img(size, size);
    for (std::size_t k = 0; k < img.data.size(); ++k) img.data[k] = surf.profiles[surf.assignment[k]].phase_rad[k];
    msp::write_pgm(img, profile, 2.0 * std::numbers::pi);
  }
  double a2 = sys.num_channels() > 1 ? msp::deflection_angle_deg(sys.channels[1].alpha) : msp::deflection_angle_deg(sys.channels[0].alpha);
  std::cout << "design: " << sys.num_channels() << " channels, channel-2 deflection " << fixed(a2, 2) << " deg -> " << out << "\n";
  return 0;
}

int cmd_psf(const std::string& cfg_path, const std::string& out, const std::string& centroids) {
  auto cfg = load(cfg_path);
  auto stack = msp::psf_stack(cfg.system, cfg.psf);
  msp::write_psf(stack, out);
  double drift = 0.0;
  if (!centroids.empty()) {
    std::ostringstream os;
    os << "channel,wavelength_nm,x_px,y_px\n";
    for (int i = 1; i <= stack.V; ++i) {
      const auto& ch = cfg.system.channel(i);
      msp::Vec2 first{};
      for (std::size_t b = 0; b < stack.bands(); ++b) {
        msp::Vec2 c = msp::centroid(stack.plane(i, b));
        msp::Vec2 x{c[0] - stack.cols / 2, c[1] - stack.rows / 2};
        if (b == 0) first = x;
        bool achromatic = ch.alpha[0] + ch.beta[0] == 0.0 && ch.alpha[1] + ch.beta[1] == 0.0;
        if (achromatic) drift = std::max(drift, std::hypot(x[0] - first[0], x[1] - first[1]));
        os << i << ',' << stack.grid[b] << ',' << fixed(x[0], 6) << ',' << fixed(x[1], 6) << '\n';
      }
    }
    msp::write_text(centroids, os.str());
  }
  std::cout << "psf: " << stack.V << " channels x " << stack.bands() << " bands, " << stack.rows << "x" << stack.cols
            << " px, achromatic drift " << fixed(drift, 4) << " px -> " << out << "\n";
  return 0;
}

int cmd_render(const std::string& cfg_path, const std::string& cube_path, const std::string& psf_path,
               const std::string& out_dir, std::optional<std::uint64_t> seed, bool noiseless) {
  auto cfg = load(cfg_path);
  auto psfs = psfs_for(cfg, psf_path);
  auto cube = msp::resample_cube(msp::read_cube(cube_path), cfg.system.grid);
  cube.pitch_um = cfg.system.sensor.pitch_um;
  fs::create_directories(out_dir);
  auto snap = msp::render_snapshot(cube, psfs, cfg.system, seed.value_or(cfg.seed), noiseless || cfg.noiseless);
  std::size_t sat = 0;
  for (const auto& s : snap.sub_images) {
    write_planes(s.planes, plane_path(out_dir, s.channel_index, s.planes.size()), cfg.system.sensor.full_well);
    for (auto v : s.saturated) sat += v;
  }
  std::cout << "render: " << snap.sub_images.size() << " sub-images " << cube.rows << "x" << cube.cols << ", " << sat
            << " saturated pixels -> " << out_dir << "\n";
  return 0;
}

int cmd_calibrate(const std::string& cfg_path, const std::string& psf_path, const std::string& out,
                  const std::string& pairs, const std::string& hout, bool robust) {
  auto cfg = load(cfg_path);
  auto psfs = psfs_for(cfg, psf_path);
  auto resp = msp::calibrate_spectral_response(cfg.system, psfs);
  std::ostringstream os;
  os << "wavelength_nm";
  for (std::size_t i = 0; i < resp.alpha.size(); ++i) os << ",alpha_" << i + 1;
  os << '\n';
  os.precision(10);
  for (std::size_t b = 0; b < resp.grid.size(); ++b) {
    os << resp.grid[b];
    for (const auto& a : resp.alpha) os << ',' << a[b];
    os << '\n';
  }
  msp::write_text(out, os.str());
  std::cout << "calibrate: peaks";
  for (const auto& a : resp.alpha)
    std::cout << ' ' << resp.grid[std::size_t(std::max_element(a.begin(), a.end()) - a.begin())];
  std::cout << " nm";
  if (!pairs.empty()) {
    auto fit = msp::estimate_homography_fit(read_pairs(pairs), robust);
    if (!hout.empty()) msp::write_text(hout, msp::homography_to_json({fit.H}) + "\n");
    std::cout << ", homography rms " << fixed(fit.rms_inlier_error, 4) << " px";
  }
  std::cout << " -> " << out << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& cfg_path, const std::string& meas_dir, const std::string& psf_path,
                    const std::string& out, const std::string& trace_path, const std::string& denoiser,
                    const std::string& truth_path, int steps, int iters) {
  auto cfg = load(cfg_path);
  auto psfs = psfs_for(cfg, psf_path);
  const std::size_t J = cfg.system.sensor.colors();
  std::vector<msp::Image> planes;
  for (int i = 1; i <= int(cfg.system.num_channels()); ++i) {
    auto p = msp::read_netpbm(plane_path(meas_dir, i, J), cfg.system.sensor.full_well);
    if (p.size() != J) throw msp::Error(msp::ErrorCode::ShapeMismatch, "channel " + std::to_string(i) + ": wrong color count");
    for (auto& q : p) planes.push_back(std::move(q));
  }
  auto opt = cfg.reconstruction;
  if (steps > 0) opt.steps = steps;
  if (iters >= 0) opt.guidance_iters = iters;
  msp::ReconstructionTrace trace;
  msp::HyperspectralCube est;
  if (denoiser == "oracle") {
    if (truth_path.empty()) throw msp::Error(msp::ErrorCode::InvalidArgument, "the oracle denoiser needs --truth");
    auto truth = msp::resample_cube(msp::read_cube(truth_path), cfg.system.grid);
    est = msp::reconstruct_guided(planes, cfg.system, psfs, msp::OracleDenoiser(truth), opt, &trace);
  } else {
    est = msp::reconstruct_guided(planes, cfg.system, psfs, msp::SmootherDenoiser(), opt, &trace);
  }
  est.pitch_um = cfg.system.sensor.pitch_um;
  msp::write_cube(est, out);
  if (!trace_path.empty()) msp::write_text(trace_path, msp::trace_csv(trace));
  std::cout << "reconstruct: " << denoiser << ", " << trace.steps.size() << " steps, residual "
            << fixed(trace.initial_residual, 6) << " -> " << fixed(trace.final_residual, 6) << " -> " << out << "\n";
  return 0;
}

int cmd_hdr(const std::string& low_path, const std::string& high_path, double ratio, const std::string& out,
            const std::string& report, bool fit) {
  auto low = msp::read_netpbm(low_path), high = msp::read_netpbm(high_path);
  if (low.size() != high.size()) throw msp::Error(msp::ErrorCode::ShapeMismatch, "bracket frames differ in color count");
  if (!(ratio > 1.0)) throw msp::Error(msp::ErrorCode::InvalidArgument, "--ratio must exceed 1");
  std::vector<msp::HdrResult> rs;
  double single = 0.0, fused = 0.0, gamma = 1.0;
  for (std::size_t k = 0; k < low.size(); ++k) {
    msp::CameraResponse resp;
    if (fit) resp = msp::fit_gamma_response(low[k], high[k], ratio);
    gamma = resp.gamma;
    rs.push_back(msp::hdr_fuse(low[k], high[k], ratio, resp));
    for (const auto* f : {&low[k], &high[k]}) {
      try {
        single = std::max(single, msp::single_frame_dynamic_range(*f, resp));
      } catch (const msp::Error&) {
      }
    }
    fused = std::max(fused, rs.back().dynamic_range_db);
  }
  msp::write_cube(radiance_cube(rs), out);
  const double headroom = 20.0 * std::log10(ratio);
  if (!report.empty()) {
    json j{{"exposure_ratio", ratio},
           {"headroom_db", headroom},
           {"single_frame_dr_db", single},
           {"fused_dr_db", fused},
           {"measured_additional_dr_db", fused - single},
           {"gamma", gamma}};
    msp::write_text(report, j.dump(2) + "\n");
  }
  std::cout << "hdr: headroom +" << fixed(headroom, 2) << " dB, fused DR " << fixed(fused, 2) << " dB (single frame "
            << fixed(single, 2) << " dB, +" << fixed(fused - single, 2) << " dB measured) -> " << out << "\n";
  return 0;
}

int cmd_dolp(const std::string& i3_path, const std::string& i4_path, const std::string& out) {
  auto i3 = msp::read_netpbm(i3_path), i4 = msp::read_netpbm(i4_path);
  if (i3.size() != 1 || i4.size() != 1) throw msp::Error(msp::ErrorCode::ShapeMismatch, "dolp expects grayscale PGM inputs");
  auto d = msp::dolp_hv(i3.front(), i4.front());
  msp::write_pgm(d, out, 1.0);
  std::cout << "dolp: mean " << fixed(d.sum() / double(d.size()), 4) << " -> " << out << "\n";
  return 0;
}

int cmd_bench(const std::string& cfg_path, const std::string& dataset, const std::string& psf_path,
              const std::string& reconstructor, std::optional<std::uint64_t> seed, const std::string& out,
              const std::string& csv, std::optional<double> min_psnr) {
  auto cfg = load(cfg_path);
  auto psfs = psfs_for(cfg, psf_path);
  msp::BenchmarkOptions opt;
  opt.guided = cfg.reconstruction;
  opt.noiseless = cfg.noiseless;
  opt.config_hash = msp::config_hash(cfg);
  auto rep = msp::benchmark_run(dataset, cfg.system, psfs, reconstructor, seed.value_or(cfg.seed), opt);
  msp::write_text(out, msp::report_json(rep) + "\n");
  if (!csv.empty()) msp::write_text(csv, msp::report_csv(rep));
  std::cout << "bench: " << reconstructor << " on " << rep.scenes.size() << " scenes, PSNR " << msp::format_db(rep.psnr)
            << " dB, SSIM " << fixed(rep.ssim, 4) << ", SAM " << fixed(rep.sam, 4) << " rad -> " << out << "\n";
  if (min_psnr)
    for (const auto& s : rep.scenes)
      if (s.psnr < *min_psnr) {
        std::cerr << "bench: scene " << s.name << " below " << *min_psnr << " dB\n";
        return 1;
      }
  return 0;
}

int cmd_interleave(const std::string& cfg_path, const std::string& out, int grid, double pitch, double lambda) {
  auto cfg = load(cfg_path);
  msp::InterleaveAnalysisOptions opt;
  opt.grid = grid;
  opt.pitch_um = pitch;
  opt.lambda_nm = lambda;
  opt.seed = cfg.seed;
  auto a = msp::analyze_interleaving(cfg.system, opt);
  json j{{"design_peak", a.design_peak},
         {"regular_replica_peak", a.regular_replica_peak},
         {"random_spurious_peak", a.random_spurious_peak},
         {"ratio", std::isfinite(a.ratio) ? json(a.ratio) : json("inf")},
         {"grid", grid},
         {"pitch_um", pitch},
         {"wavelength_nm", lambda}};
  if (!out.empty()) msp::write_text(out, j.dump(2) + "\n");
  std::cout << "interleave-analyze: regular replica " << a.regular_replica_peak << ", random spurious "
            << a.random_spurious_peak << ", ratio " << fixed(a.ratio, 1) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metaspectra: simulation and reconstruction pipeline for a multi-channel metasurface imager"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: METASPECTRA_THREADS or all cores)");

  std::string cfg, out, psf, centroids, cube, dir, pairs, hout, meas, trace, denoiser = "smoother", truth, low, high,
      report, i3, i4, dataset, recon = "identity", csv, profile;
  std::optional<std::uint64_t> seed;
  std::optional<double> min_psnr;
  bool noiseless = false, robust = false, fit = false, regular = false;
  int steps = 0, iters = -1, grid = 512, size = 512;
  double ratio = 0.0, pitch = 0.3, lambda = 550.0;

  auto* design = app.add_subcommand("design", "Deflection vectors, efficiencies and the interleaved phase map");
  design->add_option("--config", cfg, "Run configuration (JSON)")->check(CLI::ExistingFile);
  design->add_option("--out", out, "Design summary (JSON)")->required();
  design->add_option("--profile", profile, "Interleaved phase map (16-bit PGM)");
  design->add_option("--size", size, "Phase map size in cells")->check(CLI::PositiveNumber);
  design->add_option("--pitch", pitch, "Cell pitch (um)")->check(CLI::PositiveNumber);
  design->add_flag("--regular", regular, "2x2 comb instead of random interleaving");
  design->add_option("--seed", seed, "Interleaving seed");

  auto* psfc = app.add_subcommand("psf", "Per-channel, per-band PSF stack");
  psfc->add_option("--config", cfg, "Run configuration (JSON)")->check(CLI::ExistingFile);
  psfc->add_option("--out", out, "PSF1 file")->required();
  psfc->add_option("--centroids", centroids, "Centroid table (CSV)");

  auto* render = app.add_subcommand("render", "Render the sub-images of a snapshot");
  render->add_option("--config", cfg, "Run configuration (JSON)")->check(CLI::ExistingFile);
  render->add_option("--cube", cube, "Scene (HSC1)")->required()->check(CLI::ExistingFile);
  render->add_option("--psf", psf, "Precomputed PSF1 stack")->check(CLI::ExistingFile);
  render->add_option("--out-dir", dir, "Output directory for channel_<i>.ppm/pgm")->required();
  render->add_option("--seed", seed, "Noise seed");
  render->add_flag("--noiseless", noiseless, "Skip shot and read noise");

  auto* calib = app.add_subcommand("calibrate", "Spectral response sweep and optional homography fit");
  calib->add_option("--config", cfg, "Run configuration (JSON)")->check(CLI::ExistingFile);
  calib->add_option("--psf", psf, "Precomputed PSF1 stack")->check(CLI::ExistingFile);
  calib->add_option("--out", out, "Response table (CSV)")->required();
  auto* pairs_opt = calib->add_option("--pairs", pairs, "Point correspondences src_x,src_y,dst_x,dst_y (CSV)")->check(CLI::ExistingFile);
  calib->add_option("--homography-out", hout, "Fitted homography (JSON)")->needs(pairs_opt);
  calib->add_flag("--ransac", robust, "Robust fit");

  auto* recon_cmd = app.add_subcommand("reconstruct", "Guided reconstruction from rendered sub-images");
  recon_cmd->add_option("--config", cfg, "Run configuration (JSON)")->check(CLI::ExistingFile);
  recon_cmd->add_option("--measurements", meas, "Directory holding channel_<i>.ppm/pgm")->required()->check(CLI::ExistingDirectory);
  recon_cmd->add_option("--psf", psf, "Precomputed PSF1 stack")->check(CLI::ExistingFile);
  recon_cmd->add_option("--out", out, "Reconstructed cube (HSC1)")->required();
  recon_cmd->add_option("--trace", trace, "Per-step diagnostics (CSV)");
  recon_cmd->add_option("--denoiser", denoiser, "smoother or oracle")->check(CLI::IsMember({"smoother", "oracle"}));
  recon_cmd->add_option("--truth", truth, "Ground truth for the oracle denoiser (HSC1)")->check(CLI::ExistingFile);
  recon_cmd->add_option("--steps", steps, "Sampling steps")->check(CLI::PositiveNumber);
  recon_cmd->add_option("--guidance-iters", iters, "Guidance iterations per step")->check(CLI::NonNegativeNumber);

  auto* hdr = app.add_subcommand("hdr", "Fuse a two-frame exposure bracket");
  hdr->add_option("--low", low, "Dim frame (PGM/PPM)")->required()->check(CLI::ExistingFile);
  hdr->add_option("--high", high, "Bright frame (PGM/PPM)")->required()->check(CLI::ExistingFile);
  hdr->add_option("--ratio", ratio, "Exposure ratio high / low")->required();
  hdr->add_option("--out", out, "Radiance (HSC1)")->required();
  hdr->add_option("--report", report, "Dynamic-range report (JSON)");
  hdr->add_flag("--fit-gamma", fit, "Fit a gamma response before fusing");

  auto* dolp = app.add_subcommand("dolp", "Horizontal/vertical degree of linear polarization");
  dolp->add_option("--i3", i3, "Horizontal-polarizer sub-image (PGM)")->required()->check(CLI::ExistingFile);
  dolp->add_option("--i4", i4, "Vertical-polarizer sub-image (PGM)")->required()->check(CLI::ExistingFile);
  dolp->add_option("--out", out, "DoLP map (PGM, 1.0 = full scale)")->required();

  auto* bench = app.add_subcommand("bench", "Score a reconstructor over a directory of HSC1 cubes");
  bench->add_option("--config", cfg, "Run configuration (JSON)")->check(CLI::ExistingFile);
  bench->add_option("--dataset", dataset, "Directory of *.hsc cubes")->required();
  bench->add_option("--psf", psf, "Precomputed PSF1 stack")->check(CLI::ExistingFile);
  bench->add_option("--reconstructor", recon, "identity, oracle or smoother")
      ->check(CLI::IsMember({"identity", "oracle", "smoother"}));
  bench->add_option("--seed", seed, "Benchmark seed");
  bench->add_option("--out", out, "Report (JSON)")->required();
  bench->add_option("--csv", csv, "Report (CSV)");
  bench->add_option("--min-psnr", min_psnr, "Exit 1 if any scene scores below this PSNR (dB)");

  auto* inter = app.add_subcommand("interleave-analyze", "Replica peaks of regular vs random interleaving");
  inter->add_option("--config", cfg, "Run configuration (JSON)")->check(CLI::ExistingFile);
  inter->add_option("--out", out, "Analysis (JSON)");
  inter->add_option("--grid", grid, "Simulation size")->check(CLI::PositiveNumber);
  inter->add_option("--pitch", pitch, "Cell pitch (um)")->check(CLI::PositiveNumber);
  inter->add_option("--lambda", lambda, "Wavelength (nm)")->check(CLI::PositiveNumber);

  if (argc < 2) {
    std::cerr << app.help();
    return 2;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (threads > 0) msp::set_thread_count(threads);
  try {
    if (*design) return cmd_design(cfg, out, profile, size, pitch, regular, seed.value_or(0));
    if (*psfc) return cmd_psf(cfg, out, centroids);
    if (*render) return cmd_render(cfg, cube, psf, dir, seed, noiseless);
    if (*calib) return cmd_calibrate(cfg, psf, out, pairs, hout, robust);
    if (*recon_cmd) return cmd_reconstruct(cfg, meas, psf, out, trace, denoiser, truth, steps, iters);
    if (*hdr) return cmd_hdr(low, high, ratio, out, report, fit);
    if (*dolp) return cmd_dolp(i3, i4, out);
    if (*bench) return cmd_bench(cfg, dataset, psf, recon, seed, out, csv, min_psnr);
    if (*inter) return cmd_interleave(cfg, out, grid, pitch, lambda);
  } catch (const msp::Error& e) {
    std::cerr << "error [" << msp::to_string(e.code()) << "]: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
