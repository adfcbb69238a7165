#include "metaspectra/reconstruction.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "metaspectra/fft.hpp"
#include "metaspectra/metasurface.hpp"
#include "metaspectra/parallel.hpp"

namespace msp {

Image wiener_deconvolve(const Image& img, const Image& psf, double nsr) {
  if (!(nsr > 0.0)) throw Error(ErrorCode::InvalidArgument, "noise-to-signal ratio must be > 0");
  double total = psf.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw Error(ErrorCode::ZeroPSF, "PSF has no positive mass");
  const int R = img.rows, C = img.cols;
  std::vector<cplx> k(std::size_t(R) * C), x(k.size());
  for (int r = 0; r < psf.rows; ++r)
    for (int c = 0; c < psf.cols; ++c) {
      double v = psf(r, c);
      if (v == 0.0) continue;
      int rr = ((r - psf.rows / 2) % R + R) % R, cc = ((c - psf.cols / 2) % C + C) % C;
      k[std::size_t(rr) * C + cc] += v / total;
    }
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = img.data[i];
  fft2(k, R, C, false);
  fft2(x, R, C, false);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] *= std::conj(k[i]) / (std::norm(k[i]) + nsr);
  fft2(x, R, C, true);
  Image out(R, C);
  const double s = 1.0 / (double(R) * C);
  for (std::size_t i = 0; i < x.size(); ++i) out.data[i] = x[i].real() * s;
  return out;
}

double estimate_nsr(const Image& img, double sigma) {
  double m = 0.0;
  for (double v : img.data) m += v;
  m /= double(img.data.size());
  double var = 0.0;
  for (double v : img.data) var += (v - m) * (v - m);
  var /= double(img.data.size());
  return std::max(1e-12, var > 0.0 ? sigma * sigma / var : 1e-12);
}

DiffusionSchedule DiffusionSchedule::linear(int T, double b0, double b1) {
  if (T < 1) throw Error(ErrorCode::InvalidArgument, "schedule needs T >= 1");
  DiffusionSchedule s;
  s.T = T;
  s.beta.assign(std::size_t(T) + 1, 0.0);
  s.upsilon.assign(std::size_t(T) + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    s.beta[t] = T == 1 ? b0 : b0 + (b1 - b0) * double(t - 1) / double(T - 1);
    s.upsilon[t] = s.upsilon[t - 1] * (1.0 - s.beta[t]);
  }
  return s;
}

double DiffusionSchedule::gamma(int t) const { return std::sqrt(double(t) / double(T)); }

std::vector<int> DiffusionSchedule::subsample(int steps) const {
  steps = std::clamp(steps, 1, T);
  std::vector<int> ts;
  for (int k = 0; k < steps; ++k) ts.push_back(int(std::lround(T - double(k) * T / steps)));
  return ts;
}

double estimate_slope(const DiffusionSchedule& s, int t, DenoiseMode mode) {
  if (t < 0 || t > s.T) throw Error(ErrorCode::InvalidArgument, "timestep out of range");
  double u = s.upsilon[t];
  if (mode == DenoiseMode::Standard) return 1.0 / std::sqrt(u);
  if (u >= 1.0) throw Error(ErrorCode::InvalidArgument, "literal estimate is undefined at t = 0");
  return 1.0 / std::sqrt(1.0 - u);
}

HyperspectralCube denoise_to_estimate(const HyperspectralCube& s, const HyperspectralCube& eps,
                                      const DiffusionSchedule& sch, int t, DenoiseMode mode) {
  if (s.rows != eps.rows || s.cols != eps.cols || s.data.size() != eps.data.size())
    throw Error(ErrorCode::ShapeMismatch, "state and noise shapes differ");
  const double slope = estimate_slope(sch, t, mode);
  const double k = std::sqrt(std::max(0.0, 1.0 - sch.upsilon[t]));
  HyperspectralCube h = s;
  for (std::size_t i = 0; i < h.data.size(); ++i) h.data[i] = (s.data[i] - k * eps.data[i]) * slope;
  return h;
}

PatchPartition make_patches(int rows, int cols, int size) {
  if (size < 1) throw Error(ErrorCode::InvalidArgument, "patch size must be >= 1");
  PatchPartition p{rows, cols, size, {}};
  for (int r = 0; r < rows; r += size)
    for (int c = 0; c < cols; c += size) p.patches.push_back({r, c, std::min(size, rows - r), std::min(size, cols - c)});
  return p;
}

namespace {

HyperspectralCube crop(const HyperspectralCube& cube, const Patch& p) {
  HyperspectralCube out(p.rows, p.cols, cube.grid, cube.pitch_um);
  const std::size_t B = cube.bands();
  for (int r = 0; r < p.rows; ++r)
    std::copy_n(&cube.data[cube.index(p.r0 + r, p.c0, 0)], std::size_t(p.cols) * B, &out.data[out.index(r, 0, 0)]);
  return out;
}

Image crop(const Image& img, const Patch& p) {
  Image out(p.rows, p.cols);
  for (int r = 0; r < p.rows; ++r)
    for (int c = 0; c < p.cols; ++c) out(r, c) = img(p.r0 + r, p.c0 + c);
  return out;
}

std::vector<double> gaussian_taps(double sigma) {
  if (!(sigma > 0.0)) return {1.0};
  int h = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> w(std::size_t(2 * h + 1));
  for (int i = -h; i <= h; ++i) w[std::size_t(i + h)] = std::exp(-0.5 * i * i / (sigma * sigma));
  return w;
}

// truncated kernel renormalised at the borders; stride/count describe one axis
void smooth_axis(std::vector<double>& data, std::size_t n, std::size_t stride, std::size_t outer_count,
                 const std::vector<std::size_t>& outer_offsets, const std::vector<double>& w) {
  const int h = int(w.size() / 2);
  std::vector<double> line(n), res(n);
  for (std::size_t o = 0; o < outer_count; ++o) {
    std::size_t base = outer_offsets[o];
    for (std::size_t i = 0; i < n; ++i) line[i] = data[base + i * stride];
    for (int i = 0; i < int(n); ++i) {
      double s = 0.0, ws = 0.0;
      for (int k = -h; k <= h; ++k) {
        int j = i + k;
        if (j < 0 || j >= int(n)) continue;
        s += w[std::size_t(k + h)] * line[std::size_t(j)];
        ws += w[std::size_t(k + h)];
      }
      res[std::size_t(i)] = s / ws;
    }
    for (std::size_t i = 0; i < n; ++i) data[base + i * stride] = res[i];
  }
}

}  // namespace

HyperspectralCube gaussian_smooth(const HyperspectralCube& cube, double sp, double sb) {
  HyperspectralCube out = cube;
  const std::size_t R = std::size_t(cube.rows), C = std::size_t(cube.cols), B = cube.bands();
  auto wp = gaussian_taps(sp), wb = gaussian_taps(sb);
  std::vector<std::size_t> off;
  // bands
  for (std::size_t p = 0; p < R * C; ++p) off.push_back(p * B);
  smooth_axis(out.data, B, 1, off.size(), off, wb);
  // columns
  off.clear();
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t b = 0; b < B; ++b) off.push_back(r * C * B + b);
  smooth_axis(out.data, C, B, off.size(), off, wp);
  // rows
  off.clear();
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t b = 0; b < B; ++b) off.push_back(c * B + b);
  smooth_axis(out.data, R, C * B, off.size(), off, wp);
  return out;
}

HyperspectralCube OracleDenoiser::predict_noise(const HyperspectralCube& s, const Patch& patch, const std::vector<Image>&,
                                                int t, const DiffusionSchedule& sch) const {
  HyperspectralCube eps(s.rows, s.cols, s.grid, s.pitch_um);
  if (t <= 0) return eps;
  HyperspectralCube truth = crop(truth_, patch);
  if (truth.data.size() != s.data.size()) throw Error(ErrorCode::ShapeMismatch, "oracle truth does not match the state");
  const double su = std::sqrt(sch.upsilon[t]), sn = std::sqrt(1.0 - sch.upsilon[t]);
  for (std::size_t i = 0; i < eps.data.size(); ++i) eps.data[i] = (s.data[i] - su * truth.data[i]) / sn;
  return eps;
}

HyperspectralCube SmootherDenoiser::predict_noise(const HyperspectralCube& s, const Patch&, const std::vector<Image>&,
                                                  int t, const DiffusionSchedule& sch) const {
  HyperspectralCube eps(s.rows, s.cols, s.grid, s.pitch_um);
  if (t <= 0) return eps;
  HyperspectralCube g = gaussian_smooth(s, sp_, sb_);
  const double sn = std::sqrt(1.0 - sch.upsilon[t]);
  for (std::size_t i = 0; i < eps.data.size(); ++i) eps.data[i] = (s.data[i] - g.data[i]) / sn;
  return eps;
}

namespace {

double dot(const std::vector<Image>& x, const std::vector<Image>& y) {
  double s = 0.0;
  for (std::size_t p = 0; p < x.size(); ++p)
    for (std::size_t i = 0; i < x[p].data.size(); ++i) s += x[p].data[i] * y[p].data[i];
  return s;
}

void check_planes(const std::vector<Image>& a, const std::vector<Image>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::ShapeMismatch, "plane counts differ");
  for (std::size_t p = 0; p < a.size(); ++p)
    if (a[p].rows != b[p].rows || a[p].cols != b[p].cols) throw Error(ErrorCode::ShapeMismatch, "plane sizes differ");
}

}  // namespace

ScaleOffset fit_scale_offset(const std::vector<Image>& RH, const std::vector<Image>& R1, const std::vector<Image>& I) {
  check_planes(RH, I);
  check_planes(R1, I);
  const double hh = dot(RH, RH), ho = dot(RH, R1), oo = dot(R1, R1), hi = dot(RH, I), oi = dot(R1, I);
  const double det = hh * oo - ho * ho;
  if (!(std::abs(det) > 1e-12 * std::max(hh * oo, 1e-300)) || !std::isfinite(det)) return {};
  ScaleOffset ab{(hi * oo - oi * ho) / det, (oi * hh - hi * ho) / det};
  if (!std::isfinite(ab.a) || !std::isfinite(ab.b)) return {};
  return ab;
}

ScaleOffset fit_scale_offset(const HyperspectralCube& H, const std::vector<Image>& I, const RenderOperator& op) {
  HyperspectralCube one(H.rows, H.cols, H.grid, H.pitch_um, 1.0);
  return fit_scale_offset(op.forward(H), op.forward(one), I);
}

double measurement_loss(const std::vector<Image>& RH, const std::vector<Image>& R1, const std::vector<Image>& I,
                        const ScaleOffset& ab) {
  check_planes(RH, I);
  double s = 0.0;
  for (std::size_t p = 0; p < I.size(); ++p)
    for (std::size_t i = 0; i < I[p].data.size(); ++i) {
      double d = ab.a * RH[p].data[i] + ab.b * R1[p].data[i] - I[p].data[i];
      s += d * d;
    }
  return s;
}

double measurement_residual(const std::vector<Image>& R, const std::vector<Image>& I) {
  check_planes(R, I);
  double s = 0.0;
  for (std::size_t p = 0; p < I.size(); ++p)
    for (std::size_t i = 0; i < I[p].data.size(); ++i) s += (R[p].data[i] - I[p].data[i]) * (R[p].data[i] - I[p].data[i]);
  return std::sqrt(s);
}

GuidanceOutcome guidance_step(const HyperspectralCube& s, const Denoiser& den, const PatchContext& ctx,
                              const DiffusionSchedule& sch, int t, double gamma, DenoiseMode mode) {
  GuidanceOutcome out;
  auto eps = den.predict_noise(s, ctx.patch, ctx.measured, t, sch);
  out.estimate = denoise_to_estimate(s, eps, sch, t, mode);
  auto RH = ctx.op->forward(out.estimate);
  out.ab = fit_scale_offset(RH, ctx.ones, ctx.measured);
  out.loss = measurement_loss(RH, ctx.ones, ctx.measured, out.ab);
  out.state = s;
  if (gamma == 0.0) return out;
  std::vector<Image> res(RH.size());
  double rn = 0.0, mn = 0.0;
  for (std::size_t p = 0; p < RH.size(); ++p) {
    res[p] = Image(RH[p].rows, RH[p].cols);
    for (std::size_t i = 0; i < res[p].data.size(); ++i) {
      res[p].data[i] = out.ab.a * RH[p].data[i] + out.ab.b * ctx.ones[p].data[i] - ctx.measured[p].data[i];
      rn += res[p].data[i] * res[p].data[i];
      mn += ctx.measured[p].data[i] * ctx.measured[p].data[i];
    }
  }
  // residual at round-off level: the normalised direction would be noise
  if (rn <= 1e-24 * mn) return out;
  auto g = ctx.op->adjoint(res);
  const double scale = 2.0 * out.ab.a * estimate_slope(sch, t, mode);
  double n2 = 0.0;
  for (double& v : g.data) {
    v *= scale;
    n2 += v * v;
  }
  const double n = std::sqrt(n2);
  if (!(n > 0.0) || !std::isfinite(n)) return out;
  for (std::size_t i = 0; i < g.data.size(); ++i) out.state.data[i] -= gamma * g.data[i] / n;
  out.step_norm = gamma;
  return out;
}

std::vector<Image> snapshot_planes(const Snapshot& snap) {
  std::vector<Image> planes;
  for (const auto& s : snap.sub_images)
    for (const auto& p : s.planes) planes.push_back(p);
  return planes;
}

HyperspectralCube reconstruct_guided(const std::vector<Image>& I, const SystemConfig& sys, const PSFStack& psfs,
                                     const Denoiser& den, const GuidedOptions& opt, ReconstructionTrace* trace) {
  validate_system(sys);
  const std::size_t V = sys.num_channels(), J = sys.sensor.colors(), B = sys.grid.size();
  if (I.size() != V * J) throw Error(ErrorCode::ShapeMismatch, "measurement plane count differs from channels x colors");
  const int rows = I.front().rows, cols = I.front().cols;
  for (const auto& p : I)
    if (p.rows != rows || p.cols != cols) throw Error(ErrorCode::ShapeMismatch, "measurement planes differ in size");

  auto sch = DiffusionSchedule::linear(opt.T);
  auto part = make_patches(rows, cols, opt.patch_size);
  std::map<std::pair<int, int>, std::unique_ptr<RenderOperator>> ops;
  for (const auto& p : part.patches) {
    auto key = std::make_pair(p.rows, p.cols);
    if (!ops.count(key)) ops[key] = std::make_unique<RenderOperator>(sys, psfs, p.rows, p.cols);
  }
  const std::size_t K = part.patches.size();
  std::vector<PatchContext> ctx(K);
  std::vector<HyperspectralCube> state(K), result(K);
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& p = part.patches[k];
    ctx[k].patch = p;
    ctx[k].op = ops.at({p.rows, p.cols}).get();
    for (const auto& plane : I) ctx[k].measured.push_back(crop(plane, p));
    ctx[k].ones = ctx[k].op->forward(HyperspectralCube(p.rows, p.cols, sys.grid, sys.sensor.pitch_um, 1.0));
    state[k] = HyperspectralCube(p.rows, p.cols, sys.grid, sys.sensor.pitch_um);
    for (double& v : state[k].data) v = gauss(rng);
  }

  const auto ts = sch.subsample(opt.steps);
  std::vector<double> init_res(K, 0.0);
  std::vector<std::vector<StepRecord>> rec(K, std::vector<StepRecord>(ts.size()));
  auto run_patch = [&](std::size_t k, std::size_t si) {
    const int t = ts[si];
    const int tp = si + 1 < ts.size() ? ts[si + 1] : 0;
    const double g = sch.gamma(t);
    auto& s = state[k];
    StepRecord& r = rec[k][si];
    r.t = t;
    r.gamma = g;
    double prev = 0.0;
    for (int it = 0; it < opt.guidance_iters; ++it) {
      auto o = guidance_step(s, den, ctx[k], sch, t, g, opt.mode);
      if (si == 0 && it == 0) {
        auto R = ctx[k].op->forward(o.estimate);
        double e = measurement_residual(R, ctx[k].measured);
        init_res[k] = e * e;
        r.loss_first = o.loss;
      }
      if (it > 0 && o.loss > prev) ++r.loss_increases;
      prev = o.loss;
      s = std::move(o.state);
    }
    auto eps = den.predict_noise(s, ctx[k].patch, ctx[k].measured, t, sch);
    auto H = denoise_to_estimate(s, eps, sch, t, opt.mode);
    auto RH = ctx[k].op->forward(H);
    auto ab = fit_scale_offset(RH, ctx[k].ones, ctx[k].measured);
    r.loss_last = measurement_loss(RH, ctx[k].ones, ctx[k].measured, ab);
    if (opt.guidance_iters == 0 && si == 0) {
      double e = measurement_residual(RH, ctx[k].measured);
      init_res[k] = e * e;
      r.loss_first = r.loss_last;
    }
    r.a_mean = ab.a;
    r.b_mean = ab.b;
    for (double& v : H.data) v = ab.a * v + ab.b;
    if (tp > 0) {
      const double su = std::sqrt(sch.upsilon[tp]), sn = std::sqrt(1.0 - sch.upsilon[tp]);
      for (std::size_t i = 0; i < s.data.size(); ++i) s.data[i] = su * H.data[i] + sn * eps.data[i];
    } else {
      result[k] = std::move(H);
    }
  };
  for (std::size_t si = 0; si < ts.size(); ++si) {
    if (den.thread_safe()) {
      parallel_for(K, [&](std::size_t k) { run_patch(k, si); });
    } else {
      for (std::size_t k = 0; k < K; ++k) run_patch(k, si);
    }
  }

  HyperspectralCube out(rows, cols, sys.grid, sys.sensor.pitch_um);
  for (std::size_t k = 0; k < K; ++k) {
    const auto& p = part.patches[k];
    for (int r = 0; r < p.rows; ++r)
      for (int c = 0; c < p.cols; ++c)
        for (std::size_t b = 0; b < B; ++b) out(p.r0 + r, p.c0 + c, b) = std::max(0.0, result[k](r, c, b));
  }

  if (trace) {
    trace->steps.assign(ts.size(), {});
    for (std::size_t si = 0; si < ts.size(); ++si) {
      StepRecord& t = trace->steps[si];
      t = rec[0][si];
      t.loss_first = t.loss_last = t.a_mean = t.b_mean = 0.0;
      t.loss_increases = 0;
      for (std::size_t k = 0; k < K; ++k) {
        t.loss_first += rec[k][si].loss_first;
        t.loss_last += rec[k][si].loss_last;
        t.a_mean += rec[k][si].a_mean / double(K);
        t.b_mean += rec[k][si].b_mean / double(K);
        t.loss_increases += rec[k][si].loss_increases;
      }
    }
    double a = 0.0, f = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      a += init_res[k];
      auto R = ctx[k].op->forward(crop(out, part.patches[k]));
      double e = measurement_residual(R, ctx[k].measured);
      f += e * e;
    }
    trace->initial_residual = std::sqrt(a);
    trace->final_residual = std::sqrt(f);
  }
  return out;
}

HyperspectralCube reconstruct_guided(const Snapshot& snap, const PSFStack& psfs, const Denoiser& den,
                                     const GuidedOptions& opt, ReconstructionTrace* trace) {
  if (!snap.system) throw Error(ErrorCode::InvalidArgument, "snapshot carries no system");
  return reconstruct_guided(snapshot_planes(snap), *snap.system, psfs, den, opt, trace);
}

std::string trace_csv(const ReconstructionTrace& tr) {
  std::ostringstream os;
  os.precision(10);
  os << "t,gamma,loss_first,loss_last,a_mean,b_mean,loss_increases\n";
  for (const auto& s : tr.steps)
    os << s.t << ',' << s.gamma << ',' << s.loss_first << ',' << s.loss_last << ',' << s.a_mean << ',' << s.b_mean << ','
       << s.loss_increases << '\n';
  return os.str();
}

ToySystem toy_system(double residual, int plane_px) {
  ToySystem toy;
  toy.system = default_system();
  for (auto& ch : toy.system.channels) {
    if (ch.index > 2) continue;
    double sy = ch.index == 1 ? 1.0 : -1.0;
    ch.beta = {-ch.alpha[0] + residual, -ch.alpha[1] + sy * residual};
  }
  toy.psf.plane_px = plane_px;
  toy.psf.support_px = plane_px;
  return toy;
}

}  // namespace msp
