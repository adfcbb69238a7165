#include "metaspectra/config.hpp"

#include <openssl/evp.h>

#include <initializer_list>
#include <set>

#include <nlohmann/json.hpp>

#include "metaspectra/io.hpp"

namespace msp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

void allow(const json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) fail(where + ": expected an object");
  std::set<std::string> ok(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!ok.count(k)) fail(where + ": unknown key '" + k + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key + ": wrong type");
  }
}

json filter_json(const FilterSpec& f) {
  switch (f.kind) {
    case FilterSpec::Kind::NeutralDensity: return {{"kind", "nd"}, {"od", f.od}};
    case FilterSpec::Kind::LinearPolarizer: return {{"kind", "polarizer"}, {"angle_deg", f.angle_deg}};
    default: return {{"kind", "none"}};
  }
}

FilterSpec filter_from(const json& j, const std::string& where) {
  allow(j, where, {"kind", "od", "angle_deg"});
  std::string kind = "none";
  double od = 0.0, angle = 0.0;
  read(j, "kind", kind, where);
  read(j, "od", od, where);
  read(j, "angle_deg", angle, where);
  if (kind == "none") return FilterSpec::none();
  if (kind == "nd") return FilterSpec::neutral_density(od);
  if (kind == "polarizer") return FilterSpec::linear_polarizer(angle);
  fail(where + ".kind: expected none, nd or polarizer");
}

json system_json(const SystemConfig& s) {
  json ch = json::array();
  for (const auto& c : s.channels)
    ch.push_back({{"index", c.index},
                  {"alpha", c.alpha},
                  {"beta", c.beta},
                  {"design_wavelength_nm", c.design_wavelength_nm},
                  {"lens_focal_mm", c.lens_focal_mm},
                  {"lens_center_mm", c.lens_center_mm},
                  {"lens_radius_mm", c.lens_radius_mm},
                  {"filter", filter_json(c.filter)},
                  {"b_efficiency", c.b_efficiency}});
  return {{"grid", {{"wavelengths_nm", s.grid.wavelengths()}}},
          {"sensor",
           {{"eta", s.sensor.eta},
            {"gain", s.sensor.gain},
            {"exposure_s", s.sensor.exposure_s},
            {"sigma", s.sensor.sigma},
            {"pitch_um", s.sensor.pitch_um},
            {"full_well", s.sensor.full_well},
            {"photons_per_unit", s.sensor.photons_per_unit}}},
          {"channels", ch},
          {"entrance_pupil_diameter_mm", s.entrance_pupil_diameter_mm},
          {"layer_spacing_mm", s.layer_spacing_mm}};
}

void apply_system(const json& j, SystemConfig& s) {
  const std::string w = "system";
  allow(j, w, {"grid", "sensor", "channels", "entrance_pupil_diameter_mm", "layer_spacing_mm"});
  bool grid_changed = false;
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    allow(g, w + ".grid", {"wavelengths_nm", "uniform"});
    try {
      if (g.contains("wavelengths_nm")) {
        s.grid = SpectralGrid(g["wavelengths_nm"].get<std::vector<double>>());
      } else if (g.contains("uniform")) {
        auto u = g["uniform"].get<std::vector<double>>();
        if (u.size() != 3) fail(w + ".grid.uniform: expected [lo, hi, count]");
        s.grid = SpectralGrid::uniform(u[0], u[1], std::size_t(u[2]));
      }
    } catch (const json::exception&) {
      fail(w + ".grid: wrong type");
    } catch (const Error& e) {
      fail(w + ".grid: " + e.what());
    }
    grid_changed = true;
  }
  if (j.contains("sensor")) {
    const auto& q = j["sensor"];
    const std::string ws = w + ".sensor";
    allow(q, ws, {"preset", "half_width_nm", "eta", "gain", "exposure_s", "sigma", "pitch_um", "full_well", "photons_per_unit"});
    std::string preset = "rgb";
    double hw = 120.0;
    read(q, "preset", preset, ws);
    read(q, "half_width_nm", hw, ws);
    SensorModel base = s.sensor;
    if (q.contains("eta")) {
      read(q, "eta", base.eta, ws);
    } else if (grid_changed || q.contains("preset") || q.contains("half_width_nm")) {
      if (preset == "rgb") base.eta = default_rgb_sensor(s.grid, hw).eta;
      else if (preset == "mono") base.eta = mono_sensor(s.grid).eta;
      else fail(ws + ".preset: expected rgb or mono");
    }
    read(q, "gain", base.gain, ws);
    read(q, "exposure_s", base.exposure_s, ws);
    read(q, "sigma", base.sigma, ws);
    read(q, "pitch_um", base.pitch_um, ws);
    read(q, "full_well", base.full_well, ws);
    read(q, "photons_per_unit", base.photons_per_unit, ws);
    s.sensor = base;
  } else if (grid_changed) {
    s.sensor.eta = default_rgb_sensor(s.grid).eta;
  }
  if (j.contains("channels")) {
    const auto& arr = j["channels"];
    if (!arr.is_array() || arr.empty()) fail(w + ".channels: expected a non-empty array");
    std::vector<ChannelConfig> out;
    for (std::size_t k = 0; k < arr.size(); ++k) {
      const std::string wc = w + ".channels[" + std::to_string(k) + "]";
      const auto& c = arr[k];
      allow(c, wc, {"index", "alpha", "beta", "design_wavelength_nm", "lens_focal_mm", "lens_center_mm", "lens_radius_mm",
                    "filter", "b_efficiency"});
      ChannelConfig ch = k < s.channels.size() ? s.channels[k] : ChannelConfig{};
      ch.index = int(k) + 1;
      read(c, "index", ch.index, wc);
      if (ch.index != int(k) + 1) fail(wc + ".index: channels must be numbered 1..V in order");
      read(c, "alpha", ch.alpha, wc);
      read(c, "beta", ch.beta, wc);
      read(c, "design_wavelength_nm", ch.design_wavelength_nm, wc);
      read(c, "lens_focal_mm", ch.lens_focal_mm, wc);
      read(c, "lens_center_mm", ch.lens_center_mm, wc);
      read(c, "lens_radius_mm", ch.lens_radius_mm, wc);
      read(c, "b_efficiency", ch.b_efficiency, wc);
      if (c.contains("filter")) ch.filter = filter_from(c["filter"], wc + ".filter");
      out.push_back(ch);
    }
    s.channels = out;
  }
  read(j, "entrance_pupil_diameter_mm", s.entrance_pupil_diameter_mm, w);
  read(j, "layer_spacing_mm", s.layer_spacing_mm, w);
  try {
    validate_system(s);
  } catch (const Error& e) {
    fail(std::string("system: ") + e.what());
  }
}

json run_json(const RunConfig& c) {
  return {{"preset", c.preset},
          {"system", system_json(c.system)},
          {"psf", {{"plane_px", c.psf.plane_px}, {"support_px", c.psf.support_px}, {"pupil_samples", c.psf.pupil_samples}}},
          {"reconstruction",
           {{"steps", c.reconstruction.steps},
            {"guidance_iters", c.reconstruction.guidance_iters},
            {"patch_size", c.reconstruction.patch_size},
            {"mode", c.reconstruction.mode == DenoiseMode::Standard ? "standard" : "literal"},
            {"T", c.reconstruction.T}}},
          {"seed", c.seed},
          {"noiseless", c.noiseless}};
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    fail(std::string("invalid JSON: ") + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  json j = parse(text);
  allow(j, "config", {"preset", "system", "psf", "reconstruction", "seed", "noiseless"});
  RunConfig c;
  read(j, "preset", c.preset, "config");
  if (c.preset == "default") {
    c.system = default_system();
  } else if (c.preset == "toy") {
    auto toy = toy_system();
    c.system = toy.system;
    c.psf = toy.psf;
  } else {
    fail("config.preset: expected default or toy");
  }
  if (j.contains("system")) apply_system(j["system"], c.system);
  if (j.contains("psf")) {
    allow(j["psf"], "psf", {"plane_px", "support_px", "pupil_samples"});
    read(j["psf"], "plane_px", c.psf.plane_px, "psf");
    read(j["psf"], "support_px", c.psf.support_px, "psf");
    read(j["psf"], "pupil_samples", c.psf.pupil_samples, "psf");
    if (c.psf.plane_px < 1 || c.psf.support_px < 1 || c.psf.pupil_samples < 2) fail("psf: sizes must be positive");
  }
  if (j.contains("reconstruction")) {
    const auto& r = j["reconstruction"];
    allow(r, "reconstruction", {"steps", "guidance_iters", "patch_size", "mode", "T"});
    read(r, "steps", c.reconstruction.steps, "reconstruction");
    read(r, "guidance_iters", c.reconstruction.guidance_iters, "reconstruction");
    read(r, "patch_size", c.reconstruction.patch_size, "reconstruction");
    read(r, "T", c.reconstruction.T, "reconstruction");
    std::string mode = "standard";
    read(r, "mode", mode, "reconstruction");
    if (mode == "standard") c.reconstruction.mode = DenoiseMode::Standard;
    else if (mode == "literal") c.reconstruction.mode = DenoiseMode::Literal;
    else fail("reconstruction.mode: expected standard or literal");
    if (c.reconstruction.steps < 1 || c.reconstruction.guidance_iters < 0 || c.reconstruction.patch_size < 1 ||
        c.reconstruction.T < 1)
      fail("reconstruction: counts must be positive");
  }
  read(j, "seed", c.seed, "config");
  read(j, "noiseless", c.noiseless, "config");
  c.reconstruction.seed = c.seed;
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text(path)); }

std::string run_config_to_json(const RunConfig& c) { return run_json(c).dump(2); }

std::string system_to_json(const SystemConfig& s) { return system_json(s).dump(2); }

SystemConfig system_from_json(const std::string& text) {
  SystemConfig s = default_system();
  apply_system(parse(text), s);
  return s;
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::IoError, "SHA-256 digest failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

std::string config_hash(const RunConfig& c) { return sha256_hex(run_json(c).dump()); }

}  // namespace msp
