#include "metaspectra/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace msp {

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

class Writer {
 public:
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  template <class T>
  void le(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    out_.append(b, sizeof(T));
  }
  std::string& str() { return out_; }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw Error(ErrorCode::TruncatedFile, "file ends before the declared payload");
  }
  template <class T>
  T le() {
    need(sizeof(T));
    char b[sizeof(T)];
    std::memcpy(b, s_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, b, sizeof(T));
    return v;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  std::size_t remaining() const { return s_.size() - pos_; }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

void check_magic(Reader& r, const char* magic) {
  if (r.remaining() < 4) throw Error(ErrorCode::BadMagic, "file too short for a magic number");
  if (r.take(4) != magic) throw Error(ErrorCode::BadMagic, std::string("expected magic ") + magic);
}

void check_tail(const Reader& r, std::size_t expected) {
  if (r.remaining() < expected) throw Error(ErrorCode::TruncatedFile, "payload shorter than the header declares");
  if (r.remaining() > expected) throw Error(ErrorCode::SizeMismatch, "payload longer than the header declares");
}

SpectralGrid read_grid(Reader& r, std::uint32_t bands) {
  std::vector<double> wl(bands);
  for (auto& w : wl) w = r.le<float>();
  try {
    return SpectralGrid(wl);
  } catch (const Error& e) {
    throw Error(ErrorCode::SizeMismatch, std::string("invalid wavelength table: ") + e.what());
  }
}

}  // namespace

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path + " for writing");
  f.write(text.data(), std::streamsize(text.size()));
  if (!f) throw Error(ErrorCode::IoError, "write failed: " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string encode_cube(const HyperspectralCube& cube) {
  Writer w;
  w.bytes("HSC1", 4);
  w.le<std::uint32_t>(1);
  w.le<std::uint32_t>(std::uint32_t(cube.rows));
  w.le<std::uint32_t>(std::uint32_t(cube.cols));
  w.le<std::uint32_t>(std::uint32_t(cube.bands()));
  w.le<double>(cube.pitch_um);
  for (double l : cube.grid.wavelengths()) w.le<float>(float(l));
  for (double v : cube.data) w.le<float>(float(v));
  return std::move(w.str());
}

HyperspectralCube decode_cube(const std::string& bytes) {
  Reader r(bytes);
  check_magic(r, "HSC1");
  r.le<std::uint32_t>();
  auto H = r.le<std::uint32_t>(), W = r.le<std::uint32_t>(), B = r.le<std::uint32_t>();
  double pitch = r.le<double>();
  if (B > (1u << 20) || std::uint64_t(H) * W > (1ull << 32)) throw Error(ErrorCode::SizeMismatch, "implausible cube header");
  r.need(std::size_t(B) * 4);
  SpectralGrid grid = read_grid(r, B);
  check_tail(r, std::size_t(H) * W * B * 4);
  HyperspectralCube cube(int(H), int(W), grid, pitch);
  for (auto& v : cube.data) v = r.le<float>();
  return cube;
}

void write_cube(const HyperspectralCube& cube, const std::string& path) { write_text(path, encode_cube(cube)); }
HyperspectralCube read_cube(const std::string& path) { return decode_cube(read_text(path)); }

void write_psf(const PSFStack& s, const std::string& path) {
  Writer w;
  w.bytes("PSF1", 4);
  w.le<std::uint32_t>(1);
  w.le<std::uint32_t>(std::uint32_t(s.V));
  w.le<std::uint32_t>(std::uint32_t(s.bands()));
  w.le<std::uint32_t>(std::uint32_t(s.rows));
  w.le<std::uint32_t>(std::uint32_t(s.cols));
  w.le<double>(s.pitch_um);
  for (double l : s.grid.wavelengths()) w.le<float>(float(l));
  for (const auto& p : s.planes)
    for (double v : p.data) w.le<float>(float(v));
  write_text(path, w.str());
}

PSFStack read_psf(const std::string& path) {
  std::string bytes = read_text(path);
  Reader r(bytes);
  check_magic(r, "PSF1");
  r.le<std::uint32_t>();
  PSFStack s;
  auto V = r.le<std::uint32_t>(), B = r.le<std::uint32_t>(), H = r.le<std::uint32_t>(), W = r.le<std::uint32_t>();
  s.pitch_um = r.le<double>();
  if (B > (1u << 20) || V > 4096 || std::uint64_t(H) * W > (1ull << 28)) throw Error(ErrorCode::SizeMismatch, "implausible PSF header");
  r.need(std::size_t(B) * 4);
  s.grid = read_grid(r, B);
  check_tail(r, std::size_t(V) * B * H * W * 4);
  s.V = int(V);
  s.rows = int(H);
  s.cols = int(W);
  s.planes.assign(std::size_t(V) * B, Image(int(H), int(W)));
  for (auto& p : s.planes)
    for (auto& v : p.data) v = r.le<float>();
  s.chain.assign(s.planes.size(), cplx{});
  s.throughput.assign(s.planes.size(), 0.0);
  return s;
}

namespace {

std::uint16_t quantize(double v, double full) {
  double q = std::round(std::clamp(v / full, 0.0, 1.0) * 65535.0);
  return std::uint16_t(q);
}

void write_netpbm(const std::vector<Image>& planes, const std::string& path, double full, const char* magic) {
  if (!(full > 0.0)) throw Error(ErrorCode::InvalidArgument, "full scale must be > 0");
  const int R = planes.front().rows, C = planes.front().cols;
  for (const auto& p : planes)
    if (p.rows != R || p.cols != C) throw Error(ErrorCode::ShapeMismatch, "planes differ in size");
  std::string out = std::string(magic) + "\n" + std::to_string(C) + " " + std::to_string(R) + "\n65535\n";
  out.reserve(out.size() + std::size_t(R) * C * planes.size() * 2);
  for (std::size_t i = 0; i < std::size_t(R) * C; ++i)
    for (const auto& p : planes) {
      std::uint16_t q = quantize(p.data[i], full);
      out.push_back(char(q >> 8));
      out.push_back(char(q & 0xff));
    }
  write_text(path, out);
}

}  // namespace

void write_pgm(const Image& img, const std::string& path, double full) { write_netpbm({img}, path, full, "P5"); }

void write_ppm(const std::vector<Image>& rgb, const std::string& path, double full) {
  if (rgb.size() != 3) throw Error(ErrorCode::ShapeMismatch, "PPM needs exactly three planes");
  write_netpbm(rgb, path, full, "P6");
}

std::vector<Image> read_netpbm(const std::string& path, double full) {
  std::string bytes = read_text(path);
  std::size_t pos = 0;
  auto token = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    std::size_t s = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (s == pos) throw Error(ErrorCode::TruncatedFile, "netpbm header ends early");
    return bytes.substr(s, pos - s);
  };
  std::string magic = token();
  int planes = magic == "P5" ? 1 : magic == "P6" ? 3 : 0;
  if (!planes) throw Error(ErrorCode::BadMagic, "expected a binary PGM or PPM");
  int C = 0, R = 0, maxval = 0;
  try {
    C = std::stoi(token());
    R = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::logic_error&) {
    throw Error(ErrorCode::SizeMismatch, "malformed netpbm header");
  }
  if (C <= 0 || R <= 0 || maxval <= 0 || maxval > 65535) throw Error(ErrorCode::SizeMismatch, "bad netpbm dimensions");
  ++pos;
  const int bps = maxval > 255 ? 2 : 1;
  const std::size_t need = std::size_t(R) * C * planes * bps;
  if (bytes.size() - std::min(pos, bytes.size()) < need) throw Error(ErrorCode::TruncatedFile, "netpbm payload is short");
  std::vector<Image> out(std::size_t(planes), Image(R, C));
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < std::size_t(R) * C; ++i)
    for (int k = 0; k < planes; ++k) {
      unsigned v = bps == 2 ? (unsigned(p[0]) << 8) | p[1] : p[0];
      p += bps;
      out[std::size_t(k)].data[i] = full * double(v) / maxval;
    }
  return out;
}

std::string homography_to_json(const std::vector<Homography>& hs) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& h : hs) j.push_back(h.h);
  return nlohmann::json{{"homographies", j}}.dump(2);
}

std::vector<Homography> homography_from_json(const std::string& text) {
  std::vector<Homography> out;
  try {
    auto j = nlohmann::json::parse(text);
    for (const auto& e : j.at("homographies")) {
      Homography h;
      h.h = e.get<std::array<double, 9>>();
      out.push_back(h);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("homography file: ") + e.what());
  }
  return out;
}

}  // namespace msp
