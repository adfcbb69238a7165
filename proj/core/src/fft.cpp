#include "metaspectra/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <map>
#include <mutex>
#include <tuple>

namespace msp {

namespace {

std::mutex g_plan_mu;

struct PlanCache {
  std::map<std::tuple<int, int, int>, fftw_plan> plans;
  ~PlanCache() {
    for (auto& kv : plans) fftw_destroy_plan(kv.second);
  }
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

// kind: 0 forward c2c, 1 inverse c2c, 2 r2c, 3 c2r
fftw_plan get_plan(int kind, int rows, int cols) {
  std::lock_guard<std::mutex> lk(g_plan_mu);
  auto key = std::make_tuple(kind, rows, cols);
  auto it = cache().plans.find(key);
  if (it != cache().plans.end()) return it->second;
  fftw_plan p = nullptr;
  std::size_t n = std::size_t(rows) * cols;
  std::size_t nh = std::size_t(rows) * (cols / 2 + 1);
  if (kind <= 1) {
    auto* a = fftw_alloc_complex(n);
    p = fftw_plan_dft_2d(rows, cols, a, a, kind == 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    fftw_free(a);
  } else if (kind == 2) {
    auto* r = fftw_alloc_real(n);
    auto* c = fftw_alloc_complex(nh);
    p = fftw_plan_dft_r2c_2d(rows, cols, r, c, FFTW_ESTIMATE);
    fftw_free(r);
    fftw_free(c);
  } else {
    auto* r = fftw_alloc_real(n);
    auto* c = fftw_alloc_complex(nh);
    p = fftw_plan_dft_c2r_2d(rows, cols, c, r, FFTW_ESTIMATE);
    fftw_free(r);
    fftw_free(c);
  }
  cache().plans[key] = p;
  return p;
}

}  // namespace

// copies through FFTW-aligned scratch; plans are shared across threads
void fft2(std::vector<std::complex<double>>& data, int rows, int cols, bool inverse) {
  fftw_plan p = get_plan(inverse ? 1 : 0, rows, cols);
  std::size_t n = std::size_t(rows) * cols;
  auto* buf = fftw_alloc_complex(n);
  std::memcpy(buf, data.data(), n * sizeof(fftw_complex));
  fftw_execute_dft(p, buf, buf);
  std::memcpy(static_cast<void*>(data.data()), buf, n * sizeof(fftw_complex));
  fftw_free(buf);
}

void rfft2(const std::vector<double>& in, std::vector<std::complex<double>>& out, int rows, int cols) {
  fftw_plan p = get_plan(2, rows, cols);
  std::size_t n = std::size_t(rows) * cols;
  std::size_t nh = std::size_t(rows) * (cols / 2 + 1);
  auto* r = fftw_alloc_real(n);
  auto* c = fftw_alloc_complex(nh);
  std::copy(in.begin(), in.begin() + std::ptrdiff_t(n), r);
  fftw_execute_dft_r2c(p, r, c);
  out.resize(nh);
  std::memcpy(static_cast<void*>(out.data()), c, nh * sizeof(fftw_complex));
  fftw_free(r);
  fftw_free(c);
}

void irfft2(std::vector<std::complex<double>>& in, std::vector<double>& out, int rows, int cols) {
  fftw_plan p = get_plan(3, rows, cols);
  std::size_t n = std::size_t(rows) * cols;
  std::size_t nh = std::size_t(rows) * (cols / 2 + 1);
  auto* r = fftw_alloc_real(n);
  auto* c = fftw_alloc_complex(nh);
  std::memcpy(c, in.data(), nh * sizeof(fftw_complex));
  fftw_execute_dft_c2r(p, c, r);
  out.assign(r, r + n);
  fftw_free(r);
  fftw_free(c);
}

int good_fft_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int k = m;
    for (int f : {2, 3, 5, 7})
      while (k % f == 0) k /= f;
    if (k == 1) return m;
  }
}

}  // namespace msp
