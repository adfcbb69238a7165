#pragma once

#include <complex>
#include <vector>

namespace msp {

// 2D complex DFT over row-major rows x cols buffers; unnormalized in both
// directions. Plans are cached per shape and safe to execute concurrently.
void fft2(std::vector<std::complex<double>>& data, int rows, int cols, bool inverse);

// real-to-half-complex (rows x (cols/2+1)) and back; c2r destroys its input
void rfft2(const std::vector<double>& in, std::vector<std::complex<double>>& out, int rows, int cols);
void irfft2(std::vector<std::complex<double>>& in, std::vector<double>& out, int rows, int cols);

// smallest size >= n whose prime factors are 2, 3, 5, 7
int good_fft_size(int n);

// in-place quadrant swap
template <class T>
void fftshift2(std::vector<T>& a, int rows, int cols) {
  std::vector<T> tmp(a.size());
  int hr = rows / 2, hc = cols / 2;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) tmp[std::size_t((r + hr) % rows) * cols + (c + hc) % cols] = a[std::size_t(r) * cols + c];
  a.swap(tmp);
}

}  // namespace msp
