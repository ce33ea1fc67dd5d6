#pragma once

#include <complex>
#include <cstdint>
#include <vector>

namespace echo {

using Complex = std::complex<double>;

bool is_power_of_two(std::int64_t n);

/// In-place radix-2 DFT, X_k = Σ_j x_j e^{∓2πijk/n} (sign − forward). No
/// normalization in either direction.
void fft(std::vector<Complex>& x, bool inverse);

/// 2D DFT of a row-major n0 × n1 field (axis 0 outer). The inverse divides by
/// n0·n1 so ifft2(fft2(x)) = x.
std::vector<Complex> fft2(const std::vector<Complex>& x, std::int64_t n0, std::int64_t n1);
std::vector<Complex> ifft2(const std::vector<Complex>& x, std::int64_t n0, std::int64_t n1);

/// Signed integer wavenumber of DFT index i on an n-point axis.
inline std::int64_t wavenumber(std::int64_t i, std::int64_t n) { return i <= n / 2 ? i : i - n; }

}  // namespace echo
