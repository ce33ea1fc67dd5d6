#include "echo/fft.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace echo {

bool is_power_of_two(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

void fft(std::vector<Complex>& x, bool inverse) {
  const auto n = static_cast<std::int64_t>(x.size());
  if (!is_power_of_two(n)) throw std::invalid_argument("fft length must be a power of two, got " + std::to_string(n));
  for (std::int64_t i = 1, j = 0; i < n; ++i) {
    std::int64_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[static_cast<std::size_t>(i)], x[static_cast<std::size_t>(j)]);
  }
  for (std::int64_t len = 2; len <= n; len <<= 1) {
    const double ang = 2 * std::numbers::pi / static_cast<double>(len) * (inverse ? 1 : -1);
    for (std::int64_t i = 0; i < n; i += len)
      for (std::int64_t k = 0; k < len / 2; ++k) {
        // Twiddles from sin/cos directly rather than by recurrence, for accuracy.
        const Complex w(std::cos(ang * static_cast<double>(k)), std::sin(ang * static_cast<double>(k)));
        auto& a = x[static_cast<std::size_t>(i + k)];
        auto& b = x[static_cast<std::size_t>(i + k + len / 2)];
        const Complex t = w * b;
        b = a - t;
        a += t;
      }
  }
}

namespace {

std::vector<Complex> transform2(std::vector<Complex> x, std::int64_t n0, std::int64_t n1, bool inverse) {
  if (static_cast<std::int64_t>(x.size()) != n0 * n1) throw std::invalid_argument("fft2: size does not match extents");
  std::vector<Complex> line(static_cast<std::size_t>(n1));
  for (std::int64_t i = 0; i < n0; ++i) {
    for (std::int64_t j = 0; j < n1; ++j) line[static_cast<std::size_t>(j)] = x[static_cast<std::size_t>(i * n1 + j)];
    fft(line, inverse);
    for (std::int64_t j = 0; j < n1; ++j) x[static_cast<std::size_t>(i * n1 + j)] = line[static_cast<std::size_t>(j)];
  }
  line.resize(static_cast<std::size_t>(n0));
  for (std::int64_t j = 0; j < n1; ++j) {
    for (std::int64_t i = 0; i < n0; ++i) line[static_cast<std::size_t>(i)] = x[static_cast<std::size_t>(i * n1 + j)];
    fft(line, inverse);
    for (std::int64_t i = 0; i < n0; ++i) x[static_cast<std::size_t>(i * n1 + j)] = line[static_cast<std::size_t>(i)];
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(n0 * n1);
    for (auto& v : x) v *= s;
  }
  return x;
}

}  // namespace

std::vector<Complex> fft2(const std::vector<Complex>& x, std::int64_t n0, std::int64_t n1) {
  return transform2(x, n0, n1, false);
}

std::vector<Complex> ifft2(const std::vector<Complex>& x, std::int64_t n0, std::int64_t n1) {
  return transform2(x, n0, n1, true);
}

}  // namespace echo
