#include "echo/metrics.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "echo/fft.hpp"

namespace echo {

namespace {

template <typename V>
double rmse_impl(const std::vector<V>& pred, const std::vector<V>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("relative_mse: sizes differ (" + std::to_string(pred.size()) + " vs " +
                                std::to_string(truth.size()) + ")");
  double num = 0, den = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(truth[i]);
    num += d * d;
    den += static_cast<double>(truth[i]) * static_cast<double>(truth[i]);
  }
  if (den == 0) throw std::invalid_argument("relative_mse: truth has zero norm");
  return std::sqrt(num) / std::sqrt(den);
}

}  // namespace

double relative_mse(const std::vector<double>& pred, const std::vector<double>& truth) { return rmse_impl(pred, truth); }
double relative_mse(const std::vector<float>& pred, const std::vector<float>& truth) { return rmse_impl(pred, truth); }

double Spectrum::total() const {
  double s = 0;
  for (std::size_t i = 0; i < energy.size(); ++i) s += static_cast<double>(count[i]) * energy[i];
  return s;
}

Spectrum energy_spectrum(const std::vector<double>& field, std::int64_t n0, std::int64_t n1) {
  std::vector<Complex> x(field.begin(), field.end());
  const auto f = fft2(x, n0, n1);
  const double norm = 1.0 / static_cast<double>(n0 * n1);
  const auto shells = static_cast<std::size_t>(std::floor(std::hypot(n0 / 2.0, n1 / 2.0) + 0.5)) + 1;
  Spectrum s;
  s.energy.assign(shells, 0.0);
  s.count.assign(shells, 0);
  for (std::int64_t i = 0; i < n0; ++i)
    for (std::int64_t j = 0; j < n1; ++j) {
      const double k = std::hypot(static_cast<double>(wavenumber(i, n0)), static_cast<double>(wavenumber(j, n1)));
      const auto shell = static_cast<std::size_t>(std::floor(k + 0.5));
      s.energy[shell] += 0.5 * std::norm(f[static_cast<std::size_t>(i * n1 + j)] * norm);
      ++s.count[shell];
    }
  for (std::size_t i = 0; i < shells; ++i) {
    s.k.push_back(static_cast<double>(i));
    if (s.count[i] > 0) s.energy[i] /= static_cast<double>(s.count[i]);
  }
  return s;
}

std::vector<double> horizon_errors(const std::vector<float>& pred, const std::vector<float>& truth, std::int64_t frame_size,
                                   std::int64_t first, const std::vector<std::int64_t>& horizons) {
  std::vector<double> out;
  for (auto h : horizons) {
    if (h <= first || h * frame_size > static_cast<std::int64_t>(std::min(pred.size(), truth.size())))
      throw std::invalid_argument("horizon " + std::to_string(h) + " outside the rollout");
    const auto b = static_cast<std::ptrdiff_t>(first * frame_size), e = static_cast<std::ptrdiff_t>(h * frame_size);
    out.push_back(relative_mse(std::vector<float>(pred.begin() + b, pred.begin() + e),
                               std::vector<float>(truth.begin() + b, truth.begin() + e)));
  }
  return out;
}

void Report::write_csv(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.precision(10);
  os << "metric,value\n";
  for (const auto& [name, v] : rows) os << name << ',' << v << '\n';
}

void write_spectrum_csv(const Spectrum& s, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os.precision(12);
  os << "k,E\n";
  for (std::size_t i = 0; i < s.k.size(); ++i) os << s.k[i] << ',' << s.energy[i] << '\n';
}

}  // namespace echo
