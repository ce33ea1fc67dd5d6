#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace echo {

/// ‖pred − truth‖₂ / ‖truth‖₂ over every entry. Throws std::invalid_argument
/// on size mismatch or a zero-norm truth.
double relative_mse(const std::vector<double>& pred, const std::vector<double>& truth);
double relative_mse(const std::vector<float>& pred, const std::vector<float>& truth);

/// Shell-averaged spectrum of a real field on an n0 × n1 periodic grid.
/// Mode energy is ½|û_k|² with û = fft2(u)/(n0·n1); shell s collects modes
/// with s − ½ ≤ |k| < s + ½ (⌊|k| + ½⌋ = s).
struct Spectrum {
  std::vector<double> k;      // shell index
  std::vector<double> energy; // mean mode energy in the shell
  std::vector<std::int64_t> count;

  /// Σ count·energy, the total energy ½·Σ|u|²/(n0·n1).
  double total() const;
};

Spectrum energy_spectrum(const std::vector<double>& field, std::int64_t n0, std::int64_t n1);

/// Errors of a rollout at horizons (frame counts). Entry h is the relative MSE
/// over frames [first, h) of `pred` against `truth` (frame-major, `frame_size`
/// values per frame).
std::vector<double> horizon_errors(const std::vector<float>& pred, const std::vector<float>& truth, std::int64_t frame_size,
                                   std::int64_t first, const std::vector<std::int64_t>& horizons);

/// Rows of (metric, value), written as "metric,value" CSV.
struct Report {
  std::vector<std::pair<std::string, double>> rows;
  void add(std::string name, double value) { rows.emplace_back(std::move(name), value); }
  void write_csv(const std::filesystem::path& path) const;
};

void write_spectrum_csv(const Spectrum& s, const std::filesystem::path& path);

}  // namespace echo
