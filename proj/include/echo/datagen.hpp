#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "echo/fft.hpp"
#include "echo/geometry.hpp"
#include "echo/rng.hpp"

namespace echo {

/// Thrown on malformed or unreadable data files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reaction-diffusion on a periodic n × n grid of the unit square.
struct GrayScottConfig {
  std::int64_t n = 64;
  double delta_a = 5e-5;
  double delta_b = 2.5e-5;
  double f = 0.04;
  double k = 0.06;
  double dt = 1.0;
  int substeps = 20;  // solver steps per saved frame
  int frames = 40;

  double spacing() const { return 1.0 / static_cast<double>(n); }
  /// Throws std::invalid_argument when dt breaks the explicit-scheme bound.
  void validate() const;
};

/// Explicit Euler step with a 5-point periodic Laplacian; fields are row-major
/// n × n (axis 0 outer). Throws NumericalError on non-finite output.
void gray_scott_step(std::vector<double>& a, std::vector<double>& b, const GrayScottConfig& cfg);

/// A ≡ 1, B ≡ 0 with a few random square seeds (A = 0.5, B = 0.25) and small noise.
void gray_scott_init(std::vector<double>& a, std::vector<double>& b, const GrayScottConfig& cfg, Rng& rng);

/// Saved frames [frames × n² × 2] (channels A, B), frame 0 = initial state.
std::vector<double> gray_scott_trajectory(const GrayScottConfig& cfg, Rng& rng);

/// Decaying 2D turbulence on a periodic n × n grid of the unit square.
struct VorticityConfig {
  std::int64_t n = 64;
  double nu = 1e-3;
  double k0 = 8.0;
  double dt = 0.01;
  double save_every = 0.5;
  int frames = 20;

  void validate() const;
};

/// E(k) = (4/3)√π (k/k0)⁴ (1/k0) exp(−(k/k0)²).
double vorticity_energy_spectrum(double k, double k0);

/// Fourier modes of magnitude √(E(|k|)/(π|k|)) with uniform random phases,
/// Hermitian-symmetric, zero mean and zero Nyquist modes. Coefficients use
/// ω(x) = Σ_k ω̂_k e^{2πik·x}, i.e. ω̂ = fft2(ω)/n².
std::vector<Complex> vorticity_init_spectral(const VorticityConfig& cfg, Rng& rng);
std::vector<double> vorticity_init(const VorticityConfig& cfg, Rng& rng);

/// One pseudo-spectral RK2 step with an integrating factor for viscosity and
/// 2/3-rule dealiasing. Returns the CFL number max|u|·dt/h of the input state.
double vorticity_step(std::vector<double>& omega, const VorticityConfig& cfg);

/// Saved frames [frames × n²] every `save_every` time units, frame 0 = ω₀.
std::vector<double> vorticity_trajectory(const VorticityConfig& cfg, Rng& rng);

/// Trajectory container shared by regular and irregular data.
struct Trajectory {
  std::uint32_t dim = 2;
  std::uint32_t n_points = 0;
  std::uint32_t n_frames = 0;
  std::uint32_t n_channels = 0;
  std::vector<float> coords;  // [n_points × dim]
  std::vector<float> values;  // [n_frames × n_points × n_channels]
  std::vector<double> params;
  std::vector<std::string> param_names;

  PointSet points() const;
  float at(std::int64_t frame, std::int64_t point, std::int64_t channel) const {
    return values[static_cast<std::size_t>((frame * n_points + point) * n_channels + channel)];
  }
  /// Frames [start, start + count) as a new trajectory.
  Trajectory frames(std::int64_t start, std::int64_t count) const;
  /// The given points of every frame.
  Trajectory select_points(const std::vector<std::int64_t>& ids) const;
  void check() const;
  bool operator==(const Trajectory&) const = default;
};

/// Regular-grid trajectory: grid nodes as coords, values [frames × n² × C].
Trajectory grid_trajectory(std::int64_t n, std::int64_t channels, const std::vector<double>& values);

/// Binary "ECHT" format; writes to a temporary file and renames it into place.
void save_trajectory(const Trajectory& t, const std::filesystem::path& path);
Trajectory load_trajectory(const std::filesystem::path& path);

/// Uniform subset of round(fraction·n) point ids (at least one), sorted,
/// without replacement.
std::vector<std::int64_t> subsample_points(std::int64_t n_points, double fraction, Rng& rng);

enum class DatasetKind { grayscott, vorticity };
DatasetKind parse_dataset_kind(const std::string& s);
std::string to_string(DatasetKind k);

struct DatasetOptions {
  DatasetKind kind = DatasetKind::grayscott;
  std::int64_t n_train = 200;
  std::int64_t n_test = 20;
  std::uint64_t seed = 0;
  GrayScottConfig grayscott;
  VorticityConfig vorticity;
  double nu_min = 1e-3;  // ν ~ log-uniform [nu_min, nu_max]
  double nu_max = 1e-2;
};

/// Trajectory `index` of a split, reproducible from (seed, split, index).
Trajectory generate_trajectory(const DatasetOptions& opt, const std::string& split, std::int64_t index);

/// Writes train_NNNN.echt / test_NNNN.echt and manifest.csv into `dir`.
void generate_dataset(const DatasetOptions& opt, const std::filesystem::path& dir);

/// Files of one split listed in `dir`/manifest.csv, in order.
std::vector<std::filesystem::path> dataset_files(const std::filesystem::path& dir, const std::string& split);

}  // namespace echo
