#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "echo/datagen.hpp"
#include "echo/metrics.hpp"
#include "oracles.hpp"

using namespace echo;

namespace {

std::vector<double> random_field(std::int64_t n, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> x(static_cast<std::size_t>(n * n));
  for (auto& v : x) v = u(rng);
  return x;
}

double rel_l2(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num / den);
}

std::filesystem::path temp_dir(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("echo_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Fft, RoundTripAndParseval) {
  Rng rng(1);
  for (std::int64_t n : {4, 16, 64}) {
    std::vector<Complex> x(static_cast<std::size_t>(n * n));
    std::normal_distribution<double> g;
    for (auto& v : x) v = Complex(g(rng), g(rng));
    const auto f = fft2(x, n, n);
    const auto y = ifft2(f, n, n);
    double err = 0, nx = 0, nf = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      err += std::norm(y[i] - x[i]);
      nx += std::norm(x[i]);
      nf += std::norm(f[i]);
    }
    EXPECT_LT(std::sqrt(err / nx), 1e-12);
    EXPECT_NEAR(nf / static_cast<double>(n * n), nx, 1e-10 * nx);
  }
}

TEST(Fft, MatchesDirectDft) {
  Rng rng(2);
  std::normal_distribution<double> g;
  std::vector<Complex> x(32);
  for (auto& v : x) v = Complex(g(rng), g(rng));
  auto f = x;
  fft(f, false);
  for (int k = 0; k < 32; ++k) {
    Complex s = 0;
    for (int j = 0; j < 32; ++j) s += x[static_cast<std::size_t>(j)] * std::polar(1.0, -2 * std::numbers::pi * j * k / 32);
    EXPECT_LT(std::abs(s - f[static_cast<std::size_t>(k)]), 1e-11);
  }
  std::vector<Complex> bad(12);
  EXPECT_THROW(fft(bad, false), std::invalid_argument);
}

TEST(GrayScott, HomogeneousSteadyState) {
  GrayScottConfig cfg;
  cfg.n = 16;
  std::vector<double> a(256, 1.0), b(256, 0.0);
  gray_scott_step(a, b, cfg);
  EXPECT_TRUE(std::all_of(a.begin(), a.end(), [](double v) { return v == 1.0; }));
  EXPECT_TRUE(std::all_of(b.begin(), b.end(), [](double v) { return v == 0.0; }));
}

TEST(GrayScott, PureDiffusionConservesMass) {
  Rng rng(3);
  GrayScottConfig cfg;
  cfg.n = 32;
  cfg.f = cfg.k = 0.0;
  auto a = random_field(32, rng, 0.0, 1.0);
  std::vector<double> b(a.size(), 0.0);
  const double before = std::accumulate(a.begin(), a.end(), 0.0);
  for (int s = 0; s < 10; ++s) gray_scott_step(a, b, cfg);
  EXPECT_NEAR(std::accumulate(a.begin(), a.end(), 0.0), before, 1e-12 * before);
}

TEST(GrayScott, MatchesLoopOracle) {
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(static_cast<std::uint64_t>(100 + seed));
    GrayScottConfig cfg;
    cfg.n = 24;
    cfg.f = 0.02 + 0.002 * seed;
    cfg.k = 0.05 + 0.001 * seed;
    auto a = random_field(cfg.n, rng, 0.0, 1.0), b = random_field(cfg.n, rng, 0.0, 0.5);
    auto oa = a, ob = b;
    gray_scott_step(a, b, cfg);
    oracle::gray_scott_step(oa, ob, cfg.n, cfg.spacing(), cfg.delta_a, cfg.delta_b, cfg.f, cfg.k, cfg.dt);
    for (std::size_t i = 0; i < a.size(); ++i) {
      EXPECT_NEAR(a[i], oa[i], 1e-12 * std::max(1.0, std::abs(oa[i])));
      EXPECT_NEAR(b[i], ob[i], 1e-12 * std::max(1.0, std::abs(ob[i])));
    }
  }
}

TEST(GrayScott, StabilityBoundIsValidated) {
  GrayScottConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.dt = 2.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(GrayScott, FieldsStayBoundedInPatternRegime) {
  DatasetOptions opt;
  for (int i = 0; i < 6; ++i) {
    const auto t = generate_trajectory(opt, "train", i);
    EXPECT_EQ(t.n_frames, 40u);
    const auto [lo, hi] = std::minmax_element(t.values.begin(), t.values.end());
    EXPECT_GE(*lo, -0.1f);
    EXPECT_LE(*hi, 1.5f);
  }
}

TEST(GrayScott, GenerationIsReproducible) {
  DatasetOptions opt;
  opt.seed = 9;
  EXPECT_EQ(generate_trajectory(opt, "test", 3), generate_trajectory(opt, "test", 3));
  EXPECT_NE(generate_trajectory(opt, "test", 3).values, generate_trajectory(opt, "test", 4).values);
}

TEST(Vorticity, InitialFieldIsRealAndZeroMean) {
  VorticityConfig cfg;
  Rng rng(4);
  auto w = vorticity_init_spectral(cfg, rng);
  EXPECT_EQ(w[0], Complex(0));
  for (auto& c : w) c *= static_cast<double>(cfg.n * cfg.n);
  const auto x = ifft2(w, cfg.n, cfg.n);
  double re = 0, im = 0, mean = 0;
  for (auto& c : x) {
    re += c.real() * c.real();
    im += c.imag() * c.imag();
    mean += c.real();
  }
  EXPECT_LT(std::sqrt(im / re), 1e-12);
  EXPECT_LT(std::abs(mean / static_cast<double>(x.size())), 1e-12 * std::sqrt(re));
}

TEST(Vorticity, SpectrumPeaksAtSqrt2K0AndMatchesTarget) {
  VorticityConfig cfg;
  const auto shells = energy_spectrum(std::vector<double>(static_cast<std::size_t>(cfg.n * cfg.n), 0.0), cfg.n, cfg.n).k.size();
  std::vector<double> avg(shells, 0.0);
  for (int seed = 0; seed < 32; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const auto s = energy_spectrum(vorticity_init(cfg, rng), cfg.n, cfg.n);
    // Isotropic spectrum: shell-mean mode energy times the shell circumference.
    for (std::size_t k = 0; k < shells; ++k) avg[k] += 2 * std::numbers::pi * s.k[k] * s.energy[k] / 32;
  }
  const auto peak = std::max_element(avg.begin(), avg.end()) - avg.begin();
  EXPECT_LE(std::abs(static_cast<double>(peak) - std::sqrt(2.0) * cfg.k0), 1.0 + 0.5) << peak;
  for (int k = 4; k <= 16; ++k)
    EXPECT_NEAR(avg[static_cast<std::size_t>(k)], vorticity_energy_spectrum(k, cfg.k0), 0.1 * vorticity_energy_spectrum(k, cfg.k0))
        << "k=" << k;
}

TEST(Vorticity, ZeroFieldStaysZero) {
  VorticityConfig cfg;
  cfg.n = 16;
  cfg.k0 = 2;
  std::vector<double> w(256, 0.0);
  vorticity_step(w, cfg);
  EXPECT_TRUE(std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; }));
}

TEST(Vorticity, SingleModeDecaysViscously) {
  VorticityConfig cfg;
  cfg.nu = 3e-3;
  const std::int64_t n = cfg.n;
  std::vector<double> w(static_cast<std::size_t>(n * n));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) w[static_cast<std::size_t>(i * n + j)] = std::cos(2 * std::numbers::pi * (i + 0.5) / n);
  const auto w0 = w;
  const int steps = 100;
  for (int s = 0; s < steps; ++s) vorticity_step(w, cfg);
  const double decay = std::exp(-cfg.nu * 4 * std::numbers::pi * std::numbers::pi * steps * cfg.dt);
  for (std::size_t p = 0; p < w.size(); ++p) EXPECT_NEAR(w[p], decay * w0[p], 1e-10);
}

TEST(Vorticity, EnstrophyDoesNotGrow) {
  VorticityConfig cfg;
  cfg.n = 32;
  cfg.k0 = 4;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    cfg.nu = 1e-3 * (1 + seed % 10);
    auto w = vorticity_init(cfg, rng);
    double before = 0, after = 0;
    for (double v : w) before += v * v;
    vorticity_step(w, cfg);
    for (double v : w) after += v * v;
    EXPECT_LE(after, before) << "seed " << seed;
  }
}

TEST(Vorticity, HalvingDtConverges) {
  VorticityConfig cfg;
  cfg.nu = 1e-3;
  Rng rng(5);
  const auto w0 = vorticity_init(cfg, rng);
  auto run = [&](double dt) {
    auto c = cfg;
    c.dt = dt;
    auto w = w0;
    for (int s = 0; s < static_cast<int>(std::lround(2.0 / dt)); ++s) vorticity_step(w, c);
    return w;
  };
  EXPECT_LT(rel_l2(run(0.02), run(0.01)), 0.01);
}

TEST(Vorticity, ConfigValidation) {
  VorticityConfig cfg;
  cfg.n = 48;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg.n = 64;
  cfg.nu = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(TrajectoryFile, RoundTripIsBitExact) {
  const auto dir = temp_dir("traj");
  Rng rng(6);
  Trajectory t;
  t.n_points = 37;
  t.n_frames = 3;
  t.n_channels = 2;
  for (int i = 0; i < 74; ++i) t.coords.push_back(static_cast<float>(uniform01(rng)));
  for (int i = 0; i < 3 * 37 * 2; ++i) t.values.push_back(static_cast<float>(uniform01(rng) - 0.5));
  t.params = {0.1, 1e-300};
  t.param_names = {"f", "κ"};
  save_trajectory(t, dir / "a.echt");
  EXPECT_EQ(load_trajectory(dir / "a.echt"), t);
  EXPECT_FALSE(std::filesystem::exists(dir / "a.echt.tmp"));
  std::filesystem::remove_all(dir);
}

TEST(TrajectoryFile, RejectsCorruptFiles) {
  const auto dir = temp_dir("corrupt");
  {
    std::ofstream(dir / "bad.echt") << "NOPE";
  }
  EXPECT_THROW(load_trajectory(dir / "bad.echt"), DataError);
  auto t = grid_trajectory(4, 1, std::vector<double>(32, 1.0));
  save_trajectory(t, dir / "ok.echt");
  std::filesystem::resize_file(dir / "ok.echt", std::filesystem::file_size(dir / "ok.echt") - 5);
  EXPECT_THROW(load_trajectory(dir / "ok.echt"), DataError);
  EXPECT_THROW(load_trajectory(dir / "missing.echt"), DataError);
  std::filesystem::remove_all(dir);
}

TEST(Subsample, UniformSubsetWithoutReplacement) {
  Rng rng(7);
  auto ids = subsample_points(4096, 0.2, rng);
  EXPECT_EQ(ids.size(), 819u);
  EXPECT_TRUE(std::is_sorted(ids.begin(), ids.end()));
  EXPECT_EQ(std::adjacent_find(ids.begin(), ids.end()), ids.end());
  EXPECT_NE(ids, subsample_points(4096, 0.2, rng));
  EXPECT_EQ(subsample_points(10, 0.01, rng).size(), 1u);
  EXPECT_THROW(subsample_points(10, 0.0, rng), std::invalid_argument);
  std::vector<int> hits(100, 0);
  for (int k = 0; k < 4000; ++k)
    for (auto id : subsample_points(100, 0.25, rng)) ++hits[static_cast<std::size_t>(id)];
  for (int h : hits) EXPECT_NEAR(h / 4000.0, 0.25, 0.04);
}

TEST(Dataset, ManifestListsReproducibleFiles) {
  const auto d1 = temp_dir("ds1"), d2 = temp_dir("ds2");
  DatasetOptions opt;
  opt.n_train = 2;
  opt.n_test = 1;
  opt.seed = 11;
  opt.grayscott.n = 16;
  opt.grayscott.frames = 3;
  generate_dataset(opt, d1);
  generate_dataset(opt, d2);
  const auto train = dataset_files(d1, "train");
  ASSERT_EQ(train.size(), 2u);
  ASSERT_EQ(dataset_files(d1, "test").size(), 1u);
  for (const auto& f : train) EXPECT_EQ(load_trajectory(f), load_trajectory(d2 / f.filename()));
  EXPECT_EQ(load_trajectory(train[0]).param_names, (std::vector<std::string>{"f", "k"}));
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}
