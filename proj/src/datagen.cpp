#include "echo/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <numeric>
#include <sstream>

namespace echo {

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace {

constexpr double kTwoPi = 2 * std::numbers::pi;

std::size_t idx(std::int64_t i, std::int64_t j, std::int64_t n) {
  return static_cast<std::size_t>(((i + n) % n) * n + (j + n) % n);
}

}  // namespace

void GrayScottConfig::validate() const {
  if (n < 3) throw std::invalid_argument("grayscott grid must be at least 3 points per axis");
  if (!(delta_a > 0 && delta_b > 0 && dt > 0) || substeps < 1 || frames < 1)
    throw std::invalid_argument("grayscott coefficients, dt, substeps and frames must be positive");
  const double bound = 0.9 * spacing() * spacing() / (4 * std::max(delta_a, delta_b));
  if (dt > bound)
    throw std::invalid_argument("grayscott dt " + std::to_string(dt) + " exceeds stability bound " + std::to_string(bound));
}

void gray_scott_step(std::vector<double>& a, std::vector<double>& b, const GrayScottConfig& cfg) {
  const std::int64_t n = cfg.n;
  const double inv_h2 = 1.0 / (cfg.spacing() * cfg.spacing());
  std::vector<double> na(a.size()), nb(b.size());
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      const auto c = idx(i, j, n);
      const auto up = idx(i - 1, j, n), dn = idx(i + 1, j, n), lf = idx(i, j - 1, n), rt = idx(i, j + 1, n);
      const double lap_a = (a[up] + a[dn] + a[lf] + a[rt] - 4 * a[c]) * inv_h2;
      const double lap_b = (b[up] + b[dn] + b[lf] + b[rt] - 4 * b[c]) * inv_h2;
      const double abb = a[c] * b[c] * b[c];
      na[c] = a[c] + cfg.dt * (cfg.delta_a * lap_a - abb + cfg.f * (1 - a[c]));
      nb[c] = b[c] + cfg.dt * (cfg.delta_b * lap_b + abb - (cfg.f + cfg.k) * b[c]);
      if (!std::isfinite(na[c]) || !std::isfinite(nb[c])) throw NumericalError("grayscott step produced a non-finite value");
    }
  a.swap(na);
  b.swap(nb);
}

void gray_scott_init(std::vector<double>& a, std::vector<double>& b, const GrayScottConfig& cfg, Rng& rng) {
  const std::int64_t n = cfg.n;
  a.assign(static_cast<std::size_t>(n * n), 1.0);
  b.assign(static_cast<std::size_t>(n * n), 0.0);
  std::uniform_int_distribution<int> count(3, 8);
  std::uniform_int_distribution<std::int64_t> pos(0, n - 1);
  std::uniform_int_distribution<std::int64_t> size(std::max<std::int64_t>(2, n / 16), std::max<std::int64_t>(3, n / 8));
  const int seeds = count(rng);
  for (int s = 0; s < seeds; ++s) {
    const auto ci = pos(rng), cj = pos(rng), w = size(rng);
    for (std::int64_t i = ci; i < ci + w; ++i)
      for (std::int64_t j = cj; j < cj + w; ++j) {
        a[idx(i, j, n)] = 0.5;
        b[idx(i, j, n)] = 0.25;
      }
  }
  std::uniform_real_distribution<double> noise(-0.01, 0.01);
  for (auto& v : a) v += noise(rng);
  for (auto& v : b) v = std::max(0.0, v + noise(rng));
}

std::vector<double> gray_scott_trajectory(const GrayScottConfig& cfg, Rng& rng) {
  cfg.validate();
  std::vector<double> a, b;
  gray_scott_init(a, b, cfg, rng);
  const auto m = static_cast<std::size_t>(cfg.n * cfg.n);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(cfg.frames) * m * 2);
  for (int t = 0; t < cfg.frames; ++t) {
    if (t > 0)
      for (int s = 0; s < cfg.substeps; ++s) gray_scott_step(a, b, cfg);
    for (std::size_t p = 0; p < m; ++p) {
      out.push_back(a[p]);
      out.push_back(b[p]);
    }
  }
  return out;
}

void VorticityConfig::validate() const {
  if (!is_power_of_two(n) || n < 4) throw std::invalid_argument("vorticity grid extent must be a power of two >= 4");
  if (!(nu > 0)) throw std::invalid_argument("viscosity must be positive");
  if (!(dt > 0 && save_every > 0) || frames < 1) throw std::invalid_argument("vorticity dt, save_every and frames must be positive");
  const double ratio = save_every / dt;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) throw std::invalid_argument("save_every must be a multiple of dt");
  if (!(k0 > 0 && k0 < static_cast<double>(n) / 3)) throw std::invalid_argument("k0 must lie inside the dealiased band");
}

double vorticity_energy_spectrum(double k, double k0) {
  const double q = k / k0;
  return 4.0 / 3.0 * std::sqrt(std::numbers::pi) * q * q * q * q / k0 * std::exp(-q * q);
}

std::vector<Complex> vorticity_init_spectral(const VorticityConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::int64_t n = cfg.n;
  std::vector<Complex> w(static_cast<std::size_t>(n * n));
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) {
      const auto kx = wavenumber(i, n), ky = wavenumber(j, n);
      // One representative per conjugate pair; the partner is filled below.
      const bool upper = kx > 0 || (kx == 0 && ky > 0);
      if (!upper || kx == n / 2 || ky == n / 2 || kx == -n / 2 || ky == -n / 2) continue;
      const double k = std::hypot(static_cast<double>(kx), static_cast<double>(ky));
      const double mag = std::sqrt(vorticity_energy_spectrum(k, cfg.k0) / (std::numbers::pi * k));
      const Complex c = std::polar(mag, phase(rng));
      w[idx(i, j, n)] = c;
      w[idx(-kx, -ky, n)] = std::conj(c);
    }
  return w;
}

std::vector<double> vorticity_init(const VorticityConfig& cfg, Rng& rng) {
  const std::int64_t n = cfg.n;
  auto w = vorticity_init_spectral(cfg, rng);
  for (auto& c : w) c *= static_cast<double>(n * n);
  const auto x = ifft2(w, n, n);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i].real();
  return out;
}

namespace {

struct SpectralOps {
  std::int64_t n;
  std::vector<double> kx, ky, k2, dealias;

  explicit SpectralOps(std::int64_t n_) : n(n_) {
    const auto m = static_cast<std::size_t>(n * n);
    kx.resize(m);
    ky.resize(m);
    k2.resize(m);
    dealias.resize(m);
    for (std::int64_t i = 0; i < n; ++i)
      for (std::int64_t j = 0; j < n; ++j) {
        const auto p = idx(i, j, n);
        kx[p] = kTwoPi * static_cast<double>(wavenumber(i, n));
        ky[p] = kTwoPi * static_cast<double>(wavenumber(j, n));
        k2[p] = kx[p] * kx[p] + ky[p] * ky[p];
        const bool keep = 3 * std::abs(wavenumber(i, n)) < n && 3 * std::abs(wavenumber(j, n)) < n;
        dealias[p] = keep ? 1.0 : 0.0;
      }
  }

  /// −FFT(u·∇ω) with dealiasing; also reports max |u|.
  std::vector<Complex> advection(const std::vector<Complex>& w, double* umax) const {
    const auto m = w.size();
    std::vector<Complex> u(m), v(m), wx(m), wy(m);
    const Complex I(0, 1);
    for (std::size_t p = 0; p < m; ++p) {
      const Complex psi = k2[p] > 0 ? w[p] / k2[p] : Complex(0);
      u[p] = I * ky[p] * psi;
      v[p] = -I * kx[p] * psi;
      wx[p] = I * kx[p] * w[p];
      wy[p] = I * ky[p] * w[p];
    }
    u = ifft2(u, n, n);
    v = ifft2(v, n, n);
    wx = ifft2(wx, n, n);
    wy = ifft2(wy, n, n);
    std::vector<Complex> nl(m);
    double um = 0;
    for (std::size_t p = 0; p < m; ++p) {
      nl[p] = u[p].real() * wx[p].real() + v[p].real() * wy[p].real();
      um = std::max(um, std::hypot(u[p].real(), v[p].real()));
    }
    if (umax) *umax = um;
    nl = fft2(nl, n, n);
    for (std::size_t p = 0; p < m; ++p) nl[p] *= -dealias[p];
    return nl;
  }
};

}  // namespace

double vorticity_step(std::vector<double>& omega, const VorticityConfig& cfg) {
  const std::int64_t n = cfg.n;
  if (static_cast<std::int64_t>(omega.size()) != n * n) throw std::invalid_argument("vorticity field size does not match grid");
  static thread_local std::unique_ptr<SpectralOps> ops;
  if (!ops || ops->n != n) ops = std::make_unique<SpectralOps>(n);
  std::vector<Complex> w(omega.begin(), omega.end());
  w = fft2(w, n, n);
  double umax = 0;
  const auto n0 = ops->advection(w, &umax);
  std::vector<Complex> w1(w.size());
  std::vector<double> decay(w.size());
  for (std::size_t p = 0; p < w.size(); ++p) {
    decay[p] = std::exp(-cfg.nu * ops->k2[p] * cfg.dt);
    w1[p] = decay[p] * (w[p] + cfg.dt * n0[p]);
  }
  const auto n1 = ops->advection(w1, nullptr);
  for (std::size_t p = 0; p < w.size(); ++p) w[p] = decay[p] * (w[p] + 0.5 * cfg.dt * n0[p]) + 0.5 * cfg.dt * n1[p];
  const auto x = ifft2(w, n, n);
  for (std::size_t p = 0; p < x.size(); ++p) {
    omega[p] = x[p].real();
    if (!std::isfinite(omega[p])) throw NumericalError("vorticity step produced a non-finite value");
  }
  return umax * cfg.dt * static_cast<double>(n);
}

std::vector<double> vorticity_trajectory(const VorticityConfig& cfg, Rng& rng) {
  auto w = vorticity_init(cfg, rng);
  const auto per_frame = static_cast<int>(std::lround(cfg.save_every / cfg.dt));
  std::vector<double> out;
  out.reserve(w.size() * static_cast<std::size_t>(cfg.frames));
  for (int t = 0; t < cfg.frames; ++t) {
    if (t > 0)
      for (int s = 0; s < per_frame; ++s)
        if (vorticity_step(w, cfg) > 1.0) throw NumericalError("vorticity CFL number exceeds 1; reduce dt");
    out.insert(out.end(), w.begin(), w.end());
  }
  return out;
}

PointSet Trajectory::points() const {
  return PointSet(static_cast<int>(dim), std::vector<double>(coords.begin(), coords.end()));
}

Trajectory Trajectory::frames(std::int64_t start, std::int64_t count) const {
  if (start < 0 || count < 1 || start + count > n_frames) throw std::out_of_range("trajectory frame range out of bounds");
  Trajectory t = *this;
  t.n_frames = static_cast<std::uint32_t>(count);
  const auto stride = static_cast<std::int64_t>(n_points) * n_channels;
  t.values.assign(values.begin() + start * stride, values.begin() + (start + count) * stride);
  return t;
}

Trajectory Trajectory::select_points(const std::vector<std::int64_t>& ids) const {
  Trajectory t = *this;
  t.n_points = static_cast<std::uint32_t>(ids.size());
  t.coords.clear();
  t.values.clear();
  for (auto id : ids)
    for (std::uint32_t a = 0; a < dim; ++a) t.coords.push_back(coords[static_cast<std::size_t>(id * dim + a)]);
  for (std::int64_t f = 0; f < n_frames; ++f)
    for (auto id : ids)
      for (std::uint32_t c = 0; c < n_channels; ++c) t.values.push_back(at(f, id, c));
  return t;
}

void Trajectory::check() const {
  if (dim < 1 || dim > 2) throw DataError("trajectory dimension must be 1 or 2");
  if (coords.size() != static_cast<std::size_t>(n_points) * dim) throw DataError("trajectory coords do not match header");
  if (values.size() != static_cast<std::size_t>(n_frames) * n_points * n_channels)
    throw DataError("trajectory values do not match header");
  if (params.size() != param_names.size()) throw DataError("trajectory parameter names do not match values");
}

Trajectory grid_trajectory(std::int64_t n, std::int64_t channels, const std::vector<double>& values) {
  Trajectory t;
  t.dim = 2;
  t.n_points = static_cast<std::uint32_t>(n * n);
  t.n_channels = static_cast<std::uint32_t>(channels);
  t.n_frames = static_cast<std::uint32_t>(values.size() / static_cast<std::size_t>(n * n * channels));
  const auto nodes = RegularGrid({n, n}).nodes();
  t.coords.assign(nodes.coords.begin(), nodes.coords.end());
  t.values.assign(values.begin(), values.end());
  t.check();
  return t;
}

namespace {

template <typename V>
void put(std::ostream& os, const V& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <typename V>
void put_array(std::ostream& os, const std::vector<V>& v) {
  os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(V)));
}

template <typename V>
V get(std::istream& is) {
  V v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(V))) throw DataError("unexpected end of file");
  return v;
}

template <typename V>
std::vector<V> get_array(std::istream& is, std::size_t n) {
  std::vector<V> v(n);
  if (!is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(V))))
    throw DataError("unexpected end of file");
  return v;
}

}  // namespace

void save_trajectory(const Trajectory& t, const std::filesystem::path& path) {
  t.check();
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw DataError("cannot write " + tmp.string());
    os.write("ECHT", 4);
    put(os, std::uint32_t{1});
    for (auto v : {t.dim, t.n_points, t.n_frames, t.n_channels, static_cast<std::uint32_t>(t.params.size())}) put(os, v);
    put_array(os, t.coords);
    put_array(os, t.values);
    put_array(os, t.params);
    for (const auto& s : t.param_names) {
      put(os, static_cast<std::uint32_t>(s.size()));
      os.write(s.data(), static_cast<std::streamsize>(s.size()));
    }
    if (!os) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Trajectory load_trajectory(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  char magic[4];
  if (!is.read(magic, 4) || std::string(magic, 4) != "ECHT") throw DataError(path.string() + " is not a trajectory file");
  if (get<std::uint32_t>(is) != 1) throw DataError(path.string() + ": unsupported trajectory version");
  Trajectory t;
  t.dim = get<std::uint32_t>(is);
  t.n_points = get<std::uint32_t>(is);
  t.n_frames = get<std::uint32_t>(is);
  t.n_channels = get<std::uint32_t>(is);
  const auto n_params = get<std::uint32_t>(is);
  t.coords = get_array<float>(is, static_cast<std::size_t>(t.n_points) * t.dim);
  t.values = get_array<float>(is, static_cast<std::size_t>(t.n_frames) * t.n_points * t.n_channels);
  t.params = get_array<double>(is, n_params);
  for (std::uint32_t i = 0; i < n_params; ++i) {
    const auto len = get<std::uint32_t>(is);
    std::string s(len, '\0');
    if (!is.read(s.data(), len)) throw DataError("unexpected end of file");
    t.param_names.push_back(std::move(s));
  }
  if (is.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes after payload");
  t.check();
  return t;
}

std::vector<std::int64_t> subsample_points(std::int64_t n_points, double fraction, Rng& rng) {
  if (n_points < 1 || !(fraction > 0 && fraction <= 1)) throw std::invalid_argument("subsample fraction must lie in (0, 1]");
  const auto m = std::clamp<std::int64_t>(std::llround(fraction * static_cast<double>(n_points)), 1, n_points);
  std::vector<std::int64_t> ids(static_cast<std::size_t>(n_points));
  std::iota(ids.begin(), ids.end(), 0);
  for (std::int64_t i = 0; i < m; ++i) {
    std::uniform_int_distribution<std::int64_t> pick(i, n_points - 1);
    std::swap(ids[static_cast<std::size_t>(i)], ids[static_cast<std::size_t>(pick(rng))]);
  }
  ids.resize(static_cast<std::size_t>(m));
  std::sort(ids.begin(), ids.end());
  return ids;
}

DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "grayscott") return DatasetKind::grayscott;
  if (s == "vorticity") return DatasetKind::vorticity;
  throw std::invalid_argument("unknown dataset kind '" + s + "' (expected grayscott or vorticity)");
}

std::string to_string(DatasetKind k) { return k == DatasetKind::grayscott ? "grayscott" : "vorticity"; }

Trajectory generate_trajectory(const DatasetOptions& opt, const std::string& split, std::int64_t index) {
  auto rng = make_rng(opt.seed, to_string(opt.kind) + "/" + split + "/" + std::to_string(index));
  if (opt.kind == DatasetKind::grayscott) {
    auto cfg = opt.grayscott;
    cfg.f = std::uniform_real_distribution<double>(0.02, 0.06)(rng);
    cfg.k = std::uniform_real_distribution<double>(0.05, 0.07)(rng);
    auto t = grid_trajectory(cfg.n, 2, gray_scott_trajectory(cfg, rng));
    t.params = {cfg.f, cfg.k};
    t.param_names = {"f", "k"};
    return t;
  }
  auto cfg = opt.vorticity;
  const double lo = std::log(opt.nu_min), hi = std::log(opt.nu_max);
  cfg.nu = std::exp(std::uniform_real_distribution<double>(std::min(lo, hi), std::max(lo, hi))(rng));
  auto t = grid_trajectory(cfg.n, 1, vorticity_trajectory(cfg, rng));
  t.params = {cfg.nu};
  t.param_names = {"nu"};
  return t;
}

void generate_dataset(const DatasetOptions& opt, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ostringstream manifest;
  manifest << "split,file,seed,index,kind,params\n";
  for (const auto& [split, count] : {std::pair<std::string, std::int64_t>{"train", opt.n_train}, {"test", opt.n_test}})
    for (std::int64_t i = 0; i < count; ++i) {
      auto t = generate_trajectory(opt, split, i);
      char name[64];
      std::snprintf(name, sizeof name, "%s_%04lld.echt", split.c_str(), static_cast<long long>(i));
      save_trajectory(t, dir / name);
      manifest << split << ',' << name << ',' << opt.seed << ',' << i << ',' << to_string(opt.kind) << ',';
      for (std::size_t p = 0; p < t.params.size(); ++p) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", t.params[p]);
        manifest << (p ? ";" : "") << t.param_names[p] << '=' << buf;
      }
      manifest << '\n';
    }
  const auto tmp = dir / "manifest.csv.tmp";
  {
    std::ofstream os(tmp);
    os << manifest.str();
    if (!os) throw DataError("cannot write manifest in " + dir.string());
  }
  std::filesystem::rename(tmp, dir / "manifest.csv");
}

std::vector<std::filesystem::path> dataset_files(const std::filesystem::path& dir, const std::string& split) {
  std::ifstream is(dir / "manifest.csv");
  if (!is) throw DataError("no manifest.csv in " + dir.string());
  std::vector<std::filesystem::path> out;
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string s, file;
    std::getline(ls, s, ',');
    std::getline(ls, file, ',');
    if (s == split) out.push_back(dir / file);
  }
  return out;
}

}  // namespace echo
