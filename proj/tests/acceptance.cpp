// Acceptance gate: runs every acceptance criterion and prints one PASS/FAIL
// line per criterion. ECHO_ACCEPT_ONLY=1,2,... restricts the run;
// ECHO_ACCEPT_DIR sets the work directory for the desk-scale run (trained
// checkpoints there are reused when their config matches).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>

#include "echo/checkpoint.hpp"
#include "echo/cli.hpp"
#include "echo/metrics.hpp"
#include "echo/pipeline.hpp"
#include "grad_check.hpp"
#include "oracles.hpp"

using namespace echo;
namespace fs = std::filesystem;
using echo::testing::check_gradients;
using echo::testing::project;
using echo::testing::random_input;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

template <typename T>
void randomize(ParamStore<T>& store, Rng& rng, double stddev) {
  for (auto [name, v] : store.entries())
    for (auto& x : v.mutable_value().values()) x += static_cast<T>(std::normal_distribution<double>(0.0, stddev)(rng));
}

PointSet random_points(std::int64_t n, Rng& rng) {
  std::vector<double> c(static_cast<std::size_t>(2 * n));
  for (auto& v : c) v = uniform01(rng);
  return PointSet(2, std::move(c));
}

// Largest |a − b| / max(1, |b|) over all elements.
double max_rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]) / std::max(1.0, std::abs(b[i])));
  return m;
}

// ---------------------------------------------------------------------------
// 1. Oracle equivalence

Outcome oracle_equivalence() {
  const int instances = 20;
  double cc = 0, space = 0, time = 0, rmse = 0, gs = 0;
  for (int seed = 0; seed < instances; ++seed) {
    Rng rng(static_cast<std::uint64_t>(1000 + seed));
    {
      ParamStore<double> store;
      ContConvConfig cfg;
      cfg.in_channels = 2;
      cfg.out_channels = 3;
      cfg.kernel_hidden = 8;
      cfg.radius = 0.3;
      cfg.max_neighbors = 0;
      cfg.normalize = ConvNormalize::none;
      ContConv<double> layer(store, "c", cfg, rng);
      auto pts = random_points(30, rng);
      auto f = randn<double>(Shape{30, 2}, rng);
      RegularGrid grid({4, 5});
      auto out = encode_points_to_grid(layer, constant(f), pts, grid).value().to_vector();
      auto ref = oracle::contconv(pts.coords, f.to_vector(), 2, grid.nodes().coords, 3, 2, cfg.radius, false,
                                  [&](const std::vector<double>& o) {
                                    return oracle::mlp(store, "c.kernel", {o[0] / cfg.radius, o[1] / cfg.radius});
                                  });
      cc = std::max(cc, max_rel_diff(out, ref));
    }
    {
      auto x = randn<double>(Shape{3, 6, 7, 3}, rng);
      auto w = randn<double>(Shape{1, 3, 3, 3, 4}, rng);
      const auto g = compress_space_geometry({3, 6, 7}, 3);
      auto y = conv3d(constant(x), constant(w), Var<double>(), g).value().to_vector();
      space = std::max(space, max_rel_diff(y, oracle::conv3d(x, w, g).to_vector()));
    }
    {
      const std::int64_t frames = 1 + seed % 11;
      auto x = randn<double>(Shape{frames, 2, 3, 2}, rng);
      auto w = randn<double>(Shape{3, 1, 1, 2, 3}, rng);
      auto y = conv3d(constant(x), constant(w), Var<double>(), compress_time_geometry(3)).value().to_vector();
      // Causal stride-2 convolution: two zero frames in front, output j reads frames 2j−2..2j.
      std::vector<double> ref(static_cast<std::size_t>((frames + 1) / 2 * 6 * 3), 0.0);
      for (std::int64_t j = 0; j < (frames + 1) / 2; ++j)
        for (std::int64_t s = 0; s < 6; ++s)
          for (std::int64_t o = 0; o < 3; ++o) {
            double acc = 0;
            for (std::int64_t a = 0; a < 3; ++a) {
              const std::int64_t t = 2 * j + a - 2;
              if (t < 0) continue;
              for (std::int64_t i = 0; i < 2; ++i) acc += x[(t * 6 + s) * 2 + i] * w[(a * 2 + i) * 3 + o];
            }
            ref[static_cast<std::size_t>((j * 6 + s) * 3 + o)] = acc;
          }
      time = std::max(time, max_rel_diff(y, ref));
    }
    {
      std::vector<double> p(200), t(200);
      for (auto& v : p) v = std::normal_distribution<double>()(rng);
      for (auto& v : t) v = std::normal_distribution<double>()(rng);
      const double a = relative_mse(p, t), b = oracle::relative_mse(p, t);
      rmse = std::max(rmse, std::abs(a - b) / std::max(1.0, std::abs(b)));
    }
    {
      GrayScottConfig cfg;
      cfg.n = 32;
      cfg.f = 0.02 + 0.002 * seed;
      cfg.k = 0.05 + 0.001 * seed;
      std::uniform_real_distribution<double> ua(0.0, 1.0), ub(0.0, 0.5);
      std::vector<double> a(32 * 32), b(32 * 32);
      for (auto& v : a) v = ua(rng);
      for (auto& v : b) v = ub(rng);
      auto oa = a, ob = b;
      gray_scott_step(a, b, cfg);
      oracle::gray_scott_step(oa, ob, cfg.n, cfg.spacing(), cfg.delta_a, cfg.delta_b, cfg.f, cfg.k, cfg.dt);
      gs = std::max({gs, max_rel_diff(a, oa), max_rel_diff(b, ob)});
    }
  }
  const double worst = std::max({cc, space, time, rmse, gs});
  return {worst <= 1e-12, std::to_string(instances) + " instances each; max rel diff contconv " + fmt(cc) + ", space conv " +
                              fmt(space) + ", causal time conv " + fmt(time) + ", rMSE " + fmt(rmse) + ", Gray-Scott " + fmt(gs)};
}

// ---------------------------------------------------------------------------
// 2. Gradient suite

Outcome gradient_suite() {
  std::map<std::string, double> err;
  Rng rng(2);
  {
    auto x = random_input({4, 5}, rng), w = random_input({5, 3}, rng), b = random_input({3}, rng);
    err["linear"] = check_gradients({x, w, b}, [&] { return project(linear(x, w, b)); }).max_rel_error;
  }
  {
    auto x = random_input({3, 7}, rng), s = random_input({7}, rng), h = random_input({7}, rng);
    err["layer_norm"] = check_gradients({x, s, h}, [&] { return project(layer_norm(x, s, h, 1e-5)); }).max_rel_error;
  }
  {
    auto x = random_input({2, 3, 3, 8}, rng), s = random_input({8}, rng), h = random_input({8}, rng);
    err["group_norm"] = check_gradients({x, s, h}, [&] { return project(group_norm(x, 4, s, h, 1e-5)); }).max_rel_error;
  }
  {
    auto x = random_input({4, 5, 5, 2}, rng), w = random_input({1, 3, 3, 2, 3}, rng), b = random_input({3}, rng);
    const auto g = compress_space_geometry({4, 5, 5}, 3);
    err["conv3d (space)"] = check_gradients({x, w, b}, [&] { return project(conv3d(x, w, b, g)); }).max_rel_error;
    const auto gt = compress_time_geometry(3);
    auto wt = random_input({3, 1, 1, 2, 3}, rng);
    err["conv3d (causal time)"] = check_gradients({x, wt, b}, [&] { return project(conv3d(x, wt, b, gt)); }).max_rel_error;
  }
  {
    auto x = random_input({2, 3, 3, 3}, rng), w = random_input({1, 3, 3, 2, 3}, rng), b = random_input({2}, rng);
    const auto g = compress_space_geometry({2, 6, 6}, 3);
    err["conv_transpose3d"] =
        check_gradients({x, w, b}, [&] { return project(conv_transpose3d(x, w, b, g, {2, 6, 6})); }).max_rel_error;
  }
  {
    auto q = random_input({6, 8}, rng), k = random_input({6, 8}, rng), v = random_input({6, 8}, rng);
    err["attention"] = check_gradients({q, k, v}, [&] { return project(attention(q, k, v, 2)); }).max_rel_error;
  }
  for (auto mode : {ConvNormalize::none, ConvNormalize::density}) {
    ParamStore<double> store;
    ContConvConfig cfg;
    cfg.in_channels = 2;
    cfg.out_channels = 2;
    cfg.kernel_hidden = 8;
    cfg.radius = 0.3;
    cfg.max_neighbors = 0;
    cfg.normalize = mode;
    ContConv<double> layer(store, "c", cfg, rng);
    auto pts = random_points(12, rng);
    auto f = random_input({12, 2}, rng);
    RegularGrid grid({3, 3});
    std::vector<Var<double>> in{f};
    for (auto& [n, v] : store.entries()) in.push_back(v);
    const std::string tag = mode == ConvNormalize::none ? "none" : "density";
    err["contconv encode (" + tag + ")"] =
        check_gradients(in, [&] { return project(encode_points_to_grid(layer, f, pts, grid)); }).max_rel_error;
    auto g = random_input({9, 2}, rng);
    in[0] = g;
    err["contconv decode (" + tag + ")"] =
        check_gradients(in, [&] { return project(decode_grid_to_points(layer, g, grid, pts)); }).max_rel_error;
  }
  {
    CompressorConfig cfg;
    cfg.base_width = 4;
    cfg.max_width = 8;
    cfg.spatial_levels = 1;
    cfg.temporal_levels = 1;
    cfg.token_dim = 3;
    cfg.groups = 2;
    ParamStore<double> store;
    ResidualBlock<double> block(store, "r", 4, 8, cfg, rng);
    Compressor<double> comp(store, "ae", cfg, rng);
    randomize(store, rng, 0.3);
    auto x = random_input({3, 4, 3, 4}, rng);
    std::vector<Var<double>> in{x};
    for (auto& v : store.with_prefix("r.")) in.push_back(v);
    err["residual block"] = check_gradients(in, [&] { return project(block(x)); }).max_rel_error;
    in.assign({x});
    for (auto& v : store.with_prefix("ae.")) in.push_back(v);
    err["compressor"] = check_gradients(in, [&] { return project(comp.decode(comp.encode(x), {3, 4, 3})); }).max_rel_error;
  }
  {
    ProcessorConfig cfg;
    cfg.depth = 2;
    cfg.hidden = 16;
    cfg.heads = 2;
    cfg.token_dim = 2;
    cfg.gamma_mean = {0.0};
    cfg.gamma_std = {1.0};
    ParamStore<double> store;
    Processor<double> proc(store, "p", cfg, rng);
    randomize(store, rng, 0.2);
    auto zo = randn<double>(Shape{2, 2, 1, 2}, rng), zn = randn<double>(Shape{2, 2, 1, 2}, rng);
    std::vector<Var<double>> in;
    for (auto& [n, v] : store.entries()) in.push_back(v);
    err["processor"] = check_gradients(in, [&] { return project(proc.velocity(zo, zn, {1, 0}, 0.4, {0.3})); }).max_rel_error;
  }
  double worst = 0;
  std::string detail;
  for (const auto& [name, e] : err) {
    worst = std::max(worst, e);
    detail += (detail.empty() ? "" : ", ") + name + " " + fmt(e);
  }
  return {worst < 1e-3, std::to_string(err.size()) + " layers, max rel err " + fmt(worst) + " (" + detail + ")"};
}

// ---------------------------------------------------------------------------
// 3. Causality of the composed encoder (contconv + compressor)

Outcome causality() {
  RunConfig run = RunConfig::parse("grid=8\nbase_width=8\nmax_width=16\ntoken_dim=4\ngroups=4\nkernel_hidden=16\n");
  ModelConfig cfg = ModelConfig::from_run(run, 2, 0);
  EchoModel<double> model(cfg, 3);
  Rng rng(3);
  randomize(model.store(), rng, 0.2);
  model.normalizer() = {{0.0, 0.0}, {1.0, 1.0}, {}, {}};
  const std::int64_t frames = 20, n = 12;
  Trajectory t = grid_trajectory(n, 2, std::vector<double>(static_cast<std::size_t>(frames * n * n * 2)));
  t.n_frames = static_cast<std::uint32_t>(frames);
  for (auto& v : t.values) v = static_cast<float>(std::normal_distribution<double>()(rng));
  NoGradGuard ng;
  const auto base = model.encode(trajectory_frames<double>(t, 0, frames)).value();
  const std::int64_t per = base.numel() / base.dim(0);
  const int st = cfg.time_stride();
  std::int64_t checked = 0, violations = 0, reached = 0;
  for (std::int64_t f = 0; f < frames; ++f) {
    auto hit = trajectory_frames<double>(t, 0, frames);
    hit[static_cast<std::size_t>(f)].values[5] += 1.0;
    const auto z = model.encode(hit).value();
    for (std::int64_t j = 0; j < base.dim(0); ++j) {
      bool same = true;
      for (std::int64_t i = 0; i < per; ++i) same = same && z[j * per + i] == base[j * per + i];
      if (j * st < f) {
        ++checked;
        violations += !same;
      } else {
        reached += !same;
      }
    }
  }
  return {violations == 0 && reached > 0, std::to_string(checked) + " (t, j) pairs with j·s_t < t, " +
                                              std::to_string(violations) + " changed (must be 0); " + std::to_string(reached) +
                                              " later pairs responded"};
}

// ---------------------------------------------------------------------------
// 5. Flow-matching correctness

Outcome flow_matching() {
  Rng rng(5);
  // Exact-in-one-step: dyadic data makes every float operation exact.
  Tensor<double> zstar(Shape{4, 2, 2, 3}), z0(Shape{4, 2, 2, 3});
  for (std::int64_t i = 0; i < zstar.numel(); ++i) {
    zstar[i] = static_cast<double>(static_cast<int>(rng() % 64) - 32) / 8.0;
    z0[i] = static_cast<double>(static_cast<int>(rng() % 64) - 32) / 16.0;
  }
  // With ε = z0 known, the path velocity is the constant z* − ε.
  auto known = [](const Tensor<double>& target, const Tensor<double>& eps) {
    return VelocityField<double>([&target, &eps](const Tensor<double>&, double) {
      Tensor<double> v(target.shape());
      for (std::int64_t i = 0; i < v.numel(); ++i) v[i] = target[i] - eps[i];
      return v;
    });
  };
  bool exact = true;
  for (auto m : {SolverMethod::euler, SolverMethod::midpoint, SolverMethod::rk4})
    exact = exact && integrate(known(zstar, z0), z0, Tensor<double>(), {}, {m, 1, true}) == zstar;
  // Random data: rounding-level agreement.
  auto zr = randn<double>(Shape{5, 3, 3, 4}, rng);
  auto zr0 = randn<double>(zr.shape(), rng);
  double random_err = 0;
  for (auto m : {SolverMethod::euler, SolverMethod::midpoint, SolverMethod::rk4})
    random_err = std::max(random_err, max_rel_diff(integrate(known(zr, zr0), zr0, Tensor<double>(), {}, {m, 1, true}).to_vector(),
                                                   zr.to_vector()));

  double oracle_loss = 0;
  VelocityModel<double> oracle_m = [&](const Tensor<double>&, const Tensor<double>& z, const LatentMask&, double r) {
    Tensor<double> v(z.shape());
    for (std::int64_t i = 0; i < v.numel(); ++i) v[i] = (zr[i] - z[i]) / (1.0 - r);
    return constant(v);
  };
  for (int k = 0; k < 50; ++k) oracle_loss = std::max(oracle_loss, fm_loss(oracle_m, zr, rng).value().item());

  VelocityModel<double> zero = [](const Tensor<double>&, const Tensor<double>& z, const LatentMask&, double) {
    return constant(Tensor<double>(z.shape()));
  };
  auto zt = randn<double>(Shape{10, 2, 2, 2}, rng, 0.8);
  double expected = 0;
  for (auto v : zt.values()) expected += v * v;
  expected = expected / static_cast<double>(zt.numel()) + 1.0;  // E|z − ε|² per element
  double acc = 0;
  const int draws = 4000;
  for (int k = 0; k < draws; ++k) acc += fm_loss(zero, zt, rng).value().item();
  const double mc = acc / draws, rel = std::abs(mc - expected) / expected;
  const bool pass = exact && random_err < 1e-14 && oracle_loss < 1e-20 && rel < 0.02;
  return {pass, std::string("1-step dyadic ") + (exact ? "exact" : "NOT exact") + ", random max rel " + fmt(random_err) +
                    ", oracle loss " + fmt(oracle_loss) + ", zero-predictor " + fmt(mc) + " vs " + fmt(expected) + " (rel " +
                    fmt(rel) + ")"};
}

// ---------------------------------------------------------------------------
// 9. Vorticity physics

Outcome vorticity_physics() {
  VorticityConfig cfg;
  const auto shells = energy_spectrum(std::vector<double>(static_cast<std::size_t>(cfg.n * cfg.n), 0.0), cfg.n, cfg.n).k.size();
  std::vector<double> avg(shells, 0.0);
  const int seeds = 32;
  for (int seed = 0; seed < seeds; ++seed) {
    Rng rng(static_cast<std::uint64_t>(seed));
    const auto s = energy_spectrum(vorticity_init(cfg, rng), cfg.n, cfg.n);
    for (std::size_t k = 0; k < shells; ++k) avg[k] += 2 * std::numbers::pi * s.k[k] * s.energy[k] / seeds;
  }
  const auto peak = static_cast<double>(std::max_element(avg.begin(), avg.end()) - avg.begin());
  const double target = std::sqrt(2.0) * cfg.k0;
  const bool peak_ok = std::abs(peak - std::round(target)) <= 1.0;

  auto dc = cfg;
  dc.nu = 3e-3;
  const std::int64_t n = dc.n;
  std::vector<double> w(static_cast<std::size_t>(n * n));
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j) w[static_cast<std::size_t>(i * n + j)] = std::cos(2 * std::numbers::pi * (i + 0.5) / n);
  const auto w0 = w;
  const int steps = 100;
  for (int s = 0; s < steps; ++s) vorticity_step(w, dc);
  const double decay = std::exp(-dc.nu * 4 * std::numbers::pi * std::numbers::pi * steps * dc.dt);
  double decay_err = 0;
  for (std::size_t p = 0; p < w.size(); ++p) decay_err = std::max(decay_err, std::abs(w[p] - decay * w0[p]));

  auto hc = cfg;
  hc.nu = 1e-3;
  Rng rng(5);
  const auto init = vorticity_init(hc, rng);
  auto evolve = [&](double dt) {
    auto c = hc;
    c.dt = dt;
    auto x = init;
    for (int s = 0; s < static_cast<int>(std::lround(2.0 / dt)); ++s) vorticity_step(x, c);
    return x;
  };
  const auto coarse = evolve(0.02), fine = evolve(0.01);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < fine.size(); ++i) {
    num += (coarse[i] - fine[i]) * (coarse[i] - fine[i]);
    den += fine[i] * fine[i];
  }
  const double halving = std::sqrt(num / den);
  return {peak_ok && decay_err < 1e-10 && halving < 0.01,
          "spectrum peak shell " + fmt(peak) + " (√2·k0 = " + fmt(target) + "), single-mode decay max err " + fmt(decay_err) +
              ", dt-halving rel diff " + fmt(halving)};
}

// ---------------------------------------------------------------------------
// Desk-scale Gray-Scott run shared by criteria 4, 6, 7, 8, 10 and 11.

struct TaskScore {
  double rmse = 0;       // mean relative MSE over unobserved frames, physical units
  double persistence = 0;
  bool finite = true;
};

class Desk {
 public:
  explicit Desk(fs::path dir) : dir_(std::move(dir)) {}

  const fs::path& dir() const { return dir_; }
  const RunConfig& run() const { return run_; }
  const std::vector<Trajectory>& test() const { return test_; }
  double train_seconds() const { return train_seconds_; }
  bool reused() const { return reused_; }
  const fs::path& final_ckpt() const { return ckpt3_; }
  EchoModel<float>& stage1() { return *s1_.model; }
  EchoModel<float>& model() { return *s3_.model; }

  void prepare() {
    if (ready_) return;
    ready_ = true;
    fs::create_directories(dir_);
    run_ = RunConfig::load(fs::path(ECHO_SOURCE_DIR) / "tests" / "desk.cfg");
    DatasetOptions opt;
    opt.kind = DatasetKind::grayscott;
    opt.n_train = 200;
    opt.n_test = 20;
    opt.seed = static_cast<std::uint64_t>(run_.integer("seed"));
    const auto data = dir_ / "data";
    if (!fs::exists(data / "manifest.csv")) generate_dataset(opt, data);
    for (const auto& f : dataset_files(data, "test")) test_.push_back(load_trajectory(f));

    const auto cfg_path = dir_ / "desk.cfg";
    const auto seconds_path = dir_ / "train_seconds.txt";
    ckpt3_ = dir_ / "stage3.ckpt";
    if (fs::exists(ckpt3_) && fs::exists(seconds_path) && RunConfig::load(cfg_path) == run_) {
      std::ifstream(seconds_path) >> train_seconds_;
      reused_ = true;
    } else {
      run_.save(cfg_path);
      fs::remove(seconds_path);
      const auto t0 = std::chrono::steady_clock::now();
      const std::string c = cfg_path.string(), d = data.string();
      const auto s1 = (dir_ / "stage1.ckpt").string(), s2 = (dir_ / "stage2.ckpt").string();
      if (cli_main({"train", "--stage", "1", "--config", c, "--data", d, "--out", s1}) != 0 ||
          cli_main({"train", "--stage", "2", "--config", c, "--data", d, "--out", s2, "--resume", s1}) != 0 ||
          cli_main({"train", "--stage", "3", "--config", c, "--data", d, "--out", ckpt3_.string(), "--resume", s2}) != 0)
        throw std::runtime_error("desk training failed");
      train_seconds_ = seconds_since(t0);
      std::ofstream(seconds_path) << std::setprecision(17) << train_seconds_;
    }
    s1_ = load_checkpoint(dir_ / "stage1.ckpt");
    s2_ = load_checkpoint(dir_ / "stage2.ckpt");
    s3_ = load_checkpoint(ckpt3_);
  }

  // Mean physical-unit reconstruction rMSE over test windows.
  double reconstruction(const EchoModel<float>& m) const {
    NoGradGuard ng;
    double acc = 0;
    int count = 0;
    const auto window = run_.integer("window_frames");
    for (const auto& t : test_)
      for (auto start : window_starts(t)) {
        auto pred = m.denormalize_values(m.decode(m.encode(trajectory_frames<float>(t, start, window)), window, t.points()).value());
        acc += relative_mse(pred.to_vector(), t.frames(start, window).values);
        ++count;
      }
    return acc / count;
  }

  double stage2_reconstruction() const { return reconstruction(*s2_.model); }

  // Scores a task over every test window; `observe_fraction` < 1 conditions on
  // a random subset of the input points.
  TaskScore task(TaskKind kind, int steps = -1, double observe_fraction = 1.0) const {
    GenerateOptions opt;
    opt.task.kind = kind;
    opt.task.context = run_.integer("context_frames");
    opt.solver.method = parse_solver(run_.str("solver"));
    opt.solver.steps = steps > 0 ? steps : static_cast<int>(run_.integer("steps"));
    opt.solver.clamp_observed = run_.flag("clamp_observed");
    opt.ivp_encode_per_frame = run_.flag("ivp_encode_per_frame");
    const auto window = run_.integer("window_frames");
    TaskScore score;
    int count = 0;
    for (std::size_t i = 0; i < test_.size(); ++i)
      for (auto start : window_starts(test_[i])) {
        const auto truth = test_[i].frames(start, window);
        Rng rng = make_rng(static_cast<std::uint64_t>(i * 1000 + static_cast<std::size_t>(start)), "accept/" + to_string(kind));
        Trajectory input = truth;
        if (observe_fraction < 1.0) input = truth.select_points(subsample_points(truth.n_points, observe_fraction, rng));
        TaskMask mask;
        const auto pred = run_task(*s3_.model, input, opt, truth.points(), rng, &mask);
        std::vector<float> p, u, pers;
        const auto frame = static_cast<std::size_t>(truth.n_points) * truth.n_channels;
        std::int64_t last_observed = -1;
        for (std::int64_t f = 0; f < window; ++f) {
          if (mask.physical[static_cast<std::size_t>(f)]) {
            last_observed = f;
            continue;
          }
          const auto off = static_cast<std::ptrdiff_t>(frame * static_cast<std::size_t>(f));
          p.insert(p.end(), pred.values.begin() + off, pred.values.begin() + off + static_cast<std::ptrdiff_t>(frame));
          u.insert(u.end(), truth.values.begin() + off, truth.values.begin() + off + static_cast<std::ptrdiff_t>(frame));
          const auto src = static_cast<std::ptrdiff_t>(frame * static_cast<std::size_t>(std::max<std::int64_t>(last_observed, 0)));
          pers.insert(pers.end(), truth.values.begin() + src, truth.values.begin() + src + static_cast<std::ptrdiff_t>(frame));
        }
        for (float v : pred.values) score.finite = score.finite && std::isfinite(v);
        score.rmse += relative_mse(p, u);
        score.persistence += relative_mse(pers, u);
        ++count;
      }
    score.rmse /= count;
    score.persistence /= count;
    return score;
  }

  const TaskScore& cached(TaskKind kind) {
    auto it = cache_.find(kind);
    if (it == cache_.end()) it = cache_.emplace(kind, task(kind)).first;
    return it->second;
  }

 private:
  std::vector<std::int64_t> window_starts(const Trajectory& t) const {
    const auto window = run_.integer("window_frames");
    // Two windows per trajectory: the start and the end of the record.
    std::vector<std::int64_t> s{0};
    if (t.n_frames > window) s.push_back(t.n_frames - window);
    return s;
  }

  fs::path dir_;
  bool ready_ = false;
  bool reused_ = false;
  RunConfig run_;
  std::vector<Trajectory> test_;
  double train_seconds_ = 0;
  fs::path ckpt3_;
  LoadedModel s1_, s2_, s3_;
  std::map<TaskKind, TaskScore> cache_;
};

// 4. Solver orders and step-count flatness on the trained model.
Outcome solver_orders(Desk& desk) {
  const VelocityField<double> exp_field = [](const Tensor<double>& z, double) { return z; };
  auto error = [&](SolverMethod m, int steps) {
    auto z = integrate(exp_field, Tensor<double>(Shape{1}, 1.0), Tensor<double>(), {}, {m, steps, true});
    return std::abs(z[0] - std::exp(1.0));
  };
  std::map<SolverMethod, double> need{{SolverMethod::euler, 0.9}, {SolverMethod::midpoint, 1.9}, {SolverMethod::rk4, 3.8}};
  bool orders_ok = true;
  std::string detail;
  for (auto [m, req] : need) {
    const double order = std::log2(error(m, 8) / error(m, 16));
    orders_ok = orders_ok && order >= req;
    detail += to_string(m) + " " + fmt(order) + ", ";
  }
  desk.prepare();
  const double e5 = desk.task(TaskKind::forward, 5).rmse, e25 = desk.task(TaskKind::forward, 25).rmse;
  const double rel = std::abs(e5 - e25) / std::min(e5, e25);
  return {orders_ok && rel < 0.15, "orders " + detail + "forward rMSE 5 steps " + fmt(e5) + " vs 25 steps " + fmt(e25) +
                                       " (rel diff " + fmt(rel) + ")"};
}

// 6. End-to-end desk run.
Outcome end_to_end(Desk& desk) {
  desk.prepare();
  const double hours = desk.train_seconds() / 3600.0;
  const double recon = desk.reconstruction(desk.stage1());
  const auto& fwd = desk.cached(TaskKind::forward);
  const auto& interp = desk.cached(TaskKind::interpolation);
  const bool a = recon < 0.15, b = fwd.rmse <= 0.75 * fwd.persistence, c = interp.rmse <= fwd.rmse, t = hours <= 4.0;
  return {a && b && c && t, std::string("training ") + fmt(hours) + " h" + (desk.reused() ? " (recorded, checkpoints reused)" : "") +
                                "; (a) stage-1 reconstruction " + fmt(recon) + " (stage 2: " + fmt(desk.stage2_reconstruction()) +
                                "); (b) forward " + fmt(fwd.rmse) + " vs persistence " + fmt(fwd.persistence) + " (ratio " +
                                fmt(fwd.rmse / fwd.persistence) + "); (c) interpolation " + fmt(interp.rmse) + " vs forward " +
                                fmt(fwd.rmse)};
}

// 7. One checkpoint serves every task through the command-line tool.
Outcome multi_task(Desk& desk) {
  desk.prepare();
  const auto traj = desk.dir() / "data" / "test_0000.echt";
  bool all_ok = true;
  std::string detail;
  for (std::string task : {"forward", "inverse", "interp", "ivp", "uncond"}) {
    const auto out = desk.dir() / ("task_" + task + ".echt");
    const int rc = cli_main({"generate", "--task", task, "--ckpt", desk.final_ckpt().string(), "--traj", traj.string(), "--out",
                             out.string(), "--seed", "1"});
    bool finite = rc == 0;
    if (finite)
      for (float v : load_trajectory(out).values) finite = finite && std::isfinite(v);
    all_ok = all_ok && finite;
    detail += task + (finite ? " ok, " : " FAILED, ");
  }
  const auto& fwd = desk.cached(TaskKind::forward);
  const auto& inv = desk.cached(TaskKind::inverse);
  const double ratio = std::max(fwd.rmse, inv.rmse) / std::min(fwd.rmse, inv.rmse);
  return {all_ok && fwd.finite && inv.finite && ratio <= 3.0,
          detail + "forward " + fmt(fwd.rmse) + " vs inverse " + fmt(inv.rmse) + " (ratio " + fmt(ratio) + ")"};
}

// 8. Hierarchy ablation at fixed latent size and equal training budget. Both
// variants see the same trajectories for the same number of stage-1 epochs.
constexpr int kAblationEpochs = 4;
constexpr std::size_t kAblationTrajectories = 60;

Outcome hierarchy(Desk& desk) {
  desk.prepare();
  const auto data = desk.dir() / "data";
  auto base = desk.run();
  base.set("stage1_epochs", std::to_string(kAblationEpochs));
  std::vector<Trajectory> train;
  const auto files = dataset_files(data, "train");
  for (std::size_t i = 0; i < kAblationTrajectories; ++i) train.push_back(load_trajectory(files[i]));
  const auto stats = compute_data_stats(train);
  auto train_variant = [&](const std::string& name, std::int64_t grid, std::int64_t levels) {
    auto run = base;
    run.set("grid", std::to_string(grid));
    run.set("spatial_levels", std::to_string(levels));
    const auto ck = desk.dir() / ("ablation_" + name + ".ckpt");
    if (fs::exists(ck) && load_checkpoint(ck).run == run) return load_checkpoint(ck);
    auto model = make_model(run, stats);
    Trainer(*model, run, 1).run(train);
    save_checkpoint(ck, *model, run);
    return load_checkpoint(ck);
  };
  const auto deep = train_variant("3level", 32, 3), flat = train_variant("0level", 4, 0);
  const auto ld = deep.model->latent_shape(21), lf = flat.model->latent_shape(21);
  const double rd = desk.reconstruction(*deep.model), rf = desk.reconstruction(*flat.model);
  return {ld == lf && rd < rf, "latent " + std::to_string(ld[0]) + "x" + std::to_string(ld[1]) + "x" + std::to_string(ld[2]) +
                                   " both; 3-level rMSE " + fmt(rd) + " vs 0-level " + fmt(rf)};
}

// 10. Sparse conditioning.
Outcome sparse_conditioning(Desk& desk) {
  desk.prepare();
  const auto& full = desk.cached(TaskKind::forward);
  const auto sparse = desk.task(TaskKind::forward, -1, 0.2);
  const double ratio = sparse.rmse / full.rmse;
  return {sparse.finite && ratio < 2.0,
          "forward rMSE with 20% of input points " + fmt(sparse.rmse) + " vs 100% " + fmt(full.rmse) + " (ratio " + fmt(ratio) + ")"};
}

// 11. Determinism and file formats.
Outcome determinism(Desk& desk) {
  desk.prepare();
  const auto ck = read_checkpoint_file(desk.final_ckpt());
  const auto copy = desk.dir() / "roundtrip.ckpt";
  write_checkpoint_file(ck, copy);
  std::ifstream a(desk.final_ckpt(), std::ios::binary), b(copy, std::ios::binary);
  const std::string ba((std::istreambuf_iterator<char>(a)), {}), bb((std::istreambuf_iterator<char>(b)), {});
  const bool ck_ok = read_checkpoint_file(copy) == ck && ba == bb;

  const auto traj = load_trajectory(desk.dir() / "data" / "test_0000.echt");
  save_trajectory(traj, desk.dir() / "roundtrip.echt");
  const bool traj_ok = load_trajectory(desk.dir() / "roundtrip.echt") == traj;

  auto gen = [&](const std::string& name) {
    const auto out = desk.dir() / name;
    cli_main({"generate", "--task", "forward", "--ckpt", desk.final_ckpt().string(), "--traj",
              (desk.dir() / "data" / "test_0001.echt").string(), "--out", out.string(), "--seed", "7"});
    std::ifstream f(out, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), {});
  };
  const auto g1 = gen("det_a.echt"), g2 = gen("det_b.echt");
  const bool gen_ok = !g1.empty() && g1 == g2;
  return {ck_ok && traj_ok && gen_ok, std::string("checkpoint round trip ") + (ck_ok ? "bit-exact" : "DIFFERS") +
                                          ", trajectory round trip " + (traj_ok ? "bit-exact" : "DIFFERS") +
                                          ", seeded generation " + (gen_ok ? "bitwise identical" : "DIFFERS")};
}

}  // namespace

int main() {
  std::set<int> only;
  if (const char* s = std::getenv("ECHO_ACCEPT_ONLY")) {
    std::istringstream is(s);
    std::string tok;
    while (std::getline(is, tok, ',')) only.insert(std::stoi(tok));
  }
  const char* dir_env = std::getenv("ECHO_ACCEPT_DIR");
  Desk desk(dir_env ? fs::path(dir_env) : fs::path(ECHO_ACCEPT_DIR));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"gradient suite", gradient_suite},
      {"encoder causality", causality},
      {"solver orders and step flatness", [&] { return solver_orders(desk); }},
      {"flow-matching correctness", flow_matching},
      {"end-to-end desk run", [&] { return end_to_end(desk); }},
      {"multi-task zero-shot", [&] { return multi_task(desk); }},
      {"hierarchy ablation", [&] { return hierarchy(desk); }},
      {"vorticity physics", vorticity_physics},
      {"sparse conditioning", [&] { return sparse_conditioning(desk); }},
      {"determinism and formats", [&] { return determinism(desk); }},
  };
  std::vector<std::string> lines;
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::ostringstream line;
    line << (o.pass ? "PASS" : "FAIL") << " criterion " << id << " (" << criteria[i].first << ", " << std::fixed
         << std::setprecision(1) << seconds_since(t0) << " s): " << o.detail;
    std::cout << line.str() << std::endl;
    lines.push_back(line.str());
    all = all && o.pass;
  }
  std::cout << "\nSummary\n";
  for (const auto& l : lines) std::cout << l << "\n";
  return all ? 0 : 1;
}
