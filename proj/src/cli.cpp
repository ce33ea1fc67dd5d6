#include "echo/cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "echo/checkpoint.hpp"
#include "echo/metrics.hpp"
#include "echo/pipeline.hpp"

namespace echo {

namespace fs = std::filesystem;

Trajectory persistence_forecast(const Trajectory& t, std::int64_t context) {
  if (context < 1 || context > t.n_frames) throw std::invalid_argument("persistence context outside the trajectory");
  Trajectory out = t;
  const auto frame = static_cast<std::size_t>(t.n_points) * t.n_channels;
  const auto last = t.values.begin() + static_cast<std::ptrdiff_t>(frame * static_cast<std::size_t>(context - 1));
  for (std::int64_t f = context; f < t.n_frames; ++f)
    std::copy(last, last + static_cast<std::ptrdiff_t>(frame), out.values.begin() + static_cast<std::ptrdiff_t>(frame * static_cast<std::size_t>(f)));
  return out;
}

namespace {

std::vector<Trajectory> load_split(const fs::path& dir, const std::string& split) {
  std::vector<Trajectory> out;
  for (const auto& f : dataset_files(dir, split)) out.push_back(load_trajectory(f));
  if (out.empty()) throw DataError("no " + split + " trajectories in " + dir.string());
  return out;
}

fs::path sidecar(const fs::path& out, const std::string& suffix) {
  auto p = out;
  p += suffix;
  return p;
}

const std::vector<std::string>& architecture_keys() {
  static const std::vector<std::string> k{"grid", "enc_radius_cells", "dec_radius_cells", "kernel_hidden", "enc_max_neighbors",
                                          "dec_max_neighbors", "conv_normalize", "base_width", "max_width", "spatial_levels",
                                          "temporal_levels", "token_dim", "groups", "channel_mlp", "proc_depth",
                                          "proc_hidden", "proc_heads", "proc_mlp_ratio", "mask_channel"};
  return k;
}

PointSet parse_query_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError("--query-grid expects HxW, got '" + s + "'");
  const auto h = std::stoll(s.substr(0, x)), w = std::stoll(s.substr(x + 1));
  if (h < 1 || w < 1) throw ConfigError("--query-grid extents must be positive");
  return RegularGrid({h, w}).nodes();
}

PointSet read_query_points(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read query points " + path.string());
  std::vector<double> c;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#' || line[0] == 'x') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x, y;
    if (!(ls >> x >> y)) throw DataError("malformed query point line: " + line);
    c.push_back(x);
    c.push_back(y);
  }
  if (c.empty()) throw DataError("no query points in " + path.string());
  try {
    return PointSet(2, std::move(c));
  } catch (const std::invalid_argument& e) {
    throw DataError(std::string("query points: ") + e.what());
  }
}

int cmd_datagen(const std::string& kind, const fs::path& out, std::int64_t n_train, std::int64_t n_test, std::uint64_t seed) {
  DatasetOptions opt;
  opt.kind = parse_dataset_kind(kind);
  opt.n_train = n_train;
  opt.n_test = n_test;
  opt.seed = seed;
  generate_dataset(opt, out);
  std::cout << "wrote " << n_train << " train and " << n_test << " test trajectories to " << out.string() << "\n";
  return kExitOk;
}

int cmd_train(const std::string& stage_s, const fs::path& config, const fs::path& data, const fs::path& out,
              const std::string& resume) {
  const int stage = stage_s == "finetune" ? 4 : std::stoi(stage_s);
  if (stage < 1 || stage > 4) throw ConfigError("--stage must be 1, 2, 3 or finetune");
  auto run = RunConfig::load(config);
  const auto train = load_split(data, "train");
  std::unique_ptr<EchoModel<float>> model;
  CheckpointFile prior;
  if (!resume.empty()) {
    auto loaded = load_checkpoint(resume);
    for (const auto& k : architecture_keys())
      if (loaded.run.str(k) != run.str(k))
        throw ConfigError("config key '" + k + "' differs from the checkpoint (" + loaded.run.str(k) + " vs " + run.str(k) + ")");
    model = std::move(loaded.model);
    prior = std::move(loaded.file);
  } else {
    if (stage != 1) throw ConfigError("stage " + stage_s + " needs --resume with an earlier-stage checkpoint");
    model = make_model(run, compute_data_stats(train));
  }
  run.save(sidecar(out, ".config"));
  Trainer trainer(*model, run, stage);
  const bool resumed = !resume.empty() && restore_trainer(prior, trainer);
  if (stage == 3 && !resumed) fit_latent_stats(*model, train, run.integer("window_frames"), run.integer("window_stride"));
  trainer.run(train, [&](int epoch, double loss) {
    std::cout << "epoch," << epoch << ",loss," << loss << std::endl;
    save_checkpoint(out, *model, run, &trainer);
  });
  if (trainer.schedule().epochs == 0 || trainer.progress().epoch == 0) save_checkpoint(out, *model, run, &trainer);
  return kExitOk;
}

struct GenerateArgs {
  std::string task = "forward";
  fs::path ckpt, traj, out;
  std::int64_t context = -1;
  std::int64_t segments = 1;
  std::string solver;
  int steps = -1;
  std::string query_grid, query_points;
  std::uint64_t seed = 0;
  std::int64_t start = 0;
  double observe_fraction = 1.0;
  bool persistence = false;
};

int cmd_generate(const GenerateArgs& a) {
  auto traj = load_trajectory(a.traj);
  if (a.persistence) {
    const auto ctx = a.context > 0 ? a.context : 4;
    save_trajectory(persistence_forecast(traj, ctx), a.out);
    return kExitOk;
  }
  if (a.ckpt.empty()) throw ConfigError("generate needs --ckpt (or --persistence)");
  auto loaded = load_checkpoint(a.ckpt);
  const auto& run = loaded.run;
  GenerateOptions opt;
  opt.task.kind = parse_task(a.task);
  opt.task.context = a.context > 0 ? a.context : run.integer("context_frames");
  opt.solver.method = parse_solver(a.solver.empty() ? run.str("solver") : a.solver);
  opt.solver.steps = a.steps > 0 ? a.steps : static_cast<int>(run.integer("steps"));
  opt.solver.clamp_observed = run.flag("clamp_observed");
  opt.ivp_encode_per_frame = run.flag("ivp_encode_per_frame");
  const auto window = run.integer("window_frames");
  auto rng = make_rng(a.seed, "generate/noise");
  auto obs_rng = make_rng(a.seed, "generate/observe");

  Trajectory input = traj;
  if (a.observe_fraction < 1.0) input = traj.select_points(subsample_points(traj.n_points, a.observe_fraction, obs_rng));
  PointSet queries = traj.points();
  if (!a.query_grid.empty()) queries = parse_query_grid(a.query_grid);
  if (!a.query_points.empty()) queries = read_query_points(a.query_points);

  Trajectory result;
  if (a.segments > 1) {
    if (opt.task.kind != TaskKind::forward) throw ConfigError("--segments > 1 requires --task forward");
    if (!a.query_grid.empty() || !a.query_points.empty() || a.observe_fraction < 1.0)
      throw ConfigError("segment rollouts use the trajectory's own points");
    result = rollout_segments(*loaded.model, traj.frames(a.start, opt.task.context), window, a.segments, opt, rng);
  } else {
    if (a.start + window > input.n_frames)
      throw DataError("trajectory has " + std::to_string(input.n_frames) + " frames; window needs " + std::to_string(a.start + window));
    result = run_task(*loaded.model, input.frames(a.start, window), opt, queries, rng);
  }
  for (float v : result.values)
    if (!std::isfinite(v)) throw NumericalError("generated trajectory contains non-finite values");
  save_trajectory(result, a.out);
  return kExitOk;
}

int cmd_evaluate(const fs::path& pred_p, const fs::path& truth_p, bool spectrum, const std::string& horizons_s,
                 std::int64_t first, std::int64_t start, const fs::path& out) {
  const auto pred = load_trajectory(pred_p);
  auto truth = load_trajectory(truth_p);
  if (pred.n_points != truth.n_points || pred.n_channels != truth.n_channels)
    throw DataError("prediction and truth differ in points or channels");
  if (start + pred.n_frames > truth.n_frames) throw DataError("truth is shorter than the prediction");
  truth = truth.frames(start, pred.n_frames);
  Report rep;
  rep.add("relative_mse", relative_mse(pred.values, truth.values));
  const auto frame = static_cast<std::int64_t>(pred.n_points) * pred.n_channels;
  if (first > 0 && first < pred.n_frames)
    rep.add("relative_mse_generated", horizon_errors(pred.values, truth.values, frame, first, {pred.n_frames}).at(0));
  if (!horizons_s.empty()) {
    std::vector<std::int64_t> hs;
    std::istringstream is(horizons_s);
    std::string tok;
    while (std::getline(is, tok, ',')) hs.push_back(std::stoll(tok));
    const auto errs = horizon_errors(pred.values, truth.values, frame, std::max<std::int64_t>(first, 0), hs);
    for (std::size_t i = 0; i < hs.size(); ++i) rep.add("horizon_" + std::to_string(hs[i]), errs[i]);
  }
  if (spectrum) {
    const auto n = static_cast<std::int64_t>(std::llround(std::sqrt(static_cast<double>(pred.n_points))));
    if (n * n != pred.n_points || !is_power_of_two(n)) throw DataError("spectrum needs a square power-of-two grid");
    for (const auto& [tag, t] : {std::pair<std::string, const Trajectory*>{"pred", &pred}, {"truth", &truth}}) {
      std::vector<double> field(static_cast<std::size_t>(n * n));
      double sq = 0;
      for (std::int64_t p = 0; p < n * n; ++p) {
        field[static_cast<std::size_t>(p)] = t->at(t->n_frames - 1, p, 0);
        sq += field[static_cast<std::size_t>(p)] * field[static_cast<std::size_t>(p)];
      }
      const auto s = energy_spectrum(field, n, n);
      auto path = out;
      path.replace_filename(out.stem().string() + "_spectrum_" + tag + ".csv");
      write_spectrum_csv(s, path);
      const double expect = 0.5 * sq / static_cast<double>(n * n);
      rep.add("parseval_rel_error_" + tag, expect > 0 ? std::abs(s.total() - expect) / expect : std::abs(s.total()));
    }
  }
  rep.write_csv(out);
  for (const auto& [k, v] : rep.rows) std::cout << k << "," << v << "\n";
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args_in) {
  if (const char* t = std::getenv("ECHO_THREADS")) Eigen::setNbThreads(std::max(1, std::atoi(t)));
  CLI::App app{"ECHO: encode-generate-decode neural operator"};
  app.require_subcommand(1);

  std::string kind = "grayscott";
  std::string out_s, data_s, config_s, resume_s, stage_s;
  std::int64_t n_train = 200, n_test = 20;
  std::uint64_t seed = 0;
  auto* dg = app.add_subcommand("datagen", "generate a synthetic dataset");
  dg->add_option("--kind", kind)->check(CLI::IsMember({"grayscott", "vorticity"}));
  dg->add_option("--out", out_s)->required();
  dg->add_option("--n-train", n_train);
  dg->add_option("--n-test", n_test);
  dg->add_option("--seed", seed);

  auto* tr = app.add_subcommand("train", "run one training stage");
  tr->add_option("--stage", stage_s)->required()->check(CLI::IsMember({"1", "2", "3", "finetune"}));
  tr->add_option("--config", config_s)->required();
  tr->add_option("--data", data_s)->required();
  tr->add_option("--out", out_s)->required();
  tr->add_option("--resume", resume_s);

  GenerateArgs g;
  std::string ckpt_s, traj_s;
  auto* ge = app.add_subcommand("generate", "solve a task with a trained model");
  ge->add_option("--task", g.task)->check(CLI::IsMember({"forward", "inverse", "interp", "ivp", "uncond"}));
  ge->add_option("--ckpt", ckpt_s);
  ge->add_option("--traj", traj_s)->required();
  ge->add_option("--context-frames", g.context);
  ge->add_option("--out", out_s)->required();
  ge->add_option("--segments", g.segments)->check(CLI::PositiveNumber);
  ge->add_option("--solver", g.solver)->check(CLI::IsMember({"euler", "midpoint", "rk4"}));
  ge->add_option("--steps", g.steps)->check(CLI::PositiveNumber);
  auto* qg = ge->add_option("--query-grid", g.query_grid);
  auto* qp = ge->add_option("--query-points", g.query_points);
  qg->excludes(qp);
  ge->add_option("--seed", g.seed);
  ge->add_option("--start", g.start)->check(CLI::NonNegativeNumber);
  ge->add_option("--observe-fraction", g.observe_fraction)->check(CLI::Range(1e-6, 1.0));
  ge->add_flag("--persistence", g.persistence, "repeat the last context frame instead of running a model");

  std::string pred_s, truth_s, horizons;
  bool spectrum = false;
  std::int64_t first = 0, start = 0;
  auto* ev = app.add_subcommand("evaluate", "score a prediction against ground truth");
  ev->add_option("--pred", pred_s)->required();
  ev->add_option("--truth", truth_s)->required();
  ev->add_flag("--spectrum", spectrum);
  ev->add_option("--horizons", horizons);
  ev->add_option("--first", first, "first generated frame (earlier frames were observed)");
  ev->add_option("--start", start, "truth frame aligned with prediction frame 0");
  ev->add_option("--out", out_s)->required();

  std::vector<std::string> args(args_in.rbegin(), args_in.rend());
  try {
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  try {
    if (*dg) return cmd_datagen(kind, out_s, n_train, n_test, seed);
    if (*tr) return cmd_train(stage_s, config_s, data_s, out_s, resume_s);
    if (*ge) {
      g.ckpt = ckpt_s;
      g.traj = traj_s;
      g.out = out_s;
      return cmd_generate(g);
    }
    if (*ev) return cmd_evaluate(pred_s, truth_s, spectrum, horizons, first, start, out_s);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace echo
