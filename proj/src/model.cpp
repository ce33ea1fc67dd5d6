#include "echo/model.hpp"

namespace echo {

ModelConfig ModelConfig::from_run(const RunConfig& run, std::int64_t channels, std::int64_t n_params) {
  ModelConfig m;
  m.channels = channels;
  m.grid = run.integer("grid");
  m.enc_radius_cells = run.real("enc_radius_cells");
  m.dec_radius_cells = run.real("dec_radius_cells");
  m.kernel_hidden = run.integer("kernel_hidden");
  m.enc_max_neighbors = run.integer("enc_max_neighbors");
  m.dec_max_neighbors = run.integer("dec_max_neighbors");
  m.normalize = parse_conv_normalize(run.str("conv_normalize"));
  m.comp.base_width = run.integer("base_width");
  m.comp.max_width = run.integer("max_width");
  m.comp.spatial_levels = static_cast<int>(run.integer("spatial_levels"));
  m.comp.temporal_levels = static_cast<int>(run.integer("temporal_levels"));
  m.comp.token_dim = run.integer("token_dim");
  m.comp.groups = static_cast<int>(run.integer("groups"));
  m.comp.channel_mlp = run.flag("channel_mlp");
  m.proc.depth = static_cast<int>(run.integer("proc_depth"));
  m.proc.hidden = run.integer("proc_hidden");
  m.proc.heads = static_cast<int>(run.integer("proc_heads"));
  m.proc.mlp_ratio = static_cast<int>(run.integer("proc_mlp_ratio"));
  m.proc.mask_channel = run.flag("mask_channel");
  m.proc.token_dim = m.comp.token_dim;
  m.proc.gamma_mean.assign(static_cast<std::size_t>(n_params), 0.0);
  m.proc.gamma_std.assign(static_cast<std::size_t>(n_params), 1.0);
  if (m.grid < 1) throw ConfigError("grid must be positive");
  if (!(m.enc_radius_cells > 0 && m.dec_radius_cells > 0)) throw ConfigError("conv radii must be positive");
  return m;
}

template <typename T>
FrameObs<T> frame_obs(const Trajectory& t, std::int64_t frame, const std::vector<std::int64_t>& ids) {
  const auto c = static_cast<std::int64_t>(t.n_channels);
  FrameObs<T> f;
  if (ids.empty()) {
    f.points = t.points();
    f.values = Tensor<T>(Shape{t.n_points, c});
    for (std::int64_t p = 0; p < t.n_points; ++p)
      for (std::int64_t k = 0; k < c; ++k) f.values[p * c + k] = static_cast<T>(t.at(frame, p, k));
    return f;
  }
  std::vector<double> coords;
  coords.reserve(ids.size() * t.dim);
  f.values = Tensor<T>(Shape{static_cast<std::int64_t>(ids.size()), c});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::uint32_t a = 0; a < t.dim; ++a) coords.push_back(t.coords[static_cast<std::size_t>(ids[i]) * t.dim + a]);
    for (std::int64_t k = 0; k < c; ++k) f.values[static_cast<std::int64_t>(i) * c + k] = static_cast<T>(t.at(frame, ids[i], k));
  }
  f.points = PointSet(static_cast<int>(t.dim), std::move(coords));
  return f;
}

template <typename T>
std::vector<FrameObs<T>> trajectory_frames(const Trajectory& t, std::int64_t start, std::int64_t count) {
  std::vector<FrameObs<T>> out;
  for (std::int64_t f = start; f < start + count; ++f) out.push_back(frame_obs<T>(t, f));
  return out;
}

template <typename T>
Tensor<T> normalized_frames(const Trajectory& t, std::int64_t start, std::int64_t count, const Normalizer& norm) {
  const auto c = static_cast<std::int64_t>(t.n_channels);
  Tensor<T> out(Shape{count, t.n_points, c});
  std::int64_t i = 0;
  for (std::int64_t f = start; f < start + count; ++f)
    for (std::int64_t p = 0; p < t.n_points; ++p)
      for (std::int64_t k = 0; k < c; ++k, ++i) {
        const auto kk = static_cast<std::size_t>(k);
        out[i] = static_cast<T>((static_cast<double>(t.at(f, p, k)) - norm.field_mean[kk]) / norm.field_std[kk]);
      }
  return out;
}

template <typename T>
EchoModel<T>::EchoModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  auto rng = make_rng(seed, "init");
  const double h = 1.0 / static_cast<double>(cfg.grid);
  ContConvConfig enc{2, cfg.channels, cfg.comp.base_width, cfg.kernel_hidden, cfg.enc_radius_cells * h, cfg.enc_max_neighbors,
                     cfg.normalize};
  ContConvConfig dec{2, cfg.comp.base_width, cfg.channels, cfg.kernel_hidden, cfg.dec_radius_cells * h, cfg.dec_max_neighbors,
                     cfg.normalize};
  enc_conv_ = ContConv<T>(store_, "ae.enc_conv", enc, rng);
  comp_ = Compressor<T>(store_, "ae.comp", cfg.comp, rng);
  dec_conv_ = ContConv<T>(store_, "ae.dec_conv", dec, rng);
  auto pc = cfg.proc;
  pc.token_dim = cfg.comp.token_dim;
  proc_ = Processor<T>(store_, "proc", pc, rng);
  norm_.field_mean.assign(static_cast<std::size_t>(cfg.channels), 0.0);
  norm_.field_std.assign(static_cast<std::size_t>(cfg.channels), 1.0);
  norm_.latent_mean.assign(static_cast<std::size_t>(cfg.comp.token_dim), 0.0);
  norm_.latent_std.assign(static_cast<std::size_t>(cfg.comp.token_dim), 1.0);
}

template <typename T>
Extents3 EchoModel<T>::latent_shape(std::int64_t n_frames) const {
  return latent_extents(cfg_.comp, {n_frames, cfg_.grid, cfg_.grid});
}

template <typename T>
Var<T> EchoModel<T>::encode(const std::vector<FrameObs<T>>& frames, const std::vector<std::uint8_t>& frame_mask) const {
  if (frames.empty()) throw std::invalid_argument("encode: no frames");
  if (!frame_mask.empty() && frame_mask.size() != frames.size())
    throw ShapeError("encode: frame mask has " + std::to_string(frame_mask.size()) + " entries for " +
                     std::to_string(frames.size()) + " frames");
  const auto grid = cfg_.grid_nodes();
  std::vector<Var<T>> per_frame;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& fr = frames[f];
    if (fr.values.rank() != 2 || fr.values.dim(1) != cfg_.channels || fr.values.dim(0) != fr.points.size())
      throw ShapeError("encode: frame values " + to_string(fr.values.shape()) + " do not match points/channels");
    const bool observed = frame_mask.empty() || frame_mask[f];
    auto v = observed ? normalize_values(fr.values) : Tensor<T>(fr.values.shape());
    per_frame.push_back(encode_points_to_grid(enc_conv_, constant(std::move(v)), fr.points, grid));
  }
  const auto t = static_cast<std::int64_t>(frames.size());
  auto x = reshape(concat(per_frame, 0), Shape{t, cfg_.grid, cfg_.grid, cfg_.comp.base_width});
  return comp_.encode(x);
}

template <typename T>
Var<T> EchoModel<T>::decode(const Var<T>& z, std::int64_t n_frames, const PointSet& queries) const {
  const auto grid = cfg_.grid_nodes();
  auto g = comp_.decode(z, {n_frames, cfg_.grid, cfg_.grid});
  std::vector<Var<T>> per_frame;
  const auto s = cfg_.grid * cfg_.grid;
  for (std::int64_t f = 0; f < n_frames; ++f) {
    auto gf = reshape(slice(g, 0, f, 1), Shape{s, cfg_.comp.base_width});
    per_frame.push_back(reshape(decode_grid_to_points(dec_conv_, gf, grid, queries), Shape{1, queries.size(), cfg_.channels}));
  }
  return concat(per_frame, 0);
}

namespace {

template <typename T>
Tensor<T> affine_last(const Tensor<T>& v, const std::vector<double>& shift, const std::vector<double>& scale, bool forward) {
  const auto c = static_cast<std::int64_t>(shift.size());
  if (v.rank() == 0 || v.dim(-1) != c) throw ShapeError("channel count mismatch: " + to_string(v.shape()));
  Tensor<T> out(v.shape());
  for (std::int64_t i = 0; i < v.numel(); ++i) {
    const auto k = static_cast<std::size_t>(i % c);
    const double x = static_cast<double>(v[i]);
    out[i] = static_cast<T>(forward ? (x - shift[k]) / scale[k] : x * scale[k] + shift[k]);
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> EchoModel<T>::normalize_values(const Tensor<T>& v) const {
  return affine_last(v, norm_.field_mean, norm_.field_std, true);
}
template <typename T>
Tensor<T> EchoModel<T>::denormalize_values(const Tensor<T>& v) const {
  return affine_last(v, norm_.field_mean, norm_.field_std, false);
}
template <typename T>
Tensor<T> EchoModel<T>::standardize_latent(const Tensor<T>& z) const {
  return affine_last(z, norm_.latent_mean, norm_.latent_std, true);
}
template <typename T>
Tensor<T> EchoModel<T>::destandardize_latent(const Tensor<T>& z) const {
  return affine_last(z, norm_.latent_mean, norm_.latent_std, false);
}

template FrameObs<float> frame_obs<float>(const Trajectory&, std::int64_t, const std::vector<std::int64_t>&);
template FrameObs<double> frame_obs<double>(const Trajectory&, std::int64_t, const std::vector<std::int64_t>&);
template std::vector<FrameObs<float>> trajectory_frames<float>(const Trajectory&, std::int64_t, std::int64_t);
template std::vector<FrameObs<double>> trajectory_frames<double>(const Trajectory&, std::int64_t, std::int64_t);
template Tensor<float> normalized_frames<float>(const Trajectory&, std::int64_t, std::int64_t, const Normalizer&);
template Tensor<double> normalized_frames<double>(const Trajectory&, std::int64_t, std::int64_t, const Normalizer&);
template class EchoModel<float>;
template class EchoModel<double>;

}  // namespace echo
