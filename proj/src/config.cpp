#include "echo/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

namespace echo {

namespace {

const std::vector<std::pair<std::string, std::string>>& defaults() {
  static const std::vector<std::pair<std::string, std::string>> d{
      {"seed", "0"},
      {"dataset", "grayscott"},
      // physical window lengths (frames); odd counts keep the last frame inside the causal stride
      {"window_frames", "21"},
      {"window_stride", "5"},
      {"ae_window_frames", "11"},
      {"ae_window_stride", "5"},
      // encoder/decoder continuous convolutions
      {"grid", "16"},
      {"enc_radius_cells", "1.0"},
      {"dec_radius_cells", "1.5"},
      {"kernel_hidden", "64"},
      {"enc_max_neighbors", "64"},
      {"dec_max_neighbors", "16"},
      {"conv_normalize", "density"},
      // compressor
      {"base_width", "16"},
      {"max_width", "64"},
      {"spatial_levels", "2"},
      {"temporal_levels", "1"},
      {"token_dim", "32"},
      {"groups", "8"},
      {"channel_mlp", "on"},
      // processor
      {"proc_depth", "4"},
      {"proc_hidden", "128"},
      {"proc_heads", "4"},
      {"proc_mlp_ratio", "2"},
      {"mask_channel", "on"},
      // sampling
      {"solver", "midpoint"},
      {"steps", "5"},
      {"clamp_observed", "on"},
      {"context_frames", "4"},
      {"ivp_encode_per_frame", "on"},
      // optimizer
      {"beta1", "0.9"},
      {"beta2", "0.95"},
      {"weight_decay", "1e-4"},
      {"clip_norm", "1.0"},
      {"warmup_steps", "2000"},
      // stage schedules
      {"stage1_epochs", "50"},
      {"stage1_batch", "8"},
      {"stage1_lr", "1e-3"},
      {"stage1_lr_min", "1e-5"},
      {"stage1_subsample_min", "0.2"},
      {"stage1_subsample_max", "0.5"},
      {"stage2_epochs", "5"},
      {"stage2_batch", "8"},
      {"stage2_lr", "1e-4"},
      {"stage2_lr_min", "1e-6"},
      {"stage2_subsample_min", "0.5"},
      {"stage2_subsample_max", "1.0"},
      {"stage3_epochs", "100"},
      {"stage3_batch", "16"},
      {"stage3_lr", "5e-4"},
      {"stage3_lr_min", "1e-5"},
      {"finetune_epochs", "10"},
      {"finetune_lr_scale", "0.1"},
  };
  return d;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& [k, v] : defaults()) values_[k] = v;
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    line = trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  it->second = value;
}

const std::string& RunConfig::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
  return it->second;
}

std::int64_t RunConfig::integer(const std::string& key) const {
  const auto& s = str(key);
  std::int64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw ConfigError(key + ": expected an integer, got '" + s + "'");
  return v;
}

double RunConfig::real(const std::string& key) const {
  const auto& s = str(key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ConfigError(key + ": expected a number, got '" + s + "'");
}

bool RunConfig::flag(const std::string& key) const {
  const auto& s = str(key);
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw ConfigError(key + ": expected on/off, got '" + s + "'");
}

std::string RunConfig::canonical() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
  return out;
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream os(path);
  os << canonical();
  if (!os) throw ConfigError("cannot write config " + path.string());
}

}  // namespace echo
