#include "echo/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace echo {

namespace {

constexpr std::uint32_t kVersion = 1;

void put_bytes(std::string& out, const void* p, std::size_t n) { out.append(static_cast<const char*>(p), n); }

template <typename V>
void put(std::string& out, V v) {
  put_bytes(out, &v, sizeof v);
}

void put_string(std::string& out, const std::string& s) {
  put(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& buf) : buf_(buf) {}
  void read(void* p, std::size_t n) {
    if (pos_ + n > buf_.size()) throw DataError("checkpoint truncated");
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  template <typename V>
  V get() {
    V v{};
    read(&v, sizeof v);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& buf_;
  std::size_t pos_ = 0;
};

CheckpointEntry f64_entry(const std::string& name, std::vector<double> v) {
  CheckpointEntry e;
  e.name = name;
  e.dtype = 1;
  e.shape = {static_cast<std::int64_t>(v.size())};
  e.f64 = std::move(v);
  return e;
}

CheckpointEntry f32_entry(const std::string& name, const Tensor<float>& t) {
  CheckpointEntry e;
  e.name = name;
  e.shape = t.shape();
  e.f32 = t.to_vector();
  return e;
}

const std::vector<double>& need_f64(const CheckpointFile& ck, const std::string& name) {
  const auto* e = ck.find(name);
  if (!e || e->dtype != 1) throw DataError("checkpoint lacks entry " + name);
  return e->f64;
}

// mt19937_64 state words, bit-cast into doubles for an exact round trip.
std::vector<double> rng_words(const Rng& rng) {
  std::ostringstream os;
  os << rng;
  std::istringstream is(os.str());
  std::vector<double> out;
  std::uint64_t w;
  while (is >> w) out.push_back(std::bit_cast<double>(w));
  return out;
}

Rng rng_from_words(const std::vector<double>& words) {
  std::ostringstream os;
  for (std::size_t i = 0; i < words.size(); ++i) os << (i ? " " : "") << std::bit_cast<std::uint64_t>(words[i]);
  std::istringstream is(os.str());
  Rng rng;
  if (!(is >> rng)) throw DataError("checkpoint RNG state is malformed");
  return rng;
}

}  // namespace

const CheckpointEntry* CheckpointFile::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

void write_checkpoint_file(const CheckpointFile& ck, const std::filesystem::path& path) {
  std::string out = "ECHC";
  put(out, kVersion);
  put_string(out, ck.config);
  put(out, static_cast<std::uint32_t>(ck.entries.size()));
  for (const auto& e : ck.entries) {
    put_string(out, e.name);
    put(out, e.dtype);
    put(out, static_cast<std::uint32_t>(e.shape.size()));
    for (auto d : e.shape) put(out, static_cast<std::uint32_t>(d));
    const auto n = static_cast<std::size_t>(numel(e.shape));
    if (e.dtype == 0) {
      if (e.f32.size() != n) throw DataError("checkpoint entry " + e.name + " size mismatch");
      put_bytes(out, e.f32.data(), n * sizeof(float));
    } else {
      if (e.f64.size() != n) throw DataError("checkpoint entry " + e.name + " size mismatch");
      put_bytes(out, e.f64.data(), n * sizeof(double));
    }
  }
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(out.data()), static_cast<uInt>(out.size())));
  put(out, crc);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    os.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!os) throw DataError("cannot write checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  const std::string buf = ss.str();
  if (buf.size() < 12 || buf.compare(0, 4, "ECHC") != 0) throw DataError(path.string() + " is not a checkpoint");
  std::uint32_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - 4, 4);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), static_cast<uInt>(buf.size() - 4)));
  if (crc != stored) throw DataError(path.string() + ": checkpoint CRC mismatch");
  const std::string body = buf.substr(0, buf.size() - 4);
  Reader r(body);
  char magic[4];
  r.read(magic, 4);
  if (r.get<std::uint32_t>() != kVersion) throw DataError(path.string() + ": unsupported checkpoint version");
  CheckpointFile ck;
  ck.config = r.get_string();
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    CheckpointEntry e;
    e.name = r.get_string();
    e.dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint32_t>();
    for (std::uint32_t a = 0; a < rank; ++a) e.shape.push_back(r.get<std::uint32_t>());
    const auto count = static_cast<std::size_t>(numel(e.shape));
    if (e.dtype == 0) {
      e.f32.resize(count);
      r.read(e.f32.data(), count * sizeof(float));
    } else if (e.dtype == 1) {
      e.f64.resize(count);
      r.read(e.f64.data(), count * sizeof(double));
    } else {
      throw DataError("checkpoint entry " + e.name + " has unknown dtype");
    }
    ck.entries.push_back(std::move(e));
  }
  if (r.pos() != body.size()) throw DataError(path.string() + ": trailing bytes in checkpoint");
  return ck;
}

CheckpointFile make_checkpoint(const EchoModel<float>& model, const RunConfig& run, const Trainer* trainer) {
  CheckpointFile ck;
  ck.config = run.canonical();
  const auto& n = model.normalizer();
  const auto& pc = model.config().proc;
  ck.entries.push_back(f64_entry("stats.field_mean", n.field_mean));
  ck.entries.push_back(f64_entry("stats.field_std", n.field_std));
  ck.entries.push_back(f64_entry("stats.latent_mean", n.latent_mean));
  ck.entries.push_back(f64_entry("stats.latent_std", n.latent_std));
  ck.entries.push_back(f64_entry("stats.gamma_mean", pc.gamma_mean));
  ck.entries.push_back(f64_entry("stats.gamma_std", pc.gamma_std));
  for (const auto& [name, v] : model.store().entries()) ck.entries.push_back(f32_entry("param." + name, v.value()));
  if (trainer) {
    const auto& p = trainer->progress();
    ck.entries.push_back(f64_entry("train.progress", {static_cast<double>(p.stage), static_cast<double>(p.epoch),
                                                      static_cast<double>(p.step)}));
    ck.entries.push_back(f64_entry("train.rng", rng_words(trainer->rng())));
    const auto& opt = trainer->optimizer();
    ck.entries.push_back(f64_entry("adam.steps", {static_cast<double>(opt.steps())}));
    for (std::size_t i = 0; i < trainer->param_names().size(); ++i) {
      ck.entries.push_back(f32_entry("adam.m." + trainer->param_names()[i], opt.first_moments()[i]));
      ck.entries.push_back(f32_entry("adam.v." + trainer->param_names()[i], opt.second_moments()[i]));
    }
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const EchoModel<float>& model, const RunConfig& run,
                     const Trainer* trainer) {
  write_checkpoint_file(make_checkpoint(model, run, trainer), path);
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  LoadedModel out;
  out.file = read_checkpoint_file(path);
  const auto& ck = out.file;
  try {
    out.run = RunConfig::parse(ck.config);
  } catch (const ConfigError& e) {
    throw DataError(path.string() + ": embedded config is invalid: " + e.what());
  }
  DataStats stats;
  stats.field_mean = need_f64(ck, "stats.field_mean");
  stats.field_std = need_f64(ck, "stats.field_std");
  stats.gamma_mean = need_f64(ck, "stats.gamma_mean");
  stats.gamma_std = need_f64(ck, "stats.gamma_std");
  out.model = make_model(out.run, stats);
  out.model->normalizer().latent_mean = need_f64(ck, "stats.latent_mean");
  out.model->normalizer().latent_std = need_f64(ck, "stats.latent_std");
  for (const auto& [name, v] : out.model->store().entries()) {
    const auto* e = ck.find("param." + name);
    if (!e || e->dtype != 0 || e->shape != v.shape())
      throw DataError(path.string() + ": parameter " + name + " missing or mis-shaped");
    auto var = v;
    var.mutable_value() = Tensor<float>(e->shape, e->f32);
  }
  return out;
}

bool restore_trainer(const CheckpointFile& ck, Trainer& trainer) {
  const auto* prog = ck.find("train.progress");
  if (!prog || prog->f64.size() != 3 || static_cast<int>(prog->f64[0]) != trainer.stage()) return false;
  trainer.progress().epoch = static_cast<int>(prog->f64[1]);
  trainer.progress().step = static_cast<std::int64_t>(prog->f64[2]);
  trainer.rng() = rng_from_words(need_f64(ck, "train.rng"));
  auto& opt = trainer.optimizer();
  opt.set_steps(static_cast<std::int64_t>(need_f64(ck, "adam.steps").at(0)));
  for (std::size_t i = 0; i < trainer.param_names().size(); ++i) {
    const auto* m = ck.find("adam.m." + trainer.param_names()[i]);
    const auto* v = ck.find("adam.v." + trainer.param_names()[i]);
    if (!m || !v) throw DataError("checkpoint lacks optimizer moments for " + trainer.param_names()[i]);
    opt.first_moments()[i] = Tensor<float>(m->shape, m->f32);
    opt.second_moments()[i] = Tensor<float>(v->shape, v->f32);
  }
  return true;
}

}  // namespace echo
