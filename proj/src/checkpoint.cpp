#include "dqt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "dqt/error.hpp"

namespace dqt {

namespace {

constexpr char kMagic[8] = {'D', 'Q', 'T', 'C', 'K', 'P', 'T', '\0'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint64_t>(s.size()));
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void tensor(const Tensor& t) {
    pod(static_cast<std::uint64_t>(t.rank()));
    for (auto d : t.shape()) pod(static_cast<std::uint64_t>(d));
    out_.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof v);
    check();
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    if (n > (1ull << 32)) throw DataError(path_ + ": corrupt string length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  Tensor tensor() {
    const auto rank = pod<std::uint64_t>();
    if (rank > 8) throw DataError(path_ + ": corrupt tensor rank");
    Shape shape;
    for (std::uint64_t i = 0; i < rank; ++i) shape.push_back(pod<std::uint64_t>());
    Tensor t(shape);
    in_.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    check();
    return t;
  }

 private:
  void check() {
    if (!in_) throw DataError(path_ + ": truncated checkpoint");
  }
  std::istream& in_;
  std::string path_;
};

void write_params(Writer& w, const ParamSet& params) {
  w.pod(static_cast<std::int64_t>(params.step));
  w.pod(static_cast<std::uint64_t>(params.count()));
  for (const auto& p : params) {
    w.str(p.name);
    w.str(p.component);
    w.tensor(p.value);
    const bool moments = p.has_optimizer_state();
    w.pod(static_cast<std::uint8_t>(moments));
    if (moments) {
      w.tensor(p.m);
      w.tensor(p.v);
    }
  }
}

ParamSet read_params(Reader& r) {
  ParamSet params;
  params.step = r.pod<std::int64_t>();
  const auto count = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    auto name = r.str();
    auto component = r.str();
    Tensor value = r.tensor();
    auto& p = params.add(std::move(name), std::move(component), value.shape());
    p.value = std::move(value);
    if (r.pod<std::uint8_t>() != 0) {
      p.m = r.tensor();
      p.v = r.tensor();
    }
  }
  return params;
}

}  // namespace

std::string Checkpoint::encode_rng(const std::mt19937_64& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

std::mt19937_64 Checkpoint::decode_rng(const std::string& state) {
  std::mt19937_64 rng;
  if (state.empty()) return rng;
  std::istringstream in(state);
  in >> rng;
  if (!in) throw DataError("corrupt RNG state in checkpoint");
  return rng;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.pod(kCheckpointVersion);
  w.pod(ckpt.episode);
  w.pod(ckpt.learning_rate);
  w.str(ckpt.rng_state);
  w.str(ckpt.config_json);
  write_params(w, ckpt.online);
  write_params(w, ckpt.target);
  if (!out) throw DataError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw DataError(path.string() + ": not a checkpoint");
  Reader r(in, path.string());
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.episode = r.pod<std::int64_t>();
  c.learning_rate = r.pod<double>();
  c.rng_state = r.str();
  c.config_json = r.str();
  c.online = read_params(r);
  c.target = read_params(r);
  return c;
}

}  // namespace dqt
