#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "catfill/data/bundle.hpp"
#include "catfill/error.hpp"
#include "catfill/model/hyperparams.hpp"
#include "catfill/nd/init.hpp"
#include "catfill/nd/tensor.hpp"

namespace catfill::model {

using nd::Tensor;

/// Gate blocks are stacked as [input; forget; candidate; output], h rows each.
struct LstmParams {
  Tensor input;      // 4h x d
  Tensor recurrent;  // 4h x h
  Tensor bias;       // 4h x 1
};

/// Every learnable array of the network. Row 0 of the category embedding and
/// of both transition embeddings belongs to PAD: it stays zero and never
/// receives gradient.
struct ModelParams {
  Tensor category_embedding;   // (M+1) x d
  LstmParams forward_lstm;
  LstmParams backward_lstm;
  Tensor forward_projection;   // M x h
  Tensor backward_projection;  // M x h
  Tensor forward_transition;   // (M+1) x M
  Tensor backward_transition;  // (M+1) x M
  Tensor preference;           // N x M
  Tensor output;               // M x M

  static ModelParams zeros(const Hyperparams& hp) {
    hp.validate();
    const auto M = static_cast<std::size_t>(hp.categories);
    const auto N = static_cast<std::size_t>(hp.users);
    const auto d = hp.embed_dim, h = hp.hidden_dim;
    auto lstm = [&] { return LstmParams{Tensor(4 * h, d), Tensor(4 * h, h), Tensor(4 * h, 1)}; };
    return ModelParams{Tensor(M + 1, d), lstm(), lstm(), Tensor(M, h), Tensor(M, h),
                       Tensor(M + 1, M), Tensor(M + 1, M), Tensor(N, M), Tensor(M, M)};
  }

  /// Visits (name, tensor) in a fixed order shared by checkpoints, the
  /// optimizer and gradient checks.
  template <class Self, class Fn>
  static void visit(Self& self, Fn&& fn) {
    fn("category_embedding", self.category_embedding);
    fn("forward_lstm.input", self.forward_lstm.input);
    fn("forward_lstm.recurrent", self.forward_lstm.recurrent);
    fn("forward_lstm.bias", self.forward_lstm.bias);
    fn("backward_lstm.input", self.backward_lstm.input);
    fn("backward_lstm.recurrent", self.backward_lstm.recurrent);
    fn("backward_lstm.bias", self.backward_lstm.bias);
    fn("forward_projection", self.forward_projection);
    fn("backward_projection", self.backward_projection);
    fn("forward_transition", self.forward_transition);
    fn("backward_transition", self.backward_transition);
    fn("preference", self.preference);
    fn("output", self.output);
  }

  template <class Fn>
  void for_each(Fn&& fn) {
    visit(*this, std::forward<Fn>(fn));
  }
  template <class Fn>
  void for_each(Fn&& fn) const {
    visit(*this, std::forward<Fn>(fn));
  }

  std::vector<Tensor*> tensors() {
    std::vector<Tensor*> out;
    for_each([&](const char*, Tensor& t) { out.push_back(&t); });
    return out;
  }

  std::vector<const Tensor*> tensors() const {
    std::vector<const Tensor*> out;
    for_each([&](const char*, const Tensor& t) { out.push_back(&t); });
    return out;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for_each([&](const char* n, const Tensor&) { out.emplace_back(n); });
    return out;
  }

  void set_zero() {
    for_each([](const char*, Tensor& t) { t.fill(0.0); });
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const char*, const Tensor& t) { ok = ok && t.all_finite(); });
    return ok;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    const auto ta = a.tensors();
    const auto tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i)
      if (!(*ta[i] == *tb[i])) return false;
    return true;
  }
};

inline void zero_pad_rows(ModelParams& p) {
  for (auto* t : {&p.category_embedding, &p.forward_transition, &p.backward_transition})
    for (auto& v : t->row(0)) v = 0.0;
}

/// Glorot-uniform weights in visit order from one seeded stream, zero LSTM
/// biases except the forget block (1.0), PAD rows zeroed.
inline ModelParams initialize(const Hyperparams& hp, std::uint64_t seed) {
  auto params = ModelParams::zeros(hp);
  nd::Rng rng(nd::mix_seed(seed, 0x1417));
  const std::size_t h = hp.hidden_dim;
  params.for_each([&](const char* name, Tensor& t) {
    if (std::string_view(name).ends_with(".bias")) {
      for (std::size_t i = h; i < 2 * h; ++i) t[i] = 1.0;
      return;
    }
    t = nd::glorot_uniform(t.rows(), t.cols(), rng);
  });
  zero_pad_rows(params);
  return params;
}

// ---------------------------------------------------------------------------
// Checkpoints: <dir>/manifest.txt plus one <name>.bin per tensor. Each .bin is
// uint64 rows, uint64 cols, then rows*cols doubles, all little-endian.

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  Hyperparams hyperparams;
  std::uint64_t seed = 0;
  ModelParams params;
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b;
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(i)] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

inline std::uint64_t get_u64(std::istream& in) {
  std::array<unsigned char, 8> b{};
  in.read(reinterpret_cast<char*>(b.data()), 8);
  if (!in) throw DataError("checkpoint: truncated tensor file");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ck) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.txt", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint manifest in '" + dir.string() + "'");
    const auto& hp = ck.hyperparams;
    out << "format_version=" << kCheckpointFormatVersion << "\n"
        << "categories=" << hp.categories << "\n"
        << "users=" << hp.users << "\n"
        << "embed_dim=" << hp.embed_dim << "\n"
        << "hidden_dim=" << hp.hidden_dim << "\n"
        << "window=" << hp.window << "\n"
        << "direction=" << to_string(hp.direction) << "\n"
        << "preference_init=" << to_string(hp.preference_init) << "\n"
        << "seed=" << ck.seed << "\n";
  }
  ck.params.for_each([&](const char* name, const Tensor& t) {
    std::ofstream out(dir / (std::string(name) + ".bin"), std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write tensor '" + std::string(name) + "'");
    detail::put_u64(out, t.rows());
    detail::put_u64(out, t.cols());
    for (double v : t.values()) detail::put_u64(out, std::bit_cast<std::uint64_t>(v));
  });
}

inline Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir))
    throw IoError("checkpoint '" + dir.string() + "' does not exist");
  const auto kv = data::read_key_values(dir / "manifest.txt");
  auto get = [&](const std::string& key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw DataError("checkpoint manifest: missing key '" + key + "'");
    return it->second;
  };
  if (std::stoi(get("format_version")) != kCheckpointFormatVersion)
    throw DataError("checkpoint: unsupported format_version " + get("format_version"));
  Checkpoint ck;
  auto& hp = ck.hyperparams;
  hp.categories = std::stoi(get("categories"));
  hp.users = std::stoi(get("users"));
  hp.embed_dim = std::stoull(get("embed_dim"));
  hp.hidden_dim = std::stoull(get("hidden_dim"));
  hp.window = std::stoull(get("window"));
  hp.direction = parse_direction(get("direction"));
  hp.preference_init = parse_preference_init(get("preference_init"));
  ck.seed = std::stoull(get("seed"));
  ck.params = ModelParams::zeros(hp);
  ck.params.for_each([&](const char* name, Tensor& t) {
    const auto file = dir / (std::string(name) + ".bin");
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("checkpoint: missing tensor file '" + file.string() + "'");
    const auto rows = detail::get_u64(in);
    const auto cols = detail::get_u64(in);
    if (rows != t.rows() || cols != t.cols())
      throw ShapeError("checkpoint: tensor '" + std::string(name) + "' has shape " +
                       std::to_string(rows) + "x" + std::to_string(cols) + ", expected " +
                       t.shape_string());
    for (auto& v : t.values()) v = std::bit_cast<double>(detail::get_u64(in));
    if (in.peek() != std::char_traits<char>::eof())
      throw DataError("checkpoint: trailing bytes in '" + file.string() + "'");
  });
  if (!ck.params.all_finite()) throw NumericError("checkpoint: non-finite parameter values");
  return ck;
}

}  // namespace catfill::model
