#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catfill/data/dataset.hpp"
#include "catfill/error.hpp"
#include "catfill/model/hyperparams.hpp"
#include "catfill/model/params.hpp"
#include "catfill/nd/tape.hpp"

namespace catfill::model {

/// Gate norms below this leave the cell at its neutral weight s = 0.5.
inline constexpr double kMinCellNorm = 1e-12;
/// Probabilities are clamped here before the log in the loss.
inline constexpr double kProbabilityFloor = 1e-30;

struct CellResult {
  std::vector<double> out;
  double s = 0.5;
};

/// cell(a, b) = (1 - s) a + s b with s = 0.5 + 0.5 cos(a, b).
/// Not symmetric: a is the observed feature, b the preference it is matched
/// against.
inline CellResult attention_cell(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ContractError("attention_cell: length mismatch (" + std::to_string(a.size()) + " vs " +
                        std::to_string(b.size()) + ")");
  const double na = nd::norm(a), nb = nd::norm(b);
  CellResult r;
  r.s = (na < kMinCellNorm || nb < kMinCellNorm) ? 0.5 : 0.5 + 0.5 * nd::dot(a, b) / (na * nb);
  r.out.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r.out[i] = (1.0 - r.s) * a[i] + r.s * b[i];
  return r;
}

/// Intermediate values of one forward pass. Fields for a disabled direction
/// are empty and its gate is nullopt.
struct ForwardActivations {
  std::vector<double> l_fwd, l_bwd;  // LSTM outputs (h)
  std::vector<double> h_fwd, h_bwd;  // projected LSTM features (M)
  std::vector<double> g_fwd, g_bwd;  // transition patterns (M)
  std::vector<double> m_fwd, m_bwd;  // per-side cell outputs (M)
  std::vector<double> m;             // fused transition feature (M)
  std::vector<double> p;             // personal preference (M)
  std::vector<double> n;             // preference-matched feature (M)
  std::vector<double> o;             // class probabilities (M)
  std::optional<double> s_fwd, s_bwd;
  double s_user = 0.5;
};

enum class ProbeMode { ForwardPattern, BackwardPattern, BothPatterns, Preference };

inline ProbeMode parse_probe_mode(std::string_view s) {
  if (s == "gf") return ProbeMode::ForwardPattern;
  if (s == "gb") return ProbeMode::BackwardPattern;
  if (s == "gf+gb") return ProbeMode::BothPatterns;
  if (s == "p") return ProbeMode::Preference;
  throw ContractError("unknown probe mode '" + std::string(s) + "' (gf, gb, gf+gb, p)");
}

inline void check_sample(const Hyperparams& hp, const data::Sample& s, bool need_target) {
  auto bad = [&](const std::string& what) {
    throw ContractError("sample (user " + std::to_string(s.user) + ", position " +
                        std::to_string(s.position) + "): " + what);
  };
  if (s.user < 0 || s.user >= hp.users) bad("user index out of range");
  if (s.forward.size() != hp.window || s.backward.size() != hp.window)
    bad("window length differs from w=" + std::to_string(hp.window));
  for (int c : s.forward)
    if (c < 0 || c > hp.categories) bad("forward context index out of range");
  for (int c : s.backward)
    if (c < 0 || c > hp.categories) bad("backward context index out of range");
  if (need_target && (s.target < 1 || s.target > hp.categories)) bad("target is PAD or out of range");
}

/// Raw ranking scores read straight off the embeddings (no softmax).
inline std::vector<double> probe_identify(const data::Sample& sample, const ModelParams& params,
                                          const Hyperparams& hp, ProbeMode mode) {
  check_sample(hp, sample, false);
  const auto M = static_cast<std::size_t>(hp.categories);
  std::vector<double> scores(M, 0.0);
  auto add_tanh_row = [&](const Tensor& t, std::size_t row) {
    const auto r = t.row(row);
    for (std::size_t j = 0; j < M; ++j) scores[j] += std::tanh(r[j]);
  };
  switch (mode) {
    case ProbeMode::ForwardPattern:
      add_tanh_row(params.forward_transition, static_cast<std::size_t>(sample.previous()));
      break;
    case ProbeMode::BackwardPattern:
      add_tanh_row(params.backward_transition, static_cast<std::size_t>(sample.next()));
      break;
    case ProbeMode::BothPatterns:
      add_tanh_row(params.forward_transition, static_cast<std::size_t>(sample.previous()));
      add_tanh_row(params.backward_transition, static_cast<std::size_t>(sample.next()));
      break;
    case ProbeMode::Preference:
      add_tanh_row(params.preference, static_cast<std::size_t>(sample.user));
      break;
  }
  return scores;
}

/// The full network evaluated on a gradient tape.
///
/// Holds a reference to the parameters, which must outlive it; parameter
/// values may change in place between calls (the optimizer does this).
class Network {
 public:
  Network(const Hyperparams& hp, const ModelParams& params)
      : hp_(hp), params_(params), grads_(ModelParams::zeros(hp)) {
    hp_.validate();
    const auto expected = ModelParams::zeros(hp_);
    const auto want = expected.tensors();
    const auto have = params_.tensors();
    const auto names = expected.names();
    for (std::size_t i = 0; i < want.size(); ++i)
      if (!want[i]->same_shape(*have[i]))
        throw ShapeError("network: parameter '" + names[i] + "' has shape " +
                         have[i]->shape_string() + ", expected " + want[i]->shape_string());
    bind();
  }

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  const Hyperparams& hyperparams() const { return hp_; }

  ForwardActivations forward(const data::Sample& sample) {
    check_sample(hp_, sample, false);
    tape_.clear();
    const auto g = build(sample);
    ForwardActivations a;
    auto copy = [&](nd::Tape::Var v) {
      const auto s = tape_.value(v);
      return std::vector<double>(s.begin(), s.end());
    };
    if (g.fwd) {
      a.l_fwd = copy(g.fwd->l);
      a.h_fwd = copy(g.fwd->h);
      a.g_fwd = copy(g.fwd->g);
      a.m_fwd = copy(g.fwd->m);
      a.s_fwd = tape_.value(g.fwd->s)[0];
    }
    if (g.bwd) {
      a.l_bwd = copy(g.bwd->l);
      a.h_bwd = copy(g.bwd->h);
      a.g_bwd = copy(g.bwd->g);
      a.m_bwd = copy(g.bwd->m);
      a.s_bwd = tape_.value(g.bwd->s)[0];
    }
    a.m = copy(g.m);
    a.p = copy(g.p);
    a.n = copy(g.n);
    a.o = copy(g.o);
    a.s_user = tape_.value(g.s_user)[0];
    return a;
  }

  std::vector<double> probabilities(const data::Sample& sample) {
    check_sample(hp_, sample, false);
    tape_.clear();
    const auto o = tape_.value(build(sample).o);
    return {o.begin(), o.end()};
  }

  /// Mean cross-entropy over the batch.
  double loss(std::span<const data::Sample> batch) {
    require(!batch.empty(), "loss: empty batch");
    double total = 0.0;
    for (const auto& s : batch) {
      check_sample(hp_, s, true);
      tape_.clear();
      const auto g = build(s);
      total += tape_.value(tape_.neg_log_pick(g.o, static_cast<std::size_t>(s.target - 1),
                                              kProbabilityFloor))[0];
    }
    const double j = total / static_cast<double>(batch.size());
    if (!std::isfinite(j)) throw NumericError("loss is not finite");
    return j;
  }

  /// Gradient of the mean batch loss; valid until the next call. Per-sample
  /// contributions are accumulated in batch order.
  const ModelParams& gradient(std::span<const data::Sample> batch, double* loss_out = nullptr) {
    require(!batch.empty(), "gradient: empty batch");
    grads_.set_zero();
    const double weight = 1.0 / static_cast<double>(batch.size());
    double total = 0.0;
    for (const auto& s : batch) {
      check_sample(hp_, s, true);
      tape_.clear();
      const auto g = build(s);
      const auto j = tape_.neg_log_pick(g.o, static_cast<std::size_t>(s.target - 1),
                                        kProbabilityFloor);
      total += tape_.value(j)[0];
      tape_.backward(j, weight);
    }
    const double j = total * weight;
    if (!std::isfinite(j)) throw NumericError("loss is not finite");
    if (loss_out) *loss_out = j;
    return grads_;
  }

  const ModelParams& last_gradient() const { return grads_; }

 private:
  using Var = nd::Tape::Var;
  using Param = nd::Tape::Param;

  struct LstmHandles {
    Param input, recurrent, bias;
  };

  struct Side {
    Var l, h, g, m, s;
  };

  struct Graph {
    std::optional<Side> fwd, bwd;
    Var m, p, n, o, s_user;
  };

  void bind() {
    tape_.clear_params();
    std::vector<Param> handles;
    auto grads = grads_.tensors();
    std::size_t k = 0;
    params_.for_each([&](const char*, const Tensor& t) {
      handles.push_back(tape_.register_param(t, *grads[k++]));
    });
    embedding_ = handles[0];
    lstm_[0] = {handles[1], handles[2], handles[3]};
    lstm_[1] = {handles[4], handles[5], handles[6]};
    projection_[0] = handles[7];
    projection_[1] = handles[8];
    transition_[0] = handles[9];
    transition_[1] = handles[10];
    preference_ = handles[11];
    output_ = handles[12];
  }

  /// Single-layer LSTM from a zero state; returns the final hidden state.
  Var lstm(const LstmHandles& w, std::span<const int> window) {
    const std::size_t H = hp_.hidden_dim;
    Var h{}, c{};
    for (std::size_t t = 0; t < window.size(); ++t) {
      const Var x = tape_.gather_row(embedding_, static_cast<std::size_t>(window[t]), true);
      Var z = tape_.matvec(w.input, x);
      if (t > 0) z = tape_.add(z, tape_.matvec(w.recurrent, h));
      z = tape_.add(z, tape_.param(w.bias));
      const Var in_gate = tape_.sigmoid(tape_.slice(z, 0, H));
      const Var forget_gate = tape_.sigmoid(tape_.slice(z, H, H));
      const Var candidate = tape_.tanh(tape_.slice(z, 2 * H, H));
      const Var out_gate = tape_.sigmoid(tape_.slice(z, 3 * H, H));
      const Var fresh = tape_.mul(in_gate, candidate);
      c = t == 0 ? fresh : tape_.add(tape_.mul(forget_gate, c), fresh);
      h = tape_.mul(out_gate, tape_.tanh(c));
    }
    return h;
  }

  std::pair<Var, Var> cell(Var a, Var b) {
    const Var s = tape_.affine(tape_.cosine(a, b, kMinCellNorm), 0.5, 0.5);
    return {tape_.lerp(a, b, s), s};
  }

  Side side(int k, std::span<const int> window, int neighbour) {
    Side sd;
    sd.l = lstm(lstm_[k], window);
    sd.h = tape_.tanh(tape_.matvec(projection_[k], sd.l));
    sd.g = tape_.tanh(tape_.gather_row(transition_[k], static_cast<std::size_t>(neighbour), true));
    std::tie(sd.m, sd.s) = cell(sd.h, sd.g);
    return sd;
  }

  Graph build(const data::Sample& sample) {
    Graph g;
    if (hp_.uses_forward()) g.fwd = side(0, sample.forward, sample.previous());
    if (hp_.uses_backward()) g.bwd = side(1, sample.backward, sample.next());
    g.m = g.fwd && g.bwd ? tape_.add(g.fwd->m, g.bwd->m) : g.fwd ? g.fwd->m : g.bwd->m;
    g.p = tape_.tanh(tape_.gather_row(preference_, static_cast<std::size_t>(sample.user)));
    std::tie(g.n, g.s_user) = cell(g.m, g.p);
    g.o = tape_.softmax(tape_.matvec(output_, g.n));
    return g;
  }

  Hyperparams hp_;
  const ModelParams& params_;
  ModelParams grads_;
  nd::Tape tape_;
  Param embedding_{}, preference_{}, output_{};
  LstmHandles lstm_[2]{};
  Param projection_[2]{}, transition_[2]{};
};

}  // namespace catfill::model
