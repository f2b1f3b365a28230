#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "catfill/data/dataset.hpp"
#include "catfill/model/network.hpp"
#include "catfill/model/params.hpp"
#include "catfill/nd/gradcheck.hpp"
#include "catfill/nd/rng.hpp"

namespace catfill::model {

struct ModelGradCheck {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  std::vector<std::string> names;
  std::vector<double> per_tensor;
};

/// Random check-in sequences for `users` users with lengths in [min_len, max_len].
inline data::Dataset random_dataset(int categories, int users, std::size_t min_len,
                                    std::size_t max_len, std::uint64_t seed) {
  nd::Rng rng(nd::mix_seed(seed, 0xDA7A));
  std::vector<std::string> cats, ids;
  for (int c = 0; c < categories; ++c) cats.push_back("c" + std::to_string(100 + c));
  for (int u = 0; u < users; ++u) ids.push_back("u" + std::to_string(100 + u));
  data::Dataset ds{data::Vocab(cats, ids), {}};
  for (int u = 0; u < users; ++u) {
    data::UserSequence seq;
    seq.user = u;
    const auto len = min_len + rng.below(max_len - min_len + 1);
    for (std::size_t i = 0; i < len; ++i) {
      seq.categories.push_back(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(categories))));
      seq.timestamps.push_back(static_cast<std::int64_t>(i));
    }
    ds.users.push_back(std::move(seq));
  }
  return ds;
}

/// Central-difference check of the full mean cross-entropy on a random batch
/// drawn from a random dataset. Weights are glorot-initialized from `seed`;
/// LSTM biases get a random offset on top of their usual values, because with
/// exactly zero biases an all-PAD window yields a zero feature vector, where
/// the cosine gate is not differentiable.
inline ModelGradCheck check_model_gradient(const Hyperparams& hp, std::uint64_t seed,
                                           std::size_t batch_size = 8, double step = 3e-4) {
  const auto ds = random_dataset(hp.categories, hp.users, hp.window + 2, 3 * hp.window + 4, seed);
  auto samples = data::materialize(ds, hp.window);
  nd::Rng rng(nd::mix_seed(seed, 0xBA7C));
  rng.shuffle(samples);
  samples.resize(std::min(batch_size, samples.size()));

  auto params = initialize(hp, seed);
  for (auto* b : {&params.forward_lstm.bias, &params.backward_lstm.bias})
    for (auto& v : b->values()) v += rng.uniform(-0.5, 0.5);
  Network net(hp, params);
  const ModelParams analytic = net.gradient(samples);
  auto ptrs = params.tensors();
  std::vector<nd::Tensor> grads;
  for (const auto* t : analytic.tensors()) grads.push_back(*t);

  const auto r = nd::finite_diff_check(ptrs, [&] { return net.loss(samples); }, grads, step);
  ModelGradCheck out;
  out.max_rel_error = r.max_rel_error;
  out.names = params.names();
  out.worst_tensor = out.names[r.worst_tensor];
  out.per_tensor = r.per_tensor;
  return out;
}

}  // namespace catfill::model
