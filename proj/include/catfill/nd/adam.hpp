#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "catfill/error.hpp"
#include "catfill/nd/tensor.hpp"

namespace catfill::nd {

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. Moment buffers are created on the first step
/// and must keep matching the parameter shapes afterwards.
class Adam {
 public:
  Adam() = default;
  explicit Adam(AdamOptions options) : options_(options) {}

  const AdamOptions& options() const { return options_; }
  std::uint64_t step_count() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  void step(std::span<Tensor* const> params, std::span<const Tensor* const> grads) {
    if (params.size() != grads.size())
      throw ContractError("Adam::step: " + std::to_string(params.size()) + " params but " +
                          std::to_string(grads.size()) + " gradients");
    if (m_.empty()) {
      for (const Tensor* p : params) {
        m_.emplace_back(p->rows(), p->cols());
        v_.emplace_back(p->rows(), p->cols());
      }
    }
    if (m_.size() != params.size())
      throw ContractError("Adam::step: parameter count changed between steps");
    for (std::size_t k = 0; k < params.size(); ++k) {
      if (!params[k]->same_shape(*grads[k]) || !params[k]->same_shape(m_[k]))
        throw ShapeError("Adam::step: shape mismatch for parameter " + std::to_string(k) + " (" +
                         params[k]->shape_string() + " vs grad " + grads[k]->shape_string() +
                         ")");
    }

    ++step_;
    const auto& o = options_;
    const double t = static_cast<double>(step_);
    const double c1 = 1.0 - std::pow(o.beta1, t);
    const double c2 = 1.0 - std::pow(o.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto x = params[k]->values();
      const auto g = grads[k]->values();
      auto m = m_[k].values();
      auto v = v_[k].values();
      for (std::size_t i = 0; i < x.size(); ++i) {
        m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
        v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
        x[i] -= o.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + o.epsilon);
      }
    }
  }

 private:
  AdamOptions options_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace catfill::nd
