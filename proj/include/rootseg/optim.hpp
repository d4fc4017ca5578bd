#pragma once

#include <cmath>
#include <stdexcept>

#include "rootseg/net/unet.hpp"

namespace rootseg {

template <typename T>
struct OptimizerState {
  net::NetworkParams<T> velocity;
  int epoch = 0;

  static OptimizerState for_params(const net::NetworkParams<T>& p) { return {p.zeros_like(), 0}; }
};

class NonFiniteGradient : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Nesterov momentum in look-ahead form:
//   g = grad + wd * theta   (wd skipped for norm scale/shift)
//   v = mu * v - lr * g
//   theta += mu * v - lr * g
template <typename T>
void sgd_nesterov_step(net::NetworkParams<T>& params, const net::NetworkParams<T>& grads, OptimizerState<T>& state,
                       double lr, double momentum, double weight_decay) {
  if (grads.tensors.size() != params.tensors.size() || state.velocity.tensors.size() != params.tensors.size())
    throw std::invalid_argument("sgd_nesterov_step: parameter sets do not match");
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    const auto& gt = grads.tensors[t];
    for (auto v : gt.data)
      if (!std::isfinite(static_cast<double>(v))) throw NonFiniteGradient("non-finite gradient in " + gt.name);
  }
  for (std::size_t t = 0; t < params.tensors.size(); ++t) {
    auto& pt = params.tensors[t];
    auto& vt = state.velocity.tensors[t];
    const auto& gt = grads.tensors[t];
    if (pt.data.size() != gt.data.size() || pt.data.size() != vt.data.size())
      throw std::invalid_argument("sgd_nesterov_step: shape mismatch in " + pt.name);
    const double wd = pt.is_norm ? 0.0 : weight_decay;
    for (std::size_t i = 0; i < pt.data.size(); ++i) {
      const double g = static_cast<double>(gt.data[i]) + wd * pt.data[i];
      const double v = momentum * vt.data[i] - lr * g;
      vt.data[i] = static_cast<T>(v);
      pt.data[i] = static_cast<T>(pt.data[i] + momentum * v - lr * g);
    }
  }
}

}  // namespace rootseg
