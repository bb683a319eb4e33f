#pragma once

// Adaptive optimizer with linear learning-rate warm-up.
//
// With the trust-ratio flag on this is LAMB: the Adam-style update of each
// parameter tensor is rescaled by ||w|| / ||update||, clipped to
// [0.01, 10]. With the flag off it degrades to plain Adam. The learning
// rate ramps linearly from 0 to `base_lr` over `warmup_steps` optimizer
// steps and stays constant afterwards, so the very first step (step
// counter 0) applies no update.

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "atgmoe/param_store.hpp"
#include "atgmoe/tensor.hpp"

namespace atgmoe::nc {

struct OptimizerConfig {
  double base_lr = 5e-5;
  int64_t warmup_steps = 2000;
  bool trust_ratio = true;  // LAMB when true, Adam otherwise
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-6;
  double weight_decay = 0.0;
};

template <class S>
class Optimizer {
 public:
  Optimizer(ParamStore<S>& store, OptimizerConfig cfg) : store_(store), cfg_(cfg) {
    m_.resize(store.size());
    v_.resize(store.size());
    for (size_t i = 0; i < store.size(); ++i) {
      m_[i].assign(static_cast<size_t>(store.param(i).numel()), 0.0);
      v_[i].assign(static_cast<size_t>(store.param(i).numel()), 0.0);
    }
  }

  int64_t step_count() const { return step_; }
  void set_step_count(int64_t s) { step_ = s; }

  double current_lr() const {
    if (cfg_.warmup_steps <= 0) return cfg_.base_lr;
    double ramp = std::min(1.0, static_cast<double>(step_) / static_cast<double>(cfg_.warmup_steps));
    return cfg_.base_lr * ramp;
  }

  // Consumes the gradients accumulated in the store and advances one step.
  void step() {
    double lr = current_lr();
    for (size_t i = 0; i < store_.size(); ++i) {
      auto& p = store_.param(i);
      const auto& g = p.grads();
      for (size_t j = 0; j < g.size(); ++j)
        if (!std::isfinite(static_cast<double>(g[j])))
          throw std::runtime_error("optimizer: non-finite gradient in parameter " +
                                   store_.names()[i]);
      auto& m = m_[i];
      auto& v = v_[i];
      double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_ + 1));
      double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_ + 1));
      auto& w = p.mutable_values();
      double wnorm2 = 0.0, unorm2 = 0.0;
      update_.assign(g.size(), 0.0);
      for (size_t j = 0; j < g.size(); ++j) {
        double gj = static_cast<double>(g[j]);
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
        double mhat = m[j] / bc1;
        double vhat = v[j] / bc2;
        double u = mhat / (std::sqrt(vhat) + cfg_.eps) +
                   cfg_.weight_decay * static_cast<double>(w[j]);
        update_[j] = u;
        wnorm2 += static_cast<double>(w[j]) * static_cast<double>(w[j]);
        unorm2 += u * u;
      }
      double ratio = 1.0;
      if (cfg_.trust_ratio && wnorm2 > 0.0 && unorm2 > 0.0) {
        ratio = std::sqrt(wnorm2) / std::sqrt(unorm2);
        ratio = std::clamp(ratio, 0.01, 10.0);
      }
      double stepsize = lr * ratio;
      for (size_t j = 0; j < g.size(); ++j)
        w[j] = static_cast<S>(static_cast<double>(w[j]) - stepsize * update_[j]);
    }
    ++step_;
  }

 private:
  ParamStore<S>& store_;
  OptimizerConfig cfg_;
  int64_t step_ = 0;
  std::vector<std::vector<double>> m_, v_;
  std::vector<double> update_;
};

}  // namespace atgmoe::nc
