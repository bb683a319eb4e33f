#pragma once

// Shared test utilities: finite-difference gradient oracles and random
// tensor construction. The oracles are independent of the autodiff path
// they check: they evaluate the forward function twice per probe.

#include <cmath>
#include <functional>
#include <vector>

#include "atgmoe/random.hpp"
#include "atgmoe/tensor.hpp"

namespace testsup {

using atgmoe::Rng;
using atgmoe::nc::Shape;
using atgmoe::nc::Tensor;

inline Tensor<double> random_tensor(Shape shape, Rng& rng, bool requires_grad = true,
                                    double scale = 1.0) {
  std::vector<double> data(static_cast<size_t>(atgmoe::nc::shape_numel(shape)));
  for (auto& v : data) v = rng.normal(0.0, scale);
  return Tensor<double>::from_data(std::move(shape), std::move(data), requires_grad);
}

// Central finite differences of a scalar-valued function w.r.t. one input
// tensor, perturbing every element. `forward` must rebuild the graph from
// the supplied leaf values.
inline std::vector<double> finite_diff(
    const std::function<double(const std::vector<double>&)>& forward,
    const std::vector<double>& x0, double h = 1e-5) {
  std::vector<double> g(x0.size());
  std::vector<double> x = x0;
  for (size_t i = 0; i < x0.size(); ++i) {
    double step = h * std::max(1.0, std::abs(x0[i]));
    x[i] = x0[i] + step;
    double fp = forward(x);
    x[i] = x0[i] - step;
    double fm = forward(x);
    x[i] = x0[i];
    g[i] = (fp - fm) / (2 * step);
  }
  return g;
}

// Largest relative error between analytic and finite-difference gradients.
inline double max_rel_err(const std::vector<double>& analytic, const std::vector<double>& fd) {
  double worst = 0;
  for (size_t i = 0; i < analytic.size(); ++i) {
    double denom = std::max({std::abs(analytic[i]), std::abs(fd[i]), 1e-6});
    worst = std::max(worst, std::abs(analytic[i] - fd[i]) / denom);
  }
  return worst;
}

// Checks d(sum of f(x))/dx against central differences; returns the max
// relative error.
inline double gradcheck(
    const std::function<Tensor<double>(const Tensor<double>&)>& f, Shape shape, Rng& rng,
    double h = 1e-5) {
  auto x = random_tensor(shape, rng);
  auto loss = atgmoe::nc::sum(f(x));
  atgmoe::nc::backward(loss);
  std::vector<double> analytic = x.grads();
  auto fd = finite_diff(
      [&](const std::vector<double>& vals) {
        auto xt = Tensor<double>::from_data(shape, vals, false);
        return atgmoe::nc::sum(f(xt)).item();
      },
      x.values(), h);
  return max_rel_err(analytic, fd);
}

}  // namespace testsup
