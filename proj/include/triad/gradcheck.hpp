#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "triad/error.hpp"
#include "triad/tensor.hpp"

namespace triad {

/// Central-difference gradient estimate (f(x+eps*e_i) - f(x-eps*e_i)) / (2 eps)
/// for every coordinate of `param`. Runs entirely in 64-bit; `f` must be a
/// deterministic function of the current parameter values and must not
/// record onto any tape. Independent of the reverse-mode path by
/// construction: it only re-evaluates f.
inline std::vector<double> finite_diff_gradient(const std::function<double()>& f,
                                                TensorT<double>& param, double eps = 1e-5) {
  if (eps <= 0.0) throw ContractError("finite_diff_gradient: eps must be positive");
  std::vector<double> grad(param.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    double saved = param.data()[i];
    param.data()[i] = saved + eps;
    double up = f();
    param.data()[i] = saved - eps;
    double down = f();
    param.data()[i] = saved;
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

/// Same estimate restricted to a subset of coordinates.
inline std::vector<double> finite_diff_gradient_at(const std::function<double()>& f,
                                                   TensorT<double>& param,
                                                   const std::vector<std::size_t>& coords,
                                                   double eps = 1e-5) {
  if (eps <= 0.0) throw ContractError("finite_diff_gradient: eps must be positive");
  std::vector<double> grad(coords.size());
  for (std::size_t c = 0; c < coords.size(); ++c) {
    std::size_t i = coords[c];
    double saved = param.data()[i];
    param.data()[i] = saved + eps;
    double up = f();
    param.data()[i] = saved - eps;
    double down = f();
    param.data()[i] = saved;
    grad[c] = (up - down) / (2.0 * eps);
  }
  return grad;
}

/// Relative error |a-b| / max(|a|+|b|, floor). Near-zero pairs compare in
/// absolute terms through the floor.
inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), floor);
}

inline double max_relative_error(const std::vector<double>& a, const std::vector<double>& b,
                                 double floor = 1e-6) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, relative_error(a[i], b[i], floor));
  return worst;
}

}  // namespace triad
