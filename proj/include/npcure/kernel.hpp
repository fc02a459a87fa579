#pragma once

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace npcure {

enum class KernelShape
{
  epanechnikov,
  biweight,
};

//! Symmetric density kernel vanishing outside (-1, 1).
struct Kernel
{
  KernelShape shape = KernelShape::epanechnikov;

  double operator()(double u) const noexcept
  {
    if (!(std::abs(u) < 1.0))
      return 0.0;
    const double v = 1.0 - u * u;
    switch (shape) {
      case KernelShape::epanechnikov: return 0.75 * v;
      case KernelShape::biweight: return 0.9375 * v * v;
    }
    return 0.0;
  }

  //! d_K = int u^2 K(u) du
  double second_moment() const noexcept
  {
    switch (shape) {
      case KernelShape::epanechnikov: return 0.2;
      case KernelShape::biweight: return 1.0 / 7.0;
    }
    return 0.0;
  }

  //! c_K = int K(u)^2 du
  double roughness() const noexcept
  {
    switch (shape) {
      case KernelShape::epanechnikov: return 0.6;
      case KernelShape::biweight: return 5.0 / 7.0;
    }
    return 0.0;
  }
};

inline double kernel_eval(const Kernel& k, double u) noexcept
{
  return k(u);
}

//! Rescaled kernel K_h(u) = K(u / h) / h.
inline double kernel_scaled(const Kernel& k, double u, double h) noexcept
{
  return k(u / h) / h;
}

struct WeightVector
{
  std::vector<double> weights;
  //! Set when no sample point lies within one bandwidth of x; weights are all zero.
  bool empty = false;
};

//! Nadaraya-Watson weights at x.
inline WeightVector nw_weights(const Kernel& k,
                               double x,
                               std::span<const double> xs,
                               double h)
{
  require(h > 0.0 && std::isfinite(h), "bandwidth must be positive");
  require(!xs.empty(), "covariate vector must be nonempty");

  WeightVector out;
  out.weights.resize(xs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out.weights[i] = k((x - xs[i]) / h);
    total += out.weights[i];
  }
  if (total <= 0.0) {
    out.empty = true;
    std::fill(out.weights.begin(), out.weights.end(), 0.0);
    return out;
  }
  for (auto& w : out.weights)
    w /= total;
  return out;
}

} // namespace npcure
