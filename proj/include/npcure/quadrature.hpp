#pragma once

#include "error.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace npcure {

//! `count` equispaced points from lo to hi inclusive.
inline std::vector<double> uniform_grid(double lo, double hi, std::size_t count)
{
  require(count >= 2, "a uniform grid needs at least two points");
  require(hi > lo, "uniform grid bounds must satisfy lo < hi");
  std::vector<double> out(count);
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i)
    out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

//! Trapezoid rule for samples on a uniform grid with spacing dt.
inline double trapezoid(std::span<const double> values, double dt)
{
  if (values.size() < 2)
    return 0.0;
  double inner = 0.0;
  for (std::size_t i = 1; i + 1 < values.size(); ++i)
    inner += values[i];
  return dt * (inner + 0.5 * (values.front() + values.back()));
}

struct QuadratureResult
{
  double value = 0.0;
  double error_estimate = 0.0;
  std::size_t evaluations = 0;
  bool depth_capped = false;
};

namespace detail {

template <class F>
double simpson_step(F& f,
                    double a,
                    double b,
                    double fa,
                    double fm,
                    double fb,
                    double whole,
                    double tol,
                    int depth,
                    QuadratureResult& acc)
{
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  acc.evaluations += 2;
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    if (depth <= 0 && std::abs(delta) > 15.0 * tol)
      acc.depth_capped = true;
    acc.error_estimate += std::abs(delta) / 15.0;
    return left + right + delta / 15.0;
  }
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1, acc) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1, acc);
}

} // namespace detail

//! Adaptive Simpson quadrature with Richardson correction and a recursion cap.
//!
//! The interval is first split into `initial_panels` pieces so that integrands
//! with narrow features are not missed by the coarsest estimate.
template <class F>
QuadratureResult adaptive_simpson(F&& f,
                                  double a,
                                  double b,
                                  double abs_tol = 1e-8,
                                  int max_depth = 40,
                                  int initial_panels = 8)
{
  QuadratureResult acc;
  if (a == b)
    return acc;
  require(std::isfinite(a) && std::isfinite(b), "integration bounds must be finite");
  const double sign = b < a ? -1.0 : 1.0;
  if (b < a)
    std::swap(a, b);

  const double width = (b - a) / initial_panels;
  double fa = f(a);
  acc.evaluations = 1;
  for (int k = 0; k < initial_panels; ++k) {
    const double lo = a + width * k;
    const double hi = k + 1 == initial_panels ? b : a + width * (k + 1);
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    const double fb = f(hi);
    acc.evaluations += 2;
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    acc.value += detail::simpson_step(f, lo, hi, fa, fm, fb, whole, abs_tol / initial_panels, max_depth, acc);
    fa = fb;
  }
  acc.value *= sign;
  return acc;
}

template <class F>
double integrate(F&& f, double a, double b, double abs_tol = 1e-8)
{
  return adaptive_simpson(std::forward<F>(f), a, b, abs_tol).value;
}

//! Adaptive Simpson with tolerance max(abs_floor, rel_tol |I|), where |I| is
//! taken from a 64-panel composite Simpson pass. Suited to integrands carrying
//! rounding noise (difference quotients), where a tiny absolute tolerance
//! would only chase the noise.
template <class F>
double integrate_relative(F&& f, double a, double b, double rel_tol, double abs_floor = 1e-14, int max_depth = 20)
{
  if (a == b)
    return 0.0;
  constexpr int panels = 64;
  const double width = (b - a) / panels;
  double coarse = f(a) + f(b);
  for (int k = 1; k < 2 * panels; ++k)
    coarse += (k % 2 ? 4.0 : 2.0) * f(a + 0.5 * width * k);
  coarse *= width / 6.0;
  const double tol = std::max(abs_floor, rel_tol * std::abs(coarse));
  return adaptive_simpson(std::forward<F>(f), a, b, tol, max_depth).value;
}

} // namespace npcure
