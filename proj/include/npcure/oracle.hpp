#pragma once

#include "error.hpp"
#include "kernel.hpp"
#include "models.hpp"
#include "quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace npcure {

//! Population-level distribution functions of (T, delta) given X = x for a
//! known model, with a support guard on 1 - H(t | x).
class PopulationFunctions
{
public:
  explicit PopulationFunctions(ModelSpec spec, double guard = 1e-3)
    : spec_(std::move(spec))
    , guard_(guard)
  {
    require(guard_ > 0.0 && guard_ < 1.0, "support guard must lie in (0, 1)");
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  double guard() const noexcept { return guard_; }

  double uncure_probability(double x) const { return spec_.uncure_probability(x); }

  //! Improper survival S(t | x) = 1 - p(x) + p(x) S_0(t | x).
  double survival(double t, double x) const
  {
    const double p = spec_.uncure_probability(x);
    return 1.0 - p + p * spec_.latency(t, x);
  }

  double censoring_survival(double t) const { return spec_.censoring.survival(t); }

  //! H(t | x) = P(T <= t | X = x), from 1 - H = S (1 - G).
  double observed_cdf(double t, double x) const
  {
    return 1.0 - survival(t, x) * censoring_survival(t);
  }

  //! d H^1(t | x) / dt = (1 - G(t)) p(x) f_0(t | x).
  double event_subdensity(double t, double x) const
  {
    return censoring_survival(t) * spec_.uncure_probability(x) * spec_.latency_density(t, x);
  }

  //! H^1(t | x) = P(T <= t, delta = 1 | X = x), by quadrature.
  double event_subdistribution(double t, double x) const
  {
    if (t <= 0.0)
      return 0.0;
    const double upper = std::min(t, spec_.event_horizon(x));
    return integrate([&](double u) { return event_subdensity(u, x); }, 0.0, upper, 1e-12);
  }

  //! P(T <= t, delta = 0 | X = x) = int_0^t S(u | x) dG(u), by quadrature.
  double censoring_subdistribution(double t, double x) const
  {
    if (t <= 0.0)
      return 0.0;
    return integrate([&](double u) { return survival(u, x) * spec_.censoring.density(u); }, 0.0, t, 1e-12);
  }

  double covariate_density(double x) const { return spec_.covariate.density(x); }
  double covariate_density_derivative(double x) const { return spec_.covariate.density_derivative(x); }

  //! Finite stand-in for t = infinity: no events occur after it.
  double horizon(double x) const { return spec_.event_horizon(x); }

  //! Maps t = +inf to the horizon and enforces 1 - H(t | x) >= guard.
  double resolve(double t, double x) const
  {
    require(t >= 0.0, "time must be nonnegative");
    const double tt = std::isinf(t) ? horizon(x) : std::min(t, horizon(x));
    const double tail = 1.0 - observed_cdf(tt, x);
    if (tail < guard_)
      throw Error(ErrorKind::support_guard,
                  "1 - H(" + std::to_string(tt) + " | " + std::to_string(x) + ") = " + std::to_string(tail) +
                    " is below " + std::to_string(guard_));
    return tt;
  }

private:
  ModelSpec spec_;
  double guard_;
};

inline PopulationFunctions population_from_model(const ModelSpec& spec, double guard = 1e-3)
{
  return PopulationFunctions(spec, guard);
}

//! xi(T, delta, t, x), the summand of the i.i.d. representation of the
//! conditional cumulative hazard estimate.
inline double xi(const PopulationFunctions& pop, double time, bool delta, double t, double x)
{
  const double tt = std::isinf(t) ? pop.horizon(x) : t;
  double jump = 0.0;
  if (delta && time <= tt)
    jump = 1.0 / (1.0 - pop.observed_cdf(time, x));
  const double upper = std::min(tt, time);
  const double compensator = upper <= 0.0 ? 0.0 : integrate(
    [&](double u) {
      const double tail = 1.0 - pop.observed_cdf(u, x);
      return pop.event_subdensity(u, x) / (tail * tail);
    },
    0.0, upper, 1e-11);
  return jump - compensator;
}

//! Phi(y, t, x) = E[xi(T, delta, t, x) | X = y] in closed integral form.
//! Vanishes on the diagonal y = x.
inline double phi(const PopulationFunctions& pop, double y, double t, double x, double abs_tol = 1e-8)
{
  const double tt = pop.resolve(t, x);
  pop.resolve(tt, y);
  const double first = integrate(
    [&](double v) { return pop.event_subdensity(v, y) / (1.0 - pop.observed_cdf(v, x)); }, 0.0, tt, abs_tol);
  const double second = integrate(
    [&](double v) {
      const double tail = 1.0 - pop.observed_cdf(v, x);
      return (1.0 - pop.observed_cdf(v, y)) * pop.event_subdensity(v, x) / (tail * tail);
    },
    0.0, tt, abs_tol);
  return first - second;
}

//! Diagonal second moment int_0^t dH^1(v | x) / (1 - H(v | x))^2.
inline double phi1(const PopulationFunctions& pop, double t, double x, double abs_tol = 1e-10)
{
  const double tt = pop.resolve(t, x);
  return integrate(
    [&](double v) {
      const double tail = 1.0 - pop.observed_cdf(v, x);
      return pop.event_subdensity(v, x) / (tail * tail);
    },
    0.0, tt, abs_tol);
}

//! Diagonal cross moment E[xi(t) xi(inf) | X = x]; same closed form as phi1.
inline double phi2(const PopulationFunctions& pop, double t, double x, double abs_tol = 1e-10)
{
  return phi1(pop, t, x, abs_tol);
}

struct Phi2Decomposition
{
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;

  double value() const noexcept { return a - b - c + d; }
};

//! Phi_2(y, t, x) from its four-term expansion, each term by nested
//! quadrature. Independent of phi1/phi2, which use the collapsed diagonal form.
inline Phi2Decomposition phi2_decomposition(const PopulationFunctions& pop,
                                            double y,
                                            double t,
                                            double x,
                                            double abs_tol = 1e-10)
{
  const double tt = pop.resolve(t, x);
  const double inf = pop.resolve(std::numeric_limits<double>::infinity(), x);
  pop.resolve(tt, y);
  const double inner_tol = abs_tol * 0.1;

  auto tail_x = [&](double v) { return 1.0 - pop.observed_cdf(v, x); };
  auto tail_y = [&](double v) { return 1.0 - pop.observed_cdf(v, y); };
  // dH^1(v | x) / (1 - H(v | x))^2
  auto weight_x = [&](double v) {
    const double s = tail_x(v);
    return pop.event_subdensity(v, x) / (s * s);
  };
  // dH^1(v | y) / (1 - H(v | x))
  auto ratio_y = [&](double v) { return pop.event_subdensity(v, y) / tail_x(v); };

  Phi2Decomposition out;
  out.a = integrate([&](double v) { return pop.event_subdensity(v, y) / (tail_x(v) * tail_x(v)); }, 0.0, tt, abs_tol);
  out.b = integrate([&](double u) { return integrate(ratio_y, u, tt, inner_tol) * weight_x(u); }, 0.0, tt, abs_tol);
  out.c = integrate([&](double v) { return integrate(ratio_y, v, inf, inner_tol) * weight_x(v); }, 0.0, tt, abs_tol);
  out.d = integrate(
    [&](double v) {
      // 1 - H(max(u, v) | y) is constant in u below v
      const double below = tail_y(v) * integrate(weight_x, 0.0, v, inner_tol);
      const double above = integrate([&](double u) { return tail_y(u) * weight_x(u); }, v, inf, inner_tol);
      return (below + above) * weight_x(v);
    },
    0.0, tt, abs_tol);
  return out;
}

//! First and second y-derivatives of Phi(y, t, x) at y = x.
struct PhiDerivatives
{
  double first = 0.0;
  double second = 0.0;
  //! Largest relative change of either derivative when the step is halved.
  double richardson_change = 0.0;
};

namespace detail {

inline PhiDerivatives phi_derivatives_with_step(const PopulationFunctions& pop, double tt, double x, double step)
{
  auto sub = [&](double v, double y) { return pop.event_subdensity(v, y); };
  auto cdf = [&](double v, double y) { return pop.observed_cdf(v, y); };
  // Differentiating under the integral sign keeps quadrature noise out of
  // the difference quotients; the y-derivatives of the integrand are central
  // differences of closed-form functions.
  auto integrand = [&](double v, int order) {
    const double tail = 1.0 - cdf(v, x);
    double dsub = 0.0;
    double dcdf = 0.0;
    if (order == 1) {
      dsub = (sub(v, x + step) - sub(v, x - step)) / (2.0 * step);
      dcdf = (cdf(v, x + step) - cdf(v, x - step)) / (2.0 * step);
    } else {
      dsub = (sub(v, x + step) - 2.0 * sub(v, x) + sub(v, x - step)) / (step * step);
      dcdf = (cdf(v, x + step) - 2.0 * cdf(v, x) + cdf(v, x - step)) / (step * step);
    }
    // d/dy of [sub(v|y) / tail(v|x) - (1 - H(v|y)) sub(v|x) / tail(v|x)^2]
    return dsub / tail + dcdf * sub(v, x) / (tail * tail);
  };
  PhiDerivatives d;
  d.first = integrate_relative([&](double v) { return integrand(v, 1); }, 0.0, tt, 1e-9);
  d.second = integrate_relative([&](double v) { return integrand(v, 2); }, 0.0, tt, 1e-6);
  return d;
}

} // namespace detail

//! Phi'(x, t, x) and Phi''(x, t, x) by central differences in y with step
//! max(1e-4, 1e-4 |x|), checked against the half step.
inline PhiDerivatives phi_derivatives(const PopulationFunctions& pop, double t, double x)
{
  const double tt = pop.resolve(t, x);
  const double step = std::max(1e-4, 1e-4 * std::abs(x));
  auto full = detail::phi_derivatives_with_step(pop, tt, x, step);
  const auto half = detail::phi_derivatives_with_step(pop, tt, x, 0.5 * step);
  auto rel = [](double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
  };
  full.richardson_change = std::max(rel(full.first, half.first), rel(full.second, half.second));
  return full;
}

//! Which composition of the five bias/variance terms to use.
//!
//! `as_published` is B = B1 + B2, V = V1 + V2 + 2 V3 with d_K in the AMSE
//! bias term. `sign_corrected` linearizes the latency estimator directly:
//! its derivative with respect to the incidence estimate has the opposite
//! sign, giving B = B1 - B2, V = V1 + V2 - 2 V3 and the squared d_K that the
//! bias expansion produces. Only the corrected form gives zero asymptotic
//! variance beyond the event support, where the estimator is identically 0.
enum class AmseComposition
{
  sign_corrected,
  as_published,
};

struct BiasVarianceTerms
{
  double b1 = 0.0;
  double b2 = 0.0;
  double v1 = 0.0;
  double v2 = 0.0;
  double v3 = 0.0;
  double richardson_change = 0.0;

  double bias(AmseComposition c = AmseComposition::sign_corrected) const noexcept
  {
    return c == AmseComposition::sign_corrected ? b1 - b2 : b1 + b2;
  }
  double variance(AmseComposition c = AmseComposition::sign_corrected) const noexcept
  {
    return c == AmseComposition::sign_corrected ? v1 + v2 - 2.0 * v3 : v1 + v2 + 2.0 * v3;
  }
};

//! Terms at t = infinity shared by every t at one covariate value.
struct TailTerms
{
  double phi_first = 0.0;
  double phi_second = 0.0;
  double phi1 = 0.0;
  double richardson_change = 0.0;
};

inline TailTerms tail_terms(const PopulationFunctions& pop, double x)
{
  const double inf = std::numeric_limits<double>::infinity();
  const auto d = phi_derivatives(pop, inf, x);
  return TailTerms{d.first, d.second, phi1(pop, inf, x), d.richardson_change};
}

inline BiasVarianceTerms bias_variance_terms(const PopulationFunctions& pop,
                                             double t,
                                             double x,
                                             const TailTerms* tail = nullptr)
{
  const double m = pop.covariate_density(x);
  if (!(m > 0.0))
    throw Error(ErrorKind::degenerate_density, "covariate density is zero at x = " + std::to_string(x));
  const double dm = pop.covariate_density_derivative(x);
  const double p = pop.uncure_probability(x);
  if (!(p > 0.0))
    throw Error(ErrorKind::degenerate_cure, "p(x) = 0 at x = " + std::to_string(x));
  const double s = pop.survival(t, x);
  const double cured = 1.0 - p;

  BiasVarianceTerms out;
  const auto d = phi_derivatives(pop, t, x);
  const double f1 = phi1(pop, t, x);
  out.richardson_change = d.richardson_change;
  out.b1 = s / (p * m) * (d.second * m + 2.0 * d.first * dm);
  out.v1 = (s / p) * (s / p) * f1 / m;

  const double tail_factor = cured * (1.0 - s);
  if (tail_factor != 0.0) {
    TailTerms local;
    if (!tail) {
      local = tail_terms(pop, x);
      tail = &local;
    }
    out.b2 = tail_factor / (p * p * m) * (tail->phi_second * m + 2.0 * tail->phi_first * dm);
    const double a2 = tail_factor / (p * p);
    out.v2 = a2 * a2 * tail->phi1 / m;
    out.v3 = cured * s * (1.0 - s) / (p * p * p * m) * f1;
    out.richardson_change = std::max(out.richardson_change, tail->richardson_change);
  }
  return out;
}

struct AmseReport
{
  double t = 0.0;
  double x = 0.0;
  double h = 0.0;
  double n = 0.0;
  BiasVarianceTerms terms;
  AmseComposition composition = AmseComposition::sign_corrected;
  double bias = 0.0;      //!< B(t, x)
  double variance = 0.0;  //!< V(t, x)
  double bias_term = 0.0; //!< squared-bias contribution
  double variance_term = 0.0;
  double amse = 0.0;
};

inline double bias_constant(const Kernel& kernel, AmseComposition c)
{
  const double dk = kernel.second_moment();
  return c == AmseComposition::sign_corrected ? dk * dk : dk;
}

inline AmseReport amse(const PopulationFunctions& pop,
                       double t,
                       double x,
                       double h,
                       double n,
                       const Kernel& kernel = {},
                       AmseComposition composition = AmseComposition::sign_corrected)
{
  require(h > 0.0, "bandwidth must be positive");
  require(n >= 1.0, "sample size must be at least 1");
  AmseReport r;
  r.t = t;
  r.x = x;
  r.h = h;
  r.n = n;
  r.composition = composition;
  r.terms = bias_variance_terms(pop, t, x);
  r.bias = r.terms.bias(composition);
  r.variance = r.terms.variance(composition);
  r.bias_term = std::pow(h, 4) / 4.0 * bias_constant(kernel, composition) * r.bias * r.bias;
  r.variance_term = kernel.roughness() / (n * h) * r.variance;
  r.amse = r.bias_term + r.variance_term;
  return r;
}

struct TimeRange
{
  double lo = 0.0;
  double hi = 0.0;
};

//! [eps, q] with S_0(q | x) = 0.05.
inline TimeRange default_time_range(const PopulationFunctions& pop, double x)
{
  double lo = 0.0;
  double hi = pop.horizon(x);
  for (int i = 0; i < 200 && hi - lo > 1e-12 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (pop.spec().latency(mid, x) > 0.05)
      lo = mid;
    else
      hi = mid;
  }
  return TimeRange{1e-6 * hi, hi};
}

struct AmiseIntegrals
{
  double squared_bias = 0.0; //!< int B^2 dt
  double variance = 0.0;     //!< int V dt
};

inline AmiseIntegrals amise_integrals(const PopulationFunctions& pop,
                                      double x,
                                      TimeRange range,
                                      AmseComposition composition = AmseComposition::sign_corrected)
{
  require(range.hi > range.lo && range.lo >= 0.0, "time range must satisfy 0 <= lo < hi");
  pop.resolve(range.hi, x);
  const auto tail = tail_terms(pop, x);
  AmiseIntegrals out;
  out.squared_bias = integrate(
    [&](double t) {
      const double b = bias_variance_terms(pop, t, x, &tail).bias(composition);
      return b * b;
    },
    range.lo, range.hi, 1e-8);
  out.variance = integrate(
    [&](double t) { return bias_variance_terms(pop, t, x, &tail).variance(composition); }, range.lo, range.hi,
    1e-8);
  return out;
}

//! h = (c_K int V / (d_K^2 int B^2))^(1/5) n^(-1/5).
inline double h_amise(const AmiseIntegrals& integrals, double n, const Kernel& kernel = {})
{
  require(n >= 1.0, "sample size must be at least 1");
  if (!(integrals.squared_bias > 0.0))
    throw Error(ErrorKind::bias_free, "integrated squared bias is zero");
  const double dk = kernel.second_moment();
  return std::pow(kernel.roughness() * integrals.variance / (dk * dk * integrals.squared_bias), 0.2) *
         std::pow(n, -0.2);
}

inline double h_amise(const PopulationFunctions& pop,
                      double x,
                      double n,
                      TimeRange range,
                      const Kernel& kernel = {},
                      AmseComposition composition = AmseComposition::sign_corrected)
{
  return h_amise(amise_integrals(pop, x, range, composition), n, kernel);
}

} // namespace npcure
