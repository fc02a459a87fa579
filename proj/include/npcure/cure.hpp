#pragma once

#include "error.hpp"
#include "kernel.hpp"
#include "survival.hpp"

#include <string>

namespace npcure {

//! Post-processing applied to two-bandwidth latency curves.
enum class Clamp
{
  none,
  unit_monotone, //!< clip to [0, 1], then take the running minimum
};

struct CureFit
{
  double x = 0.0;
  double h1 = 0.0; //!< bandwidth of the improper survival estimate
  double h2 = 0.0; //!< bandwidth of the incidence; equals h1 for the one-bandwidth fit
  double incidence = 0.0; //!< 1 - p_hat(x), the estimated cure probability
  StepSurvivalCurve latency;
  double t_max1 = 0.0;

  double uncure_probability() const noexcept { return 1.0 - incidence; }
};

namespace detail {

inline double require_event_time(const CensoredSample& sample)
{
  auto t = sample.max_uncensored_time();
  if (!t)
    throw Error(ErrorKind::no_uncensored, "the largest uncensored time is undefined");
  return *t;
}

// Shared by both latency estimators so the h1 == h2 path is bit-identical.
inline CureFit assemble_latency(const StepSurvivalCurve& improper,
                                double incidence,
                                double x,
                                double h1,
                                double h2,
                                double t_max1)
{
  const double p = 1.0 - incidence;
  if (!(p > 0.0))
    throw Error(ErrorKind::degenerate_cure,
                "estimated uncure probability is zero at x = " + std::to_string(x));
  std::vector<double> values(improper.values().size());
  for (std::size_t k = 0; k < values.size(); ++k)
    values[k] = (improper.values()[k] - incidence) / p;
  const double initial = (improper.initial_value() - incidence) / p;
  return CureFit{x, h1, h2, incidence,
                 StepSurvivalCurve(improper.jump_times(), std::move(values), initial), t_max1};
}

} // namespace detail

//! Estimated cure probability 1 - p_hat_h(x) = S_hat_h(T^1_max | x).
inline double incidence_estimate(const CensoredSample& sample, double x, double h, const Kernel& kernel = {})
{
  const double t_max1 = detail::require_event_time(sample);
  return curve_eval(beran(sample, x, h, kernel), t_max1);
}

//! One-bandwidth latency (S_hat_h - (1 - p_hat_h)) / p_hat_h. Always a proper
//! survival curve: 1 at t = 0 and 0 from T^1_max on.
inline CureFit latency_estimate(const CensoredSample& sample, double x, double h, const Kernel& kernel = {})
{
  const double t_max1 = detail::require_event_time(sample);
  const auto improper = beran(sample, x, h, kernel);
  const double incidence = curve_eval(improper, t_max1);
  return detail::assemble_latency(improper, incidence, x, h, h, t_max1);
}

//! Two-bandwidth latency (S_hat_h1 - (1 - p_hat_h2)) / p_hat_h2.
//!
//! Raw values can leave [0, 1]; `Clamp::unit_monotone` is an explicit
//! post-processing step and is never applied by default.
inline CureFit latency_estimate_two_bw(const CensoredSample& sample,
                                       double x,
                                       double h1,
                                       double h2,
                                       const Kernel& kernel = {},
                                       Clamp clamp = Clamp::none)
{
  const double t_max1 = detail::require_event_time(sample);
  const auto improper = beran(sample, x, h1, kernel);
  const double incidence = h1 == h2 ? curve_eval(improper, t_max1)
                                    : curve_eval(beran(sample, x, h2, kernel), t_max1);
  auto fit = detail::assemble_latency(improper, incidence, x, h1, h2, t_max1);
  if (clamp == Clamp::none)
    return fit;

  double running = std::clamp(fit.latency.initial_value(), 0.0, 1.0);
  const double initial = running;
  std::vector<double> values = fit.latency.values();
  for (auto& v : values) {
    running = std::min(running, std::clamp(v, 0.0, 1.0));
    v = running;
  }
  fit.latency = StepSurvivalCurve(fit.latency.jump_times(), std::move(values), initial);
  return fit;
}

} // namespace npcure
