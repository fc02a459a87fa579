#pragma once

#include "error.hpp"
#include "kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace npcure {

//! One right-censored record: covariate, observed time min(Y, C), and 1{Y <= C}.
struct Observation
{
  double x = 0.0;
  double t = 0.0;
  bool delta = false;

  friend bool operator==(const Observation&, const Observation&) = default;
};

//! Immutable set of censored records with a cached time ordering.
//!
//! The ordering sorts by observed time ascending and, at ties, uncensored
//! records before censored ones, so product-limit risk sets are standard.
class CensoredSample
{
public:
  CensoredSample() = default;

  explicit CensoredSample(std::vector<Observation> records)
    : records_(std::move(records))
  {
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& r = records_[i];
      if (!std::isfinite(r.x) || !std::isfinite(r.t) || r.t < 0.0)
        throw Error(ErrorKind::invalid_argument,
                    "record " + std::to_string(i) +
                      " needs a finite covariate and a finite time >= 0");
    }
    order_.resize(records_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      if (records_[a].t != records_[b].t)
        return records_[a].t < records_[b].t;
      return records_[a].delta > records_[b].delta;
    });
    for (auto i : order_) {
      const auto& r = records_[i];
      if (r.delta && (event_times_.empty() || event_times_.back() != r.t))
        event_times_.push_back(r.t);
    }
  }

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const Observation& operator[](std::size_t i) const { return records_[i]; }
  const std::vector<Observation>& records() const noexcept { return records_; }

  //! Record indices sorted by (t ascending, delta descending).
  std::span<const std::size_t> time_order() const noexcept { return order_; }

  //! Distinct uncensored times, ascending.
  std::span<const double> event_times() const noexcept { return event_times_; }

  //! T^1_max, the largest uncensored time, if any record is uncensored.
  std::optional<double> max_uncensored_time() const
  {
    if (event_times_.empty())
      return std::nullopt;
    return event_times_.back();
  }

  std::vector<double> covariates() const
  {
    std::vector<double> xs(records_.size());
    for (std::size_t i = 0; i < records_.size(); ++i)
      xs[i] = records_[i].x;
    return xs;
  }

  std::size_t censored_count() const
  {
    return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [](const auto& r) { return !r.delta; }));
  }

private:
  std::vector<Observation> records_;
  std::vector<std::size_t> order_;
  std::vector<double> event_times_;
};

//! Right-continuous step function of time.
//!
//! Takes `initial_value` on [0, jump_times[0]) and `values[k]` on
//! [jump_times[k], jump_times[k+1]). Survival estimates produced by the
//! product-limit estimators are nonincreasing and lie in [0, 1]; curves
//! built from the two-bandwidth latency estimator need not.
class StepSurvivalCurve
{
public:
  StepSurvivalCurve() = default;

  StepSurvivalCurve(std::vector<double> jump_times,
                    std::vector<double> values,
                    double initial_value = 1.0)
    : jump_times_(std::move(jump_times))
    , values_(std::move(values))
    , initial_value_(initial_value)
  {
    require(jump_times_.size() == values_.size(), "jump times and values must match in length");
    for (std::size_t k = 1; k < jump_times_.size(); ++k)
      require(jump_times_[k - 1] < jump_times_[k], "jump times must be strictly increasing");
  }

  const std::vector<double>& jump_times() const noexcept { return jump_times_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double initial_value() const noexcept { return initial_value_; }

  double operator()(double t) const
  {
    auto it = std::upper_bound(jump_times_.begin(), jump_times_.end(), t);
    if (it == jump_times_.begin())
      return initial_value_;
    return values_[static_cast<std::size_t>(it - jump_times_.begin()) - 1];
  }

  //! Evaluates at each of `times`, which must be sorted ascending.
  std::vector<double> evaluate(std::span<const double> times) const
  {
    std::vector<double> out(times.size());
    std::size_t k = 0;
    double current = initial_value_;
    for (std::size_t i = 0; i < times.size(); ++i) {
      while (k < jump_times_.size() && jump_times_[k] <= times[i])
        current = values_[k++];
      out[i] = current;
    }
    return out;
  }

  bool is_nonincreasing(double tol = 0.0) const
  {
    double prev = initial_value_;
    for (double v : values_) {
      if (v > prev + tol)
        return false;
      prev = v;
    }
    return true;
  }

  bool is_within_unit_interval(double tol = 0.0) const
  {
    auto inside = [tol](double v) { return v >= -tol && v <= 1.0 + tol; };
    return inside(initial_value_) && std::all_of(values_.begin(), values_.end(), inside);
  }

private:
  std::vector<double> jump_times_;
  std::vector<double> values_;
  double initial_value_ = 1.0;
};

inline double curve_eval(const StepSurvivalCurve& curve, double t)
{
  return curve(t);
}

//! Which indicator the product-limit estimator treats as the event.
enum class EventSelector
{
  uncensored, //!< delta = 1: survival of Y
  censored,   //!< delta = 0: survival of C
};

//! Product-limit estimator over distinct selected-event times.
//!
//! The risk set at t counts every record with T >= t, so records of the other
//! kind tied at t are still at risk (events first).
inline StepSurvivalCurve kaplan_meier(const CensoredSample& sample,
                                      EventSelector selector = EventSelector::uncensored)
{
  if (sample.empty())
    throw Error(ErrorKind::empty_sample, "Kaplan-Meier needs at least one record");

  const bool want = selector == EventSelector::uncensored;
  const auto order = sample.time_order();
  const auto n = order.size();

  std::vector<double> times;
  std::vector<double> values;
  double surv = 1.0;
  std::size_t k = 0;
  while (k < n) {
    const double t = sample[order[k]].t;
    const std::size_t at_risk = n - k;
    std::size_t events = 0;
    while (k < n && sample[order[k]].t == t) {
      if (sample[order[k]].delta == want)
        ++events;
      ++k;
    }
    if (events > 0) {
      surv *= 1.0 - static_cast<double>(events) / static_cast<double>(at_risk);
      times.push_back(t);
      values.push_back(surv);
    }
  }
  return StepSurvivalCurve(std::move(times), std::move(values));
}

//! Beran (conditional product-limit) estimator of S(t | x).
//!
//! Jumps are recorded at every distinct uncensored time of the sample, so all
//! curves fitted to one sample share their jump times. A factor whose remaining
//! weight sum is zero is taken as 1.
inline StepSurvivalCurve beran(const CensoredSample& sample, double x, double h, const Kernel& kernel = {})
{
  require(h > 0.0 && std::isfinite(h), "bandwidth must be positive");
  if (sample.empty())
    throw Error(ErrorKind::empty_sample, "Beran estimator needs at least one record");

  const auto order = sample.time_order();
  const auto n = order.size();

  std::vector<double> w(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = kernel((x - sample[order[i]].x) / h);
    total += w[i];
  }
  if (total <= 0.0)
    throw Error(ErrorKind::empty_neighborhood,
                "no covariate within bandwidth " + std::to_string(h) + " of x = " + std::to_string(x));
  for (auto& wi : w)
    wi /= total;

  // remaining[i] = sum of weights at positions >= i
  std::vector<double> remaining(n + 1, 0.0);
  for (std::size_t i = n; i-- > 0;)
    remaining[i] = remaining[i + 1] + w[i];

  const auto event_times = sample.event_times();
  std::vector<double> values;
  values.reserve(event_times.size());
  double surv = 1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = sample[order[i]];
    if (!r.delta)
      continue;
    if (remaining[i] > 0.0)
      surv *= 1.0 - w[i] / remaining[i];
    const bool last_tie = i + 1 == n || !sample[order[i + 1]].delta || sample[order[i + 1]].t != r.t;
    if (last_tie)
      values.push_back(surv);
  }
  return StepSurvivalCurve(std::vector<double>(event_times.begin(), event_times.end()), std::move(values));
}

} // namespace npcure
