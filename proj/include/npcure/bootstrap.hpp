#pragma once

#include "cure.hpp"
#include "error.hpp"
#include "kernel.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"
#include "random.hpp"
#include "survival.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace npcure {

//! Strictly increasing set of positive candidate bandwidths.
class BandwidthGrid
{
public:
  BandwidthGrid() = default;

  explicit BandwidthGrid(std::vector<double> values)
    : values_(std::move(values))
  {
    require(!values_.empty(), "bandwidth grid must be nonempty");
    for (std::size_t i = 0; i < values_.size(); ++i) {
      require(values_[i] > 0.0 && std::isfinite(values_[i]), "bandwidths must be positive and finite");
      if (i > 0)
        require(values_[i - 1] < values_[i], "bandwidth grid must be strictly increasing");
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  const std::vector<double>& values() const noexcept { return values_; }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  friend bool operator==(const BandwidthGrid&, const BandwidthGrid&) = default;

private:
  std::vector<double> values_;
};

//! Geometric sequence from lo to hi inclusive.
inline BandwidthGrid log_grid(double lo, double hi, std::size_t count)
{
  require(lo > 0.0 && hi > lo, "log grid needs 0 < lo < hi");
  require(count >= 2, "log grid needs at least two points");
  const double ratio = hi / lo;
  std::vector<double> values(count);
  const double last = static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i)
    values[i] = lo * std::pow(ratio, static_cast<double>(i) / last);
  values.front() = lo;
  values.back() = hi;
  return BandwidthGrid(std::move(values));
}

//! Naive pilot rule g = c (max x - min x) n^(-1/9).
inline double pilot_bandwidth(std::span<const double> xs, double c = 0.75)
{
  require(c > 0.0, "pilot constant must be positive");
  if (xs.size() < 2)
    throw Error(ErrorKind::invalid_argument, "pilot bandwidth needs at least two covariate values");
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  if (!(*hi > *lo))
    throw Error(ErrorKind::invalid_argument, "pilot bandwidth undefined: all covariates identical");
  return c * (*hi - *lo) * std::pow(static_cast<double>(xs.size()), -1.0 / 9.0);
}

//! Finite discrete distribution sampled by inverse transform.
class DiscreteDistribution
{
public:
  DiscreteDistribution() = default;

  //! `cumulative[k]` is P(V <= support[k]); the last entry is forced to 1.
  DiscreteDistribution(std::vector<double> support, std::vector<double> cumulative)
    : support_(std::move(support))
    , cumulative_(std::move(cumulative))
  {
    require(!support_.empty() && support_.size() == cumulative_.size(),
            "discrete distribution needs matching, nonempty support and cumulative mass");
    cumulative_.back() = 1.0;
  }

  //! Smallest support point whose cumulative mass exceeds u, for u in [0, 1).
  double quantile(double u) const
  {
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    if (it == cumulative_.end())
      return support_.back();
    return support_[static_cast<std::size_t>(it - cumulative_.begin())];
  }

  const std::vector<double>& support() const noexcept { return support_; }
  const std::vector<double>& cumulative() const noexcept { return cumulative_; }

private:
  std::vector<double> support_;
  std::vector<double> cumulative_;
};

//! Jump distribution of a proper latency curve. Mass left over after the last
//! jump (rounding only, for one-bandwidth fits) goes to the last jump.
inline DiscreteDistribution latency_jump_distribution(const StepSurvivalCurve& latency)
{
  require(!latency.jump_times().empty(), "latency curve has no jumps");
  std::vector<double> cumulative(latency.values().size());
  for (std::size_t k = 0; k < cumulative.size(); ++k)
    cumulative[k] = std::clamp(1.0 - latency.values()[k], 0.0, 1.0);
  return DiscreteDistribution(latency.jump_times(), std::move(cumulative));
}

//! Censoring distribution from the product-limit estimator with the roles of
//! delta reversed. Mass not assigned by the estimator sits at the largest
//! observed time, so every draw is finite.
inline DiscreteDistribution censoring_distribution(const CensoredSample& sample)
{
  const auto km = kaplan_meier(sample, EventSelector::censored);
  const double largest = sample[sample.time_order().back()].t;
  std::vector<double> support = km.jump_times();
  std::vector<double> cumulative(km.values().size());
  for (std::size_t k = 0; k < cumulative.size(); ++k)
    cumulative[k] = 1.0 - km.values()[k];
  if (support.empty() || support.back() < largest) {
    support.push_back(largest);
    cumulative.push_back(1.0);
  }
  return DiscreteDistribution(std::move(support), std::move(cumulative));
}

//! Resampling plan under unconditional censoring: covariates fixed, C* drawn
//! from the censoring product-limit estimate, Y* drawn from the pilot latency
//! at each covariate with the pilot uncure probability, infinite otherwise.
class BootstrapGenerator
{
public:
  BootstrapGenerator(const CensoredSample& sample, double g, const Kernel& kernel = {})
    : covariates_(sample.covariates())
    , censoring_(censoring_distribution(sample))
  {
    require(g > 0.0, "pilot bandwidth must be positive");
    if (sample.empty())
      throw Error(ErrorKind::empty_sample, "cannot resample an empty sample");
    uncure_.resize(covariates_.size());
    latency_.resize(covariates_.size());
    for (std::size_t i = 0; i < covariates_.size(); ++i) {
      const double xi = covariates_[i];
      try {
        const double inc = incidence_estimate(sample, xi, g, kernel);
        uncure_[i] = 1.0 - inc;
        if (uncure_[i] > 0.0)
          latency_[i] = latency_jump_distribution(latency_estimate(sample, xi, g, kernel).latency);
      } catch (const Error& e) {
        throw Error(e.kind(), "pilot fit failed at covariate " + std::to_string(xi) + " (" + e.what() + ")");
      }
    }
  }

  std::size_t size() const noexcept { return covariates_.size(); }
  double uncure_probability(std::size_t i) const { return uncure_[i]; }
  const DiscreteDistribution& latency(std::size_t i) const { return latency_[i]; }
  const DiscreteDistribution& censoring() const noexcept { return censoring_; }

  //! Three uniforms per record, in the order censoring, cure, event time.
  CensoredSample draw(RandomStream& rng) const
  {
    std::vector<Observation> out(covariates_.size());
    for (std::size_t i = 0; i < covariates_.size(); ++i) {
      const double c = censoring_.quantile(rng.uniform());
      const double cure_u = rng.uniform();
      const double event_u = rng.uniform();
      double y = std::numeric_limits<double>::infinity();
      if (cure_u < uncure_[i])
        y = latency_[i].quantile(event_u);
      out[i] = Observation{covariates_[i], std::min(y, c), y <= c};
    }
    return CensoredSample(std::move(out));
  }

private:
  std::vector<double> covariates_;
  DiscreteDistribution censoring_;
  std::vector<double> uncure_;
  std::vector<DiscreteDistribution> latency_;
};

inline CensoredSample resample(const CensoredSample& sample, double g, const Kernel& kernel, RandomStream& rng)
{
  return BootstrapGenerator(sample, g, kernel).draw(rng);
}

struct BootstrapConfig
{
  std::size_t resamples = 100; //!< B
  BandwidthGrid grid = log_grid(5.0, 100.0, 35);
  double pilot_c = 0.75;
  std::optional<double> pilot; //!< overrides the pilot rule when set
  std::optional<double> weight_upper; //!< defaults to the largest uncensored time
  std::size_t time_grid_size = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const
  {
    require(resamples >= 1, "resamples (B) must be at least 1");
    require(grid.size() >= 1, "bandwidth grid must be nonempty");
    require(pilot_c > 0.0, "pilot_c must be positive");
    require(!pilot || *pilot > 0.0, "pilot bandwidth must be positive");
    require(!weight_upper || *weight_upper > 0.0, "weight_upper must be positive");
    require(time_grid_size >= 2, "time_grid_size must be at least 2");
  }
};

//! Monte Carlo criterion over a bandwidth grid.
struct MiseCurve
{
  BandwidthGrid grid;
  std::vector<double> values;
  std::size_t argmin_index = 0;
  std::vector<std::size_t> failures; //!< replicates skipped at each bandwidth
  std::size_t replicates = 0;
  double pilot = 0.0; //!< pilot bandwidth (bootstrap criterion only)
  double weight_upper = 0.0;

  double selected() const { return grid[argmin_index]; }
};

//! Index of the first minimum.
inline std::size_t first_argmin(std::span<const double> values)
{
  require(!values.empty(), "argmin of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best])
      best = i;
  return best;
}

namespace detail {

//! Weighted integrated squared error on a uniform time grid. Evaluates each
//! curve over the grid and integrates by the trapezoid rule.
inline double integrated_squared_error(const StepSurvivalCurve& curve,
                                       std::span<const double> reference,
                                       std::span<const double> times)
{
  const auto values = curve.evaluate(times);
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - reference[i];
    sq[i] = d * d;
  }
  return trapezoid(sq, times[1] - times[0]);
}

struct ColumnMeans
{
  std::vector<double> values;
  std::vector<std::size_t> failures;
};

// Averages a row-major replicates x columns table, skipping NaN entries, in
// fixed replicate order.
inline ColumnMeans average_columns(std::span<const double> table,
                                   std::size_t replicates,
                                   std::size_t columns,
                                   const std::string& what,
                                   const std::function<std::string(std::size_t)>& label)
{
  ColumnMeans out;
  out.values.assign(columns, 0.0);
  out.failures.assign(columns, 0);
  for (std::size_t l = 0; l < columns; ++l) {
    double sum = 0.0;
    std::size_t used = 0;
    for (std::size_t j = 0; j < replicates; ++j) {
      const double v = table[j * columns + l];
      if (std::isnan(v)) {
        ++out.failures[l];
        continue;
      }
      sum += v;
      ++used;
    }
    if (used == 0)
      throw Error(ErrorKind::all_failed, "every " + what + " failed at " + label(l));
    out.values[l] = sum / static_cast<double>(used);
  }
  return out;
}

inline MiseCurve reduce_replicates(const BandwidthGrid& grid,
                                   std::span<const double> ise,
                                   std::size_t replicates,
                                   const std::string& what)
{
  auto means = average_columns(ise, replicates, grid.size(), what,
                               [&](std::size_t l) { return "bandwidth " + std::to_string(grid[l]); });
  MiseCurve curve;
  curve.grid = grid;
  curve.replicates = replicates;
  curve.values = std::move(means.values);
  curve.failures = std::move(means.failures);
  curve.argmin_index = first_argmin(curve.values);
  return curve;
}

struct PilotReference
{
  double g = 0.0;
  double upper = 0.0;
  std::vector<double> times;
  std::vector<double> values;
};

inline PilotReference pilot_reference(const CensoredSample& sample,
                                      double x,
                                      const BootstrapConfig& config,
                                      const Kernel& kernel)
{
  PilotReference ref;
  const auto xs = sample.covariates();
  ref.g = config.pilot ? *config.pilot : pilot_bandwidth(xs, config.pilot_c);
  const auto fit = latency_estimate(sample, x, ref.g, kernel);
  ref.upper = config.weight_upper ? *config.weight_upper : fit.t_max1;
  ref.times = uniform_grid(0.0, ref.upper, config.time_grid_size);
  ref.values = fit.latency.evaluate(ref.times);
  return ref;
}

template <class ResampleFn>
MiseCurve mise_star_impl(const CensoredSample& sample,
                         double x,
                         const BootstrapConfig& config,
                         const Kernel& kernel,
                         std::size_t replicates,
                         ResampleFn&& make_resample)
{
  config.validate();
  const auto ref = pilot_reference(sample, x, config, kernel);
  const std::size_t nh = config.grid.size();
  std::vector<double> ise(replicates * nh, std::numeric_limits<double>::quiet_NaN());

  parallel_for(replicates, config.threads, [&](std::size_t j) {
    const CensoredSample boot = make_resample(j, ref.g);
    for (std::size_t l = 0; l < nh; ++l) {
      try {
        const auto fit = latency_estimate(boot, x, config.grid[l], kernel);
        ise[j * nh + l] = integrated_squared_error(fit.latency, ref.values, ref.times);
      } catch (const Error& e) {
        if (!e.is_numerical())
          throw;
      }
    }
  });

  auto curve = reduce_replicates(config.grid, ise, replicates, "bootstrap resample");
  curve.pilot = ref.g;
  curve.weight_upper = ref.upper;
  return curve;
}

} // namespace detail

//! Bootstrap MISE* over `config.grid`; resample j uses stream seed.split(j).
inline MiseCurve mise_star(const CensoredSample& sample,
                           double x,
                           const BootstrapConfig& config,
                           const Kernel& kernel = {})
{
  config.validate();
  const double g = config.pilot ? *config.pilot : pilot_bandwidth(sample.covariates(), config.pilot_c);
  const BootstrapGenerator generator(sample, g, kernel);
  const RandomStream root(config.seed);
  return detail::mise_star_impl(sample, x, config, kernel, config.resamples,
                                [&](std::size_t j, double) {
                                  auto rng = root.split(j);
                                  return generator.draw(rng);
                                });
}

//! MISE* from caller-supplied resamples instead of generated ones.
inline MiseCurve mise_star_from_resamples(const CensoredSample& sample,
                                          double x,
                                          const BootstrapConfig& config,
                                          std::span<const CensoredSample> resamples,
                                          const Kernel& kernel = {})
{
  require(!resamples.empty(), "at least one resample is required");
  return detail::mise_star_impl(sample, x, config, kernel, resamples.size(),
                                [&](std::size_t j, double) { return resamples[j]; });
}

inline double select_bandwidth(const CensoredSample& sample,
                               double x,
                               const BootstrapConfig& config,
                               const Kernel& kernel = {})
{
  return mise_star(sample, x, config, kernel).selected();
}

} // namespace npcure
