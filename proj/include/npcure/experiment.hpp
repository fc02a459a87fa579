#pragma once

#include "bootstrap.hpp"
#include "cure.hpp"
#include "models.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace npcure {

struct ExperimentConfig
{
  std::size_t time_grid_size = 100;
  //! Upper end of the weight support; defaults to each trial's largest uncensored time.
  std::optional<double> weight_upper;
  std::uint64_t seed = 0;
  unsigned threads = 0;

  void validate() const
  {
    require(time_grid_size >= 2, "time_grid_size must be at least 2");
    require(!weight_upper || *weight_upper > 0.0, "weight_upper must be positive");
  }
};

//! Latency estimate at (x, h) evaluated on a sorted time grid; throws npcure::Error on failure.
using LatencyEstimator =
  std::function<std::vector<double>(const CensoredSample&, double x, double h, std::span<const double> times)>;

inline LatencyEstimator kernel_latency_estimator(const Kernel& kernel = {})
{
  return [kernel](const CensoredSample& sample, double x, double h, std::span<const double> times) {
    return latency_estimate(sample, x, h, kernel).latency.evaluate(times);
  };
}

//! MISE values over an (h1, h2) lattice at one covariate value, row-major in h1.
struct MiseSurface
{
  std::string model_id;
  std::size_t n = 0;
  std::size_t trials = 0;
  std::vector<double> x_grid;
  BandwidthGrid h_grid;
  BandwidthGrid h2_grid;
  std::vector<double> values;
  std::vector<std::size_t> failures;

  double at(std::size_t i1, std::size_t i2) const { return values[i1 * h2_grid.size() + i2]; }
  std::size_t used(std::size_t i1, std::size_t i2) const { return trials - failures[i1 * h2_grid.size() + i2]; }

  std::pair<std::size_t, std::size_t> argmin() const
  {
    const auto k = first_argmin(values);
    return {k / h2_grid.size(), k % h2_grid.size()};
  }
};

namespace detail {

struct TrialFrame
{
  std::vector<double> times;
  std::vector<double> truth;
};

inline std::optional<TrialFrame> trial_frame(const ModelSpec& spec,
                                             const CensoredSample& sample,
                                             double x,
                                             const ExperimentConfig& config)
{
  double upper = 0.0;
  if (config.weight_upper) {
    upper = *config.weight_upper;
  } else {
    auto t = sample.max_uncensored_time();
    if (!t || !(*t > 0.0))
      return std::nullopt;
    upper = *t;
  }
  TrialFrame frame;
  frame.times = uniform_grid(0.0, upper, config.time_grid_size);
  frame.truth.resize(frame.times.size());
  for (std::size_t i = 0; i < frame.times.size(); ++i)
    frame.truth[i] = spec.latency(frame.times[i], x);
  return frame;
}

inline double squared_error_integral(std::span<const double> values,
                                     std::span<const double> truth,
                                     std::span<const double> times)
{
  std::vector<double> sq(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double d = values[i] - truth[i];
    sq[i] = d * d;
  }
  return trapezoid(sq, times[1] - times[0]);
}

} // namespace detail

//! Monte Carlo MISE(h) of a latency estimator against the model's latency.
//! Trial j draws its sample from trial_stream(config.seed, j); all bandwidths
//! share the trial's sample.
inline MiseCurve true_mise(const ModelSpec& spec,
                           std::size_t n,
                           std::size_t m,
                           double x,
                           const BandwidthGrid& grid,
                           const ExperimentConfig& config,
                           const LatencyEstimator& estimator)
{
  require(m >= 1, "trial count m must be at least 1");
  config.validate();
  const std::size_t nh = grid.size();
  std::vector<double> ise(m * nh, std::numeric_limits<double>::quiet_NaN());

  parallel_for(m, config.threads, [&](std::size_t j) {
    auto rng = trial_stream(config.seed, j);
    const auto sample = generate(spec, n, rng);
    const auto frame = detail::trial_frame(spec, sample, x, config);
    if (!frame)
      return;
    for (std::size_t l = 0; l < nh; ++l) {
      try {
        const auto values = estimator(sample, x, grid[l], frame->times);
        ise[j * nh + l] = detail::squared_error_integral(values, frame->truth, frame->times);
      } catch (const Error& e) {
        if (!e.is_numerical())
          throw;
      }
    }
  });
  return detail::reduce_replicates(grid, ise, m, "trial");
}

inline MiseCurve true_mise(const ModelSpec& spec,
                           std::size_t n,
                           std::size_t m,
                           double x,
                           const BandwidthGrid& grid,
                           const ExperimentConfig& config,
                           const Kernel& kernel = {})
{
  return true_mise(spec, n, m, x, grid, config, kernel_latency_estimator(kernel));
}

//! Monte Carlo MISE(h1, h2) of the unclamped two-bandwidth latency estimator.
//! Uses the same trial samples as true_mise with the same config, so the
//! diagonal of a square lattice reproduces true_mise exactly.
inline MiseSurface true_mise_two_bw(const ModelSpec& spec,
                                    std::size_t n,
                                    std::size_t m,
                                    double x,
                                    const BandwidthGrid& grid1,
                                    const BandwidthGrid& grid2,
                                    const ExperimentConfig& config,
                                    const Kernel& kernel = {})
{
  require(m >= 1, "trial count m must be at least 1");
  config.validate();
  const std::size_t n1 = grid1.size();
  const std::size_t n2 = grid2.size();
  std::vector<double> ise(m * n1 * n2, std::numeric_limits<double>::quiet_NaN());

  parallel_for(m, config.threads, [&](std::size_t j) {
    auto rng = trial_stream(config.seed, j);
    const auto sample = generate(spec, n, rng);
    const auto frame = detail::trial_frame(spec, sample, x, config);
    if (!frame)
      return;
    const double t_max1 = *sample.max_uncensored_time();

    std::vector<std::optional<StepSurvivalCurve>> improper(n1);
    for (std::size_t a = 0; a < n1; ++a) {
      try {
        improper[a] = beran(sample, x, grid1[a], kernel);
      } catch (const Error& e) {
        if (!e.is_numerical())
          throw;
      }
    }
    std::vector<std::optional<double>> incidence(n2);
    for (std::size_t b = 0; b < n2; ++b) {
      try {
        incidence[b] = curve_eval(beran(sample, x, grid2[b], kernel), t_max1);
      } catch (const Error& e) {
        if (!e.is_numerical())
          throw;
      }
    }
    for (std::size_t a = 0; a < n1; ++a) {
      if (!improper[a])
        continue;
      for (std::size_t b = 0; b < n2; ++b) {
        if (!incidence[b])
          continue;
        try {
          const auto fit = detail::assemble_latency(*improper[a], *incidence[b], x, grid1[a], grid2[b], t_max1);
          const auto values = fit.latency.evaluate(frame->times);
          ise[(j * n1 + a) * n2 + b] = detail::squared_error_integral(values, frame->truth, frame->times);
        } catch (const Error& e) {
          if (!e.is_numerical())
            throw;
        }
      }
    }
  });

  auto cells = detail::average_columns(ise, m, n1 * n2, "trial", [&](std::size_t k) {
    return "bandwidth pair (" + std::to_string(grid1[k / n2]) + ", " + std::to_string(grid2[k % n2]) + ")";
  });

  MiseSurface surface;
  surface.model_id = spec.id;
  surface.n = n;
  surface.trials = m;
  surface.x_grid = {x};
  surface.h_grid = grid1;
  surface.h2_grid = grid2;
  surface.values = std::move(cells.values);
  surface.failures = std::move(cells.failures);
  return surface;
}

//! Empirical quantile with linear interpolation between order statistics.
inline double quantile(std::vector<double> values, double q)
{
  require(!values.empty(), "quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

struct BandwidthComparison
{
  double x = 0.0;
  MiseCurve mise; //!< true MISE; its argmin is the grid-optimal bandwidth
  std::vector<std::optional<std::size_t>> selected; //!< per trial grid index of h*
  std::vector<std::size_t> histogram; //!< selections per grid index
  std::vector<double> ratios; //!< MISE(h*) / min MISE, per successful trial
  std::size_t failed_trials = 0;

  double ratio_quantile(double q) const { return quantile(ratios, q); }
};

//! For each x: true MISE over the grid from m trials, and the bootstrap
//! bandwidth of every trial scored against it.
//!
//! Trial j's data come from trial_stream(experiment.seed, j); its bootstrap at
//! x_grid[i] uses seed trial_stream(experiment.seed, j).split(i + 1).key().
inline std::vector<BandwidthComparison> bootstrap_vs_optimal(const ModelSpec& spec,
                                                             std::size_t n,
                                                             std::size_t m,
                                                             std::span<const double> x_grid,
                                                             const BootstrapConfig& bootstrap,
                                                             const ExperimentConfig& experiment,
                                                             const Kernel& kernel = {})
{
  require(m >= 1, "trial count m must be at least 1");
  require(!x_grid.empty(), "at least one covariate value is required");
  bootstrap.validate();
  experiment.validate();

  std::vector<BandwidthComparison> out(x_grid.size());
  for (std::size_t i = 0; i < x_grid.size(); ++i) {
    out[i].x = x_grid[i];
    out[i].mise = true_mise(spec, n, m, x_grid[i], bootstrap.grid, experiment, kernel);
    out[i].selected.assign(m, std::nullopt);
  }

  parallel_for(m, experiment.threads, [&](std::size_t j) {
    auto rng = trial_stream(experiment.seed, j);
    const auto sample = generate(spec, n, rng);
    for (std::size_t i = 0; i < x_grid.size(); ++i) {
      BootstrapConfig cfg = bootstrap;
      cfg.threads = 1;
      cfg.seed = trial_stream(experiment.seed, j).split(i + 1).key();
      try {
        out[i].selected[j] = mise_star(sample, x_grid[i], cfg, kernel).argmin_index;
      } catch (const Error& e) {
        if (!e.is_numerical())
          throw;
      }
    }
  });

  for (auto& cmp : out) {
    cmp.histogram.assign(bootstrap.grid.size(), 0);
    const double best = cmp.mise.values[cmp.mise.argmin_index];
    for (const auto& s : cmp.selected) {
      if (!s) {
        ++cmp.failed_trials;
        continue;
      }
      ++cmp.histogram[*s];
      cmp.ratios.push_back(cmp.mise.values[*s] / best);
    }
  }
  return out;
}

} // namespace npcure
