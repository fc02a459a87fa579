#pragma once

#include "error.hpp"
#include "random.hpp"
#include "survival.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace npcure {

//! Censoring time distribution, independent of the covariate.
class CensoringDistribution
{
public:
  enum class Kind
  {
    exponential,
    point_mass,
    none,
  };

  static CensoringDistribution exponential_with_mean(double mean)
  {
    require(mean > 0.0, "censoring mean must be positive");
    return CensoringDistribution(Kind::exponential, mean);
  }
  static CensoringDistribution point_mass(double at)
  {
    require(at >= 0.0, "censoring point must be nonnegative");
    return CensoringDistribution(Kind::point_mass, at);
  }
  static CensoringDistribution none() { return CensoringDistribution(Kind::none, 0.0); }

  Kind kind() const noexcept { return kind_; }
  double parameter() const noexcept { return parameter_; }

  //! 1 - G(t)
  double survival(double t) const noexcept
  {
    switch (kind_) {
      case Kind::exponential: return t <= 0.0 ? 1.0 : std::exp(-t / parameter_);
      case Kind::point_mass: return t < parameter_ ? 1.0 : 0.0;
      case Kind::none: return 1.0;
    }
    return 1.0;
  }

  //! Density of C; zero for the atomic kinds.
  double density(double t) const noexcept
  {
    if (kind_ == Kind::exponential && t >= 0.0)
      return std::exp(-t / parameter_) / parameter_;
    return 0.0;
  }

  //! Inverse transform of u in (0, 1).
  double sample(double u) const noexcept
  {
    switch (kind_) {
      case Kind::exponential: return -parameter_ * std::log1p(-u);
      case Kind::point_mass: return parameter_;
      case Kind::none: return std::numeric_limits<double>::infinity();
    }
    return 0.0;
  }

private:
  CensoringDistribution(Kind kind, double parameter)
    : kind_(kind)
    , parameter_(parameter)
  {}

  Kind kind_;
  double parameter_;
};

//! Uniform covariate distribution on [lo, hi].
struct CovariateDistribution
{
  double lo = -20.0;
  double hi = 20.0;

  double density(double x) const noexcept { return x >= lo && x <= hi ? 1.0 / (hi - lo) : 0.0; }
  double density_derivative(double) const noexcept { return 0.0; }
  double sample(double u) const noexcept { return lo + (hi - lo) * u; }
};

//! Data-generating mixture cure model.
struct ModelSpec
{
  std::string id;
  //! p(x), probability of not being cured
  std::function<double(double)> uncure_probability;
  //! S_0(t | x), proper in t
  std::function<double(double, double)> latency;
  //! -d S_0(t | x) / dt
  std::function<double(double, double)> latency_density;
  //! Inverse of 1 - S_0(. | x): maps (u, x) with u in (0, 1) to an event time
  std::function<double(double, double)> latency_quantile;
  //! Time beyond which S_0(. | x) vanishes (to double precision)
  std::function<double(double)> event_horizon;
  CensoringDistribution censoring = CensoringDistribution::none();
  CovariateDistribution covariate;
  //! Named parameters, echoed into experiment metadata.
  std::vector<std::pair<std::string, double>> parameters;
};

inline double logistic(double eta) noexcept
{
  return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
}

//! Logistic incidence with a truncated proportional-hazards latency.
inline ModelSpec model1()
{
  constexpr double b0 = 0.476;
  constexpr double b1 = 0.358;
  constexpr double tau0 = 4.605;
  auto rate = [](double x) { return std::exp((x + 20.0) / 40.0); };

  ModelSpec spec;
  spec.id = "model1";
  spec.uncure_probability = [](double x) { return logistic(b0 + b1 * x); };
  spec.latency = [rate](double t, double x) {
    if (t <= 0.0)
      return 1.0;
    if (t >= tau0)
      return 0.0;
    const double lam = rate(x);
    // (e^{-lam t} - e^{-lam tau0}) / (1 - e^{-lam tau0})
    return (std::exp(-lam * t) - std::exp(-lam * tau0)) / -std::expm1(-lam * tau0);
  };
  spec.latency_density = [rate](double t, double x) {
    if (t < 0.0 || t >= tau0)
      return 0.0;
    const double lam = rate(x);
    return lam * std::exp(-lam * t) / -std::expm1(-lam * tau0);
  };
  spec.latency_quantile = [rate](double u, double x) {
    const double lam = rate(x);
    const double tail = std::exp(-lam * tau0);
    const double t = -std::log(tail + (1.0 - u) * -std::expm1(-lam * tau0)) / lam;
    return t < tau0 ? t : tau0;
  };
  spec.event_horizon = [](double) { return tau0; };
  spec.censoring = CensoringDistribution::exponential_with_mean(10.0 / 3.0);
  spec.covariate = CovariateDistribution{-20.0, 20.0};
  spec.parameters = {{"beta0", b0}, {"beta1", b1}, {"tau0", tau0},
                     {"censoring_mean", 10.0 / 3.0}, {"covariate_lo", -20.0}, {"covariate_hi", 20.0}};
  return spec;
}

//! Cubic-logistic incidence with a two-component Weibull-type latency.
inline ModelSpec model2()
{
  constexpr double b0 = 0.0476;
  constexpr double b1 = -0.2558;
  constexpr double b2 = -0.0027;
  constexpr double b3 = 0.0020;
  auto alpha = [](double x) { return 0.2 * std::exp((x + 20.0) / 40.0); };
  // s0 in terms of w = t^5
  auto s0_w = [](double a, double w) { return 0.5 * (std::exp(-a * w) + std::exp(-100.0 * w)); };

  ModelSpec spec;
  spec.id = "model2";
  spec.uncure_probability = [](double x) { return logistic(b0 + x * (b1 + x * (b2 + x * b3))); };
  spec.latency = [alpha, s0_w](double t, double x) {
    if (t <= 0.0)
      return 1.0;
    return s0_w(alpha(x), std::pow(t, 5.0));
  };
  spec.latency_density = [alpha](double t, double x) {
    if (t <= 0.0)
      return 0.0;
    const double a = alpha(x);
    const double w = std::pow(t, 5.0);
    const double t4 = std::pow(t, 4.0);
    return 0.5 * (5.0 * a * t4 * std::exp(-a * w) + 500.0 * t4 * std::exp(-100.0 * w));
  };
  // No closed form: bisection in w = t^5 to 1e-10 relative tolerance.
  spec.latency_quantile = [alpha, s0_w](double u, double x) {
    if (u <= 0.0)
      return 0.0;
    const double a = alpha(x);
    const double target = 1.0 - u;
    double lo = 0.0;
    double hi = -std::log(target) / std::min(a, 100.0);
    while (hi - lo > 1e-10 * hi) {
      const double mid = 0.5 * (lo + hi);
      if (s0_w(a, mid) > target)
        lo = mid;
      else
        hi = mid;
    }
    return std::pow(0.5 * (lo + hi), 0.2);
  };
  spec.event_horizon = [alpha](double x) {
    // s0 below 1e-16 from here on
    const double a = std::min(alpha(x), 100.0);
    return std::pow(std::log(0.5e16) / a, 0.2);
  };
  spec.censoring = CensoringDistribution::exponential_with_mean(10.0 / 3.0);
  spec.covariate = CovariateDistribution{-20.0, 20.0};
  spec.parameters = {{"beta0", b0}, {"beta1", b1}, {"beta2", b2}, {"beta3", b3},
                     {"censoring_mean", 10.0 / 3.0}, {"covariate_lo", -20.0}, {"covariate_hi", 20.0}};
  return spec;
}

inline ModelSpec model_by_number(int number)
{
  if (number == 1)
    return model1();
  if (number == 2)
    return model2();
  throw Error(ErrorKind::invalid_argument, "model must be 1 or 2, got " + std::to_string(number));
}

inline double true_latency(const ModelSpec& spec, double t, double x)
{
  require(t >= 0.0, "time must be nonnegative");
  return spec.latency(t, x);
}

//! A generated sample together with each record's latent cure status.
struct LabeledSample
{
  CensoredSample sample;
  std::vector<bool> cured;
};

//! Draws n records. Each record consumes four uniforms (covariate, cure,
//! event time, censoring time) whatever branch it takes.
inline LabeledSample generate_labeled(const ModelSpec& spec, std::size_t n, RandomStream& rng)
{
  require(n >= 1, "sample size must be at least 1");
  std::vector<Observation> records(n);
  LabeledSample out;
  out.cured.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = spec.covariate.sample(rng.uniform());
    const double cure_u = rng.uniform();
    const double event_u = rng.uniform_open();
    const double c = spec.censoring.sample(rng.uniform_open());
    double y = std::numeric_limits<double>::infinity();
    out.cured[i] = !(cure_u < spec.uncure_probability(x));
    if (!out.cured[i])
      y = spec.latency_quantile(event_u, x);
    const double t = std::min(y, c);
    if (!std::isfinite(t))
      throw Error(ErrorKind::invalid_argument,
                  "model " + spec.id + " produced an infinite observed time; cured subjects need finite censoring");
    records[i] = Observation{x, t, y <= c};
  }
  out.sample = CensoredSample(std::move(records));
  return out;
}

inline CensoredSample generate(const ModelSpec& spec, std::size_t n, RandomStream& rng)
{
  return generate_labeled(spec, n, rng).sample;
}

//! Samples for independent trials; trial j is reproducible from seeds[j] alone.
struct TrialBatch
{
  std::string model_id;
  std::vector<CensoredSample> samples;
  std::vector<std::uint64_t> seeds;
};

inline RandomStream trial_stream(std::uint64_t master_seed, std::size_t trial)
{
  return RandomStream(master_seed).split(trial);
}

inline TrialBatch generate_batch(const ModelSpec& spec, std::size_t n, std::size_t m, std::uint64_t master_seed)
{
  TrialBatch batch;
  batch.model_id = spec.id;
  batch.samples.reserve(m);
  batch.seeds.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    auto rng = trial_stream(master_seed, j);
    batch.seeds.push_back(rng.key());
    batch.samples.push_back(generate(spec, n, rng));
  }
  return batch;
}

} // namespace npcure
