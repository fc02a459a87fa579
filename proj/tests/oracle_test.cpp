#include "npcure/npcure.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace npcure;

namespace {

const double inf = std::numeric_limits<double>::infinity();

//! p = 1, S_0 = exp(-t), no censoring.
ModelSpec exponential_no_cure()
{
  ModelSpec spec;
  spec.id = "exp";
  spec.uncure_probability = [](double) { return 1.0; };
  spec.latency = [](double t, double) { return t <= 0.0 ? 1.0 : std::exp(-t); };
  spec.latency_density = [](double t, double) { return t < 0.0 ? 0.0 : std::exp(-t); };
  spec.latency_quantile = [](double u, double) { return -std::log1p(-u); };
  spec.event_horizon = [](double) { return 40.0; };
  spec.censoring = CensoringDistribution::none();
  return spec;
}

//! Model 1 with the covariate pinned (up to 1e-9) at x0.
ModelSpec model1_at(double x0)
{
  auto spec = model1();
  spec.covariate = CovariateDistribution{x0 - 1e-9, x0 + 1e-9};
  return spec;
}

} // namespace

TEST(Population, BoundaryValues)
{
  const auto pop = population_from_model(model1());
  for (double x : {-10.0, 0.0, 10.0}) {
    EXPECT_EQ(pop.observed_cdf(0.0, x), 0.0);
    EXPECT_EQ(pop.event_subdistribution(0.0, x), 0.0);
  }
}

TEST(Population, ObservedDistributionSplitsIntoEventAndCensoringParts)
{
  for (const auto& spec : {model1(), model2()}) {
    const auto pop = population_from_model(spec);
    for (double x : {-10.0, 0.0, 5.0, 10.0})
      for (double t : {0.1, 0.5, 1.0, 2.0, 3.0}) {
        const double direct = 1.0 - pop.survival(t, x) * pop.censoring_survival(t);
        EXPECT_EQ(pop.observed_cdf(t, x), direct);
        const double parts = pop.event_subdistribution(t, x) + pop.censoring_subdistribution(t, x);
        EXPECT_NEAR(parts, direct, 1e-10) << spec.id << " t=" << t << " x=" << x;
      }
  }
}

TEST(Population, NoCensoringSubdistributionIsTheEventCdf)
{
  auto spec = model1();
  spec.censoring = CensoringDistribution::none();
  const auto pop = population_from_model(spec);
  for (double x : {-5.0, 0.0, 5.0})
    for (double t : {0.5, 1.0, 4.0}) {
      const double expected = spec.uncure_probability(x) * (1.0 - spec.latency(t, x));
      EXPECT_NEAR(pop.event_subdistribution(t, x), expected, 1e-10);
    }
}

TEST(Population, EventSubdistributionMatchesSimulation)
{
  const auto spec = model1_at(0.0);
  const auto pop = population_from_model(model1());
  const double target = pop.event_subdistribution(1.0, 0.0);
  RandomStream rng(61);
  const int draws = 1000000;
  const auto s = generate(spec, draws, rng);
  int hits = 0;
  for (const auto& r : s.records())
    hits += (r.delta && r.t <= 1.0) ? 1 : 0;
  const double freq = static_cast<double>(hits) / draws;
  const double se = std::sqrt(target * (1.0 - target) / draws);
  EXPECT_NEAR(freq, target, 3.0 * se);
}

TEST(Phi, VanishesOnTheDiagonal)
{
  for (const auto& spec : {model1(), model2()}) {
    const auto pop = population_from_model(spec);
    for (double x : {-10.0, -2.0, 5.0, 10.0})
      for (double t : {0.0, 0.5, 1.5, 3.0})
        EXPECT_LT(std::abs(phi(pop, x, t, x)), 1e-6);
  }
}

TEST(Phi, ZeroAtTimeZero)
{
  const auto pop = population_from_model(model1());
  EXPECT_EQ(phi(pop, 1.0, 0.0, 0.0), 0.0);
  EXPECT_EQ(phi1(pop, 0.0, 3.0), 0.0);
  EXPECT_EQ(phi2(pop, 0.0, 3.0), 0.0);
}

TEST(Phi, MatchesSimulatedMeanOfXi)
{
  const auto pop = population_from_model(model1());
  const double y = 1.0, t = 1.0, x = 0.0;
  const double target = phi(pop, y, t, x);
  RandomStream rng(63);
  const auto s = generate(model1_at(y), 100000, rng);
  double sum = 0.0, sum2 = 0.0;
  for (const auto& r : s.records()) {
    const double v = xi(pop, r.t, r.delta, t, x);
    sum += v;
    sum2 += v * v;
  }
  const double n = static_cast<double>(s.size());
  const double mean = sum / n;
  const double se = std::sqrt((sum2 / n - mean * mean) / n);
  EXPECT_NE(target, 0.0);
  EXPECT_NEAR(mean, target, 3.0 * se);
}

TEST(Phi, SupportGuard)
{
  const auto pop = population_from_model(model1());
  try {
    phi1(pop, inf, 15.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::support_guard);
  }
}

TEST(Phi1, ClosedFormWithoutCensoring)
{
  const auto pop = population_from_model(exponential_no_cure());
  EXPECT_NEAR(phi1(pop, 1.0, 0.0), std::exp(1.0) - 1.0, 1e-9);
}

TEST(Phi2, FourTermExpansionMatchesDiagonalForm)
{
  for (const auto& spec : {model1(), model2()}) {
    const auto pop = population_from_model(spec);
    for (double x : {-10.0, 0.0, 10.0})
      for (double t : {0.3, 1.0, 2.5}) {
        EXPECT_EQ(phi1(pop, t, x), phi2(pop, t, x));
        const auto d = phi2_decomposition(pop, x, t, x);
        EXPECT_NEAR(d.value(), phi2(pop, t, x), 1e-6) << spec.id << " t=" << t << " x=" << x;
      }
  }
}

TEST(BiasVariance, FactorsVanish)
{
  const auto pop = population_from_model(exponential_no_cure());
  const auto terms = bias_variance_terms(pop, 1.0, 0.0);
  EXPECT_EQ(terms.b2, 0.0);
  EXPECT_EQ(terms.v2, 0.0);
  EXPECT_EQ(terms.v3, 0.0);
}

TEST(BiasVariance, ZeroAtTimeZero)
{
  const auto pop = population_from_model(model1());
  const auto terms = bias_variance_terms(pop, 0.0, 5.0);
  EXPECT_EQ(terms.v1, 0.0);
  EXPECT_EQ(terms.b1, 0.0);
  EXPECT_EQ(terms.b2, 0.0);
  EXPECT_EQ(terms.v2, 0.0);
  EXPECT_EQ(terms.v3, 0.0);
}

TEST(BiasVariance, FiniteDifferencesStableUnderHalving)
{
  const auto pop = population_from_model(model1());
  const auto d = phi_derivatives(pop, 1.0, 5.0);
  EXPECT_LT(d.richardson_change, 1e-3);
  EXPECT_LT(bias_variance_terms(pop, 1.0, 5.0).richardson_change, 1e-3);
}

TEST(BiasVariance, DegenerateCovariateDensity)
{
  const auto pop = population_from_model(model1());
  try {
    bias_variance_terms(pop, 1.0, 25.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::degenerate_density);
  }
}

TEST(BiasVariance, VarianceVanishesBeyondEventSupport)
{
  // The latency estimator is identically zero there.
  const auto pop = population_from_model(model1());
  const auto terms = bias_variance_terms(pop, inf, 5.0);
  EXPECT_NEAR(terms.variance(AmseComposition::sign_corrected), 0.0, 1e-8);
  EXPECT_NEAR(terms.bias(AmseComposition::sign_corrected), 0.0, 1e-8);
  EXPECT_GT(terms.variance(AmseComposition::as_published), 1.0);
}

TEST(Amse, ReportRecomposes)
{
  const auto pop = population_from_model(model1());
  for (auto comp : {AmseComposition::sign_corrected, AmseComposition::as_published}) {
    const auto r = amse(pop, 1.0, 5.0, 10.0, 100.0, Kernel{}, comp);
    EXPECT_EQ(r.amse, r.bias_term + r.variance_term);
    const double dk = comp == AmseComposition::sign_corrected ? 0.04 : 0.2;
    EXPECT_NEAR(r.bias_term, std::pow(10.0, 4) / 4.0 * dk * r.bias * r.bias, 1e-12 * r.bias_term);
    EXPECT_NEAR(r.variance_term, 0.6 / 1000.0 * r.variance, 1e-15);
    EXPECT_EQ(r.bias, comp == AmseComposition::sign_corrected ? r.terms.b1 - r.terms.b2 : r.terms.b1 + r.terms.b2);
  }
}

TEST(Amse, BandwidthScaling)
{
  const auto pop = population_from_model(model1());
  const auto a = amse(pop, 1.0, 5.0, 4.0, 100.0);
  const auto b = amse(pop, 1.0, 5.0, 8.0, 100.0);
  EXPECT_NEAR(b.bias_term / a.bias_term, 16.0, 1e-12);
  EXPECT_NEAR(b.variance_term / a.variance_term, 0.5, 1e-12);
  EXPECT_THROW(amse(pop, 1.0, 5.0, 0.0, 100.0), Error);
  EXPECT_THROW(amse(pop, 1.0, 5.0, 1.0, 0.5), Error);
}

TEST(Amse, SameOrderAsSimulatedMse)
{
  const auto spec = model1();
  const auto pop = population_from_model(spec);
  const double t = 1.0, x = 5.0, h = 10.0;
  const std::size_t n = 100;
  const double truth = spec.latency(t, x);
  double se = 0.0;
  int used = 0;
  for (std::size_t j = 0; j < 1000; ++j) {
    auto rng = trial_stream(65, j);
    const auto s = generate(spec, n, rng);
    try {
      se += std::pow(curve_eval(latency_estimate(s, x, h).latency, t) - truth, 2);
      ++used;
    } catch (const Error&) {
    }
  }
  const double mse = se / used;
  const double predicted = amse(pop, t, x, h, static_cast<double>(n)).amse;
  EXPECT_GT(mse / predicted, 1.0 / 3.0);
  EXPECT_LT(mse / predicted, 3.0);
}

TEST(HAmise, ClosedFormPlugIn)
{
  const AmiseIntegrals constant{2.0, 3.0};
  EXPECT_NEAR(h_amise(constant, 100.0), std::pow(0.6 * 3.0 / (0.04 * 2.0), 0.2) * std::pow(100.0, -0.2), 1e-15);
  EXPECT_THROW(h_amise(AmiseIntegrals{0.0, 1.0}, 100.0), Error);
  try {
    h_amise(AmiseIntegrals{0.0, 1.0}, 100.0);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::bias_free);
  }
}

TEST(HAmise, ScalesAsInverseFifthRoot)
{
  const auto pop = population_from_model(model1());
  const auto integrals = amise_integrals(pop, 5.0, default_time_range(pop, 5.0));
  const double h1 = h_amise(integrals, 100.0);
  EXPECT_NEAR(h_amise(integrals, 3200.0), h1 / 2.0, 1e-10 * h1);
  EXPECT_NEAR(h_amise(integrals, 1000.0) * std::pow(1000.0, 0.2), h1 * std::pow(100.0, 0.2), 1e-10 * h1);
}

TEST(HAmise, Model1SanityRun)
{
  const auto pop = population_from_model(model1());
  const double h = h_amise(pop, 5.0, 100.0, TimeRange{0.1, 4.0});
  RecordProperty("h_amise_model1_x5_n100", std::to_string(h));
  EXPECT_TRUE(std::isfinite(h));
  EXPECT_GT(h, 0.0);
}
