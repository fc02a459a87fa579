#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace npcure;

TEST(LogGrid, Examples)
{
  const auto g = log_grid(5.0, 100.0, 35);
  ASSERT_EQ(g.size(), 35u);
  EXPECT_EQ(g[0], 5.0);
  EXPECT_EQ(g[34], 100.0);
  const double ratio = g[1] / g[0];
  for (std::size_t i = 1; i < g.size(); ++i)
    EXPECT_NEAR(g[i] / g[i - 1], ratio, 1e-12);

  const auto p = log_grid(1.0, 4.0, 3);
  EXPECT_EQ(p[0], 1.0);
  EXPECT_NEAR(p[1], 2.0, 1e-15);
  EXPECT_EQ(p[2], 4.0);

  EXPECT_EQ(log_grid(2.0, 3.0, 2).values(), (std::vector<double>{2.0, 3.0}));
  EXPECT_THROW(log_grid(0.0, 3.0, 5), Error);
  EXPECT_THROW(log_grid(3.0, 2.0, 5), Error);
  EXPECT_THROW(log_grid(1.0, 2.0, 1), Error);
}

TEST(PilotBandwidth, Examples)
{
  std::vector<double> xs(100);
  for (std::size_t i = 0; i < xs.size(); ++i)
    xs[i] = -20.0 + 40.0 * static_cast<double>(i) / 99.0;
  const double g = pilot_bandwidth(xs);
  EXPECT_NEAR(g, 0.75 * 40.0 * std::pow(100.0, -1.0 / 9.0), 1e-12);
  EXPECT_NEAR(g, 17.98, 0.005);

  auto doubled = xs;
  for (auto& v : doubled)
    v *= 2.0;
  EXPECT_EQ(pilot_bandwidth(doubled), 2.0 * g);

  const std::vector<double> single{0.5};
  EXPECT_THROW(pilot_bandwidth(single), Error);
  const std::vector<double> same{1.0, 1.0, 1.0};
  EXPECT_THROW(pilot_bandwidth(same), Error);
}

TEST(FirstArgmin, SmallestIndexWinsTies)
{
  const std::vector<double> v{3.0, 1.0, 1.0, 2.0};
  EXPECT_EQ(first_argmin(v), 1u);
}

TEST(Resample, InverseTransformMatchesJumpMasses)
{
  // Wide-bandwidth latency: jumps at 1, 2, 3 with masses 1/4, 3/8, 3/8.
  const CensoredSample s({{0.0, 1.0, true}, {0.0, 1.5, false}, {0.0, 2.0, true}, {0.0, 3.0, true}});
  const auto fit = latency_estimate(s, 0.0, 10.0);
  const auto dist = latency_jump_distribution(fit.latency);
  const std::vector<double> mass{0.25, 0.375, 0.375};
  std::vector<double> counts(3, 0.0);
  RandomStream rng(31);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    const double v = dist.quantile(rng.uniform());
    counts[static_cast<std::size_t>(v) - 1] += 1.0;
  }
  for (std::size_t k = 0; k < 3; ++k) {
    const double se = std::sqrt(mass[k] * (1.0 - mass[k]) / draws);
    EXPECT_NEAR(counts[k] / draws, mass[k], 3.0 * se);
  }
}

TEST(Resample, FixesCovariatesAndSize)
{
  RandomStream data(33);
  const auto s = fixtures::random_sample(data, 40, false);
  RandomStream rng(34);
  const auto r = resample(s, 1.0, Kernel{}, rng);
  ASSERT_EQ(r.size(), s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    EXPECT_EQ(r[i].x, s[i].x);
}

TEST(Resample, AllCensoredSampleFailsWithCovariate)
{
  const CensoredSample s({{0.0, 1.0, false}, {0.5, 2.0, false}});
  RandomStream rng(1);
  try {
    resample(s, 1.0, Kernel{}, rng);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::no_uncensored);
    EXPECT_NE(std::string(e.what()).find("covariate"), std::string::npos);
  }
}

TEST(Resample, ForcedEventBranch)
{
  // Events near x = 0 only; one censored record far away at a late time, so
  // the censoring estimate puts all its mass at t = 100.
  std::vector<Observation> r;
  for (int i = 0; i < 10; ++i)
    r.push_back({0.05 * i, 1.0 + i, true});
  r.push_back({50.0, 100.0, false});
  const CensoredSample s(r);
  const BootstrapGenerator gen(s, 1.0);
  for (std::size_t i = 0; i < 10; ++i)
    EXPECT_EQ(gen.uncure_probability(i), 1.0);
  RandomStream rng(35);
  for (int rep = 0; rep < 50; ++rep) {
    const auto b = gen.draw(rng);
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_TRUE(b[i].delta);
      const auto& support = gen.latency(i).support();
      EXPECT_NE(std::find(support.begin(), support.end(), b[i].t), support.end());
    }
    EXPECT_EQ(b[10].t, 100.0);
    EXPECT_FALSE(b[10].delta);
  }
}

TEST(Resample, CureFrequencyMatchesPilotIncidence)
{
  // Censoring mass sits only at t = 10, beyond every event, so delta* = 0
  // exactly when Y* is infinite.
  std::vector<Observation> r;
  RandomStream data(36);
  for (int i = 0; i < 30; ++i)
    r.push_back({2.0 * data.uniform() - 1.0, 0.5 + 4.0 * data.uniform(), true});
  r.push_back({0.0, 10.0, false});
  r.push_back({0.1, 10.0, false});
  const CensoredSample s(r);
  const BootstrapGenerator gen(s, 0.8);
  const std::size_t i = 30;
  const double cure = 1.0 - gen.uncure_probability(i);
  ASSERT_GT(cure, 0.05);
  ASSERT_LT(cure, 0.95);
  RandomStream rng(37);
  const int reps = 20000;
  int cured = 0;
  for (int k = 0; k < reps; ++k)
    cured += gen.draw(rng)[i].delta ? 0 : 1;
  const double se = std::sqrt(cure * (1.0 - cure) / reps);
  EXPECT_NEAR(static_cast<double>(cured) / reps, cure, 3.0 * se);
}

TEST(CensoringDistribution, ResidualMassAtLargestTime)
{
  const CensoredSample s({{0.0, 1.0, false}, {0.0, 2.0, true}, {0.0, 3.0, true}});
  const auto d = censoring_distribution(s);
  EXPECT_EQ(d.support().back(), 3.0);
  EXPECT_EQ(d.quantile(0.999999), 3.0);
  EXPECT_EQ(d.quantile(0.1), 1.0);
}

TEST(MiseStar, IdenticalResampleAtPilotIsZero)
{
  RandomStream data(41);
  const auto s = fixtures::random_sample(data, 40, false);
  BootstrapConfig cfg;
  cfg.pilot = 0.8;
  cfg.grid = BandwidthGrid({0.8});
  const std::vector<CensoredSample> same{s};
  const auto curve = mise_star_from_resamples(s, 0.0, cfg, same);
  ASSERT_EQ(curve.values.size(), 1u);
  EXPECT_EQ(curve.values[0], 0.0);
  EXPECT_EQ(curve.argmin_index, 0u);
}

TEST(MiseStar, SingleBandwidthGrid)
{
  RandomStream data(43);
  const auto s = fixtures::random_sample(data, 60, false);
  BootstrapConfig cfg;
  cfg.resamples = 10;
  cfg.grid = BandwidthGrid({0.7});
  const auto curve = mise_star(s, 0.0, cfg);
  EXPECT_EQ(curve.values.size(), 1u);
  EXPECT_EQ(curve.argmin_index, 0u);
  EXPECT_EQ(select_bandwidth(s, 0.0, cfg), 0.7);
}

TEST(MiseStar, DeterministicAcrossThreadCounts)
{
  auto spec = model1();
  RandomStream data(45);
  const auto s = generate(spec, 100, data);
  BootstrapConfig cfg;
  cfg.resamples = 24;
  cfg.grid = log_grid(5.0, 100.0, 9);
  cfg.seed = 99;
  cfg.threads = 1;
  const auto a = mise_star(s, 5.0, cfg);
  cfg.threads = 4;
  const auto b = mise_star(s, 5.0, cfg);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.failures, b.failures);
  EXPECT_EQ(a.argmin_index, b.argmin_index);
  for (double v : a.values)
    EXPECT_GE(v, 0.0);
  EXPECT_EQ(a.weight_upper, *s.max_uncensored_time());
}

TEST(MiseStar, PilotFailureIsReported)
{
  const CensoredSample s({{0.0, 1.0, false}, {1.0, 2.0, false}, {2.0, 2.0, false}});
  BootstrapConfig cfg;
  cfg.resamples = 2;
  EXPECT_THROW(mise_star(s, 1.0, cfg), Error);
}

TEST(BootstrapConfig, Validation)
{
  BootstrapConfig cfg;
  cfg.resamples = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.time_grid_size = 1;
  EXPECT_THROW(cfg.validate(), Error);
}
