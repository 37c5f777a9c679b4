#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "recal/errors.hpp"
#include "recal/forecasters.hpp"

using namespace recal;

TEST_CASE("logistic prediction") {
  LogisticForecaster f(2);
  std::vector<double> x = {0.3, 1.0};
  CHECK(f.predict(x) == 0.5);
  CHECK(logistic(1.0) == doctest::Approx(0.7310585786300049).epsilon(1e-15));
  CHECK(logistic(-800.0) == 0.0);
  CHECK(logistic(800.0) == 1.0);
  CHECK(clamp_forecast(1.0) == 1.0 - kForecastClamp);
  CHECK(clamp_forecast(0.0) == kForecastClamp);

  LogisticForecaster strong(1, {StepRule::kFixed, 80.0, 1e-8});
  std::vector<double> one = {1.0};
  strong.learn(one, 1);  // margin 80 * 0.5 = 40
  CHECK(strong.weights()[0] == 40.0);
  CHECK(strong.predict(one) == 1.0 - kForecastClamp);
}

TEST_CASE("fixed-step learning") {
  LogisticForecaster f(1, {StepRule::kFixed, 0.1, 1e-8});
  std::vector<double> x = {1.0};
  f.learn(x, 1);
  CHECK(f.weights()[0] == doctest::Approx(0.05).epsilon(1e-15));

  LogisticForecaster fast(1, {StepRule::kFixed, 0.5, 1e-8});
  for (int t = 0; t < 2000; ++t) fast.learn(x, 1);
  CHECK(fast.predict(x) >= 0.99);
}

TEST_CASE("a single step never moves further than the rule allows") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 3.0);
  for (auto rule : {StepRule::kFixed, StepRule::kAdaptive}) {
    LogisticForecaster f(3, {rule, 0.2, 1e-8});
    for (int t = 0; t < 500; ++t) {
      std::vector<double> x = {normal(rng), normal(rng), 1.0};
      const auto before = f.weights();
      f.learn(x, t % 3 == 0);
      double moved = 0.0, xnorm = 0.0;
      for (std::size_t k = 0; k < 3; ++k) {
        const double d = f.weights()[k] - before[k];
        moved += d * d;
        xnorm += x[k] * x[k];
        if (rule == StepRule::kAdaptive) CHECK(std::abs(d) <= 0.2 + 1e-12);
      }
      if (rule == StepRule::kFixed) CHECK(std::sqrt(moved) <= 0.2 * std::sqrt(xnorm) + 1e-12);
    }
  }
}

TEST_CASE("adaptive first step has magnitude eta per active coordinate") {
  LogisticForecaster f(2, {StepRule::kAdaptive, 0.1, 1e-12});
  std::vector<double> x = {2.0, 0.0};
  f.learn(x, 1);
  CHECK(f.weights()[0] == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(f.weights()[1] == 0.0);
}

TEST_CASE("forecaster input validation") {
  CHECK_THROWS_AS(LogisticForecaster(0), DomainError);
  CHECK_THROWS_AS(LogisticForecaster(1, {StepRule::kFixed, 0.0, 1e-8}), DomainError);
  LogisticForecaster f(2);
  std::vector<double> short_x = {1.0};
  std::vector<double> bad_x = {std::nan(""), 1.0};
  std::vector<double> x = {1.0, 1.0};
  CHECK_THROWS_AS((void)f.predict(short_x), DomainError);
  CHECK_THROWS_AS((void)f.predict(bad_x), DomainError);
  CHECK_THROWS_AS(f.learn(x, 2), DomainError);
  CHECK(parse_step_rule("adaptive") == StepRule::kAdaptive);
  CHECK(to_string(StepRule::kFixed) == "fixed");
  CHECK_THROWS_AS(parse_step_rule("newton"), ConfigError);
}

TEST_CASE("aggregator weights") {
  ExpertAggregator agg(2);
  std::vector<double> split = {0.0, 1.0};
  CHECK(agg.aggregate(split) == 0.5);

  // Expert 1 always right, expert 0 always wrong: weight moves to expert 1.
  for (int t = 0; t < 200; ++t) agg.update(split, 1);
  CHECK(agg.weights()[1] > 0.999);
  CHECK(agg.aggregate(split) > 0.999);

  ExpertAggregator single(1);
  std::vector<double> only = {0.37};
  for (int t = 0; t < 50; ++t) single.update(only, t % 2);
  CHECK(single.weights()[0] == 1.0);
  CHECK(single.aggregate(only) == 0.37);

  CHECK_THROWS_AS(ExpertAggregator(0), DomainError);
  std::vector<double> wrong_size = {0.1, 0.2, 0.3};
  std::vector<double> out_of_range = {0.1, 1.2};
  CHECK_THROWS_AS((void)agg.aggregate(wrong_size), DomainError);
  CHECK_THROWS_AS((void)agg.aggregate(out_of_range), DomainError);
  CHECK_THROWS_AS(agg.update(split, -1), DomainError);
}

TEST_CASE("aggregator tracks a perfect expert") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ExpertAggregator agg(2);
  double gap = 0.0;
  for (int t = 0; t < 10'000; ++t) {
    const int y = unif(rng) < 0.5;
    std::vector<double> f = {static_cast<double>(y), 0.5};
    if (t >= 9'000) gap += std::abs(agg.aggregate(f) - y);
    agg.update(f, y);
  }
  CHECK(gap / 1000.0 <= 0.05);
}

TEST_CASE("identical experts keep identical weights") {
  ExpertAggregator agg(3);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    const double p = unif(rng);
    std::vector<double> f = {p, p, unif(rng)};
    agg.update(f, unif(rng) < 0.4);
  }
  auto w = agg.weights();
  CHECK(w[0] == w[1]);
  CHECK(std::accumulate(w.begin(), w.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("aggregate is a convex combination and permutation-symmetric") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ExpertAggregator a(4), b(4);
  const std::vector<std::size_t> perm = {2, 0, 3, 1};
  for (int t = 0; t < 2000; ++t) {
    std::vector<double> f(4), g(4);
    for (auto& v : f) v = unif(rng);
    for (std::size_t k = 0; k < 4; ++k) g[k] = f[perm[k]];
    const double pa = a.aggregate(f);
    CHECK(pa >= *std::min_element(f.begin(), f.end()));
    CHECK(pa <= *std::max_element(f.begin(), f.end()));
    CHECK(pa == doctest::Approx(b.aggregate(g)).epsilon(1e-12));
    const int y = unif(rng) < f[0];
    a.update(f, y);
    b.update(g, y);
  }
  auto wa = a.weights(), wb = b.weights();
  for (std::size_t k = 0; k < 4; ++k) CHECK(wb[k] == doctest::Approx(wa[perm[k]]).epsilon(1e-9));
}

TEST_CASE("aggregator external regret is small against every expert") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  ExpertAggregator agg(4);
  const int T = 50'000;
  for (int t = 0; t < T; ++t) {
    const double z = normal(rng);
    const double q = logistic(3 * z - 0.5);
    std::vector<double> f = {q, 0.5, logistic(6 * z - 1.0), logistic(3 * z + 0.5)};
    agg.update(f, unif(rng) < q);
  }
  const double bound = std::sqrt(std::log(4.0) / 100'000.0) + 0.01;
  for (double r : agg.external_regrets()) CHECK(r <= bound);
  auto losses = agg.expert_losses();
  CHECK(agg.aggregate_loss() <= *std::min_element(losses.begin(), losses.end()) + bound);
}
