#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "qcdeval/common.hpp"
#include "qcdeval/survival.hpp"

using namespace qcdeval;

namespace {

std::vector<SurvivalSample> hand_three() { return {{1, true}, {2, false}, {3, true}}; }

// Empirical survival #{time > t} / n for uncensored samples.
double empirical_survival(const std::vector<SurvivalSample>& s, double t) {
  const auto above = std::count_if(s.begin(), s.end(), [&](auto x) { return x.time > t; });
  return static_cast<double>(above) / static_cast<double>(s.size());
}

// Midpoint-rule integral of a step function; exact when every step lies on
// the integer grid refined by `per_unit`.
double riemann(const StepSurvivalCurve& c, double a, int per_unit) {
  const int n = static_cast<int>(std::round(a * per_unit));
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += c((i + 0.5) / per_unit);
  return s / per_unit;
}

}  // namespace

TEST_CASE("fit_km hand example with one censoring") {
  const auto curve = fit_km(hand_three());
  REQUIRE(curve.drop_times == std::vector<double>{1, 3});
  CHECK(curve.at_risk == std::vector<std::size_t>{3, 1});
  CHECK(curve.deaths == std::vector<std::size_t>{1, 1});
  CHECK(curve.survival_values[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(curve.survival_values[1] == 0.0);
  CHECK(curve(0.5) == 1.0);
  CHECK(curve(1.0) == doctest::Approx(2.0 / 3.0));
  CHECK(curve(2.999) == doctest::Approx(2.0 / 3.0));
  CHECK(curve(3.0) == 0.0);
  CHECK(curve.max_observed == 3.0);
}

TEST_CASE("fit_km single event and all-censored") {
  const std::vector<SurvivalSample> one{{5, true}};
  const auto c1 = fit_km(one);
  CHECK(c1(4.999) == 1.0);
  CHECK(c1(5.0) == 0.0);

  const std::vector<SurvivalSample> cens{{4, false}, {4, false}};
  const auto c2 = fit_km(cens);
  CHECK(c2.drop_times.empty());
  CHECK(c2(100.0) == 1.0);
}

TEST_CASE("fit_km errors") {
  CHECK_THROWS_WITH_AS(fit_km({}), "no samples", ValidationError);
  const std::vector<SurvivalSample> neg{{-1, true}};
  CHECK_THROWS_WITH_AS(fit_km(neg), "invalid sample", ValidationError);
  const std::vector<SurvivalSample> inf{{INFINITY, false}};
  CHECK_THROWS_WITH_AS(fit_km(inf), "invalid sample", ValidationError);
  const std::vector<SurvivalSample> nan{{NAN, true}};
  CHECK_THROWS_AS(fit_km(nan), ValidationError);
}

TEST_CASE("tie: death and censoring at the same time share the risk set") {
  const std::vector<SurvivalSample> s{{2, true}, {2, false}, {5, true}};
  const auto c = fit_km(s);
  REQUIRE(c.drop_times.size() == 2);
  CHECK(c.at_risk[0] == 3);
  CHECK(c.deaths[0] == 1);
  CHECK(c.survival_values[0] == doctest::Approx(2.0 / 3.0));
  CHECK(c.at_risk[1] == 1);
}

TEST_CASE("rmst hand values") {
  const auto r = rmst(fit_km(hand_three()), 3.0);
  CHECK(std::abs(r.value - 7.0 / 3.0) < 1e-12);
  CHECK_FALSE(r.beyond_observed);

  const std::vector<SurvivalSample> cens{{4, false}, {4, false}};
  CHECK(rmst(fit_km(cens), 4.0).value == 4.0);

  const std::vector<SurvivalSample> one{{5, true}};
  const auto r5 = rmst(fit_km(one), 5.0);
  CHECK(r5.value == 5.0);
  CHECK(r5.variance == 0.0);

  CHECK_THROWS_AS(rmst(fit_km(one), -1.0), ValidationError);
  CHECK(rmst(fit_km(one), 0.0).value == 0.0);
}

TEST_CASE("rmst beyond the observed support holds the last value and warns") {
  const auto r = rmst(fit_km(hand_three()), 10.0);
  CHECK(r.beyond_observed);
  CHECK(std::abs(r.value - 7.0 / 3.0) < 1e-12);  // S = 0 after t = 3

  const std::vector<SurvivalSample> s{{1, true}, {4, false}};
  const auto r2 = rmst(fit_km(s), 6.0);
  CHECK(r2.beyond_observed);
  CHECK(r2.value == doctest::Approx(1.0 + 0.5 * 5.0));
}

TEST_CASE("restricted variance matches the discrete second moment when uncensored") {
  // For uncensored data with a >= max, variance = population variance of times.
  const std::vector<SurvivalSample> s{{1, true}, {2, true}, {4, true}, {4, true}};
  const auto r = rmst(fit_km(s), 4.0);
  const double mean = 11.0 / 4.0;
  const double var = (1 + 4 + 16 + 16) / 4.0 - mean * mean;
  CHECK(r.value == doctest::Approx(mean).epsilon(1e-14));
  CHECK(r.variance == doctest::Approx(var).epsilon(1e-12));
}

TEST_CASE("max_last_observed") {
  const std::vector<SurvivalSample> a{{3, true}, {5, false}, {6, true}};
  CHECK(max_last_observed(a) == 6.0);
  const std::vector<SurvivalSample> b{{0, false}};
  CHECK(max_last_observed(b) == 0.0);
  const std::vector<SurvivalSample> c{{2.5, true}, {2.5, false}};
  CHECK(max_last_observed(c) == 2.5);
  CHECK_THROWS_AS(max_last_observed({}), ValidationError);
}

TEST_CASE("property: uncensored product-limit equals the empirical survival function") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 40)(rng);
    std::vector<SurvivalSample> s(n);
    for (auto& x : s) x = {static_cast<double>(std::uniform_int_distribution<int>(0, 15)(rng)), true};
    const auto c = fit_km(s);
    for (double t = -0.5; t <= 16.0; t += 0.5) {
      CHECK(std::abs(c(t) - empirical_survival(s, t)) < 1e-12);
    }
  }
}

TEST_CASE("property: curve invariants on random censored data") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 30)(rng);
    std::vector<SurvivalSample> s(n);
    for (auto& x : s) {
      x = {static_cast<double>(std::uniform_int_distribution<int>(0, 12)(rng)),
           std::bernoulli_distribution(0.6)(rng)};
    }
    const auto c = fit_km(s);
    double prod = 1.0;
    for (std::size_t j = 0; j < c.drop_times.size(); ++j) {
      if (j > 0) CHECK(c.drop_times[j] > c.drop_times[j - 1]);
      CHECK(c.deaths[j] > 0);
      CHECK(c.deaths[j] <= c.at_risk[j]);
      if (j > 0) CHECK(c.at_risk[j] <= c.at_risk[j - 1] - c.deaths[j - 1]);
      // Risk set by brute force: every sample with time >= t_j.
      const auto brute = std::count_if(s.begin(), s.end(),
                                       [&](auto x) { return x.time >= c.drop_times[j]; });
      CHECK(c.at_risk[j] == static_cast<std::size_t>(brute));
      prod *= 1.0 - static_cast<double>(c.deaths[j]) / static_cast<double>(c.at_risk[j]);
      CHECK(std::abs(c.survival_values[j] - prod) < 1e-12);
      if (j > 0) CHECK(c.survival_values[j] <= c.survival_values[j - 1]);
    }
    // rmst equals a fine midpoint sum (steps sit on the integer grid).
    const double a = std::uniform_int_distribution<int>(0, 14)(rng);
    const auto r = rmst(c, a);
    CHECK(r.value == doctest::Approx(riemann(c, a, 4)).epsilon(1e-12));
    CHECK(r.value >= 0.0);
    CHECK(r.value <= a + 1e-12);
    CHECK(r.variance >= 0.0);
  }
}

TEST_CASE("property: rmst is monotone and 1-Lipschitz in the horizon") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<SurvivalSample> s(20);
    for (auto& x : s) {
      x = {std::uniform_real_distribution<double>(0, 10)(rng), std::bernoulli_distribution(0.5)(rng)};
    }
    const auto c = fit_km(s);
    double prev = 0.0;
    for (double a = 0.0; a <= 12.0; a += 0.25) {
      const double v = rmst(c, a).value;
      CHECK(v >= prev - 1e-12);
      CHECK(v - prev <= 0.25 + 1e-12);
      prev = v;
    }
  }
}

TEST_CASE("censoring after the last drop enlarges every risk set") {
  // A late censored sample is at risk at every drop, so the curve moves.
  std::vector<SurvivalSample> s{{1, true}, {2, true}};
  const auto c0 = fit_km(s);
  s.push_back({9, false});
  const auto c1 = fit_km(s);
  CHECK(c1.drop_times == c0.drop_times);
  CHECK(c0(1.0) == doctest::Approx(0.5));
  CHECK(c1(1.0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("property: censoring strictly before the first drop leaves the curve unchanged") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<SurvivalSample> s(15);
    for (auto& x : s) {
      x = {std::uniform_real_distribution<double>(1, 10)(rng), std::bernoulli_distribution(0.7)(rng)};
    }
    const auto c0 = fit_km(s);
    if (c0.drop_times.empty()) continue;
    const double early = std::uniform_real_distribution<double>(0, 1)(rng) * c0.drop_times.front();
    s.push_back({early, false});
    const auto c1 = fit_km(s);
    CHECK(c1.drop_times == c0.drop_times);
    CHECK(c1.survival_values == c0.survival_values);
  }
}

TEST_CASE("csv export has a leading origin row") {
  std::ostringstream out;
  write_curve_csv(out, fit_km(hand_three()));
  CHECK(out.str() ==
        "t,S,n_at_risk,d\n"
        "0,1,3,0\n"
        "1,0.6666666666666667,3,1\n"
        "3,0,1,1\n");
}
