#include <doctest.h>

#include <cmath>

#include "qcdeval/simulate.hpp"

using namespace qcdeval;

namespace {

SimSpec base_spec() {
  SimSpec s;
  s.model = LikelihoodModel::gaussian(0.0, 0.1, 0.1);
  s.n_sequences = 200;
  s.length_law = LengthLaw::fixed(50);
  s.changepoint_law = ChangepointLaw::uniform_over_length();
  s.with_change_fraction = 0.5;
  s.seed = 7;
  return s;
}

}  // namespace

TEST_CASE("geometric p = 1 puts every change at frame 0") {
  auto s = base_spec();
  s.changepoint_law = ChangepointLaw::geometric(1.0);
  s.with_change_fraction = 1.0;
  const auto ds = simulate(s);
  REQUIRE(ds.size() == 200);
  for (const auto& m : ds.metas) CHECK(m.changepoint == MaybeFrame{0});
}

TEST_CASE("zero change fraction gives no changes") {
  auto s = base_spec();
  s.with_change_fraction = 0.0;
  for (const auto& m : simulate(s).metas) CHECK_FALSE(m.changepoint.has_value());
}

TEST_CASE("sequence shape follows the length law") {
  auto s = base_spec();
  s.length_law = LengthLaw::uniform(3, 9);
  const auto ds = simulate(s);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(ds.metas[i].length >= 3);
    CHECK(ds.metas[i].length <= 9);
    CHECK(static_cast<Frame>(ds.values[i].frames()) == ds.metas[i].length);
    if (ds.metas[i].changepoint) CHECK(*ds.metas[i].changepoint < ds.metas[i].length);
  }
  CHECK(ds.metas[0].id == "seq0");
}

TEST_CASE("post-change frames follow the post-change law") {
  auto s = base_spec();
  s.model = LikelihoodModel::poisson(1.0, 40.0);
  s.with_change_fraction = 1.0;
  s.length_law = LengthLaw::fixed(200);
  const auto ds = simulate(s);
  double pre = 0, post = 0;
  std::size_t npre = 0, npost = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const Frame nu = *ds.metas[i].changepoint;
    for (std::size_t t = 0; t < ds.values[i].frames(); ++t) {
      const double v = ds.values[i].frame(t)[0];
      CHECK(v == std::floor(v));
      if (static_cast<Frame>(t) < nu) {
        pre += v;
        ++npre;
      } else {
        post += v;
        ++npost;
      }
    }
  }
  CHECK(pre / npre == doctest::Approx(1.0).epsilon(0.05));
  CHECK(post / npost == doctest::Approx(40.0).epsilon(0.02));
}

TEST_CASE("simulation is reproducible across worker counts") {
  auto s = base_spec();
  s.length_law = LengthLaw::uniform(5, 80);
  const auto a = simulate(s, 1);
  const auto b = simulate(s, 8);
  const auto c = simulate(s, 3);
  CHECK(a == b);
  CHECK(a == c);
  s.seed = 8;
  CHECK_FALSE(simulate(s, 1) == a);
}

TEST_CASE("changepoint frequency within 3 binomial standard deviations") {
  auto s = base_spec();
  s.n_sequences = 10000;
  s.length_law = LengthLaw::fixed(5);
  s.with_change_fraction = 0.3;
  std::size_t n = 0;
  for (const auto& m : simulate(s).metas) n += m.changepoint.has_value();
  const double sd = std::sqrt(10000 * 0.3 * 0.7);
  CHECK(std::abs(static_cast<double>(n) - 3000.0) <= 3 * sd);
}

TEST_CASE("gaussian pre-change moments within 5 standard errors") {
  auto s = base_spec();
  s.n_sequences = 1000;
  s.length_law = LengthLaw::fixed(1000);
  s.with_change_fraction = 0.0;
  const auto ds = simulate(s);
  double sum = 0, sum2 = 0, n = 0;
  for (const auto& v : ds.values) {
    for (double x : v.data) {
      sum += x;
      sum2 += x * x;
      ++n;
    }
  }
  REQUIRE(n >= 1e6);
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  const double sigma2 = 0.1;
  CHECK(std::abs(mean) <= 5 * std::sqrt(sigma2 / n));
  // Var of the sample variance for a normal law: 2 sigma^4 / n.
  CHECK(std::abs(var - sigma2) <= 5 * std::sqrt(2 * sigma2 * sigma2 / n));
}

TEST_CASE("geometric changepoint mean within 5 standard errors") {
  auto s = base_spec();
  s.n_sequences = 20000;
  s.length_law = LengthLaw::fixed(1000);
  s.with_change_fraction = 1.0;
  s.model = LikelihoodModel::poisson(1.0, 2.0);
  const double p = 0.05;
  s.changepoint_law = ChangepointLaw::geometric(p);
  const auto ds = simulate(s);
  double sum = 0;
  std::size_t n = 0;
  for (const auto& m : ds.metas) {
    REQUIRE(m.changepoint.has_value());
    sum += static_cast<double>(*m.changepoint);
    ++n;
  }
  const double mean = (1 - p) / p;
  const double se = std::sqrt((1 - p) / (p * p) / static_cast<double>(n));
  CHECK(std::abs(sum / n - mean) <= 5 * se);
}

TEST_CASE("geometric changepoints beyond the sequence are recorded as no change") {
  auto s = base_spec();
  s.length_law = LengthLaw::fixed(3);
  s.with_change_fraction = 1.0;
  s.changepoint_law = ChangepointLaw::geometric(0.01);
  std::size_t none = 0;
  for (const auto& m : simulate(s).metas) none += !m.changepoint.has_value();
  CHECK(none > 150);
}

TEST_CASE("spec validation") {
  auto s = base_spec();
  s.with_change_fraction = 1.5;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = base_spec();
  s.length_law = LengthLaw::uniform(5, 4);
  CHECK_THROWS_AS(simulate(s), ValidationError);
  s = base_spec();
  s.length_law = LengthLaw::fixed(0);
  CHECK_THROWS_AS(simulate(s), ValidationError);
  s = base_spec();
  s.changepoint_law = ChangepointLaw::geometric(0.0);
  CHECK_THROWS_AS(simulate(s), ValidationError);
  s = base_spec();
  s.n_sequences = 0;
  CHECK_THROWS_AS(simulate(s), ValidationError);
}

TEST_CASE("spec json round trip") {
  auto s = base_spec();
  s.changepoint_law = ChangepointLaw::geometric(0.01);
  s.length_law = LengthLaw::uniform(10, 100);
  s.seed = 0xFFFFFFFFFFFFFFFFull;
  const auto back = sim_spec_from_json(to_json(s));
  CHECK(to_json(back) == to_json(s));
  CHECK(back.seed == s.seed);
  CHECK(simulate(back) == simulate(s));
}

TEST_CASE("truncate with the original length is the identity") {
  auto s = base_spec();
  const auto ds = simulate(s);
  const auto r = truncate(ds, LengthLaw::fixed(50), 3);
  CHECK(r.clamped == 0);
  CHECK(r.dataset == ds);
}

TEST_CASE("truncate to a random range") {
  auto s = base_spec();
  s.length_law = LengthLaw::fixed(1000);
  s.n_sequences = 300;
  const auto ds = simulate(s);
  const auto r = truncate(ds, LengthLaw::uniform(30, 300), 4);
  CHECK(r.clamped == 0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& m = r.dataset.metas[i];
    CHECK(m.length >= 30);
    CHECK(m.length <= 300);
    CHECK(static_cast<Frame>(r.dataset.values[i].frames()) == m.length);
    for (Frame t = 0; t < m.length; ++t) {
      CHECK(r.dataset.values[i].frame(t)[0] == ds.values[i].frame(t)[0]);
    }
    const auto& orig = ds.metas[i].changepoint;
    if (orig && *orig < m.length) {
      CHECK(m.changepoint == orig);
    } else {
      CHECK_FALSE(m.changepoint.has_value());
    }
  }
}

TEST_CASE("truncation removes changes beyond the new end") {
  LabeledDataset ds;
  ds.metas.push_back({"a", 1000, Frame{500}});
  ds.values.emplace_back(std::vector<double>(1000, 0.0));
  const auto r = truncate(ds, LengthLaw::fixed(100), 1);
  CHECK(r.dataset.metas[0].length == 100);
  CHECK_FALSE(r.dataset.metas[0].changepoint.has_value());
}

TEST_CASE("truncation beyond the original length is clamped and counted") {
  LabeledDataset ds;
  ds.metas.push_back({"a", 10, Frame{5}});
  ds.values.emplace_back(std::vector<double>(10, 1.0));
  ds.metas.push_back({"b", 40, std::nullopt});
  ds.values.emplace_back(std::vector<double>(40, 1.0));
  const auto r = truncate(ds, LengthLaw::fixed(20), 1);
  CHECK(r.clamped == 1);
  CHECK(r.dataset.metas[0].length == 10);
  CHECK(r.dataset.metas[0].changepoint == MaybeFrame{5});
  CHECK(r.dataset.metas[1].length == 20);
}
