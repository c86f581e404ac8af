#include "qcdeval/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "format.hpp"
#include "qcdeval/harness.hpp"
#include "qcdeval/parallel.hpp"
#include "qcdeval/quadrature.hpp"
#include "qcdeval/rng.hpp"

namespace qcdeval {

namespace {

constexpr std::uint64_t kArlSalt = 0xa71;
constexpr std::uint64_t kAddSalt = 0xadd;
constexpr std::uint64_t kBiasSalt = 0xb1a5;
constexpr std::uint64_t kOrderingSalt = 0x0de7;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct MeanSem {
  double mean = 0.0;
  double sem = 0.0;
};

// Sequential reduction so the result does not depend on worker count.
MeanSem mean_sem(const std::vector<double>& xs) {
  MeanSem out;
  if (xs.empty()) return out;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) out.mean += x;
  out.mean /= n;
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - out.mean) * (x - out.mean);
    out.sem = std::sqrt(ss / (n - 1.0) / n);
  }
  return out;
}

DetectorFactory factory_for(const DetectorConfig& config) {
  config.validate();
  return [config] { return make_detector(config); };
}

}  // namespace

McEstimate true_arl_mc(const LikelihoodModel& model, const DetectorFactory& detector,
                       const OracleOptions& opts) {
  model.validate();
  if (opts.n_reps == 0) throw ValidationError("oracle needs at least one replication");
  if (opts.horizon_cap < 1) throw ValidationError("horizon_cap must be positive");

  std::vector<double> tau(opts.n_reps, -1.0);
  parallel_for(opts.n_reps, opts.workers, [&](std::size_t r) {
    auto rng = stream_engine(opts.seed, r, kArlSalt);
    FrameSampler sampler(model);
    auto det = detector();
    for (Frame t = 0; t < opts.horizon_cap; ++t) {
      const double x = sampler.pre(rng);
      if (det->update(std::span<const double>(&x, 1))) {
        tau[r] = static_cast<double>(t);
        return;
      }
    }
  });

  McEstimate est;
  est.n_reps = opts.n_reps;
  std::vector<double> used;
  used.reserve(tau.size());
  for (double t : tau) {
    if (t < 0.0) {
      ++est.cap_hits;
    } else {
      used.push_back(t);
    }
  }
  if (static_cast<double>(est.cap_hits) >= kMaxCapHitFraction * static_cast<double>(opts.n_reps)) {
    throw Error("increase horizon_cap: " + std::to_string(est.cap_hits) + " of " +
                std::to_string(opts.n_reps) + " replications reached the cap");
  }
  const auto ms = mean_sem(used);
  est.value = ms.mean;
  est.sem = ms.sem;
  est.n_used = used.size();
  return est;
}

McEstimate true_arl_mc(const LikelihoodModel& model, const DetectorConfig& detector,
                       const OracleOptions& opts) {
  return true_arl_mc(model, factory_for(detector), opts);
}

McEstimate true_add_mc(const LikelihoodModel& model, const DetectorFactory& detector,
                       const ChangepointLaw& changepoints, const OracleOptions& opts) {
  model.validate();
  changepoints.validate();
  if (changepoints.kind != ChangepointLaw::Kind::Geometric) {
    throw ValidationError("ADD oracle needs a geometric changepoint law");
  }
  if (opts.n_reps == 0) throw ValidationError("oracle needs at least one replication");
  if (opts.horizon_cap < 1) throw ValidationError("horizon_cap must be positive");

  // -1: false alarm (discarded), -2: cap hit after the change.
  std::vector<double> delay(opts.n_reps, -1.0);
  parallel_for(opts.n_reps, opts.workers, [&](std::size_t r) {
    auto rng = stream_engine(opts.seed, r, kAddSalt);
    FrameSampler sampler(model);
    auto det = detector();
    const Frame nu = *changepoints.draw(0, rng);
    for (Frame t = 0;; ++t) {
      if (t >= nu && t - nu >= opts.horizon_cap) {
        delay[r] = -2.0;
        return;
      }
      const double x = t < nu ? sampler.pre(rng) : sampler.post(rng);
      if (det->update(std::span<const double>(&x, 1))) {
        delay[r] = t < nu ? -1.0 : static_cast<double>(t - nu);
        return;
      }
    }
  });

  McEstimate est;
  est.n_reps = opts.n_reps;
  std::vector<double> used;
  for (double d : delay) {
    if (d == -2.0) {
      ++est.cap_hits;
    } else if (d >= 0.0) {
      used.push_back(d);
    }
  }
  const std::size_t retained = used.size() + est.cap_hits;
  if (retained == 0) throw Error("ADD oracle: every replication raised a false alarm");
  if (static_cast<double>(est.cap_hits) >= kMaxCapHitFraction * static_cast<double>(retained)) {
    throw Error("increase horizon_cap: " + std::to_string(est.cap_hits) + " of " +
                std::to_string(retained) + " retained replications reached the cap");
  }
  const auto ms = mean_sem(used);
  est.value = ms.mean;
  est.sem = ms.sem;
  est.n_used = used.size();
  return est;
}

McEstimate true_add_mc(const LikelihoodModel& model, const DetectorConfig& detector,
                       const ChangepointLaw& changepoints, const OracleOptions& opts) {
  return true_add_mc(model, factory_for(detector), changepoints, opts);
}

// ---------------------------------------------------------------------------

Distribution Distribution::exponential(double rate) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("exp: rate must be positive");
  Distribution d;
  d.kind = Kind::Exponential;
  d.rate = rate;
  return d;
}

Distribution Distribution::uniform(double lo, double hi) {
  if (!(lo >= 0.0) || !(hi > lo) || !std::isfinite(hi)) {
    throw ValidationError("unif: need 0 <= lo < hi");
  }
  Distribution d;
  d.kind = Kind::Uniform;
  d.lo = lo;
  d.hi = hi;
  return d;
}

Distribution Distribution::empirical(std::vector<double> atoms) {
  if (atoms.empty()) throw ValidationError("emp: needs at least one atom");
  for (double a : atoms) {
    if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("emp: atoms must be finite, >= 0");
  }
  std::sort(atoms.begin(), atoms.end());
  Distribution d;
  d.kind = Kind::Empirical;
  d.atoms = std::move(atoms);
  return d;
}

Distribution Distribution::never() { return Distribution{}; }

double Distribution::cdf(double t) const {
  switch (kind) {
    case Kind::Exponential: return t <= 0.0 ? 0.0 : -std::expm1(-rate * t);
    case Kind::Uniform: return std::clamp((t - lo) / (hi - lo), 0.0, 1.0);
    case Kind::Empirical: {
      const auto k = std::upper_bound(atoms.begin(), atoms.end(), t) - atoms.begin();
      return static_cast<double>(k) / static_cast<double>(atoms.size());
    }
    case Kind::Never: return 0.0;
  }
  return 0.0;
}

double Distribution::density(double t) const {
  switch (kind) {
    case Kind::Exponential: return t < 0.0 ? 0.0 : rate * std::exp(-rate * t);
    case Kind::Uniform: return (t >= lo && t <= hi) ? 1.0 / (hi - lo) : 0.0;
    default: throw ValidationError("density requires an absolutely continuous law");
  }
}

double Distribution::sample(std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::Exponential: return std::exponential_distribution<double>(rate)(rng);
    case Kind::Uniform: return std::uniform_real_distribution<double>(lo, hi)(rng);
    case Kind::Empirical:
      return atoms[std::uniform_int_distribution<std::size_t>(0, atoms.size() - 1)(rng)];
    case Kind::Never: return kInf;
  }
  return kInf;
}

double Distribution::mean() const {
  switch (kind) {
    case Kind::Exponential: return 1.0 / rate;
    case Kind::Uniform: return 0.5 * (lo + hi);
    case Kind::Empirical: {
      double s = 0.0;
      for (double a : atoms) s += a;
      return s / static_cast<double>(atoms.size());
    }
    case Kind::Never: return kInf;
  }
  return kInf;
}

double Distribution::restricted_mean(double a) const {
  if (a <= 0.0) return 0.0;
  switch (kind) {
    case Kind::Exponential: return -std::expm1(-rate * a) / rate;
    case Kind::Uniform:
      if (a <= lo) return a;
      if (a >= hi) return 0.5 * (lo + hi);
      return lo + ((hi - lo) * (hi - lo) - (hi - a) * (hi - a)) / (2.0 * (hi - lo));
    case Kind::Empirical: {
      double s = 0.0;
      for (double v : atoms) s += std::min(v, a);
      return s / static_cast<double>(atoms.size());
    }
    case Kind::Never: return a;
  }
  return a;
}

double Distribution::support_sup() const {
  switch (kind) {
    case Kind::Exponential: return kInf;
    case Kind::Uniform: return hi;
    case Kind::Empirical: return atoms.back();
    case Kind::Never: return kInf;
  }
  return kInf;
}

std::string Distribution::describe() const {
  using detail::format_double;
  switch (kind) {
    case Kind::Exponential: return "exp:" + format_double(rate);
    case Kind::Uniform: return "unif:" + format_double(lo) + "," + format_double(hi);
    case Kind::Empirical: {
      std::string s = "emp:";
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        s += (i ? "," : "") + format_double(atoms[i]);
      }
      return s;
    }
    case Kind::Never: return "none";
  }
  return "?";
}

namespace {

std::vector<double> numbers(const std::vector<std::string>& items) {
  std::vector<double> out;
  for (const auto& item : items) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("not a number: '" + item + "'");
    }
  }
  return out;
}

Distribution make_distribution(const std::string& family, const std::vector<std::string>& params) {
  const auto p = numbers(params);
  if (family == "exp" && p.size() == 1) return Distribution::exponential(p[0]);
  if (family == "unif" && p.size() == 2) return Distribution::uniform(p[0], p[1]);
  if (family == "emp" && !p.empty()) return Distribution::empirical(p);
  if (family == "none" && p.empty()) return Distribution::never();
  throw ValidationError("bad distribution: " + family);
}

// Splits "fam:p,p,fam:p" into (family, params) groups.
std::vector<std::pair<std::string, std::vector<std::string>>> family_groups(std::string_view text) {
  std::vector<std::pair<std::string, std::vector<std::string>>> groups;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
    if (item.empty()) throw ValidationError("empty field in '" + std::string(text) + "'");
    if (std::isalpha(static_cast<unsigned char>(item.front()))) {
      const auto colon = item.find(':');
      groups.emplace_back(item.substr(0, colon), std::vector<std::string>{});
      if (colon != std::string::npos) groups.back().second.push_back(item.substr(colon + 1));
    } else {
      if (groups.empty()) throw ValidationError("expected a family name in '" + std::string(text) + "'");
      groups.back().second.push_back(item);
    }
  }
  return groups;
}

}  // namespace

Distribution parse_distribution(std::string_view text) {
  const auto groups = family_groups(text);
  if (groups.size() != 1) throw ValidationError("expected one distribution: " + std::string(text));
  return make_distribution(groups[0].first, groups[0].second);
}

ParametricCensorModel parse_censor_model(std::string_view text) {
  const auto groups = family_groups(text);
  if (groups.size() != 2) {
    throw ValidationError("expected 'EVENT,CENSOR' laws, got: " + std::string(text));
  }
  return {make_distribution(groups[0].first, groups[0].second),
          make_distribution(groups[1].first, groups[1].second)};
}

// ---------------------------------------------------------------------------

std::pair<double, double> finite_sample_bounds(const ParametricCensorModel& model, std::size_t n,
                                               double a, std::size_t quad_points) {
  if (n == 0) throw ValidationError("bounds need n >= 1");
  if (!(a >= 0.0) || !std::isfinite(a)) throw ValidationError("bounds need a finite a >= 0");
  if (model.event.kind == Distribution::Kind::Never) {
    throw ValidationError("event law must have finite support");
  }
  const double power = static_cast<double>(n - 1);
  auto weight = [&](double t) {
    const double g = model.censor.cdf(t);
    if (g == 0.0) return 0.0;
    return g * std::pow(model.observed_cdf(t), power);
  };

  if (!model.event.absolutely_continuous()) {
    // Stieltjes integral against a purely atomic F: sum over atoms in [0, a].
    const double mass = 1.0 / static_cast<double>(model.event.atoms.size());
    double lower = 0.0;
    double upper = 0.0;
    for (double t : model.event.atoms) {
      if (t > a) break;
      const double w = weight(t) * mass;
      lower -= t * w;
      upper += a * w;
    }
    return {lower, upper};
  }

  // Break at every kink of F, G or H inside (0, a).
  std::vector<double> breaks{0.0, a};
  auto add = [&](double t) {
    if (t > 0.0 && t < a) breaks.push_back(t);
  };
  for (const Distribution* d : {&model.event, &model.censor}) {
    if (d->kind == Distribution::Kind::Uniform) {
      add(d->lo);
      add(d->hi);
    } else if (d->kind == Distribution::Kind::Empirical) {
      for (double t : d->atoms) add(t);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  const auto f_lower = [&](double t) { return t * weight(t) * model.event.density(t); };
  const auto f_mass = [&](double t) { return weight(t) * model.event.density(t); };
  const auto lower = integrate_piecewise(f_lower, breaks, quad_points);
  const auto mass = integrate_piecewise(f_mass, breaks, quad_points);
  if (!lower.converged || !mass.converged) {
    throw Error("quadrature did not converge for " + model.event.describe() + " x " +
                model.censor.describe());
  }
  return {0.0 - lower.value, a * mass.value};
}

std::pair<double, double> mc_finite_sample_bias(const ParametricCensorModel& model,
                                                std::size_t n, double a,
                                                const BoundOptions& opts) {
  if (n == 0 || opts.mc_reps < 2) throw ValidationError("need n >= 1 and at least two reps");
  std::vector<double> est(opts.mc_reps);
  parallel_for(opts.mc_reps, opts.workers, [&](std::size_t r) {
    auto rng = stream_engine(opts.seed, r, kBiasSalt + n);
    std::vector<SurvivalSample> samples(n);
    for (auto& s : samples) {
      const double tau = model.event.sample(rng);
      const double c = model.censor.sample(rng);
      s = tau < c ? SurvivalSample{tau, true} : SurvivalSample{c, false};
    }
    est[r] = rmst(fit_km(samples), a).value;
  });
  const auto ms = mean_sem(est);
  return {ms.mean - model.event.restricted_mean(a), ms.sem};
}

BoundReport arl_bias_bounds(const ParametricCensorModel& model, std::size_t n, double a,
                        const BoundOptions& opts) {
  BoundReport rep;
  rep.model = model.event.describe() + " x " + model.censor.describe();
  rep.n = n;
  rep.a = a;
  std::tie(rep.lower, rep.upper) = finite_sample_bounds(model, n, a, opts.quad_points);
  const auto [bias, sem] = mc_finite_sample_bias(model, n, a, opts);
  rep.mc_bias = bias;
  rep.mc_ci_halfwidth = opts.ci_sigmas * sem;
  rep.contained = rep.lower - rep.mc_ci_halfwidth <= rep.mc_bias &&
                  rep.mc_bias <= rep.upper + rep.mc_ci_halfwidth;
  return rep;
}

BoundReport add_bias_bounds(const ParametricCensorModel& model, std::size_t n, double b,
                        const BoundOptions& opts) {
  return arl_bias_bounds(model, n, b, opts);
}

// ---------------------------------------------------------------------------

std::string_view to_string(OrderingStatus s) {
  switch (s) {
    case OrderingStatus::Strict: return "strict";
    case OrderingStatus::Inconclusive: return "inconclusive";
    case OrderingStatus::Violated: return "violated";
  }
  return "?";
}

OrderingStatus classify_ordering(const OrderingReport& r, double sigmas) {
  if (!r.km.defined() || !r.lb.defined()) return OrderingStatus::Inconclusive;
  const double sem_km = r.km.sem.value_or(0.0);
  const double sem_lb = r.lb.sem.value_or(0.0);
  // LB bias <= KM bias
  const double d1 = r.km_bias - r.lb_bias;
  const double s1 = sigmas * std::hypot(sem_km, sem_lb);
  // KM bias <= 0
  const double d2 = -r.km_bias;
  const double s2 = sigmas * std::hypot(sem_km, r.truth_sem);
  if (d1 < -s1 || d2 < -s2) return OrderingStatus::Violated;
  if (d1 > s1 && d2 > s2) return OrderingStatus::Strict;
  return OrderingStatus::Inconclusive;
}

namespace {

LabeledDataset ordering_dataset(const OrderingSetup& setup) {
  if (setup.sim.n_sequences < kMinOrderingSequences) {
    throw ValidationError("ordering checks need at least " +
                          std::to_string(kMinOrderingSequences) + " sequences");
  }
  LabeledDataset ds = simulate(setup.sim, setup.workers);
  if (setup.truncation) ds = truncate(ds, *setup.truncation, setup.sim.seed).dataset;
  return ds;
}

double law_horizon(const OrderingSetup& setup) {
  return static_cast<double>(setup.truncation ? setup.truncation->sup()
                                              : setup.sim.length_law.sup());
}

void finish(OrderingReport& rep) {
  rep.km_bias = rep.km.value.value_or(0.0) - rep.truth;
  rep.lb_bias = rep.lb.value.value_or(0.0) - rep.truth;
  rep.status = classify_ordering(rep);
}

}  // namespace

OrderingReport arl_ordering_check(const OrderingSetup& setup) {
  const LabeledDataset ds = ordering_dataset(setup);
  const auto run = detect_all(ds, setup.detector, setup.workers);
  OrderingReport rep;
  rep.horizon = law_horizon(setup);
  rep.km = km_arl(ds.metas, run.outcomes, rep.horizon);
  rep.lb = lb_arl(ds.metas, run.outcomes);
  OracleOptions oracle = setup.oracle;
  oracle.workers = setup.workers;
  const auto truth = true_arl_mc(setup.sim.model, setup.detector, oracle);
  rep.truth = truth.value;
  rep.truth_sem = truth.sem;
  finish(rep);
  return rep;
}

OrderingReport add_ordering_check(const OrderingSetup& setup) {
  const LabeledDataset ds = ordering_dataset(setup);
  const auto run = detect_all(ds, setup.detector, setup.workers);
  OrderingReport rep;
  rep.horizon = law_horizon(setup);
  rep.km = km_add(ds.metas, run.outcomes, rep.horizon);
  rep.lb = lb_add(ds.metas, run.outcomes);
  OracleOptions oracle = setup.oracle;
  oracle.workers = setup.workers;
  const auto truth = true_add_mc(setup.sim.model, setup.detector, setup.sim.changepoint_law, oracle);
  rep.truth = truth.value;
  rep.truth_sem = truth.sem;
  finish(rep);
  return rep;
}

OrderingReport arl_ordering_check(const ParametricCensorModel& model, std::size_t n,
                                   std::uint64_t seed) {
  if (n == 0) throw ValidationError("need n >= 1");
  if (model.event.kind == Distribution::Kind::Never) {
    throw ValidationError("event law must have finite support");
  }
  std::vector<SurvivalSample> samples(n);
  std::vector<double> lb_taus;
  for (std::size_t i = 0; i < n; ++i) {
    auto rng = stream_engine(seed, i, kOrderingSalt);
    const double tau = model.event.sample(rng);
    const double c = model.censor.sample(rng);
    samples[i] = tau < c ? SurvivalSample{tau, true} : SurvivalSample{c, false};
    if (tau <= c) lb_taus.push_back(tau);
  }
  OrderingReport rep;
  const double sup = model.censor.support_sup();
  rep.horizon = std::isfinite(sup) ? sup : max_last_observed(samples);
  rep.km = km_estimate(MetricName::KmArl, samples, rep.horizon);

  rep.lb.name = MetricName::LbArl;
  rep.lb.n_used = lb_taus.size();
  if (!lb_taus.empty()) {
    const double m = static_cast<double>(lb_taus.size());
    double mean = 0.0;
    for (double t : lb_taus) mean += t;
    mean /= m;
    double ss = 0.0;
    for (double t : lb_taus) ss += (t - mean) * (t - mean);
    rep.lb.value = mean;
    rep.lb.sem = std::sqrt(ss / m / m);
  }
  rep.truth = model.event.mean();
  rep.truth_sem = 0.0;
  finish(rep);
  return rep;
}

}  // namespace qcdeval
