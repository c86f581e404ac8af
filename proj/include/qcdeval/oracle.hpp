#pragma once

// Ground-truth oracles and numerical checks of the KM estimators' bias
// behaviour: Monte-Carlo ARL/ADD on unbounded streams, quadrature of the
// finite-sample bias bounds, and truncation-bias ordering checks.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "qcdeval/detectors.hpp"
#include "qcdeval/metrics.hpp"
#include "qcdeval/simulate.hpp"

namespace qcdeval {

// ---------------------------------------------------------------------------
// Monte-Carlo ground truth
// ---------------------------------------------------------------------------

/// Cap-hit fraction at or above which an oracle run is rejected.
inline constexpr double kMaxCapHitFraction = 1e-3;

struct McEstimate {
  double value = 0.0;
  double sem = 0.0;
  std::size_t n_reps = 0;
  /// Replications contributing to the mean (ADD drops false alarms).
  std::size_t n_used = 0;
  std::size_t cap_hits = 0;

  double retention() const {
    return n_reps == 0 ? 0.0 : static_cast<double>(n_used) / static_cast<double>(n_reps);
  }
};

using DetectorFactory = std::function<std::unique_ptr<OnlineDetector>()>;

struct OracleOptions {
  std::size_t n_reps = 100000;
  /// Frames simulated per replication (after the changepoint for ADD) before
  /// the replication counts as a cap hit.
  Frame horizon_cap = 1000000;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

/// Mean first-alarm time on pre-change-only streams. Throws Error
/// ("increase horizon_cap") when too many replications never alarm.
McEstimate true_arl_mc(const LikelihoodModel& model, const DetectorFactory& detector,
                       const OracleOptions& opts);
McEstimate true_arl_mc(const LikelihoodModel& model, const DetectorConfig& detector,
                       const OracleOptions& opts);

/// Mean delay tau - nu over replications with tau >= nu, nu drawn from a
/// geometric changepoint law.
McEstimate true_add_mc(const LikelihoodModel& model, const DetectorFactory& detector,
                       const ChangepointLaw& changepoints, const OracleOptions& opts);
McEstimate true_add_mc(const LikelihoodModel& model, const DetectorConfig& detector,
                       const ChangepointLaw& changepoints, const OracleOptions& opts);

// ---------------------------------------------------------------------------
// Parametric event / censoring laws
// ---------------------------------------------------------------------------

/// Non-negative lifetime law. `Never` puts all mass at +infinity (CDF == 0),
/// i.e. no censoring when used as the censoring law.
struct Distribution {
  enum class Kind { Exponential, Uniform, Empirical, Never };
  Kind kind = Kind::Never;
  double rate = 1.0;
  double lo = 0.0;
  double hi = 1.0;
  std::vector<double> atoms;  // Empirical: equally weighted, sorted

  static Distribution exponential(double rate);
  static Distribution uniform(double lo, double hi);
  static Distribution empirical(std::vector<double> atoms);
  static Distribution never();

  double cdf(double t) const;
  /// Density for absolutely continuous kinds.
  double density(double t) const;
  double sample(std::mt19937_64& rng) const;
  double mean() const;
  /// int_0^a (1 - F(t)) dt
  double restricted_mean(double a) const;
  /// Least upper bound of the support (+inf when unbounded).
  double support_sup() const;
  bool absolutely_continuous() const { return kind == Kind::Exponential || kind == Kind::Uniform; }
  std::string describe() const;
};

/// "exp:RATE", "unif:LO,HI", "emp:V1,V2,...", "none".
Distribution parse_distribution(std::string_view text);

/// Event law F for tau and censoring law G for C, assumed independent.
struct ParametricCensorModel {
  Distribution event;
  Distribution censor;

  /// CDF of min(tau, C): 1 - (1 - F)(1 - G).
  double observed_cdf(double t) const {
    return 1.0 - (1.0 - event.cdf(t)) * (1.0 - censor.cdf(t));
  }
};

/// Parses "F,G", e.g. "exp:1,unif:0,2": a comma followed by a family name
/// starts the censoring law.
ParametricCensorModel parse_censor_model(std::string_view text);

// ---------------------------------------------------------------------------
// Finite-sample bias bounds
// ---------------------------------------------------------------------------

struct BoundOptions {
  std::size_t quad_points = 32;
  std::size_t mc_reps = 10000;
  double ci_sigmas = 3.0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

struct BoundReport {
  std::string model;
  std::size_t n = 0;
  double a = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double mc_bias = 0.0;
  double mc_ci_halfwidth = 0.0;
  bool contained = false;
};

/// lower = -int_0^a t G H^{n-1} dF, upper = int_0^a a G H^{n-1} dF.
/// Quadrature only; throws Error when it does not converge.
std::pair<double, double> finite_sample_bounds(const ParametricCensorModel& model, std::size_t n,
                                               double a, std::size_t quad_points = 32);

/// Mean over `reps` replications of the KM restricted mean on n censored
/// samples, minus int_0^a (1 - F). Returns {bias, standard error}.
std::pair<double, double> mc_finite_sample_bias(const ParametricCensorModel& model,
                                                std::size_t n, double a,
                                                const BoundOptions& opts);

/// Bounds plus Monte-Carlo containment check for the KM-ARL restricted mean.
BoundReport arl_bias_bounds(const ParametricCensorModel& model, std::size_t n, double a,
                        const BoundOptions& opts = {});
/// Same construction for the KM-ADD: `model.event` is the delay law and
/// `model.censor` the law of T - nu over eligible sequences.
BoundReport add_bias_bounds(const ParametricCensorModel& model, std::size_t n, double b,
                        const BoundOptions& opts = {});

// ---------------------------------------------------------------------------
// Truncation-bias ordering
// ---------------------------------------------------------------------------

enum class OrderingStatus {
  Strict,        // LB bias < KM bias < 0, each by more than the tolerance
  Inconclusive,  // consistent with the ordering, but within noise somewhere
  Violated       // some inequality fails by more than the tolerance
};

std::string_view to_string(OrderingStatus s);

inline constexpr std::size_t kMinOrderingSequences = 100000;

struct OrderingReport {
  double horizon = 0.0;  // a = T*_max or b = dT*_max
  double truth = 0.0;
  double truth_sem = 0.0;
  MetricEstimate km;
  MetricEstimate lb;
  double km_bias = 0.0;
  double lb_bias = 0.0;
  OrderingStatus status = OrderingStatus::Inconclusive;
};

/// Classifies LB - truth <= KM - truth <= 0 with `sigmas` combined SEMs.
OrderingStatus classify_ordering(const OrderingReport& r, double sigmas = 3.0);

struct OrderingSetup {
  SimSpec sim;
  std::optional<LengthLaw> truncation;
  DetectorConfig detector;
  OracleOptions oracle;
  std::size_t workers = 1;
};

/// Simulates the dataset, evaluates KM/LB ARL at a = T*_max of the length law
/// and compares with the Monte-Carlo true ARL.
OrderingReport arl_ordering_check(const OrderingSetup& setup);
/// ADD analogue at b = dT*_max; the oracle uses the dataset's changepoint law.
OrderingReport add_ordering_check(const OrderingSetup& setup);

/// Parametric variant: n draws of (tau ~ F, C ~ G); truth is the mean of F,
/// KM at a = sup of G's support (largest observed time when unbounded), LB
/// over tau <= C.
OrderingReport arl_ordering_check(const ParametricCensorModel& model, std::size_t n,
                                   std::uint64_t seed);

}  // namespace qcdeval
