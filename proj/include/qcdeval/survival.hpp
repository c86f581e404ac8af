#pragma once

// Product-limit (Kaplan-Meier) estimation over right-censored samples and
// restricted mean survival time.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

namespace qcdeval {

/// One right-censored observation: `time` is min(event time, censoring time)
/// and `event` says which of the two was observed.
struct SurvivalSample {
  double time = 0.0;
  bool event = false;
};

/// Right-continuous step survival function.
///
/// `survival_values[j]` is the value of S(t) on [drop_times[j], drop_times[j+1]).
/// S(t) = 1 before the first drop and stays at its last value beyond the
/// largest observed time (no extrapolation).
struct StepSurvivalCurve {
  std::vector<double> drop_times;
  std::vector<double> survival_values;
  std::vector<std::size_t> at_risk;
  std::vector<std::size_t> deaths;
  std::size_t n_samples = 0;
  double max_observed = 0.0;

  /// S(t). Returns 1 for t < 0.
  double operator()(double t) const;
};

struct RestrictedMean {
  double value = 0.0;
  /// Restricted variance 2*int_0^a t S(t) dt - value^2, floored at zero.
  double variance = 0.0;
  double upper_limit = 0.0;
  std::size_t n_samples = 0;
  /// upper_limit exceeds the largest observed time.
  bool beyond_observed = false;
  /// The raw variance came out negative through rounding and was clamped.
  bool variance_clamped = false;
};

/// Fits the product-limit estimator. Ties between an event and a censoring at
/// the same time count the censored sample as still at risk.
/// Throws ValidationError("no samples") on empty input and
/// ValidationError("invalid sample") on negative or non-finite times.
StepSurvivalCurve fit_km(std::span<const SurvivalSample> samples);

/// Integral of the step curve over [0, upper_limit], computed exactly as a sum
/// of rectangles.
RestrictedMean rmst(const StepSurvivalCurve& curve, double upper_limit);

/// Largest sample time (each sample time already is min(event, censoring)).
double max_last_observed(std::span<const SurvivalSample> samples);

/// Writes columns t,S,n_at_risk,d with a leading (0, 1, n, 0) row.
void write_curve_csv(std::ostream& out, const StepSurvivalCurve& curve);

}  // namespace qcdeval
