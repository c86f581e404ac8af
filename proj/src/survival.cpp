#include "qcdeval/survival.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "format.hpp"
#include "qcdeval/common.hpp"

namespace qcdeval {

double StepSurvivalCurve::operator()(double t) const {
  // First drop strictly greater than t; the value in force is the one before.
  const auto it = std::upper_bound(drop_times.begin(), drop_times.end(), t);
  if (it == drop_times.begin()) return 1.0;
  return survival_values[static_cast<std::size_t>(it - drop_times.begin()) - 1];
}

StepSurvivalCurve fit_km(std::span<const SurvivalSample> samples) {
  if (samples.empty()) throw ValidationError("no samples");
  for (const auto& s : samples) {
    if (!std::isfinite(s.time) || s.time < 0.0) throw ValidationError("invalid sample");
  }

  std::vector<SurvivalSample> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const SurvivalSample& a, const SurvivalSample& b) { return a.time < b.time; });

  StepSurvivalCurve curve;
  curve.n_samples = sorted.size();
  curve.max_observed = sorted.back().time;

  double surv = 1.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    const double t = sorted[i].time;
    const std::size_t at_risk = sorted.size() - i;
    std::size_t deaths = 0;
    std::size_t j = i;
    for (; j < sorted.size() && sorted[j].time == t; ++j) {
      if (sorted[j].event) ++deaths;
    }
    if (deaths > 0) {
      surv *= 1.0 - static_cast<double>(deaths) / static_cast<double>(at_risk);
      curve.drop_times.push_back(t);
      curve.survival_values.push_back(surv);
      curve.at_risk.push_back(at_risk);
      curve.deaths.push_back(deaths);
    }
    i = j;
  }
  return curve;
}

RestrictedMean rmst(const StepSurvivalCurve& curve, double upper_limit) {
  if (!(upper_limit >= 0.0) || !std::isfinite(upper_limit)) {
    throw ValidationError("rmst: upper_limit must be finite and non-negative");
  }

  // Piecewise-constant integration of S(t) and t*S(t) over [0, upper_limit].
  double area = 0.0;
  double moment = 0.0;
  double left = 0.0;
  double level = 1.0;
  for (std::size_t j = 0; j < curve.drop_times.size() && curve.drop_times[j] < upper_limit; ++j) {
    const double right = curve.drop_times[j];
    area += level * (right - left);
    moment += level * (right * right - left * left) / 2.0;
    left = right;
    level = curve.survival_values[j];
  }
  area += level * (upper_limit - left);
  moment += level * (upper_limit * upper_limit - left * left) / 2.0;

  RestrictedMean out;
  out.value = area;
  out.upper_limit = upper_limit;
  out.n_samples = curve.n_samples;
  out.beyond_observed = upper_limit > curve.max_observed;
  const double var = 2.0 * moment - area * area;
  if (var < 0.0) {
    out.variance = 0.0;
    out.variance_clamped = true;
  } else {
    out.variance = var;
  }
  return out;
}

double max_last_observed(std::span<const SurvivalSample> samples) {
  if (samples.empty()) throw ValidationError("no samples");
  double m = samples.front().time;
  for (const auto& s : samples) m = std::max(m, s.time);
  return m;
}

void write_curve_csv(std::ostream& out, const StepSurvivalCurve& curve) {
  out << "t,S,n_at_risk,d\n";
  out << "0,1," << curve.n_samples << ",0\n";
  for (std::size_t j = 0; j < curve.drop_times.size(); ++j) {
    out << detail::format_double(curve.drop_times[j]) << ','
        << detail::format_double(curve.survival_values[j]) << ',' << curve.at_risk[j] << ','
        << curve.deaths[j] << '\n';
  }
}

}  // namespace qcdeval
