#include "qcdeval/metrics.hpp"

#include <cmath>
#include <limits>
#include <unordered_map>

namespace qcdeval {

std::string_view to_string(MetricName name) {
  switch (name) {
    case MetricName::KmArl: return "KM_ARL";
    case MetricName::KmAdd: return "KM_ADD";
    case MetricName::LbArl: return "LB_ARL";
    case MetricName::LbAdd: return "LB_ADD";
    case MetricName::NaiveArl: return "NAIVE_ARL";
  }
  return "?";
}

MetricName parse_metric_name(std::string_view text) {
  std::string norm;
  for (char c : text) norm.push_back(c == '-' ? '_' : static_cast<char>(std::toupper(c)));
  for (MetricName m : kAllMetrics) {
    if (to_string(m) == norm) return m;
  }
  throw ValidationError("unknown metric: " + std::string(text));
}

nlohmann::json to_json(const MetricEstimate& m) {
  auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  return {{"name", to_string(m.name)},
          {"value", opt(m.value)},
          {"sem", opt(m.sem)},
          {"n_used", m.n_used},
          {"upper_limit", opt(m.upper_limit)},
          {"extrapolation_flag", m.extrapolation_flag}};
}

std::vector<std::pair<const SequenceMeta*, const DetectionOutcome*>> match_outcomes(
    std::span<const SequenceMeta> metas, std::span<const DetectionOutcome> outcomes) {
  std::unordered_map<std::string_view, const DetectionOutcome*> by_id;
  by_id.reserve(outcomes.size());
  for (const auto& o : outcomes) {
    if (!by_id.emplace(o.id, &o).second) throw ValidationError("duplicate outcome id: " + o.id);
  }
  if (outcomes.size() != metas.size()) {
    throw ValidationError("id mismatch: " + std::to_string(metas.size()) + " sequences vs " +
                          std::to_string(outcomes.size()) + " outcomes");
  }

  std::unordered_map<std::string_view, bool> seen;
  seen.reserve(metas.size());
  std::vector<std::pair<const SequenceMeta*, const DetectionOutcome*>> pairs;
  pairs.reserve(metas.size());
  for (const auto& m : metas) {
    if (!seen.emplace(m.id, true).second) throw ValidationError("duplicate sequence id: " + m.id);
    const auto it = by_id.find(m.id);
    if (it == by_id.end()) throw ValidationError("id mismatch: no outcome for " + m.id);
    if (m.length < 1) throw ValidationError("sequence " + m.id + ": length must be >= 1");
    if (m.changepoint && (*m.changepoint < 0 || *m.changepoint >= m.length)) {
      throw ValidationError("sequence " + m.id + ": changepoint outside [0, length)");
    }
    const auto& tau = it->second->tau;
    if (tau && (*tau < 0 || *tau >= m.length)) {
      throw ValidationError("sequence " + m.id + ": alarm outside [0, length)");
    }
    pairs.emplace_back(&m, it->second);
  }
  return pairs;
}

std::vector<SurvivalSample> arl_samples(std::span<const SequenceMeta> metas,
                                        std::span<const DetectionOutcome> outcomes) {
  std::vector<SurvivalSample> out;
  out.reserve(metas.size());
  for (const auto& [meta, outcome] : match_outcomes(metas, outcomes)) {
    const Frame censor = meta->changepoint ? std::min(*meta->changepoint, meta->length)
                                           : meta->length;
    // Strict inequality: an alarm at the censoring time is not a pre-change run.
    if (outcome->tau && *outcome->tau < censor) {
      out.push_back({static_cast<double>(*outcome->tau), true});
    } else {
      out.push_back({static_cast<double>(censor), false});
    }
  }
  return out;
}

std::vector<SurvivalSample> add_samples(std::span<const SequenceMeta> metas,
                                        std::span<const DetectionOutcome> outcomes) {
  std::vector<SurvivalSample> out;
  for (const auto& [meta, outcome] : match_outcomes(metas, outcomes)) {
    if (!meta->changepoint) continue;
    const Frame nu = *meta->changepoint;
    if (outcome->tau) {
      if (*outcome->tau < nu) continue;  // false alarm
      out.push_back({static_cast<double>(*outcome->tau - nu), true});
    } else {
      out.push_back({static_cast<double>(meta->length - nu), false});
    }
  }
  return out;
}

MetricEstimate km_estimate(MetricName name, std::span<const SurvivalSample> samples,
                           std::optional<double> upper_limit) {
  MetricEstimate est;
  est.name = name;
  if (samples.empty()) return est;

  const StepSurvivalCurve curve = fit_km(samples);
  const double a = upper_limit.value_or(curve.max_observed);
  const RestrictedMean rm = rmst(curve, a);

  est.value = rm.value;
  est.sem = std::sqrt(rm.variance / static_cast<double>(rm.n_samples));
  est.n_used = rm.n_samples;
  est.upper_limit = a;
  est.variance_clamped = rm.variance_clamped;

  const double tol = std::numeric_limits<double>::epsilon() * std::max(1.0, curve.max_observed);
  const bool at_horizon = std::abs(a - curve.max_observed) <= tol;
  est.extrapolation_flag = rm.beyond_observed || (at_horizon && curve(curve.max_observed) > 0.0);
  return est;
}

MetricEstimate km_arl(std::span<const SequenceMeta> metas,
                      std::span<const DetectionOutcome> outcomes,
                      std::optional<double> upper_limit) {
  const auto samples = arl_samples(metas, outcomes);
  return km_estimate(MetricName::KmArl, samples, upper_limit);
}

MetricEstimate km_add(std::span<const SequenceMeta> metas,
                      std::span<const DetectionOutcome> outcomes,
                      std::optional<double> upper_limit) {
  const auto samples = add_samples(metas, outcomes);
  return km_estimate(MetricName::KmAdd, samples, upper_limit);
}

namespace {

// Mean with SEM = sqrt(V / n), V the 1/n empirical variance.
MetricEstimate mean_estimate(MetricName name, const std::vector<double>& xs) {
  MetricEstimate est;
  est.name = name;
  est.n_used = xs.size();
  if (xs.empty()) return est;
  const double n = static_cast<double>(xs.size());
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= n;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  est.value = mean;
  est.sem = std::sqrt(ss / n / n);
  return est;
}

}  // namespace

MetricEstimate lb_arl(std::span<const SequenceMeta> metas,
                      std::span<const DetectionOutcome> outcomes) {
  std::vector<double> taus;
  for (const auto& [meta, outcome] : match_outcomes(metas, outcomes)) {
    if (!meta->changepoint && outcome->tau) taus.push_back(static_cast<double>(*outcome->tau));
  }
  return mean_estimate(MetricName::LbArl, taus);
}

MetricEstimate lb_add(std::span<const SequenceMeta> metas,
                      std::span<const DetectionOutcome> outcomes) {
  std::vector<double> delays;
  for (const auto& [meta, outcome] : match_outcomes(metas, outcomes)) {
    if (meta->changepoint && outcome->tau && *outcome->tau >= *meta->changepoint) {
      delays.push_back(static_cast<double>(*outcome->tau - *meta->changepoint));
    }
  }
  return mean_estimate(MetricName::LbAdd, delays);
}

MetricEstimate naive_arl(std::span<const SequenceMeta> metas,
                         std::span<const DetectionOutcome> outcomes) {
  std::vector<double> taus;
  for (const auto& [meta, outcome] : match_outcomes(metas, outcomes)) {
    if (outcome->tau && (!meta->changepoint || *outcome->tau < *meta->changepoint)) {
      taus.push_back(static_cast<double>(*outcome->tau));
    }
  }
  return mean_estimate(MetricName::NaiveArl, taus);
}

MetricEstimate compute_metric(MetricName name, std::span<const SequenceMeta> metas,
                              std::span<const DetectionOutcome> outcomes) {
  switch (name) {
    case MetricName::KmArl: return km_arl(metas, outcomes);
    case MetricName::KmAdd: return km_add(metas, outcomes);
    case MetricName::LbArl: return lb_arl(metas, outcomes);
    case MetricName::LbAdd: return lb_add(metas, outcomes);
    case MetricName::NaiveArl: return naive_arl(metas, outcomes);
  }
  throw ValidationError("unknown metric");
}

}  // namespace qcdeval
