#pragma once

// Censored-sample construction and run-length / delay metrics for QCD models.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qcdeval/common.hpp"
#include "qcdeval/survival.hpp"

namespace qcdeval {

struct SequenceMeta {
  std::string id;
  Frame length = 1;
  /// Frame at which the post-change regime begins; nullopt = no change.
  MaybeFrame changepoint;
};

struct DetectionOutcome {
  std::string id;
  /// First alarm frame; nullopt = no alarm within the sequence.
  MaybeFrame tau;
};

enum class MetricName { KmArl, KmAdd, LbArl, LbAdd, NaiveArl };

inline constexpr MetricName kAllMetrics[] = {MetricName::KmArl, MetricName::KmAdd,
                                             MetricName::LbArl, MetricName::LbAdd,
                                             MetricName::NaiveArl};

/// "KM_ARL", "KM_ADD", ...
std::string_view to_string(MetricName name);
/// Accepts the canonical names and the CLI spellings "km-arl", "lb-add", ...
MetricName parse_metric_name(std::string_view text);

struct MetricEstimate {
  MetricName name = MetricName::KmArl;
  std::optional<double> value;
  std::optional<double> sem;
  std::size_t n_used = 0;
  std::optional<double> upper_limit;
  /// KM metrics only: the horizon reaches (or passes) the largest observed
  /// time while survival mass remains beyond it.
  bool extrapolation_flag = false;
  /// KM metrics only: the restricted variance was clamped at zero.
  bool variance_clamped = false;

  bool defined() const { return value.has_value(); }
};

/// {name, value, sem, n_used, upper_limit, extrapolation_flag}; undefined
/// fields are null.
nlohmann::json to_json(const MetricEstimate& m);

/// Pairs every meta with its outcome by id. Throws ValidationError on duplicate
/// ids, unmatched ids, tau >= length or changepoint >= length.
std::vector<std::pair<const SequenceMeta*, const DetectionOutcome*>> match_outcomes(
    std::span<const SequenceMeta> metas, std::span<const DetectionOutcome> outcomes);

/// One sample per sequence: event at tau if tau < min(nu, T), else censored at
/// min(nu, T).
std::vector<SurvivalSample> arl_samples(std::span<const SequenceMeta> metas,
                                        std::span<const DetectionOutcome> outcomes);

/// Sequences with a changepoint and no false alarm: event at tau - nu, or
/// censored at T - nu when no alarm was raised.
std::vector<SurvivalSample> add_samples(std::span<const SequenceMeta> metas,
                                        std::span<const DetectionOutcome> outcomes);

/// Restricted mean of the product-limit curve over `samples`; the default
/// horizon is the largest observed time.
MetricEstimate km_estimate(MetricName name, std::span<const SurvivalSample> samples,
                           std::optional<double> upper_limit = std::nullopt);

MetricEstimate km_arl(std::span<const SequenceMeta> metas,
                      std::span<const DetectionOutcome> outcomes,
                      std::optional<double> upper_limit = std::nullopt);
MetricEstimate km_add(std::span<const SequenceMeta> metas,
                      std::span<const DetectionOutcome> outcomes,
                      std::optional<double> upper_limit = std::nullopt);

/// Mean tau over no-change sequences with an alarm.
MetricEstimate lb_arl(std::span<const SequenceMeta> metas,
                      std::span<const DetectionOutcome> outcomes);
/// Mean delay over with-change sequences alarmed at or after the change.
MetricEstimate lb_add(std::span<const SequenceMeta> metas,
                      std::span<const DetectionOutcome> outcomes);
/// Mean tau over every sequence alarmed strictly before its changepoint.
MetricEstimate naive_arl(std::span<const SequenceMeta> metas,
                         std::span<const DetectionOutcome> outcomes);

MetricEstimate compute_metric(MetricName name, std::span<const SequenceMeta> metas,
                              std::span<const DetectionOutcome> outcomes);

}  // namespace qcdeval
