#pragma once

// End-to-end evaluation: run a detector over a dataset, sweep thresholds and
// emit tradeoff curves.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qcdeval/detectors.hpp"
#include "qcdeval/metrics.hpp"
#include "qcdeval/simulate.hpp"

namespace qcdeval {

struct DetectionRun {
  std::vector<DetectionOutcome> outcomes;
  /// One entry per sequence whose detector run failed (recorded as no alarm).
  std::vector<std::string> diagnostics;
};

/// Runs `config` on every sequence. A failing sequence degrades to tau = inf
/// with a diagnostic instead of aborting.
DetectionRun detect_all(const LabeledDataset& dataset, const DetectorConfig& config,
                        std::size_t workers = 1);

/// Parses "start:stop:num-log", "start:stop:num-lin" or "v1,v2,...".
/// Returns the sorted grid; throws ValidationError when empty, non-finite or
/// containing duplicates.
std::vector<double> parse_threshold_grid(std::string_view text);
std::vector<double> log_grid(double start, double stop, std::size_t num);

std::vector<MetricName> parse_metric_list(std::string_view text);

struct CurvePoint {
  double threshold = 0.0;
  std::vector<MetricEstimate> metrics;
  std::int64_t wall_time_ms = 0;
  std::size_t n_failed = 0;

  const MetricEstimate* find(MetricName name) const;
  /// KM-ARL horizon sits at the largest observed time with survival mass left.
  bool in_extrapolation_region() const;
};

struct SweepResult {
  std::string fingerprint;
  DetectorConfig detector;
  std::vector<double> thresholds;
  std::vector<MetricName> metrics;
  std::vector<CurvePoint> points;
  /// Largest sequence length (T_max boundary of the ARL axis).
  double t_max = 0.0;
  /// Largest T - nu over with-change sequences, if any.
  std::optional<double> dt_max;
  std::vector<std::string> diagnostics;
};

SweepResult sweep(const LabeledDataset& dataset, const DetectorConfig& base,
                  std::vector<double> thresholds, const std::vector<MetricName>& metrics,
                  std::size_t workers = 1);

/// Columns threshold,metric,value,sem,n_used,extrapolation_flag; undefined
/// values are empty fields.
void write_curve_csv(std::ostream& out, const SweepResult& result);
/// Log-x ARL vs ADD scatter, one marker per defined point per estimator family
/// (KM, LB), with SEM error bars and a shaded region beyond T_max.
void write_curve_svg(std::ostream& out, const SweepResult& result);

enum class CurveFormat { Csv, Svg };
void emit_curve(const SweepResult& result, const std::filesystem::path& out_path,
                CurveFormat format);

}  // namespace qcdeval
