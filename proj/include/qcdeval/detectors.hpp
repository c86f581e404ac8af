#pragma once

// Online quickest-change detectors. Every detector consumes frames in order
// and never looks ahead, so the first alarm on a prefix equals the first alarm
// on any extension of it.

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include <json.hpp>

#include "qcdeval/common.hpp"
#include "qcdeval/series.hpp"

namespace qcdeval {

enum class ModelKind { GaussianMeanShift, PoissonRateShift };

/// Pre/post-change densities with known parameters.
/// Gaussian: pre_param = mu0, post_param = mu1, variance = sigma^2.
/// Poisson:  pre_param = lambda0, post_param = lambda1.
struct LikelihoodModel {
  ModelKind kind = ModelKind::GaussianMeanShift;
  double pre_param = 0.0;
  double post_param = 0.0;
  double variance = 1.0;

  static LikelihoodModel gaussian(double mu0, double mu1, double sigma2);
  static LikelihoodModel poisson(double lambda0, double lambda1);

  void validate() const;
};

/// Parses "gaussian:mu0,mu1,sigma2" or "poisson:lambda0,lambda1".
LikelihoodModel parse_model(std::string_view text);
nlohmann::json to_json(const LikelihoodModel& m);
LikelihoodModel model_from_json(const nlohmann::json& j);

/// Log-likelihood ratio log(post density / pre density) of one frame.
double llr_step(const LikelihoodModel& model, double x);

enum class DetectorKind { Gsr, Cusum, Ewma, WindowL1, WindowNormal };

std::string_view to_string(DetectorKind kind);
DetectorKind parse_detector_kind(std::string_view text);

struct DetectorConfig {
  DetectorKind kind = DetectorKind::Gsr;
  double threshold = 0.0;
  std::optional<LikelihoodModel> model;  // GSR / CUSUM only
  double omega = 0.0;                    // GSR head start
  double ewma_lambda = 0.1;
  std::size_t window_size = 30;
  std::size_t burn_in = 30;

  void validate() const;
};

nlohmann::json to_json(const DetectorConfig& c);
/// Missing keys keep their defaults.
DetectorConfig detector_config_from_json(const nlohmann::json& j);

/// Added inside the log of the Normal window cost.
inline constexpr double kNormalCostEpsilon = 1e-8;

class OnlineDetector {
 public:
  virtual ~OnlineDetector() = default;
  /// Consumes the next frame; returns true when an alarm is raised at it.
  virtual bool update(std::span<const double> frame) = 0;
};

using LlrFunction = std::function<double(double)>;

/// R(t) = (R(t-1) + 1) * exp(llr(x_t)), R(-1) = omega; alarm at R >= threshold.
class GsrDetector final : public OnlineDetector {
 public:
  GsrDetector(LlrFunction llr, double threshold, double omega = 0.0);
  bool update(std::span<const double> frame) override;
  double statistic() const { return stat_; }

 private:
  LlrFunction llr_;
  double threshold_;
  double stat_;
};

/// W(t) = max(0, W(t-1) + llr(x_t)), W(-1) = 0; alarm at W >= threshold.
/// Multivariate frames are reduced to their Euclidean norm first.
class CusumDetector final : public OnlineDetector {
 public:
  CusumDetector(LlrFunction llr, double threshold);
  bool update(std::span<const double> frame) override;
  double statistic() const { return stat_; }

 private:
  LlrFunction llr_;
  double threshold_;
  double stat_ = 0.0;
};

/// EWMA chart with burn-in estimates of the in-control mean and scale and the
/// exact time-varying control-limit width.
class EwmaDetector final : public OnlineDetector {
 public:
  EwmaDetector(double lambda, double threshold, std::size_t burn_in);
  bool update(std::span<const double> frame) override;

 private:
  double lambda_;
  double threshold_;
  std::size_t burn_in_;
  std::vector<double> warmup_;
  double mean0_ = 0.0;
  double sd0_ = 0.0;
  double z_ = 0.0;
  std::size_t t_ = 0;
};

enum class WindowCost { L1, Normal };

/// Two adjacent windows of `window_size` frames; alarm when
/// cost(joint) - cost(left) - cost(right) >= threshold.
class WindowDetector final : public OnlineDetector {
 public:
  WindowDetector(WindowCost cost, double threshold, std::size_t window_size,
                 std::size_t burn_in);
  bool update(std::span<const double> frame) override;
  /// Discrepancy at the most recent evaluable frame (0 before that).
  double last_discrepancy() const { return last_; }

 private:
  WindowCost cost_;
  double threshold_;
  std::size_t window_;
  std::size_t burn_in_;
  std::size_t dim_ = 0;
  std::vector<double> buffer_;  // ring of 2*window frames, frame-major
  std::size_t t_ = 0;
  double last_ = 0.0;
};

/// Segment costs used by WindowDetector; `frames` is frame-major with `dim`
/// features, costs sum over features.
double window_cost_l1(std::span<const double> frames, std::size_t dim);
double window_cost_normal(std::span<const double> frames, std::size_t dim);

std::unique_ptr<OnlineDetector> make_detector(const DetectorConfig& config);

/// Feeds frames in order and returns the first alarm, or nullopt.
MaybeFrame first_alarm(OnlineDetector& detector, const Series& seq);

MaybeFrame run_detector(const DetectorConfig& config, const Series& seq);
MaybeFrame run_gsr(std::span<const double> seq, const DetectorConfig& config);
MaybeFrame run_cusum(std::span<const double> seq, const DetectorConfig& config);
MaybeFrame run_ewma(std::span<const double> seq, const DetectorConfig& config);
MaybeFrame run_window(std::span<const double> seq, const DetectorConfig& config);

}  // namespace qcdeval
