#include "qcdeval/detectors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

namespace qcdeval {

LikelihoodModel LikelihoodModel::gaussian(double mu0, double mu1, double sigma2) {
  LikelihoodModel m{ModelKind::GaussianMeanShift, mu0, mu1, sigma2};
  m.validate();
  return m;
}

LikelihoodModel LikelihoodModel::poisson(double lambda0, double lambda1) {
  LikelihoodModel m{ModelKind::PoissonRateShift, lambda0, lambda1, 1.0};
  m.validate();
  return m;
}

void LikelihoodModel::validate() const {
  if (!std::isfinite(pre_param) || !std::isfinite(post_param)) {
    throw ValidationError("model parameters must be finite");
  }
  switch (kind) {
    case ModelKind::GaussianMeanShift:
      if (!(variance > 0.0) || !std::isfinite(variance)) {
        throw ValidationError("gaussian model: variance must be positive");
      }
      break;
    case ModelKind::PoissonRateShift:
      if (!(pre_param > 0.0) || !(post_param > 0.0)) {
        throw ValidationError("poisson model: rates must be positive");
      }
      if (pre_param == post_param) throw ValidationError("poisson model: rates must differ");
      break;
  }
}

namespace {

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, ',')) {
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

}  // namespace

LikelihoodModel parse_model(std::string_view text) {
  const auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ValidationError("model spec needs 'kind:params'");
  const auto kind = text.substr(0, colon);
  const auto params = parse_number_list(text.substr(colon + 1));
  if (kind == "gaussian" && params.size() == 3) {
    return LikelihoodModel::gaussian(params[0], params[1], params[2]);
  }
  if (kind == "poisson" && params.size() == 2) {
    return LikelihoodModel::poisson(params[0], params[1]);
  }
  throw ValidationError("bad model spec: " + std::string(text));
}

nlohmann::json to_json(const LikelihoodModel& m) {
  if (m.kind == ModelKind::GaussianMeanShift) {
    return {{"kind", "gaussian"}, {"mu0", m.pre_param}, {"mu1", m.post_param},
            {"sigma2", m.variance}};
  }
  return {{"kind", "poisson"}, {"lambda0", m.pre_param}, {"lambda1", m.post_param}};
}

LikelihoodModel model_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "gaussian") {
      return LikelihoodModel::gaussian(j.at("mu0").get<double>(), j.at("mu1").get<double>(),
                                       j.at("sigma2").get<double>());
    }
    if (kind == "poisson") {
      return LikelihoodModel::poisson(j.at("lambda0").get<double>(),
                                      j.at("lambda1").get<double>());
    }
    throw ValidationError("unknown model kind: " + kind);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad model json: ") + e.what());
  }
}

double llr_step(const LikelihoodModel& model, double x) {
  switch (model.kind) {
    case ModelKind::GaussianMeanShift: {
      const double mu0 = model.pre_param;
      const double mu1 = model.post_param;
      return (mu1 - mu0) / model.variance * x - (mu1 * mu1 - mu0 * mu0) / (2.0 * model.variance);
    }
    case ModelKind::PoissonRateShift:
      if (!(x >= 0.0) || std::floor(x) != x || !std::isfinite(x)) {
        throw ValidationError("poisson observation must be a non-negative integer");
      }
      return x * std::log(model.post_param / model.pre_param) -
             (model.post_param - model.pre_param);
  }
  return 0.0;
}

std::string_view to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::Gsr: return "gsr";
    case DetectorKind::Cusum: return "cusum";
    case DetectorKind::Ewma: return "ewma";
    case DetectorKind::WindowL1: return "window-l1";
    case DetectorKind::WindowNormal: return "window-normal";
  }
  return "?";
}

DetectorKind parse_detector_kind(std::string_view text) {
  for (auto k : {DetectorKind::Gsr, DetectorKind::Cusum, DetectorKind::Ewma,
                 DetectorKind::WindowL1, DetectorKind::WindowNormal}) {
    if (to_string(k) == text) return k;
  }
  throw ValidationError("unknown detector: " + std::string(text));
}

void DetectorConfig::validate() const {
  if (std::isnan(threshold)) throw ValidationError("threshold is NaN");
  const bool needs_model = kind == DetectorKind::Gsr || kind == DetectorKind::Cusum;
  if (needs_model && !model) {
    throw ValidationError(std::string(to_string(kind)) + " requires a likelihood model");
  }
  if (!needs_model && model) {
    throw ValidationError(std::string(to_string(kind)) + " does not take a likelihood model");
  }
  if (model) model->validate();
  if (!(omega >= 0.0)) throw ValidationError("omega must be >= 0");
  if (kind == DetectorKind::Ewma) {
    if (!(ewma_lambda > 0.0 && ewma_lambda <= 1.0)) {
      throw ValidationError("ewma_lambda must lie in (0, 1]");
    }
    if (burn_in == 0) throw ValidationError("ewma needs a burn-in of at least one frame");
  }
  if ((kind == DetectorKind::WindowL1 || kind == DetectorKind::WindowNormal) && window_size == 0) {
    throw ValidationError("window_size must be positive");
  }
}

nlohmann::json to_json(const DetectorConfig& c) {
  nlohmann::json j = {{"kind", to_string(c.kind)}, {"threshold", c.threshold}};
  if (c.model) j["model"] = to_json(*c.model);
  switch (c.kind) {
    case DetectorKind::Gsr: j["omega"] = c.omega; break;
    case DetectorKind::Cusum: break;
    case DetectorKind::Ewma:
      j["ewma_lambda"] = c.ewma_lambda;
      j["burn_in"] = c.burn_in;
      break;
    case DetectorKind::WindowL1:
    case DetectorKind::WindowNormal:
      j["window_size"] = c.window_size;
      j["burn_in"] = c.burn_in;
      break;
  }
  return j;
}

DetectorConfig detector_config_from_json(const nlohmann::json& j) {
  DetectorConfig c;
  try {
    if (j.contains("kind")) c.kind = parse_detector_kind(j.at("kind").get<std::string>());
    if (j.contains("threshold")) c.threshold = j.at("threshold").get<double>();
    if (j.contains("model")) {
      const auto& m = j.at("model");
      c.model = m.is_string() ? parse_model(m.get<std::string>()) : model_from_json(m);
    }
    if (j.contains("omega")) c.omega = j.at("omega").get<double>();
    if (j.contains("ewma_lambda")) c.ewma_lambda = j.at("ewma_lambda").get<double>();
    if (j.contains("window_size")) c.window_size = j.at("window_size").get<std::size_t>();
    if (j.contains("burn_in")) c.burn_in = j.at("burn_in").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad detector json: ") + e.what());
  }
  return c;
}

namespace {

double scalar_frame(std::span<const double> frame, std::string_view who) {
  if (frame.size() != 1) {
    throw ValidationError(std::string(who) + " is univariate; got " +
                          std::to_string(frame.size()) + " features");
  }
  return frame[0];
}

}  // namespace

GsrDetector::GsrDetector(LlrFunction llr, double threshold, double omega)
    : llr_(std::move(llr)), threshold_(threshold), stat_(omega) {}

bool GsrDetector::update(std::span<const double> frame) {
  // Linear space: an overflow to +inf still compares >= any finite threshold,
  // and the run stops at the first crossing.
  stat_ = (stat_ + 1.0) * std::exp(llr_(scalar_frame(frame, "gsr")));
  return stat_ >= threshold_;
}

CusumDetector::CusumDetector(LlrFunction llr, double threshold)
    : llr_(std::move(llr)), threshold_(threshold) {}

bool CusumDetector::update(std::span<const double> frame) {
  double x = 0.0;
  if (frame.size() == 1) {
    x = frame[0];
  } else {
    for (double v : frame) x += v * v;
    x = std::sqrt(x);
  }
  stat_ = std::max(0.0, stat_ + llr_(x));
  return stat_ >= threshold_;
}

EwmaDetector::EwmaDetector(double lambda, double threshold, std::size_t burn_in)
    : lambda_(lambda), threshold_(threshold), burn_in_(burn_in) {
  warmup_.reserve(burn_in);
}

bool EwmaDetector::update(std::span<const double> frame) {
  const double x = scalar_frame(frame, "ewma");
  const std::size_t t = t_++;
  if (t < burn_in_) {
    warmup_.push_back(x);
    if (warmup_.size() == burn_in_) {
      double mean = 0.0;
      for (double v : warmup_) mean += v;
      mean /= static_cast<double>(burn_in_);
      double ss = 0.0;
      for (double v : warmup_) ss += (v - mean) * (v - mean);
      mean0_ = mean;
      sd0_ = burn_in_ > 1 ? std::sqrt(ss / static_cast<double>(burn_in_ - 1)) : 0.0;
      if (sd0_ == 0.0) sd0_ = std::numeric_limits<double>::epsilon();
      z_ = mean0_;
      for (double v : warmup_) z_ = lambda_ * v + (1.0 - lambda_) * z_;
      warmup_.clear();
    }
    return false;
  }
  z_ = lambda_ * x + (1.0 - lambda_) * z_;
  const double decay = std::pow(1.0 - lambda_, 2.0 * static_cast<double>(t + 1));
  const double width = sd0_ * std::sqrt(lambda_ / (2.0 - lambda_) * (1.0 - decay));
  return std::abs(z_ - mean0_) >= threshold_ * width;
}

double window_cost_l1(std::span<const double> frames, std::size_t dim) {
  const std::size_t n = frames.size() / dim;
  if (n == 0) return 0.0;
  std::vector<double> column(n);
  double total = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    for (std::size_t i = 0; i < n; ++i) column[i] = frames[i * dim + d];
    std::sort(column.begin(), column.end());
    const double median = n % 2 == 1 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
    for (double v : column) total += std::abs(v - median);
  }
  return total;
}

double window_cost_normal(std::span<const double> frames, std::size_t dim) {
  const std::size_t n = frames.size() / dim;
  if (n == 0) return 0.0;
  double total = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += frames[i * dim + d];
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dv = frames[i * dim + d] - mean;
      ss += dv * dv;
    }
    total += 0.5 * static_cast<double>(n) * std::log(ss / static_cast<double>(n) + kNormalCostEpsilon);
  }
  return total;
}

WindowDetector::WindowDetector(WindowCost cost, double threshold, std::size_t window_size,
                               std::size_t burn_in)
    : cost_(cost), threshold_(threshold), window_(window_size), burn_in_(burn_in) {}

bool WindowDetector::update(std::span<const double> frame) {
  if (dim_ == 0) dim_ = frame.size();
  if (frame.size() != dim_ || dim_ == 0) throw ValidationError("window: inconsistent frame width");
  const std::size_t t = t_++;
  buffer_.insert(buffer_.end(), frame.begin(), frame.end());
  const std::size_t span_len = 2 * window_ * dim_;
  if (buffer_.size() > span_len) {
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(dim_));
  }
  if (t + 1 < burn_in_ + 2 * window_) return false;

  const std::span<const double> joint(buffer_);
  const auto cost = [&](std::span<const double> seg) {
    return cost_ == WindowCost::L1 ? window_cost_l1(seg, dim_) : window_cost_normal(seg, dim_);
  };
  const std::size_t half = window_ * dim_;
  last_ = cost(joint) - cost(joint.first(half)) - cost(joint.last(half));
  return last_ >= threshold_;
}

std::unique_ptr<OnlineDetector> make_detector(const DetectorConfig& config) {
  config.validate();
  switch (config.kind) {
    case DetectorKind::Gsr: {
      const LikelihoodModel m = *config.model;
      return std::make_unique<GsrDetector>([m](double x) { return llr_step(m, x); },
                                           config.threshold, config.omega);
    }
    case DetectorKind::Cusum: {
      const LikelihoodModel m = *config.model;
      return std::make_unique<CusumDetector>([m](double x) { return llr_step(m, x); },
                                             config.threshold);
    }
    case DetectorKind::Ewma:
      return std::make_unique<EwmaDetector>(config.ewma_lambda, config.threshold, config.burn_in);
    case DetectorKind::WindowL1:
      return std::make_unique<WindowDetector>(WindowCost::L1, config.threshold,
                                              config.window_size, config.burn_in);
    case DetectorKind::WindowNormal:
      return std::make_unique<WindowDetector>(WindowCost::Normal, config.threshold,
                                              config.window_size, config.burn_in);
  }
  throw ValidationError("unknown detector kind");
}

MaybeFrame first_alarm(OnlineDetector& detector, const Series& seq) {
  const std::size_t n = seq.frames();
  for (std::size_t t = 0; t < n; ++t) {
    if (detector.update(seq.frame(t))) return static_cast<Frame>(t);
  }
  return std::nullopt;
}

MaybeFrame run_detector(const DetectorConfig& config, const Series& seq) {
  auto det = make_detector(config);
  return first_alarm(*det, seq);
}

namespace {

MaybeFrame run_kind(DetectorKind expected, std::span<const double> seq,
                    const DetectorConfig& config) {
  if (config.kind != expected) {
    throw ValidationError("detector config kind is " + std::string(to_string(config.kind)) +
                          ", expected " + std::string(to_string(expected)));
  }
  return run_detector(config, Series(std::vector<double>(seq.begin(), seq.end())));
}

}  // namespace

MaybeFrame run_gsr(std::span<const double> seq, const DetectorConfig& config) {
  return run_kind(DetectorKind::Gsr, seq, config);
}

MaybeFrame run_cusum(std::span<const double> seq, const DetectorConfig& config) {
  return run_kind(DetectorKind::Cusum, seq, config);
}

MaybeFrame run_ewma(std::span<const double> seq, const DetectorConfig& config) {
  return run_kind(DetectorKind::Ewma, seq, config);
}

MaybeFrame run_window(std::span<const double> seq, const DetectorConfig& config) {
  if (config.kind != DetectorKind::WindowL1 && config.kind != DetectorKind::WindowNormal) {
    throw ValidationError("run_window needs a window detector config");
  }
  return run_detector(config, Series(std::vector<double>(seq.begin(), seq.end())));
}

}  // namespace qcdeval
