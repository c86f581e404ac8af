#pragma once

// Synthetic labeled datasets: pre/post-change processes, changepoint laws and
// random length truncation.

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include <json.hpp>

#include "qcdeval/common.hpp"
#include "qcdeval/detectors.hpp"
#include "qcdeval/metrics.hpp"
#include "qcdeval/series.hpp"

namespace qcdeval {

struct LengthLaw {
  enum class Kind { Fixed, UniformRange };
  Kind kind = Kind::Fixed;
  Frame lo = 1;  // Fixed uses lo == hi == T
  Frame hi = 1;

  static LengthLaw fixed(Frame t) { return {Kind::Fixed, t, t}; }
  static LengthLaw uniform(Frame lo, Frame hi) { return {Kind::UniformRange, lo, hi}; }

  /// Least upper bound of the support.
  Frame sup() const { return hi; }
  void validate() const;
  Frame draw(std::mt19937_64& rng) const;
};

struct ChangepointLaw {
  enum class Kind { Geometric, UniformOverLength, None };
  Kind kind = Kind::None;
  double p = 1.0;  // Geometric success probability, support {0, 1, 2, ...}

  static ChangepointLaw geometric(double p) { return {Kind::Geometric, p}; }
  static ChangepointLaw uniform_over_length() { return {Kind::UniformOverLength, 1.0}; }
  static ChangepointLaw none() { return {Kind::None, 1.0}; }

  void validate() const;
  /// Draws a changepoint for a sequence of `length` frames (`length` is
  /// ignored by the geometric law). Returns nullopt for Kind::None.
  MaybeFrame draw(Frame length, std::mt19937_64& rng) const;
};

struct SimSpec {
  LikelihoodModel model;
  std::size_t n_sequences = 1;
  LengthLaw length_law;
  ChangepointLaw changepoint_law;
  double with_change_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const LengthLaw& law);
nlohmann::json to_json(const ChangepointLaw& law);
nlohmann::json to_json(const SimSpec& spec);
LengthLaw length_law_from_json(const nlohmann::json& j);
ChangepointLaw changepoint_law_from_json(const nlohmann::json& j);
SimSpec sim_spec_from_json(const nlohmann::json& j);

struct LabeledDataset {
  std::vector<SequenceMeta> metas;
  std::vector<Series> values;
  /// SimSpec JSON for simulated data, {"path": ...} for ingested files.
  nlohmann::json provenance;

  std::size_t size() const { return metas.size(); }
  bool operator==(const LabeledDataset& o) const {
    return values == o.values && metas.size() == o.metas.size() &&
           std::equal(metas.begin(), metas.end(), o.metas.begin(), [](const auto& a, const auto& b) {
             return a.id == b.id && a.length == b.length && a.changepoint == b.changepoint;
           });
  }
};

/// Draws frames from the pre- or post-change density of a model.
class FrameSampler {
 public:
  explicit FrameSampler(const LikelihoodModel& model);
  double pre(std::mt19937_64& rng) { return draw(pre_dist_, pre_pois_, rng); }
  double post(std::mt19937_64& rng) { return draw(post_dist_, post_pois_, rng); }

 private:
  double draw(std::normal_distribution<double>& g, std::poisson_distribution<long long>& p,
              std::mt19937_64& rng) const {
    return gaussian_ ? g(rng) : static_cast<double>(p(rng));
  }

  bool gaussian_;
  std::normal_distribution<double> pre_dist_, post_dist_;
  std::poisson_distribution<long long> pre_pois_, post_pois_;
};

/// Sequence i is generated from its own engine derived from (seed, i), so the
/// output is independent of `workers`. A drawn changepoint at or beyond the
/// sequence length is unobservable and recorded as no change.
LabeledDataset simulate(const SimSpec& spec, std::size_t workers = 1);

struct TruncationResult {
  LabeledDataset dataset;
  /// Sequences whose drawn length exceeded the original and was clamped.
  std::size_t clamped = 0;
};

/// Draws a new length per sequence, keeps the leading frames and resets
/// changepoints that fall beyond the new end to "no change".
TruncationResult truncate(const LabeledDataset& dataset, const LengthLaw& law,
                          std::uint64_t seed);

}  // namespace qcdeval
