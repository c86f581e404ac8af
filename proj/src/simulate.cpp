#include "qcdeval/simulate.hpp"

#include <cmath>

#include "qcdeval/parallel.hpp"
#include "qcdeval/rng.hpp"

namespace qcdeval {

namespace {
constexpr std::uint64_t kSimulateSalt = 0x51;
constexpr std::uint64_t kTruncateSalt = 0x7a;
}  // namespace

void LengthLaw::validate() const {
  if (lo < 1 || hi < lo) throw ValidationError("length law needs 1 <= lo <= hi");
  if (kind == Kind::Fixed && lo != hi) throw ValidationError("fixed length law needs lo == hi");
}

Frame LengthLaw::draw(std::mt19937_64& rng) const {
  if (kind == Kind::Fixed) return lo;
  return std::uniform_int_distribution<Frame>(lo, hi)(rng);
}

void ChangepointLaw::validate() const {
  if (kind == Kind::Geometric && !(p > 0.0 && p <= 1.0)) {
    throw ValidationError("geometric changepoint law needs p in (0, 1]");
  }
}

MaybeFrame ChangepointLaw::draw(Frame length, std::mt19937_64& rng) const {
  switch (kind) {
    case Kind::None: return std::nullopt;
    case Kind::Geometric:
      if (p == 1.0) return Frame{0};
      return std::geometric_distribution<Frame>(p)(rng);
    case Kind::UniformOverLength:
      return std::uniform_int_distribution<Frame>(0, length - 1)(rng);
  }
  return std::nullopt;
}

void SimSpec::validate() const {
  model.validate();
  length_law.validate();
  changepoint_law.validate();
  if (n_sequences == 0) throw ValidationError("n_sequences must be positive");
  if (!(with_change_fraction >= 0.0 && with_change_fraction <= 1.0)) {
    throw ValidationError("with_change_fraction must lie in [0, 1]");
  }
}

nlohmann::json to_json(const LengthLaw& law) {
  if (law.kind == LengthLaw::Kind::Fixed) return {{"kind", "fixed"}, {"T", law.lo}};
  return {{"kind", "uniform"}, {"lo", law.lo}, {"hi", law.hi}};
}

nlohmann::json to_json(const ChangepointLaw& law) {
  switch (law.kind) {
    case ChangepointLaw::Kind::Geometric: return {{"kind", "geometric"}, {"p", law.p}};
    case ChangepointLaw::Kind::UniformOverLength: return {{"kind", "uniform"}};
    case ChangepointLaw::Kind::None: return {{"kind", "none"}};
  }
  return {};
}

nlohmann::json to_json(const SimSpec& spec) {
  return {{"model", to_json(spec.model)},
          {"n_sequences", spec.n_sequences},
          {"length_law", to_json(spec.length_law)},
          {"changepoint_law", to_json(spec.changepoint_law)},
          {"with_change_fraction", spec.with_change_fraction},
          {"seed", spec.seed}};
}

LengthLaw length_law_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    LengthLaw law;
    if (kind == "fixed") {
      law = LengthLaw::fixed(j.at("T").get<Frame>());
    } else if (kind == "uniform") {
      law = LengthLaw::uniform(j.at("lo").get<Frame>(), j.at("hi").get<Frame>());
    } else {
      throw ValidationError("unknown length law: " + kind);
    }
    law.validate();
    return law;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad length law json: ") + e.what());
  }
}

ChangepointLaw changepoint_law_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    ChangepointLaw law;
    if (kind == "geometric") {
      law = ChangepointLaw::geometric(j.at("p").get<double>());
    } else if (kind == "uniform") {
      law = ChangepointLaw::uniform_over_length();
    } else if (kind == "none") {
      law = ChangepointLaw::none();
    } else {
      throw ValidationError("unknown changepoint law: " + kind);
    }
    law.validate();
    return law;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad changepoint law json: ") + e.what());
  }
}

SimSpec sim_spec_from_json(const nlohmann::json& j) {
  try {
    SimSpec spec;
    spec.model = model_from_json(j.at("model"));
    spec.n_sequences = j.at("n_sequences").get<std::size_t>();
    spec.length_law = length_law_from_json(j.at("length_law"));
    spec.changepoint_law = changepoint_law_from_json(j.at("changepoint_law"));
    spec.with_change_fraction = j.value("with_change_fraction", 0.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad simulation spec: ") + e.what());
  }
}

FrameSampler::FrameSampler(const LikelihoodModel& model)
    : gaussian_(model.kind == ModelKind::GaussianMeanShift),
      pre_dist_(model.pre_param, std::sqrt(model.variance)),
      post_dist_(model.post_param, std::sqrt(model.variance)),
      pre_pois_(gaussian_ ? 1.0 : model.pre_param),
      post_pois_(gaussian_ ? 1.0 : model.post_param) {}

LabeledDataset simulate(const SimSpec& spec, std::size_t workers) {
  spec.validate();
  LabeledDataset ds;
  ds.metas.resize(spec.n_sequences);
  ds.values.resize(spec.n_sequences);
  ds.provenance = to_json(spec);

  parallel_for(spec.n_sequences, workers, [&](std::size_t i) {
    auto rng = stream_engine(spec.seed, i, kSimulateSalt);
    FrameSampler sampler(spec.model);
    const Frame length = spec.length_law.draw(rng);
    const bool with_change =
        std::uniform_real_distribution<double>(0.0, 1.0)(rng) < spec.with_change_fraction;
    MaybeFrame nu = with_change ? spec.changepoint_law.draw(length, rng) : std::nullopt;
    if (nu && *nu >= length) nu.reset();

    std::vector<double> values(static_cast<std::size_t>(length));
    for (Frame s = 0; s < length; ++s) {
      values[static_cast<std::size_t>(s)] = (nu && s >= *nu) ? sampler.post(rng) : sampler.pre(rng);
    }
    ds.metas[i] = SequenceMeta{"seq" + std::to_string(i), length, nu};
    ds.values[i] = Series(std::move(values));
  });
  return ds;
}

TruncationResult truncate(const LabeledDataset& dataset, const LengthLaw& law,
                          std::uint64_t seed) {
  law.validate();
  TruncationResult out;
  out.dataset.provenance = {{"truncated_from", dataset.provenance},
                            {"length_law", to_json(law)},
                            {"seed", seed}};
  out.dataset.metas.reserve(dataset.size());
  out.dataset.values.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    auto rng = stream_engine(seed, i, kTruncateSalt);
    const SequenceMeta& meta = dataset.metas[i];
    Frame length = law.draw(rng);
    if (length > meta.length) {
      length = meta.length;
      ++out.clamped;
    }
    SequenceMeta m = meta;
    m.length = length;
    if (m.changepoint && *m.changepoint >= length) m.changepoint.reset();
    const Series& src = dataset.values[i];
    const auto keep = static_cast<std::size_t>(length) * src.dim;
    out.dataset.values.emplace_back(src.dim, std::vector<double>(src.data.begin(),
                                                                 src.data.begin() + keep));
    out.dataset.metas.push_back(std::move(m));
  }
  return out;
}

}  // namespace qcdeval
