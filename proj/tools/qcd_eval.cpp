// qcd-eval: simulate labeled streams, run detectors, and evaluate ARL/ADD with
// censoring-aware estimators.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "qcdeval/dataset_io.hpp"
#include "qcdeval/harness.hpp"
#include "qcdeval/oracle.hpp"
#include "qcdeval/parallel.hpp"
#include "qcdeval/survival.hpp"

#ifndef QCD_EVAL_VERSION
#define QCD_EVAL_VERSION "dev"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qcdeval;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitVerification = 3;

struct VerificationFailure : Error {
  using Error::Error;
};

struct Common {
  std::uint64_t seed = 0;
  std::size_t workers = 0;
  std::string manifest;
};

struct DetectorFlags {
  std::string config_path;
  std::string kind;
  std::string model;
  std::optional<double> threshold;
  std::optional<double> omega;
  std::optional<double> ewma_lambda;
  std::optional<std::size_t> window;
  std::optional<std::size_t> burn_in;

  void attach(CLI::App* cmd, bool with_threshold) {
    cmd->add_option("--config", config_path, "Detector config JSON; flags override its keys");
    cmd->add_option("--detector", kind, "gsr | cusum | ewma | window-l1 | window-normal");
    cmd->add_option("--model", model, "gaussian:MU0,MU1,SIGMA2 or poisson:L0,L1 (gsr/cusum)");
    if (with_threshold) cmd->add_option("--threshold", threshold, "Alarm threshold");
    cmd->add_option("--omega", omega, "GSR head start (default 0)");
    cmd->add_option("--ewma-lambda", ewma_lambda, "EWMA smoothing weight (default 0.1)");
    cmd->add_option("--window", window, "Window size (default 30)");
    cmd->add_option("--burn-in", burn_in, "Burn-in frames (default 30)");
  }

  DetectorConfig build() const {
    DetectorConfig c;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ValidationError("cannot open " + config_path);
      json j;
      try {
        j = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ValidationError(config_path + ": " + e.what());
      }
      c = detector_config_from_json(j);
    } else if (kind.empty()) {
      throw ValidationError("--detector or --config is required");
    }
    if (!kind.empty()) c.kind = parse_detector_kind(kind);
    if (!model.empty()) c.model = parse_model(model);
    if (threshold) c.threshold = *threshold;
    if (omega) c.omega = *omega;
    if (ewma_lambda) c.ewma_lambda = *ewma_lambda;
    if (window) c.window_size = *window;
    if (burn_in) c.burn_in = *burn_in;
    c.validate();
    return c;
  }
};

struct DataFlags {
  std::string path;
  std::string format;
  std::size_t min_length = 2;

  void attach(CLI::App* cmd) {
    cmd->add_option("--data", path, "Dataset file (JSONL or CSV)")->required();
    cmd->add_option("--format", format, "jsonl | csv (default: from extension)");
    cmd->add_option("--min-length", min_length, "Drop sequences shorter than this")
        ->capture_default_str();
  }

  IngestResult load() const {
    const auto fmt = format.empty() ? format_from_path(path) : parse_dataset_format(format);
    auto res = ingest(path, fmt, min_length);
    for (const auto& d : res.report.diagnostics) std::cerr << "warning: " << d << '\n';
    return res;
  }
};

std::size_t workers_of(const Common& c) { return c.workers > 0 ? c.workers : default_workers(); }

json ingest_json(const IngestReport& r) {
  return {{"n_read", r.n_read},
          {"n_dropped_short", r.n_dropped_short},
          {"n_rejected", r.n_rejected},
          {"diagnostics", r.diagnostics}};
}

void write_json_file(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

// The manifest goes next to the primary output unless --manifest names a path;
// it is always written before any result file.
void write_manifest(const Common& common, const std::string& command, const std::string& out,
                    json details, const std::vector<std::string>& argv) {
  fs::path path = common.manifest;
  if (path.empty()) {
    if (out.empty()) return;
    path = out + ".manifest.json";
  }
  json m = {{"tool", "qcd-eval"},
            {"version", QCD_EVAL_VERSION},
            {"command", command},
            {"argv", argv},
            {"seed", common.seed},
            {"workers", workers_of(common)}};
  for (auto& [k, v] : details.items()) m[k] = v;
  write_json_file(path, m);
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw Error("cannot write " + path);
  return file;
}

// {"id": str, "tau": int|null} per line.
std::vector<DetectionOutcome> read_detections(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<DetectionOutcome> out;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = json::parse(text);
      DetectionOutcome o;
      o.id = j.at("id").get<std::string>();
      const auto& tau = j.at("tau");
      if (!tau.is_null()) {
        if (!tau.is_number_integer() || tau.get<std::int64_t>() < 0) {
          throw ValidationError("'tau' must be a non-negative integer or null");
        }
        o.tau = tau.get<Frame>();
      }
      out.push_back(std::move(o));
    } catch (const json::exception& e) {
      throw ValidationError(path + ": line " + std::to_string(line) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ": line " + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"Evaluate quickest-change detectors with censoring-aware ARL/ADD estimators",
               "qcd-eval"};
  app.set_version_flag("--version", std::string(QCD_EVAL_VERSION));
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--seed", common.seed, "Seed for every random draw")->capture_default_str();
    cmd->add_option("--workers", common.workers,
                    "Worker threads (default: $QCD_EVAL_WORKERS or all cores)");
    cmd->add_option("--manifest", common.manifest, "Run manifest path (default: OUT.manifest.json)");
  };

  // simulate
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic labeled dataset");
  std::string sim_spec, sim_out, sim_format;
  sim_cmd->add_option("--spec", sim_spec, "Simulation spec JSON")->required();
  sim_cmd->add_option("--out", sim_out, "Dataset output path")->required();
  sim_cmd->add_option("--format", sim_format, "jsonl | csv (default: from extension)");
  add_common(sim_cmd);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Compute metrics at one threshold");
  DataFlags eval_data;
  DetectorFlags eval_det;
  std::string eval_metrics = "km-arl,km-add,lb-arl,lb-add,naive-arl";
  std::string eval_out, eval_detections;
  eval_data.attach(eval_cmd);
  eval_det.attach(eval_cmd, true);
  eval_cmd->add_option("--metrics", eval_metrics, "Comma-separated metric names")
      ->capture_default_str();
  eval_cmd->add_option("--detections", eval_detections,
                       "JSONL of {id, tau} to evaluate instead of running a detector");
  eval_cmd->add_option("--out", eval_out, "metrics JSON output (default: stdout)");
  add_common(eval_cmd);

  // curve
  auto* curve_cmd = app.add_subcommand("curve", "Sweep thresholds and emit an ARL-ADD curve");
  DataFlags curve_data;
  DetectorFlags curve_det;
  std::string curve_grid, curve_out, curve_svg;
  std::string curve_metrics = "km-arl,km-add,lb-arl,lb-add,naive-arl";
  curve_data.attach(curve_cmd);
  curve_det.attach(curve_cmd, false);
  curve_cmd->add_option("--thresholds", curve_grid, "START:STOP:N-log, START:STOP:N-lin or a list")
      ->required();
  curve_cmd->add_option("--metrics", curve_metrics, "Comma-separated metric names")
      ->capture_default_str();
  curve_cmd->add_option("--out", curve_out, "Curve CSV output")->required();
  curve_cmd->add_option("--svg", curve_svg, "Also render an SVG plot");
  add_common(curve_cmd);

  // survival
  auto* surv_cmd = app.add_subcommand("survival", "Export the product-limit run-length curve");
  DataFlags surv_data;
  DetectorFlags surv_det;
  std::string surv_kind = "arl", surv_out;
  surv_data.attach(surv_cmd);
  surv_det.attach(surv_cmd, true);
  surv_cmd->add_option("--kind", surv_kind, "arl | add")
      ->check(CLI::IsMember({"arl", "add"}))
      ->capture_default_str();
  surv_cmd->add_option("--out", surv_out, "Curve CSV output (default: stdout)");
  add_common(surv_cmd);

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "Monte-Carlo ground-truth ARL or ADD");
  DetectorFlags oracle_det;
  std::size_t oracle_reps = 100000;
  Frame oracle_cap = 1000000;
  std::optional<double> oracle_geometric;
  std::string oracle_out;
  oracle_det.attach(oracle_cmd, true);
  oracle_cmd->add_option("--reps", oracle_reps, "Replications")->capture_default_str();
  oracle_cmd->add_option("--horizon-cap", oracle_cap, "Frames per replication before giving up")
      ->capture_default_str();
  oracle_cmd->add_option("--geometric", oracle_geometric,
                         "Estimate ADD with nu ~ Geometric(P) on {0,1,...} instead of ARL");
  oracle_cmd->add_option("--out", oracle_out, "JSON output (default: stdout)");
  add_common(oracle_cmd);

  // verify-bounds
  auto* vb_cmd = app.add_subcommand("verify-bounds",
                                    "Check Monte-Carlo KM bias against the finite-sample bounds");
  std::string vb_family, vb_out;
  std::vector<std::size_t> vb_n;
  std::vector<double> vb_a;
  BoundOptions vb_opts;
  vb_cmd->add_option("--family", vb_family, "EVENT,CENSOR laws, e.g. exp:1,unif:0,2")->required();
  vb_cmd->add_option("--n", vb_n, "Sample sizes")->required()->delimiter(',');
  vb_cmd->add_option("--a", vb_a, "Horizons")->required()->delimiter(',');
  vb_cmd->add_option("--reps", vb_opts.mc_reps, "Monte-Carlo replications")->capture_default_str();
  vb_cmd->add_option("--quad-points", vb_opts.quad_points, "Gauss-Legendre points per panel")
      ->capture_default_str();
  vb_cmd->add_option("--out", vb_out, "Report CSV (default: stdout)");
  add_common(vb_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    const std::size_t workers = workers_of(common);

    if (*sim_cmd) {
      std::ifstream in(sim_spec);
      if (!in) throw ValidationError("cannot open " + sim_spec);
      json spec_json;
      try {
        spec_json = json::parse(in);
      } catch (const json::parse_error& e) {
        throw ValidationError(sim_spec + ": " + e.what());
      }
      SimSpec spec = sim_spec_from_json(spec_json);
      if (sim_cmd->count("--seed") > 0 || !spec_json.contains("seed")) spec.seed = common.seed;
      common.seed = spec.seed;
      std::optional<LengthLaw> trunc;
      if (spec_json.contains("truncation")) trunc = length_law_from_json(spec_json["truncation"]);
      spec.validate();
      if (trunc) trunc->validate();

      json details = {{"spec", to_json(spec)}};
      if (trunc) details["truncation"] = to_json(*trunc);
      write_manifest(common, "simulate", sim_out, details, args);

      LabeledDataset ds = simulate(spec, workers);
      if (trunc) {
        auto t = truncate(ds, *trunc, spec.seed);
        if (t.clamped > 0) {
          std::cerr << "warning: " << t.clamped
                    << " truncated lengths exceeded the original and were clamped\n";
        }
        ds = std::move(t.dataset);
        ds.provenance["truncation"] = to_json(*trunc);
      }
      const auto fmt = sim_format.empty() ? format_from_path(sim_out)
                                          : parse_dataset_format(sim_format);
      save_dataset(sim_out, ds, fmt);
      std::cout << "wrote " << ds.size() << " sequences to " << sim_out << " (sha256 "
                << fingerprint(ds) << ")\n";
      return kExitOk;
    }

    if (*eval_cmd) {
      const auto metrics = parse_metric_list(eval_metrics);
      if (metrics.empty()) throw ValidationError("no metrics requested");
      const auto data = eval_data.load();
      const auto& ds = data.dataset;
      std::optional<DetectorConfig> det;
      if (eval_detections.empty()) {
        det = eval_det.build();
        if (!eval_det.threshold && eval_det.config_path.empty()) {
          throw ValidationError("--threshold is required");
        }
      }
      json details = {{"dataset", eval_data.path}, {"fingerprint", fingerprint(ds)}};
      if (det) details["detector"] = to_json(*det);
      if (!eval_detections.empty()) details["detections"] = eval_detections;
      write_manifest(common, "evaluate", eval_out, details, args);

      DetectionRun run;
      if (det) {
        run = detect_all(ds, *det, workers);
      } else {
        run.outcomes = read_detections(eval_detections);
      }
      for (const auto& d : run.diagnostics) std::cerr << "warning: " << d << '\n';
      json result = {{"fingerprint", fingerprint(ds)},
                     {"n_sequences", ds.size()},
                     {"ingest", ingest_json(data.report)},
                     {"diagnostics", run.diagnostics},
                     {"metrics", json::array()}};
      if (det) result["detector"] = to_json(*det);
      for (MetricName m : metrics) {
        result["metrics"].push_back(to_json(compute_metric(m, ds.metas, run.outcomes)));
      }
      std::ofstream file;
      open_out(eval_out, file) << result.dump(2) << '\n';
      return kExitOk;
    }

    if (*curve_cmd) {
      const auto grid = parse_threshold_grid(curve_grid);
      const auto metrics = parse_metric_list(curve_metrics);
      if (metrics.empty()) throw ValidationError("no metrics requested");
      const auto det = curve_det.build();
      const auto data = curve_data.load();
      json details = {{"dataset", curve_data.path},
                      {"fingerprint", fingerprint(data.dataset)},
                      {"detector", to_json(det)},
                      {"thresholds", grid}};
      write_manifest(common, "curve", curve_out, details, args);
      const auto res = sweep(data.dataset, det, grid, metrics, workers);
      for (const auto& d : res.diagnostics) std::cerr << "warning: " << d << '\n';
      emit_curve(res, curve_out, CurveFormat::Csv);
      if (!curve_svg.empty()) emit_curve(res, curve_svg, CurveFormat::Svg);
      std::cout << "wrote " << res.points.size() << " curve points to " << curve_out << '\n';
      return kExitOk;
    }

    if (*surv_cmd) {
      const auto det = surv_det.build();
      if (!surv_det.threshold && surv_det.config_path.empty()) {
        throw ValidationError("--threshold is required");
      }
      const auto data = surv_data.load();
      json details = {{"dataset", surv_data.path},
                      {"fingerprint", fingerprint(data.dataset)},
                      {"detector", to_json(det)},
                      {"kind", surv_kind}};
      write_manifest(common, "survival", surv_out, details, args);
      const auto run = detect_all(data.dataset, det, workers);
      for (const auto& d : run.diagnostics) std::cerr << "warning: " << d << '\n';
      const auto samples = surv_kind == "arl" ? arl_samples(data.dataset.metas, run.outcomes)
                                              : add_samples(data.dataset.metas, run.outcomes);
      std::ofstream file;
      write_curve_csv(open_out(surv_out, file), fit_km(samples));
      return kExitOk;
    }

    if (*oracle_cmd) {
      const auto det = oracle_det.build();
      if (!det.model) throw ValidationError("oracle needs --model to generate streams");
      OracleOptions o;
      o.n_reps = oracle_reps;
      o.horizon_cap = oracle_cap;
      o.seed = common.seed;
      o.workers = workers;
      json details = {{"detector", to_json(det)}, {"reps", oracle_reps}, {"horizon_cap", oracle_cap}};
      if (oracle_geometric) details["geometric_p"] = *oracle_geometric;
      write_manifest(common, "oracle", oracle_out, details, args);
      McEstimate est;
      std::string quantity = "ARL";
      if (oracle_geometric) {
        const auto law = ChangepointLaw::geometric(*oracle_geometric);
        law.validate();
        est = true_add_mc(*det.model, det, law, o);
        quantity = "ADD";
      } else {
        est = true_arl_mc(*det.model, det, o);
      }
      const json result = {{"quantity", quantity},     {"value", est.value},
                           {"sem", est.sem},           {"n_reps", est.n_reps},
                           {"n_used", est.n_used},     {"retention", est.retention()},
                           {"cap_hits", est.cap_hits}, {"detector", to_json(det)}};
      std::ofstream file;
      open_out(oracle_out, file) << result.dump(2) << '\n';
      return kExitOk;
    }

    if (*vb_cmd) {
      const auto model = parse_censor_model(vb_family);
      for (auto n : vb_n) {
        if (n == 0) throw ValidationError("--n values must be positive");
      }
      for (double a : vb_a) {
        if (!(a >= 0.0)) throw ValidationError("--a values must be >= 0");
      }
      vb_opts.seed = common.seed;
      vb_opts.workers = workers;
      json details = {{"family", vb_family}, {"n", vb_n}, {"a", vb_a},
                      {"reps", vb_opts.mc_reps}, {"quad_points", vb_opts.quad_points}};
      write_manifest(common, "verify-bounds", vb_out, details, args);

      std::ostringstream csv;
      csv.precision(17);
      csv << "model,n,a,lower,upper,mc_bias,mc_ci_halfwidth,contained\n";
      std::size_t failed = 0, total = 0;
      for (auto n : vb_n) {
        for (double a : vb_a) {
          const auto r = arl_bias_bounds(model, n, a, vb_opts);
          ++total;
          failed += !r.contained;
          csv << '"' << r.model << "\"," << r.n << ',' << r.a << ',' << r.lower << ',' << r.upper
              << ',' << r.mc_bias << ',' << r.mc_ci_halfwidth << ','
              << (r.contained ? "true" : "false") << '\n';
        }
      }
      std::ofstream file;
      open_out(vb_out, file) << csv.str();
      std::cerr << (failed == 0 ? "PASS" : "FAIL") << ": " << (total - failed) << "/" << total
                << " cases contained\n";
      if (failed > 0) throw VerificationFailure("bias outside the bounds");
      return kExitOk;
    }
  } catch (const VerificationFailure& e) {
    std::cerr << "verification failed: " << e.what() << '\n';
    return kExitVerification;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
