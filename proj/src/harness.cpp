#include "qcdeval/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "format.hpp"
#include "qcdeval/dataset_io.hpp"
#include "qcdeval/parallel.hpp"

namespace qcdeval {

using detail::format_double;

DetectionRun detect_all(const LabeledDataset& dataset, const DetectorConfig& config,
                        std::size_t workers) {
  config.validate();
  DetectionRun run;
  run.outcomes.resize(dataset.size());
  std::vector<std::string> errors(dataset.size());
  parallel_for(dataset.size(), workers, [&](std::size_t i) {
    run.outcomes[i].id = dataset.metas[i].id;
    try {
      run.outcomes[i].tau = run_detector(config, dataset.values[i]);
    } catch (const std::exception& e) {
      run.outcomes[i].tau.reset();
      errors[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      run.diagnostics.push_back("sequence '" + dataset.metas[i].id + "' at threshold " +
                                format_double(config.threshold) + ": " + errors[i] +
                                " (recorded as no alarm)");
    }
  }
  return run;
}

std::vector<double> log_grid(double start, double stop, std::size_t num) {
  if (!(start > 0.0) || !(stop > 0.0)) throw ValidationError("log grid needs positive bounds");
  std::vector<double> out;
  if (num == 1) return {start};
  const double l0 = std::log10(start);
  const double l1 = std::log10(stop);
  for (std::size_t i = 0; i < num; ++i) {
    out.push_back(std::pow(10.0, l0 + (l1 - l0) * static_cast<double>(i) /
                                          static_cast<double>(num - 1)));
  }
  return out;
}

namespace {

double to_number(const std::string& s) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("not a number: '" + s + "'");
  }
}

std::vector<std::string> split(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in{std::string(text)};
  while (std::getline(in, item, sep)) out.push_back(item);
  return out;
}

}  // namespace

std::vector<double> parse_threshold_grid(std::string_view text) {
  std::vector<double> grid;
  const auto parts = split(text, ':');
  if (parts.size() == 3) {
    const double start = to_number(parts[0]);
    const double stop = to_number(parts[1]);
    const auto dash = parts[2].find('-');
    const std::string count = parts[2].substr(0, dash);
    const std::string mode = dash == std::string::npos ? "log" : parts[2].substr(dash + 1);
    const double num = to_number(count);
    if (num < 0 || std::floor(num) != num) throw ValidationError("grid size must be an integer");
    const auto n = static_cast<std::size_t>(num);
    if (mode == "log") {
      grid = n == 0 ? std::vector<double>{} : log_grid(start, stop, n);
    } else if (mode == "lin") {
      for (std::size_t i = 0; i < n; ++i) {
        grid.push_back(n == 1 ? start
                              : start + (stop - start) * static_cast<double>(i) /
                                            static_cast<double>(n - 1));
      }
    } else {
      throw ValidationError("grid spacing must be 'log' or 'lin'");
    }
  } else if (parts.size() == 1) {
    for (const auto& item : split(text, ',')) {
      if (!item.empty()) grid.push_back(to_number(item));
    }
  } else {
    throw ValidationError("bad threshold grid: " + std::string(text));
  }
  if (grid.empty()) throw ValidationError("empty threshold grid");
  for (double v : grid) {
    if (!std::isfinite(v)) throw ValidationError("non-finite threshold");
  }
  std::sort(grid.begin(), grid.end());
  if (std::adjacent_find(grid.begin(), grid.end()) != grid.end()) {
    throw ValidationError("duplicate thresholds in grid");
  }
  return grid;
}

std::vector<MetricName> parse_metric_list(std::string_view text) {
  std::vector<MetricName> out;
  for (const auto& item : split(text, ',')) {
    if (item.empty()) continue;
    const MetricName m = parse_metric_name(item);
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

const MetricEstimate* CurvePoint::find(MetricName name) const {
  for (const auto& m : metrics) {
    if (m.name == name) return &m;
  }
  return nullptr;
}

bool CurvePoint::in_extrapolation_region() const {
  const auto* km = find(MetricName::KmArl);
  return km && km->extrapolation_flag;
}

SweepResult sweep(const LabeledDataset& dataset, const DetectorConfig& base,
                  std::vector<double> thresholds, const std::vector<MetricName>& metrics,
                  std::size_t workers) {
  if (metrics.empty()) throw ValidationError("no metrics requested");
  if (thresholds.empty()) throw ValidationError("empty threshold grid");
  std::sort(thresholds.begin(), thresholds.end());
  if (std::adjacent_find(thresholds.begin(), thresholds.end()) != thresholds.end()) {
    throw ValidationError("duplicate thresholds in grid");
  }
  base.validate();

  SweepResult res;
  res.fingerprint = fingerprint(dataset);
  res.detector = base;
  res.thresholds = thresholds;
  res.metrics = metrics;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& m = dataset.metas[i];
    res.t_max = std::max(res.t_max, static_cast<double>(m.length));
    if (m.changepoint) {
      const double dt = static_cast<double>(m.length - *m.changepoint);
      res.dt_max = std::max(res.dt_max.value_or(0.0), dt);
    }
  }

  for (double thr : thresholds) {
    const auto start = std::chrono::steady_clock::now();
    DetectorConfig cfg = base;
    cfg.threshold = thr;
    DetectionRun run = detect_all(dataset, cfg, workers);

    CurvePoint pt;
    pt.threshold = thr;
    pt.n_failed = run.diagnostics.size();
    for (MetricName m : metrics) pt.metrics.push_back(compute_metric(m, dataset.metas, run.outcomes));
    pt.wall_time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - start)
                          .count();
    res.points.push_back(std::move(pt));
    for (auto& d : run.diagnostics) res.diagnostics.push_back(std::move(d));
  }
  return res;
}

void write_curve_csv(std::ostream& out, const SweepResult& result) {
  out << "threshold,metric,value,sem,n_used,extrapolation_flag\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& pt : result.points) {
    for (const auto& m : pt.metrics) {
      out << format_double(pt.threshold) << ',' << to_string(m.name) << ',' << opt(m.value) << ','
          << opt(m.sem) << ',' << m.n_used << ',' << (m.extrapolation_flag ? "true" : "false")
          << '\n';
    }
  }
}

namespace {

struct Family {
  const char* label;
  MetricName arl;
  MetricName add;
  const char* color;
};

constexpr Family kFamilies[] = {
    {"KM", MetricName::KmArl, MetricName::KmAdd, "#1f77b4"},
    {"LB", MetricName::LbArl, MetricName::LbAdd, "#d62728"},
};

struct Marker {
  double arl, arl_sem, add, add_sem;
};

std::vector<Marker> family_markers(const SweepResult& r, const Family& f) {
  std::vector<Marker> out;
  for (const auto& pt : r.points) {
    const auto* x = pt.find(f.arl);
    const auto* y = pt.find(f.add);
    if (!x || !y || !x->defined() || !y->defined() || !(*x->value > 0.0)) continue;
    out.push_back({*x->value, x->sem.value_or(0.0), *y->value, y->sem.value_or(0.0)});
  }
  return out;
}

}  // namespace

void write_curve_svg(std::ostream& out, const SweepResult& result) {
  constexpr double W = 720, H = 480, L = 70, R = 20, T = 30, B = 60;
  std::vector<std::pair<const Family*, std::vector<Marker>>> series;
  double xmin = result.t_max > 0 ? result.t_max : 1.0;
  double xmax = xmin;
  double ymax = 1.0;
  for (const auto& f : kFamilies) {
    auto ms = family_markers(result, f);
    for (const auto& m : ms) {
      xmin = std::min(xmin, std::max(m.arl - m.arl_sem, m.arl * 0.5));
      xmax = std::max(xmax, m.arl + m.arl_sem);
      ymax = std::max(ymax, m.add + m.add_sem);
    }
    series.emplace_back(&f, std::move(ms));
  }
  double lx0 = std::floor(std::log10(xmin));
  double lx1 = std::ceil(std::log10(xmax));
  if (lx1 <= lx0) lx1 = lx0 + 1;
  ymax *= 1.1;

  auto px = [&](double arl) { return L + (std::log10(arl) - lx0) / (lx1 - lx0) * (W - L - R); };
  auto py = [&](double add) { return H - B - add / ymax * (H - T - B); };
  auto num = [](double v) { return format_double(std::round(v * 100.0) / 100.0); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  if (result.t_max > 0 && std::log10(result.t_max) < lx1) {
    const double x0 = std::max(L, px(result.t_max));
    out << "<rect class=\"extrapolation\" x=\"" << num(x0) << "\" y=\"" << T << "\" width=\""
        << num(W - R - x0) << "\" height=\"" << (H - T - B)
        << "\" fill=\"#999999\" fill-opacity=\"0.25\"/>\n";
  }
  out << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
      << "\" stroke=\"black\"/>\n";
  for (double e = lx0; e <= lx1; e += 1.0) {
    out << "<text x=\"" << num(px(std::pow(10.0, e))) << "\" y=\"" << H - B + 18
        << "\" font-size=\"11\" text-anchor=\"middle\">1e" << static_cast<int>(e) << "</text>\n";
  }
  out << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15
      << "\" font-size=\"13\" text-anchor=\"middle\">ARL (log scale)</text>\n";
  out << "<text x=\"18\" y=\"" << (T + H - B) / 2 << "\" font-size=\"13\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 18 " << (T + H - B) / 2 << ")\">ADD</text>\n";
  out << "<text x=\"" << L - 8 << "\" y=\"" << num(py(ymax / 1.1)) << "\" font-size=\"11\""
      << " text-anchor=\"end\">" << num(ymax / 1.1) << "</text>\n";

  int legend = 0;
  for (const auto& [fam, markers] : series) {
    for (const auto& m : markers) {
      const double cx = px(m.arl);
      const double cy = py(m.add);
      if (m.arl_sem > 0) {
        out << "<line class=\"errbar\" x1=\"" << num(px(std::max(m.arl - m.arl_sem, xmin)))
            << "\" y1=\"" << num(cy) << "\" x2=\"" << num(px(m.arl + m.arl_sem)) << "\" y2=\""
            << num(cy) << "\" stroke=\"" << fam->color << "\"/>\n";
      }
      if (m.add_sem > 0) {
        out << "<line class=\"errbar\" x1=\"" << num(cx) << "\" y1=\"" << num(py(m.add - m.add_sem))
            << "\" x2=\"" << num(cx) << "\" y2=\"" << num(py(m.add + m.add_sem)) << "\" stroke=\""
            << fam->color << "\"/>\n";
      }
      out << "<circle class=\"marker marker-" << fam->label << "\" cx=\"" << num(cx) << "\" cy=\""
          << num(cy) << "\" r=\"3.5\" fill=\"" << fam->color << "\"/>\n";
    }
    out << "<text x=\"" << W - R - 60 << "\" y=\"" << T + 15 + 16 * legend << "\" font-size=\"12\""
        << " fill=\"" << fam->color << "\">" << fam->label << "-ARL/ADD</text>\n";
    ++legend;
  }
  out << "</svg>\n";
}

void emit_curve(const SweepResult& result, const std::filesystem::path& out_path,
                CurveFormat format) {
  std::ofstream out(out_path);
  if (!out) throw Error("cannot write " + out_path.string());
  if (format == CurveFormat::Csv) {
    write_curve_csv(out, result);
  } else {
    write_curve_svg(out, result);
  }
  if (!out) throw Error("write failed: " + out_path.string());
}

}  // namespace qcdeval
