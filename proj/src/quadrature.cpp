#include "qcdeval/quadrature.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "qcdeval/common.hpp"

namespace qcdeval {

namespace {

// P_n(x) and P_n'(x) by the three-term recurrence.
std::pair<double, double> legendre(std::size_t n, double x) {
  double p0 = 1.0;
  double p1 = x;
  for (std::size_t k = 2; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    const double p2 = ((2.0 * kk - 1.0) * x * p1 - (kk - 1.0) * p0) / kk;
    p0 = p1;
    p1 = p2;
  }
  const double dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
  return {p1, dp};
}

}  // namespace

GaussLegendreRule gauss_legendre(std::size_t n) {
  if (n == 0) throw ValidationError("gauss_legendre: need at least one node");
  GaussLegendreRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (static_cast<double>(i) + 0.75) /
                        (static_cast<double>(n) + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const auto [p, dp] = legendre(n, x);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double dp = legendre(n, x).second;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

double integrate_composite(const std::function<double(double)>& f, double lo, double hi,
                           const GaussLegendreRule& rule, std::size_t panels) {
  if (hi <= lo || panels == 0) return 0.0;
  const double h = (hi - lo) / static_cast<double>(panels);
  double total = 0.0;
  for (std::size_t p = 0; p < panels; ++p) {
    const double a = lo + h * static_cast<double>(p);
    const double mid = a + 0.5 * h;
    double s = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
      s += rule.weights[k] * f(mid + 0.5 * h * rule.nodes[k]);
    }
    total += 0.5 * h * s;
  }
  return total;
}

AdaptiveResult integrate_piecewise(const std::function<double(double)>& f,
                                   std::span<const double> breaks, std::size_t points,
                                   double rel_tol, std::size_t max_panels) {
  const GaussLegendreRule rule = gauss_legendre(points);
  auto eval = [&](std::size_t panels) {
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
      total += integrate_composite(f, breaks[k], breaks[k + 1], rule, panels);
    }
    return total;
  };

  AdaptiveResult res;
  std::size_t panels = 1;
  double prev = eval(panels);
  while (panels < max_panels) {
    panels *= 2;
    const double cur = eval(panels);
    const double diff = std::abs(cur - prev);
    if (diff <= rel_tol * std::abs(cur) || (cur == 0.0 && prev == 0.0)) {
      res.value = cur;
      res.panels = panels;
      res.converged = true;
      return res;
    }
    prev = cur;
  }
  res.value = prev;
  res.panels = panels;
  return res;
}

}  // namespace qcdeval
