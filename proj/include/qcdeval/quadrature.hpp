#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace qcdeval {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point rule via Newton iteration on the Legendre recurrence.
GaussLegendreRule gauss_legendre(std::size_t n);

/// Composite rule: [lo, hi] split into `panels` equal panels.
double integrate_composite(const std::function<double(double)>& f, double lo, double hi,
                           const GaussLegendreRule& rule, std::size_t panels);

struct AdaptiveResult {
  double value = 0.0;
  std::size_t panels = 0;
  bool converged = false;
};

/// Integrates over consecutive pieces [breaks[k], breaks[k+1]], doubling the
/// panel count until two successive results differ by less than `rel_tol`
/// relative (or both vanish).
AdaptiveResult integrate_piecewise(const std::function<double(double)>& f,
                                   std::span<const double> breaks, std::size_t points,
                                   double rel_tol = 1e-8, std::size_t max_panels = 1 << 14);

}  // namespace qcdeval
