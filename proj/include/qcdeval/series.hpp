#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qcdeval {

/// Frame-major multivariate time series. `dim == 1` for scalar data.
struct Series {
  std::size_t dim = 1;
  std::vector<double> data;

  Series() = default;
  explicit Series(std::vector<double> scalar) : dim(1), data(std::move(scalar)) {}
  Series(std::size_t d, std::vector<double> flat) : dim(d), data(std::move(flat)) {}

  std::size_t frames() const { return dim == 0 ? 0 : data.size() / dim; }
  std::span<const double> frame(std::size_t t) const {
    return std::span<const double>(data).subspan(t * dim, dim);
  }

  bool operator==(const Series&) const = default;
};

}  // namespace qcdeval
