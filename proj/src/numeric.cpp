#include "prmix/numeric.hpp"

#include <stdexcept>

namespace prmix {

namespace {

double pairwise_sum_impl(const double* xs, std::size_t n) {
  if (n <= 32) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += xs[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum_impl(xs, half) + pairwise_sum_impl(xs + half, n - half);
}

}  // namespace

double pairwise_sum(std::span<const double> xs) {
  return pairwise_sum_impl(xs.data(), xs.size());
}

double trapezoid_integral(std::span<const double> grid, std::span<const double> values) {
  if (grid.size() != values.size())
    throw std::invalid_argument("trapezoid_integral: grid/value size mismatch");
  if (grid.size() < 2) return 0.0;
  std::vector<double> terms(grid.size() - 1);
  for (std::size_t i = 0; i + 1 < grid.size(); ++i)
    terms[i] = 0.5 * (values[i] + values[i + 1]) * (grid[i + 1] - grid[i]);
  return pairwise_sum(terms);
}

}  // namespace prmix
