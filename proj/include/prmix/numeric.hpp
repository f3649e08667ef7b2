#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace prmix {

// Pairwise (tree) summation; rounding error grows O(log n) instead of O(n).
double pairwise_sum(std::span<const double> xs);

// Trapezoid integral of values sampled on a strictly increasing grid.
double trapezoid_integral(std::span<const double> grid, std::span<const double> values);

}  // namespace prmix
