#include "prmix/grid.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "prmix/io.hpp"
#include "prmix/numeric.hpp"

namespace prmix {

double GridDensity::integral() const {
  std::vector<double> terms(size());
  for (std::size_t g = 0; g < size(); ++g) terms[g] = values_[g] * cell_weights_[g];
  return pairwise_sum(terms);
}

void GridDensity::normalize() {
  const double z = integral();
  if (!(z > 0.0)) throw std::runtime_error("GridDensity::normalize: vanishing integral");
  values_ /= z;
}

double GridDensity::interpolate(const Eigen::VectorXd& u) const {
  if (u.size() != dim_) throw std::invalid_argument("GridDensity::interpolate: dimension mismatch");
  std::array<int, 2> lo{0, 0};
  std::array<double, 2> frac{0.0, 0.0};
  for (int j = 0; j < dim_; ++j) {
    const auto& [a, b] = bounds_[j];
    if (u[j] < a || u[j] > b) return 0.0;
    const double h = (b - a) / (resolution_[j] - 1);
    double cell = (u[j] - a) / h;
    int idx = static_cast<int>(std::floor(cell));
    if (idx >= resolution_[j] - 1) idx = resolution_[j] - 2;
    lo[j] = idx;
    frac[j] = cell - idx;
  }
  if (dim_ == 1) {
    return (1.0 - frac[0]) * values_[lo[0]] + frac[0] * values_[lo[0] + 1];
  }
  const auto at = [&](int i, int j) { return values_[i * resolution_[1] + j]; };
  const double v0 = (1.0 - frac[1]) * at(lo[0], lo[1]) + frac[1] * at(lo[0], lo[1] + 1);
  const double v1 = (1.0 - frac[1]) * at(lo[0] + 1, lo[1]) + frac[1] * at(lo[0] + 1, lo[1] + 1);
  return (1.0 - frac[0]) * v0 + frac[0] * v1;
}

void GridDensity::write_csv(std::ostream& os) const {
  for (int j = 0; j < dim_; ++j) os << "u" << (j + 1) << ",";
  os << "density\n";
  for (std::size_t g = 0; g < size(); ++g) {
    for (int j = 0; j < dim_; ++j) os << fmt_double(points_[g][j]) << ",";
    os << fmt_double(values_[g]) << "\n";
  }
}

GridDensity make_grid(const std::vector<std::pair<double, double>>& bounds,
                      const std::vector<int>& resolution) {
  if (bounds.empty() || bounds.size() > 2)
    throw std::invalid_argument("make_grid: dimension must be 1 or 2");
  if (bounds.size() != resolution.size())
    throw std::invalid_argument("make_grid: bounds/resolution size mismatch");

  GridDensity grid;
  grid.dim_ = static_cast<int>(bounds.size());
  grid.bounds_ = bounds;
  grid.resolution_ = resolution;

  double volume = 1.0;
  std::vector<Eigen::VectorXd> axis_weights;
  for (int j = 0; j < grid.dim_; ++j) {
    const auto& [lo, hi] = bounds[j];
    const int res = resolution[j];
    if (!(lo < hi)) throw std::invalid_argument("make_grid: lo must be < hi");
    if (res < 2) throw std::invalid_argument("make_grid: resolution must be >= 2");
    const double h = (hi - lo) / (res - 1);
    Eigen::VectorXd axis(res), w(res);
    for (int i = 0; i < res; ++i) {
      axis[i] = lo + h * i;
      w[i] = (i == 0 || i == res - 1) ? 0.5 * h : h;
    }
    grid.axes_.push_back(axis);
    axis_weights.push_back(w);
    volume *= hi - lo;
  }

  if (grid.dim_ == 1) {
    const int n = resolution[0];
    grid.points_.reserve(n);
    grid.cell_weights_.resize(n);
    for (int i = 0; i < n; ++i) {
      grid.points_.push_back(Eigen::VectorXd::Constant(1, grid.axes_[0][i]));
      grid.cell_weights_[i] = axis_weights[0][i];
    }
  } else {
    const int n0 = resolution[0], n1 = resolution[1];
    grid.points_.reserve(static_cast<std::size_t>(n0) * n1);
    grid.cell_weights_.resize(static_cast<Eigen::Index>(n0) * n1);
    for (int i = 0; i < n0; ++i) {
      for (int j = 0; j < n1; ++j) {
        Eigen::VectorXd p(2);
        p << grid.axes_[0][i], grid.axes_[1][j];
        grid.points_.push_back(std::move(p));
        grid.cell_weights_[i * n1 + j] = axis_weights[0][i] * axis_weights[1][j];
      }
    }
  }

  grid.values_ = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(grid.size()), 1.0 / volume);
  return grid;
}

}  // namespace prmix
