#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <utility>
#include <vector>

namespace prmix {

// Discretized mixing density on a tensor-product grid (dimension 1 or 2) with
// trapezoid quadrature weights. Values are kept normalized: the weighted sum
// is 1 after construction and after every recursion step.
class GridDensity {
 public:
  GridDensity() = default;

  int dim() const { return dim_; }
  std::size_t size() const { return points_.size(); }

  const std::vector<Eigen::VectorXd>& points() const { return points_; }
  const Eigen::VectorXd& cell_weights() const { return cell_weights_; }
  const Eigen::VectorXd& values() const { return values_; }
  Eigen::VectorXd& values() { return values_; }

  const std::vector<std::pair<double, double>>& bounds() const { return bounds_; }
  const std::vector<int>& resolution() const { return resolution_; }
  // Per-dimension node coordinates of the tensor grid.
  const std::vector<Eigen::VectorXd>& axes() const { return axes_; }

  // Weighted sum of the current values (the trapezoid integral).
  double integral() const;
  // Divide values by the current integral, absorbing floating-point drift.
  void normalize();

  // Pointwise evaluation by multilinear interpolation; zero outside the box.
  double interpolate(const Eigen::VectorXd& u) const;

  // One row per grid point: coordinates then density value.
  void write_csv(std::ostream& os) const;

  friend GridDensity make_grid(const std::vector<std::pair<double, double>>& bounds,
                               const std::vector<int>& resolution);

 private:
  int dim_ = 0;
  std::vector<std::pair<double, double>> bounds_;
  std::vector<int> resolution_;
  std::vector<Eigen::VectorXd> axes_;
  std::vector<Eigen::VectorXd> points_;
  Eigen::VectorXd cell_weights_;
  Eigen::VectorXd values_;
};

// Uniform density on the box, discretized at `resolution` points per
// dimension. Dimension above 2 is rejected; that is the quadrature engine's
// whole premise.
GridDensity make_grid(const std::vector<std::pair<double, double>>& bounds,
                      const std::vector<int>& resolution);

}  // namespace prmix
