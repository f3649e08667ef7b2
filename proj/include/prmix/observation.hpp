#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

namespace prmix {

// Spatial extent of the marked-point window and the lower mark cutoff. The
// mark model transforms locations by logit(s/200) and marks by log(mark - 2),
// so both bounds are structural, not configuration.
inline constexpr double kMarkedExtent = 200.0;
inline constexpr double kMarkOffset = 2.0;

enum class ObservationKind { euclidean, sphere, marked };

// Location pair in the open (0, 200)^2 window plus a mark strictly above 2.
struct MarkedPoint {
  double s1 = 0.0;
  double s2 = 0.0;
  double mark = 0.0;
};

// One data point: a Euclidean vector, a unit 3-vector, or a marked location.
// Validation happens here, once, so kernel evaluations stay branch-free; the
// marked variant caches its logit/log transform and Jacobian.
class Observation {
 public:
  static Observation euclidean(Eigen::VectorXd x);
  static Observation sphere(const Eigen::Vector3d& x);
  static Observation marked(const MarkedPoint& p);

  ObservationKind kind() const { return kind_; }
  int dim() const { return static_cast<int>(coords_.size()); }
  const Eigen::VectorXd& coords() const { return coords_; }

  const MarkedPoint& marked_point() const;
  // (logit(s1/200), logit(s2/200), log(mark - 2)); marked observations only.
  const Eigen::Vector3d& transformed() const;
  // log of (mark - 2) * prod_i 200 (s_i/200)(1 - s_i/200), the change-of-variables factor.
  double log_jacobian() const;

  bool operator==(const Observation& other) const;

 private:
  Observation() = default;

  ObservationKind kind_ = ObservationKind::euclidean;
  Eigen::VectorXd coords_;
  MarkedPoint point_{};
  Eigen::Vector3d z_ = Eigen::Vector3d::Zero();
  double log_jac_ = 0.0;
};

// Ordered, homogeneous collection of observations. Order matters: the
// recursion is order-dependent.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Observation> obs);

  void push_back(Observation obs);

  std::size_t size() const { return obs_.size(); }
  bool empty() const { return obs_.empty(); }
  const Observation& operator[](std::size_t i) const { return obs_[i]; }
  const std::vector<Observation>& observations() const { return obs_; }

  auto begin() const { return obs_.begin(); }
  auto end() const { return obs_.end(); }

 private:
  std::vector<Observation> obs_;
};

// Uniformly random reordering, deterministic given the seed. The observation
// multiset is unchanged.
Dataset permute_dataset(const Dataset& data, std::uint64_t seed);

}  // namespace prmix
