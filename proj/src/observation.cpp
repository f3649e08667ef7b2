#include "prmix/observation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

#include "prmix/rng.hpp"

namespace prmix {

namespace {

double logit(double q) { return std::log(q / (1.0 - q)); }

}  // namespace

Observation Observation::euclidean(Eigen::VectorXd x) {
  if (x.size() < 1) throw std::invalid_argument("Observation: empty coordinate vector");
  Observation o;
  o.kind_ = ObservationKind::euclidean;
  o.coords_ = std::move(x);
  return o;
}

Observation Observation::sphere(const Eigen::Vector3d& x) {
  if (std::abs(x.norm() - 1.0) > 1e-12)
    throw std::invalid_argument("Observation: sphere point must have unit norm");
  Observation o;
  o.kind_ = ObservationKind::sphere;
  o.coords_ = x;
  return o;
}

Observation Observation::marked(const MarkedPoint& p) {
  if (!(p.s1 > 0.0 && p.s1 < kMarkedExtent) || !(p.s2 > 0.0 && p.s2 < kMarkedExtent))
    throw std::invalid_argument("Observation: location outside (0, 200)^2");
  if (!(p.mark > kMarkOffset))
    throw std::invalid_argument("Observation: mark must exceed 2");

  Observation o;
  o.kind_ = ObservationKind::marked;
  o.coords_ = Eigen::Vector3d(p.s1, p.s2, p.mark);
  o.point_ = p;

  const double q1 = p.s1 / kMarkedExtent;
  const double q2 = p.s2 / kMarkedExtent;
  o.z_ = Eigen::Vector3d(logit(q1), logit(q2), std::log(p.mark - kMarkOffset));
  o.log_jac_ = std::log(p.mark - kMarkOffset) +
               std::log(kMarkedExtent * q1 * (1.0 - q1)) +
               std::log(kMarkedExtent * q2 * (1.0 - q2));
  return o;
}

const MarkedPoint& Observation::marked_point() const {
  if (kind_ != ObservationKind::marked)
    throw std::logic_error("Observation: not a marked point");
  return point_;
}

const Eigen::Vector3d& Observation::transformed() const {
  if (kind_ != ObservationKind::marked)
    throw std::logic_error("Observation: not a marked point");
  return z_;
}

double Observation::log_jacobian() const {
  if (kind_ != ObservationKind::marked)
    throw std::logic_error("Observation: not a marked point");
  return log_jac_;
}

bool Observation::operator==(const Observation& other) const {
  return kind_ == other.kind_ && coords_ == other.coords_;
}

Dataset::Dataset(std::vector<Observation> obs) {
  for (auto& o : obs) push_back(std::move(o));
}

void Dataset::push_back(Observation obs) {
  if (!obs_.empty()) {
    if (obs.kind() != obs_.front().kind() || obs.dim() != obs_.front().dim())
      throw std::invalid_argument("Dataset: observations must share one variant and dimension");
  }
  obs_.push_back(std::move(obs));
}

Dataset permute_dataset(const Dataset& data, std::uint64_t seed) {
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  // Fisher-Yates on indices with an unbiased bounded draw.
  RngStream rng(seed, /*stream_id=*/0x7065726d75746500ULL);
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::uint64_t bound = i;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t r;
    do {
      r = rng.next_u64();
    } while (r >= limit);
    std::swap(idx[i - 1], idx[r % bound]);
  }

  std::vector<Observation> out;
  out.reserve(data.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return Dataset(std::move(out));
}

}  // namespace prmix
