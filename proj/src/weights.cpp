#include "prmix/weights.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace prmix {

WeightSchedule::WeightSchedule(double gamma) : gamma_(gamma) {
  if (!(gamma > 0.5) || !(gamma <= 1.0))
    throw std::invalid_argument("WeightSchedule: gamma must lie in (0.5, 1], got " +
                                std::to_string(gamma));
}

double WeightSchedule::weight_at(std::int64_t i) const {
  if (i < 1) throw std::invalid_argument("weight_at: step index must be >= 1");
  return std::pow(static_cast<double>(i + 1), -gamma_);
}

}  // namespace prmix
