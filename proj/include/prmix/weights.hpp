#pragma once

#include <cstdint>

namespace prmix {

// Step-size sequence w_i = (i+1)^(-gamma) for the recursion. The exponent is
// restricted to (0.5, 1] so the weights are square-summable but not summable.
class WeightSchedule {
 public:
  explicit WeightSchedule(double gamma = 1.0);

  // w_i for step i >= 1; strictly decreasing in i, always in (0, 1).
  double weight_at(std::int64_t i) const;

  double gamma() const { return gamma_; }

 private:
  double gamma_;
};

}  // namespace prmix
