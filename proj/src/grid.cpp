#include "recal/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recal/errors.hpp"

namespace recal {

ProbabilityGrid::ProbabilityGrid(std::size_t n) : n_(n) {
  if (n == 0) throw DomainError("grid resolution n must be at least 1");
}

ProbabilityGrid ProbabilityGrid::for_accuracy(std::size_t n, double epsilon) {
  ProbabilityGrid grid(n);
  if (!(grid.spacing() < epsilon)) {
    throw DomainError("grid spacing 1/" + std::to_string(n) +
                      " is not below the accuracy target " +
                      std::to_string(epsilon));
  }
  return grid;
}

double ProbabilityGrid::point(std::size_t i) const {
  if (i > n_) throw DomainError("grid index " + std::to_string(i) + " out of range");
  return static_cast<double>(i) / static_cast<double>(n_);
}

std::size_t ProbabilityGrid::nearest(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw DomainError("probability " + std::to_string(p) + " outside [0,1]");
  }
  double scaled = std::ceil(p * static_cast<double>(n_) - 0.5);
  return std::min(static_cast<std::size_t>(std::max(scaled, 0.0)), n_);
}

}  // namespace recal
