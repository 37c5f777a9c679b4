#pragma once

#include <cstddef>
#include <optional>

namespace recal {

// The uniform forecast grid {i/n : i = 0..n}. Points are computed on demand
// and never stored pre-rounded.
class ProbabilityGrid {
 public:
  explicit ProbabilityGrid(std::size_t n);

  // Also checks that the resolution 1/n is strictly below the accuracy target.
  static ProbabilityGrid for_accuracy(std::size_t n, double epsilon);

  std::size_t resolution() const noexcept { return n_; }
  std::size_t size() const noexcept { return n_ + 1; }
  double spacing() const noexcept { return 1.0 / static_cast<double>(n_); }

  double point(std::size_t i) const;

  // Index of the grid point closest to p; ties go to the lower index.
  std::size_t nearest(double p) const;

  bool operator==(const ProbabilityGrid&) const = default;

 private:
  std::size_t n_;
};

}  // namespace recal
