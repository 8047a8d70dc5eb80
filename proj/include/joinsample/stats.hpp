#pragma once

#include <cstdint>
#include <vector>

namespace joinsample {

struct ChiSquareResult {
  double statistic = 0.0;
  double p_value = 1.0;
  size_t df = 0;
  size_t categories = 0;  // after pooling
};

double chi_square_p_value(double statistic, size_t df);

// Pearson goodness-of-fit against expected counts; categories with expected
// count below 5 are pooled.
ChiSquareResult chi_square_gof(const std::vector<uint64_t>& observed,
                               const std::vector<double>& expected);

// Two-sample homogeneity over shared categories (2 x k contingency table).
ChiSquareResult chi_square_homogeneity(const std::vector<uint64_t>& a,
                                       const std::vector<uint64_t>& b);

}  // namespace joinsample
