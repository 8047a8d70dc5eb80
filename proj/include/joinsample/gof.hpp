#pragma once

#include <cstdint>
#include <vector>

#include "joinsample/rng.hpp"

namespace joinsample {

// Piecewise-linear cumulative distribution over N discrete events obtained by
// smearing each event i across the unit interval (i-1, i]. Integer arguments
// recover the discrete CDF.
class ReferenceCdf {
 public:
  explicit ReferenceCdf(const std::vector<double>& weights);

  double cdf(double x) const;
  double probability(size_t event) const { return p_[event]; }
  size_t size() const { return p_.size(); }
  const std::vector<double>& probabilities() const { return p_; }

 private:
  std::vector<double> p_;
  std::vector<double> prefix_;  // prefix_[i] = Σ p_0..p_{i-1}
};

// Adds an independent U(0,1) offset to each 0-based event index; the result
// is distributed with the continuous CDF above.
std::vector<double> continuous_convert(const std::vector<size_t>& events,
                                       size_t event_count, CounterRng& rng);

// D = sup_x |empirical CDF - F(x)|, evaluated at both step sides.
double ks_statistic(std::vector<double> values, const ReferenceCdf& cdf);

// Asymptotic critical value sqrt(ln(2/alpha)/2) / sqrt(n).
double ks_critical(double alpha, size_t n);

struct KsReport {
  double d = 0.0;
  uint64_t n = 0;
  double critical_010 = 0.0;
  double critical_005 = 0.0;
  double critical_001 = 0.0;
  bool pass_010 = false;
  bool pass_005 = false;
  bool pass_001 = false;
};

KsReport make_ks_report(double d, uint64_t n);

}  // namespace joinsample
