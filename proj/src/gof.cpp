#include "joinsample/gof.hpp"

#include <algorithm>
#include <cmath>

#include "joinsample/error.hpp"

namespace joinsample {

ReferenceCdf::ReferenceCdf(const std::vector<double>& weights) {
  if (weights.empty()) {
    raise(ErrorCategory::Spec, "EmptyDistribution", "reference CDF needs at least one event");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      raise(ErrorCategory::Spec, "NegativeWeight", "event weights must be finite and nonnegative");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    raise(ErrorCategory::Spec, "ZeroTotalWeight", "event weights sum to zero");
  }
  p_.reserve(weights.size());
  prefix_.reserve(weights.size() + 1);
  prefix_.push_back(0.0);
  double run = 0.0;
  for (double w : weights) {
    p_.push_back(w / total);
    run += w / total;
    prefix_.push_back(run);
  }
  prefix_.back() = 1.0;
}

double ReferenceCdf::cdf(double x) const {
  const size_t n = p_.size();
  if (x <= 0.0) return 0.0;
  if (x >= static_cast<double>(n)) return 1.0;
  // x in (k, k+1] belongs to event k (0-based).
  size_t k = static_cast<size_t>(std::ceil(x)) - 1;
  if (k >= n) k = n - 1;
  return prefix_[k] + p_[k] * (x - static_cast<double>(k));
}

std::vector<double> continuous_convert(const std::vector<size_t>& events,
                                       size_t event_count, CounterRng& rng) {
  std::vector<double> out;
  out.reserve(events.size());
  for (size_t e : events) {
    if (e >= event_count) {
      raise(ErrorCategory::Internal, "IndexOutOfRange",
            "event index " + std::to_string(e) + " out of range");
    }
    out.push_back(static_cast<double>(e) + rng.next_unit());
  }
  return out;
}

double ks_statistic(std::vector<double> values, const ReferenceCdf& cdf) {
  if (values.empty()) {
    raise(ErrorCategory::Statistical, "EmptySample", "KS statistic of an empty sample");
  }
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  double d = 0.0;
  for (size_t i = 0; i < values.size(); ++i) {
    const double f = cdf.cdf(values[i]);
    d = std::max(d, (static_cast<double>(i) + 1.0) / n - f);
    d = std::max(d, f - static_cast<double>(i) / n);
  }
  return d;
}

double ks_critical(double alpha, size_t n) {
  return std::sqrt(std::log(2.0 / alpha) / 2.0) / std::sqrt(static_cast<double>(n));
}

KsReport make_ks_report(double d, uint64_t n) {
  KsReport r;
  r.d = d;
  r.n = n;
  r.critical_010 = ks_critical(0.10, n);
  r.critical_005 = ks_critical(0.05, n);
  r.critical_001 = ks_critical(0.01, n);
  r.pass_010 = d < r.critical_010;
  r.pass_005 = d < r.critical_005;
  r.pass_001 = d < r.critical_001;
  return r;
}

}  // namespace joinsample
