#include "joinsample/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include "joinsample/error.hpp"

namespace joinsample {

double chi_square_p_value(double statistic, size_t df) {
  if (df == 0) return 1.0;
  boost::math::chi_squared dist(static_cast<double>(df));
  return boost::math::cdf(boost::math::complement(dist, statistic));
}

ChiSquareResult chi_square_gof(const std::vector<uint64_t>& observed,
                               const std::vector<double>& expected) {
  if (observed.size() != expected.size()) {
    raise(ErrorCategory::Internal, "ShapeMismatch", "observed/expected length mismatch");
  }
  constexpr double kMinExpected = 5.0;
  double stat = 0.0;
  size_t categories = 0;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  double last_obs = 0.0, last_exp = 0.0;
  bool have_regular = false;
  for (size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0.0) {
      // Zero-probability category: any observation there is a distribution
      // violation the caller should have caught; fold into the pool.
      pooled_obs += static_cast<double>(observed[i]);
      continue;
    }
    if (expected[i] < kMinExpected) {
      pooled_obs += static_cast<double>(observed[i]);
      pooled_exp += expected[i];
      continue;
    }
    last_obs = static_cast<double>(observed[i]);
    last_exp = expected[i];
    have_regular = true;
    const double diff = last_obs - last_exp;
    stat += diff * diff / last_exp;
    ++categories;
  }
  if (pooled_exp > 0.0 || pooled_obs > 0.0) {
    if (pooled_exp >= kMinExpected || !have_regular) {
      const double diff = pooled_obs - pooled_exp;
      if (pooled_exp > 0.0) {
        stat += diff * diff / pooled_exp;
        ++categories;
      }
    } else {
      // Merge the undersized pool into the last regular category.
      const double diff = last_obs - last_exp;
      stat -= diff * diff / last_exp;
      const double obs = last_obs + pooled_obs;
      const double exp = last_exp + pooled_exp;
      const double d2 = obs - exp;
      stat += d2 * d2 / exp;
    }
  }
  ChiSquareResult r;
  r.statistic = stat;
  r.categories = categories;
  r.df = categories > 1 ? categories - 1 : 0;
  r.p_value = chi_square_p_value(stat, r.df);
  return r;
}

ChiSquareResult chi_square_homogeneity(const std::vector<uint64_t>& a,
                                       const std::vector<uint64_t>& b) {
  if (a.size() != b.size()) {
    raise(ErrorCategory::Internal, "ShapeMismatch", "sample length mismatch");
  }
  double total_a = 0.0, total_b = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    total_a += static_cast<double>(a[i]);
    total_b += static_cast<double>(b[i]);
  }
  const double total = total_a + total_b;
  if (!(total > 0.0)) {
    raise(ErrorCategory::Statistical, "EmptySample", "no observations");
  }
  double stat = 0.0;
  size_t used = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double col = static_cast<double>(a[i]) + static_cast<double>(b[i]);
    if (col == 0.0) continue;
    const double ea = col * total_a / total;
    const double eb = col * total_b / total;
    const double da = static_cast<double>(a[i]) - ea;
    const double db = static_cast<double>(b[i]) - eb;
    if (ea > 0.0) stat += da * da / ea;
    if (eb > 0.0) stat += db * db / eb;
    ++used;
  }
  ChiSquareResult r;
  r.statistic = stat;
  r.categories = used;
  r.df = used > 1 ? used - 1 : 0;
  r.p_value = chi_square_p_value(stat, r.df);
  return r;
}

}  // namespace joinsample
