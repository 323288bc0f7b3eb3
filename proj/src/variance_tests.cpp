#include "twophoton/variance_tests.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

namespace twophoton {

namespace {

// Continued fraction for I_x(a,b), modified Lentz iteration.
double beta_continued_fraction(double x, double a, double b) {
  constexpr double tiny = 1e-300;
  constexpr int max_terms = 10000;

  const auto numer = [&](int n) -> double {
    if (n % 2 == 0) {
      const double m = n / 2;
      return m * (b - m) * x / ((a + 2.0 * m - 1.0) * (a + 2.0 * m));
    }
    const double m = (n - 1) / 2;
    return -(a + m) * (a + b + m) * x /
           ((a + 2.0 * m) * (a + 2.0 * m + 1.0));
  };

  double f = 1.0;
  double c = 1.0;
  double d = 0.0;
  for (int n = 1; n < max_terms; ++n) {
    const double num = numer(n);
    d = 1.0 + num * d;
    if (d == 0.0)
      d = tiny;
    c = 1.0 + num / c;
    if (c == 0.0)
      c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::fabs(delta - 1.0) < 1e-15)
      break;
  }
  return f;
}

double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

double median_of(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

} // namespace

double regularized_incomplete_beta(double x, double a, double b) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::invalid_argument("regularized_incomplete_beta: x outside [0,1]");
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("regularized_incomplete_beta: a, b must be > 0");
  if (x == 0.0)
    return 0.0;
  if (x == 1.0)
    return 1.0;
  const double front_log = a * std::log(x) + b * std::log1p(-x) - log_beta(a, b);
  // The continued fraction evaluates the denominator 1 + c1/(1 + c2/(...)).
  if (x <= (a + 1.0) / (a + b + 2.0))
    return std::exp(front_log) / (a * beta_continued_fraction(x, a, b));
  return 1.0 -
         std::exp(front_log) / (b * beta_continued_fraction(1.0 - x, b, a));
}

double f_cdf(double x, Index d1, Index d2) {
  if (d1 < 1 || d2 < 1)
    throw std::invalid_argument("f_cdf: degrees of freedom must be >= 1");
  if (!(x >= 0.0))
    throw std::invalid_argument("f_cdf: x must be >= 0");
  if (x == 0.0)
    return 0.0;
  if (std::isinf(x))
    return 1.0;
  const double a = static_cast<double>(d1);
  const double b = static_cast<double>(d2);
  return regularized_incomplete_beta(a * x / (a * x + b), a / 2.0, b / 2.0);
}

LeveneReport levene(const GroupedSamples& samples, Center center) {
  const std::size_t k = samples.group_count();
  if (k < 2)
    throw std::invalid_argument("levene: need at least 2 groups");
  for (const auto& g : samples.groups) {
    if (g.size() < 2)
      throw std::invalid_argument("levene: every group needs >= 2 samples");
    for (double v : g)
      if (!std::isfinite(v))
        throw std::invalid_argument("levene: samples must be finite");
  }
  const std::size_t n_total = samples.total_count();

  // Z_ij = |Y_ij - center(Y_i.)|
  std::vector<std::vector<double>> z(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& g = samples.groups[i];
    double c;
    if (center == Center::mean) {
      c = 0.0;
      for (double v : g)
        c += v;
      c /= static_cast<double>(g.size());
    } else {
      c = median_of(g);
    }
    z[i].reserve(g.size());
    for (double v : g)
      z[i].push_back(std::fabs(v - c));
  }

  LeveneReport report;
  report.center_mode = center;
  report.df1 = static_cast<Index>(k - 1);
  report.df2 = static_cast<Index>(n_total - k);

  report.group_z_means.resize(k);
  double grand = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double m = 0.0;
    for (double v : z[i])
      m += v;
    grand += m;
    report.group_z_means[i] = m / static_cast<double>(z[i].size());
  }
  report.grand_z_mean = grand / static_cast<double>(n_total);

  double between = 0.0;
  double within = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dz = report.group_z_means[i] - report.grand_z_mean;
    between += static_cast<double>(z[i].size()) * dz * dz;
    for (double v : z[i]) {
      const double d = v - report.group_z_means[i];
      within += d * d;
    }
  }

  if (within == 0.0) {
    report.W = between == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  } else {
    report.W = (static_cast<double>(report.df2) /
                static_cast<double>(report.df1)) *
               between / within;
  }
  report.p_value = 1.0 - f_cdf(report.W, report.df1, report.df2);
  return report;
}

std::string to_json_string(const LeveneReport& report) {
  nlohmann::json j{{"W", report.W},
                   {"df1", report.df1},
                   {"df2", report.df2},
                   {"p_value", report.p_value},
                   {"center", center_name(report.center_mode)}};
  return j.dump(2);
}

} // namespace twophoton
