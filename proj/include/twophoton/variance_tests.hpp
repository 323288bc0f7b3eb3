#pragma once

#include <string>
#include <vector>

#include "twophoton/types.hpp"

namespace twophoton {

enum class Center { mean, median };

inline const char* center_name(Center c) {
  return c == Center::mean ? "mean" : "median";
}

// k groups of scalar samples for variance-homogeneity testing.
struct GroupedSamples {
  std::vector<std::vector<double>> groups;

  std::size_t group_count() const { return groups.size(); }
  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& g : groups)
      n += g.size();
    return n;
  }
};

struct LeveneReport {
  double W = 0.0;
  Index df1 = 0; // k - 1
  Index df2 = 0; // N - k
  double p_value = 1.0;
  Center center_mode = Center::mean;
  std::vector<double> group_z_means;
  double grand_z_mean = 0.0;
};

// Levene's test for equality of variances: absolute deviations from each
// group's center (mean, or median for the Brown-Forsythe variant) feed a
// one-way ANOVA whose statistic W is F(k-1, N-k) under the null. When every
// deviation is identical, W = 0 and p = 1.
LeveneReport levene(const GroupedSamples& samples,
                    Center center = Center::mean);

// P(F(d1, d2) <= x) through the regularized incomplete beta function.
double f_cdf(double x, Index d1, Index d2);

// I_x(a, b), continued-fraction evaluation with the symmetry switch at
// x > (a+1)/(a+b+2). Absolute error <= 1e-10.
double regularized_incomplete_beta(double x, double a, double b);

// JSON object {W, df1, df2, p_value, center}.
std::string to_json_string(const LeveneReport& report);

} // namespace twophoton
