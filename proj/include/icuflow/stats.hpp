#pragma once

#include <vector>

namespace icuflow {

double mean(const std::vector<double>& values);

// n-1 denominator; requires at least two values.
double sample_sd(const std::vector<double>& values);

double ln_gamma(double x);

// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
// Clamped: x <= 0 -> 0, x >= 1 -> 1. Accurate to ~1e-12 for the a, b ranges
// used here (t distributions up to df 10,000).
double incomplete_beta(double a, double b, double x);

// Two-sided p-value for a t statistic: I_x(df/2, 1/2) with x = df/(df + t^2).
double student_t_two_sided_p(double t, double df);

// Critical value t* with two-sided tail mass 1 - level, found by bisection.
double student_t_critical(double level, double df);

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  double level = 0.95;
};

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  double mean_difference = 0.0;
  double standard_error = 0.0;
  ConfidenceInterval ci;
};

// Paired t-test on differences a[i] - b[i]. Throws PairingError on length
// mismatch or fewer than two pairs, DegenerateVarianceError when every
// difference is identical.
TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b,
                          double level = 0.95);

}  // namespace icuflow
