#include "icuflow/stats.hpp"

#include <cmath>
#include <cstddef>

#include "icuflow/errors.hpp"

namespace icuflow {
namespace {

// Lentz's continued fraction for the incomplete beta function.
double betacf(double a, double b, double x) {
  constexpr int kMaxIterations = 500;
  constexpr double kEpsilon = 1e-14;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEpsilon) return h;
  }
  throw Error("incomplete beta continued fraction did not converge");
}

}  // namespace

double mean(const std::vector<double>& values) {
  if (values.empty()) throw Error("mean of an empty sample");
  double total = 0.0;
  for (const double v : values) total += v;
  return total / static_cast<double>(values.size());
}

double sample_sd(const std::vector<double>& values) {
  if (values.size() < 2) throw Error("sample standard deviation needs at least two values");
  const double m = mean(values);
  double total = 0.0;
  for (const double v : values) total += (v - m) * (v - m);
  return std::sqrt(total / static_cast<double>(values.size() - 1));
}

double ln_gamma(double x) {
  // Lanczos approximation, g = 7, 9 coefficients.
  static const double coefficients[] = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7,
  };
  if (x < 0.5) {
    // Reflection formula keeps the approximation in its accurate range.
    return std::log(M_PI / std::sin(M_PI * x)) - ln_gamma(1.0 - x);
  }
  x -= 1.0;
  double sum = coefficients[0];
  for (int i = 1; i < 9; ++i) sum += coefficients[i] / (x + i);
  const double t = x + 7.5;
  return 0.5 * std::log(2.0 * M_PI) + (x + 0.5) * std::log(t) - t + std::log(sum);
}

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw Error("incomplete beta requires positive parameters");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  // Symmetry identity: I_{1/2}(a, a) = 1/2 exactly.
  if (x == 0.5 && a == b) return 0.5;
  const double ln_front =
      ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * betacf(a, b, x) / a;
  }
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  if (df <= 0.0) throw Error("degrees of freedom must be positive");
  if (t == 0.0) return 1.0;
  const double x = df / (df + t * t);
  return incomplete_beta(df / 2.0, 0.5, x);
}

double student_t_critical(double level, double df) {
  if (level <= 0.0 || level >= 1.0) throw Error("confidence level must lie in (0, 1)");
  if (df <= 0.0) throw Error("degrees of freedom must be positive");
  const double alpha = 1.0 - level;
  double lo = 0.0;
  double hi = 1.0;
  while (student_t_two_sided_p(hi, df) > alpha) {
    hi *= 2.0;
    if (hi > 1e12) throw Error("t critical value search diverged");
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (student_t_two_sided_p(mid, df) > alpha) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b, double level) {
  if (a.size() != b.size()) {
    throw PairingError("paired samples differ in length: " + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()));
  }
  if (a.size() < 2) throw PairingError("paired t-test needs at least two pairs");

  std::vector<double> differences(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) differences[i] = a[i] - b[i];

  const double mean_diff = mean(differences);
  const double sd_diff = sample_sd(differences);
  if (sd_diff == 0.0) throw DegenerateVarianceError("identical paired samples");

  const double n = static_cast<double>(differences.size());
  TTestResult result;
  result.df = n - 1.0;
  result.mean_difference = mean_diff;
  result.standard_error = sd_diff / std::sqrt(n);
  result.t = mean_diff / result.standard_error;
  result.p_value = student_t_two_sided_p(result.t, result.df);
  const double critical = student_t_critical(level, result.df);
  result.ci.level = level;
  result.ci.low = mean_diff - critical * result.standard_error;
  result.ci.high = mean_diff + critical * result.standard_error;
  return result;
}

}  // namespace icuflow
