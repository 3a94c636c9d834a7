#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace spmine {

// Distribution functions used by the tests below.
namespace dist {

// Regularized lower / upper incomplete gamma P(a, x), Q(a, x).
double gamma_p(double a, double x);
double gamma_q(double a, double x);
// Regularized incomplete beta I_x(a, b).
double beta_inc(double a, double b, double x);

double chisq_sf(double x, double df);
// P(|T| >= |t|) for Student's t with df degrees of freedom.
double t_sf_two_sided(double t, double df);
double t_cdf(double t, double df);
// P(F >= f) for F(d1, d2).
double f_sf(double f, double d1, double d2);

}  // namespace dist

struct ProportionSample {
    std::string label;
    std::uint64_t successes = 0;
    std::uint64_t total = 0;
};

struct TestResult {
    std::string method;
    double statistic = 0.0;
    double df = 0.0;
    std::optional<double> df2;  // denominator df for F-based tests
    double p_value = 1.0;
    std::optional<double> estimate;
};

// k-sample test for equal proportions: chi-squared over the k x 2 table, df = k - 1.
// `continuity` applies the two-sample Yates correction and only matters for k = 2.
// Throws DataError("DegenerateSample") for a zero total or successes > total, and
// ("AllZeroOrAllOne") when the pooled proportion is 0 or 1.
TestResult chisq_proportions(const std::vector<ProportionSample>& samples, bool continuity = false);

enum class PAdjust { bonferroni, none };

struct PairwiseResult {
    std::string a;
    std::string b;
    TestResult test;
    double p_adjusted = 1.0;
};

// Every unordered pair in input order (0-1, 0-2, ..., 1-2, ...). The correction is
// min(1/2, |p1 - p2| / (1/n1 + 1/n2)), as in R's prop.test.
std::vector<PairwiseResult> pairwise_prop_tests(const std::vector<ProportionSample>& samples,
                                                PAdjust adjust = PAdjust::bonferroni, bool continuity = true);

// Counts of 1..5 star ratings.
using RatingHistogram = std::array<std::uint64_t, 5>;

// Correlation between group membership (group1 = 1) and rating; estimate = r_pb,
// statistic = t, df = n - 2. Throws DataError("DegenerateSample") for an empty group
// and ("ZeroVariance") when all ratings are equal.
TestResult point_biserial(const RatingHistogram& group0, const RatingHistogram& group1);

enum class LeveneCenter { mean, median };

// W over absolute deviations from each group's center; F(k - 1, N - k).
// Throws DataError("TooFewObservations"). If every deviation equals its group's
// mean deviation W is +inf (p = 0) unless the groups also agree (W = 0, p = 1).
TestResult levene(const std::vector<std::vector<double>>& groups, LeveneCenter center = LeveneCenter::mean);

// Two-sided Welch test, estimate = mean(a) - mean(b). Throws DataError("TooFewObservations")
// or ("ZeroVariance") when both groups are constant.
TestResult welch_t(const std::vector<double>& a, const std::vector<double>& b);

// R-style p-value text with `digits` significant digits; values below machine
// epsilon print as "<2.2e-16" (digits >= 2) or "<2e-16" (digits 1).
std::string format_pvalue(double p, int digits = 2);

// "***" p < .001, "**" < .01, "*" < .05, "." < .1, else "".
std::string significance_stars(double p);

}  // namespace spmine
