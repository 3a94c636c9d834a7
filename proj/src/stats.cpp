#include "spmine/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "spmine/error.hpp"

namespace spmine {

namespace {

void check_samples(const std::vector<ProportionSample>& samples) {
    if (samples.size() < 2) throw DataError("DegenerateSample", "need at least two samples");
    for (const auto& s : samples) {
        if (s.total == 0) throw DataError("DegenerateSample", "sample '" + s.label + "' has total 0");
        if (s.successes > s.total) {
            throw DataError("DegenerateSample", "sample '" + s.label + "' has more successes than total");
        }
    }
}

double clamp_p(double p) { return std::isnan(p) ? p : std::clamp(p, 0.0, 1.0); }

}  // namespace

TestResult chisq_proportions(const std::vector<ProportionSample>& samples, bool continuity) {
    check_samples(samples);
    double x_sum = 0.0;
    double n_sum = 0.0;
    for (const auto& s : samples) {
        x_sum += static_cast<double>(s.successes);
        n_sum += static_cast<double>(s.total);
    }
    const double pooled = x_sum / n_sum;
    if (pooled == 0.0 || pooled == 1.0) {
        throw DataError("AllZeroOrAllOne", "pooled proportion is " + fmt::format("{}", pooled));
    }

    double yates = 0.0;
    if (continuity && samples.size() == 2) {
        const auto& a = samples[0];
        const auto& b = samples[1];
        const double na = static_cast<double>(a.total);
        const double nb = static_cast<double>(b.total);
        const double delta = static_cast<double>(a.successes) / na - static_cast<double>(b.successes) / nb;
        yates = std::min(0.5, std::fabs(delta) / (1.0 / na + 1.0 / nb));
    }

    double chi2 = 0.0;
    for (const auto& s : samples) {
        const double n = static_cast<double>(s.total);
        const double observed[2] = {static_cast<double>(s.successes), n - static_cast<double>(s.successes)};
        const double expected[2] = {n * pooled, n * (1.0 - pooled)};
        for (int c = 0; c < 2; ++c) {
            const double dev = std::fabs(observed[c] - expected[c]) - yates;
            chi2 += dev * dev / expected[c];
        }
    }
    TestResult r;
    r.method = samples.size() == 2 && continuity
                   ? "2-sample test for equality of proportions with continuity correction"
                   : fmt::format("{}-sample test for equality of proportions without continuity correction",
                                 samples.size());
    r.statistic = chi2;
    r.df = static_cast<double>(samples.size() - 1);
    r.p_value = clamp_p(dist::chisq_sf(chi2, r.df));
    return r;
}

std::vector<PairwiseResult> pairwise_prop_tests(const std::vector<ProportionSample>& samples, PAdjust adjust,
                                                bool continuity) {
    check_samples(samples);
    std::vector<PairwiseResult> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        for (std::size_t j = i + 1; j < samples.size(); ++j) {
            PairwiseResult pr;
            pr.a = samples[i].label;
            pr.b = samples[j].label;
            pr.test = chisq_proportions({samples[i], samples[j]}, continuity);
            out.push_back(std::move(pr));
        }
    }
    const auto m = static_cast<double>(out.size());
    for (auto& pr : out) {
        pr.p_adjusted = adjust == PAdjust::bonferroni ? std::min(1.0, pr.test.p_value * m) : pr.test.p_value;
    }
    return out;
}

TestResult point_biserial(const RatingHistogram& group0, const RatingHistogram& group1) {
    double n0 = 0.0;
    double n1 = 0.0;
    double sum0 = 0.0;
    double sum1 = 0.0;
    for (int s = 0; s < 5; ++s) {
        const double star = s + 1;
        n0 += static_cast<double>(group0[s]);
        n1 += static_cast<double>(group1[s]);
        sum0 += star * static_cast<double>(group0[s]);
        sum1 += star * static_cast<double>(group1[s]);
    }
    if (n0 == 0.0 || n1 == 0.0) throw DataError("DegenerateSample", "point-biserial needs two non-empty groups");
    const double n = n0 + n1;
    const double mean = (sum0 + sum1) / n;
    double ss = 0.0;
    for (int s = 0; s < 5; ++s) {
        const double dev = (s + 1) - mean;
        ss += dev * dev * static_cast<double>(group0[s] + group1[s]);
    }
    const double sigma = std::sqrt(ss / n);  // population standard deviation
    if (sigma == 0.0) throw DataError("ZeroVariance", "all ratings are equal");

    const double r = (sum1 / n1 - sum0 / n0) * std::sqrt(n0 * n1 / (n * n)) / sigma;
    const double df = n - 2.0;
    TestResult out;
    out.method = "Point-biserial correlation";
    out.estimate = r;
    out.df = df;
    if (std::fabs(r) >= 1.0) {
        out.statistic = std::copysign(std::numeric_limits<double>::infinity(), r);
        out.p_value = 0.0;
    } else {
        out.statistic = r * std::sqrt(df) / std::sqrt(1.0 - r * r);
        out.p_value = df > 0.0 ? clamp_p(dist::t_sf_two_sided(out.statistic, df)) : 1.0;
    }
    return out;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_variance(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss / static_cast<double>(v.size() - 1);
}

}  // namespace

TestResult levene(const std::vector<std::vector<double>>& groups, LeveneCenter center) {
    if (groups.size() < 2) throw DataError("TooFewObservations", "Levene's test needs at least two groups");
    for (const auto& g : groups) {
        if (g.size() < 2) throw DataError("TooFewObservations", "every group needs at least two observations");
    }
    const double k = static_cast<double>(groups.size());
    double big_n = 0.0;
    std::vector<std::vector<double>> z(groups.size());
    std::vector<double> z_mean(groups.size());
    double z_total = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        const double c = center == LeveneCenter::mean ? mean_of(groups[i]) : median_of(groups[i]);
        for (double x : groups[i]) z[i].push_back(std::fabs(x - c));
        z_mean[i] = mean_of(z[i]);
        z_total += std::accumulate(z[i].begin(), z[i].end(), 0.0);
        big_n += static_cast<double>(groups[i].size());
    }
    const double z_grand = z_total / big_n;
    double between = 0.0;
    double within = 0.0;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        between += static_cast<double>(z[i].size()) * (z_mean[i] - z_grand) * (z_mean[i] - z_grand);
        for (double v : z[i]) within += (v - z_mean[i]) * (v - z_mean[i]);
    }

    TestResult r;
    r.method = center == LeveneCenter::mean ? "Levene's test (mean)" : "Levene's test (median, Brown-Forsythe)";
    r.df = k - 1.0;
    r.df2 = big_n - k;
    const double rel = 1e-12 * std::max(1.0, z_grand * z_grand * big_n);
    if (within <= rel) {
        const bool differ = between > rel;
        r.statistic = differ ? std::numeric_limits<double>::infinity() : 0.0;
        r.p_value = differ ? 0.0 : 1.0;
        return r;
    }
    r.statistic = (big_n - k) / (k - 1.0) * between / within;
    r.p_value = clamp_p(dist::f_sf(r.statistic, r.df, *r.df2));
    return r;
}

TestResult welch_t(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw DataError("TooFewObservations", "Welch's t needs two observations per group");
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    const double va = sample_variance(a) / na;
    const double vb = sample_variance(b) / nb;
    if (va + vb == 0.0) throw DataError("ZeroVariance", "both groups are constant");
    const double diff = mean_of(a) - mean_of(b);
    TestResult r;
    r.method = "Welch Two Sample t-test";
    r.statistic = diff / std::sqrt(va + vb);
    r.df = (va + vb) * (va + vb) / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    r.p_value = clamp_p(dist::t_sf_two_sided(r.statistic, r.df));
    r.estimate = diff;
    return r;
}

namespace {

// Digits needed (at most `digits`) to print |x| to `digits` significant digits
// without trailing zeros, plus the decimal exponent of the rounded value.
std::pair<int, int> significant_layout(double x, int digits) {
    const auto sci = fmt::format("{:.{}e}", x, digits - 1);
    const auto e_pos = sci.find('e');
    std::string mantissa = sci.substr(0, e_pos);
    const int exponent = std::stoi(sci.substr(e_pos + 1));
    mantissa.erase(std::remove(mantissa.begin(), mantissa.end(), '.'), mantissa.end());
    while (mantissa.size() > 1 && mantissa.back() == '0') mantissa.pop_back();
    return {static_cast<int>(mantissa.size()), exponent};
}

}  // namespace

std::string format_pvalue(double p, int digits) {
    digits = std::max(1, digits);
    if (std::isnan(p)) return "NA";
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (p < eps) return digits >= 2 ? "<2.2e-16" : "<2e-16";
    const auto [sig, exponent] = significant_layout(p, digits);
    const auto scientific = fmt::format("{:.{}e}", p, sig - 1);
    const int decimals = std::max(0, sig - 1 - exponent);
    const auto fixed = fmt::format("{:.{}f}", p, decimals);
    // Like R: prefer fixed notation unless it is wider than scientific.
    return fixed.size() <= scientific.size() ? fixed : scientific;
}

std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    if (p < 0.1) return ".";
    return "";
}

}  // namespace spmine
