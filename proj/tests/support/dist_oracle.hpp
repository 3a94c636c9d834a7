#pragma once

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <vector>

#include "spmine/stats.hpp"

namespace spmine::testing {

using big = boost::multiprecision::cpp_bin_float_50;

// Upper chi-squared tail Q(df/2, x/2) in 50-digit arithmetic.
inline double chisq_sf_oracle(double x, double df) {
    return static_cast<double>(boost::math::gamma_q(big(df) / 2, big(x) / 2));
}

// Two-sided Student t tail I_{df/(df+t^2)}(df/2, 1/2) in 50-digit arithmetic.
inline double t_two_sided_oracle(double t, double df) {
    const big d(df);
    const big tt(t);
    return static_cast<double>(boost::math::ibeta(d / 2, big(0.5), d / (d + tt * tt)));
}

struct DistGridStats {
    std::size_t points = 0;
    std::size_t failures = 0;
    double worst_abs = 0.0;
    double worst_rel = 0.0;  // over points with oracle value above 1e-300
};

inline const std::vector<double>& chisq_grid_x() {
    static const std::vector<double> v = {1e-6, 0.01, 0.1, 0.5, 1, 2, 3.841, 5, 7.5, 10, 15.95, 20, 30, 50, 100, 250, 500, 1000, 2498.9};
    return v;
}
inline const std::vector<double>& chisq_grid_df() {
    static const std::vector<double> v = {0.5, 1, 2, 3, 4, 5, 7, 10, 20, 30, 50, 100, 250, 1000};
    return v;
}
inline const std::vector<double>& t_grid_t() {
    static const std::vector<double> v = {0, 0.05, 0.5, 1, 1.5, 1.96, 2.5, 3.674, 5, 10, 20, 40.168};
    return v;
}
inline const std::vector<double>& t_grid_df() {
    static const std::vector<double> v = {1, 2, 3, 4, 5, 10, 30, 100, 1000, 23892, 91147};
    return v;
}

// A point passes if it is within 1e-10 absolutely and, where the oracle is not
// vanishingly small, within 1e-10 relatively.
inline DistGridStats distribution_grid() {
    DistGridStats st;
    auto check = [&](double lib, double ref) {
        ++st.points;
        const double abs_err = std::abs(lib - ref);
        const double rel_err = ref > 1e-300 ? abs_err / ref : 0.0;
        st.worst_abs = std::max(st.worst_abs, abs_err);
        st.worst_rel = std::max(st.worst_rel, rel_err);
        if (!(abs_err <= 1e-10 && rel_err <= 1e-10)) ++st.failures;
    };
    for (double df : chisq_grid_df()) {
        for (double x : chisq_grid_x()) check(dist::chisq_sf(x, df), chisq_sf_oracle(x, df));
    }
    for (double df : t_grid_df()) {
        for (double t : t_grid_t()) {
            check(dist::t_sf_two_sided(t, df), t_two_sided_oracle(t, df));
            check(dist::t_sf_two_sided(-t, df), t_two_sided_oracle(t, df));
        }
    }
    return st;
}

}  // namespace spmine::testing
