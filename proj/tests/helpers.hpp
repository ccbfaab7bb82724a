#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/sequence.hpp"

namespace testutil {

// Central finite differences of a scalar function of a parameter vector.
template <typename F>
std::vector<double> fd_gradient(F&& f, std::vector<double> x, double eps = 1e-5) {
    std::vector<double> g(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + eps;
        const double hi = f(x);
        x[i] = saved - eps;
        const double lo = f(x);
        x[i] = saved;
        g[i] = (hi - lo) / (2.0 * eps);
    }
    return g;
}

// Relative error with an absolute floor of 1 so near-zero coordinates are
// compared absolutely.
inline double max_rel_err(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({1.0, std::abs(a[i]), std::abs(b[i])});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

// Composite Simpson integration of a callable over [lo, hi].
template <typename F>
double simpson(F&& f, double lo, double hi, int intervals = 2000) {
    if (intervals % 2) ++intervals;
    const double h = (hi - lo) / intervals;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < intervals; ++i) acc += f(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// Kolmogorov-Smirnov statistic of a sample against a CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> sample, Cdf&& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double c = cdf(sample[i]);
        worst = std::max(worst, std::abs(c - static_cast<double>(i) / n));
        worst = std::max(worst, std::abs(static_cast<double>(i + 1) / n - c));
    }
    return worst;
}

// Small random marked sequence with strictly increasing times.
inline ammtpp::tpp::TimedSequence random_sequence(ammtpp::Rng& rng, std::size_t n_events,
                                                  int num_marks, double mean_gap = 1.5) {
    ammtpp::tpp::TimedSequence seq;
    double t = 0.0;
    for (std::size_t i = 0; i < n_events; ++i) {
        t += rng.exponential(1.0 / mean_gap);
        seq.times.push_back(t);
        seq.marks.push_back(static_cast<int>(rng.random_index(num_marks)));
    }
    seq.t_begin = 0.0;
    seq.t_end = t;
    return seq;
}

}  // namespace testutil
