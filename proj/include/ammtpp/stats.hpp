#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ammtpp/events.hpp"

namespace ammtpp {
namespace stats {

struct DegenerateFit : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct MissingWallclock : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct UndefinedStatistic : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --------------------------------------------------------------------------
// Events per block, binned along the block-height axis
// --------------------------------------------------------------------------

struct EpbBin {
    std::uint64_t bin_start = 0;
    double events_per_block = 0.0;
};

// Bins are anchored at the minimum block so a span of exactly bin_size
// blocks lands in one bin. Zero-event blocks count in the denominator.
inline std::vector<EpbBin> events_per_block(std::span<const std::uint64_t> blocks,
                                            std::uint64_t bin_size = 10000) {
    if (bin_size < 1) throw std::invalid_argument("bin_size must be >= 1");
    if (blocks.empty()) return {};
    const std::uint64_t b_min = *std::min_element(blocks.begin(), blocks.end());
    const std::uint64_t b_max = *std::max_element(blocks.begin(), blocks.end());
    const std::size_t n_bins = static_cast<std::size_t>((b_max - b_min) / bin_size) + 1;
    std::vector<std::uint64_t> counts(n_bins, 0);
    for (std::uint64_t b : blocks) ++counts[(b - b_min) / bin_size];
    std::vector<EpbBin> out(n_bins);
    for (std::size_t i = 0; i < n_bins; ++i) {
        out[i].bin_start = b_min + static_cast<std::uint64_t>(i) * bin_size;
        out[i].events_per_block = static_cast<double>(counts[i]) / static_cast<double>(bin_size);
    }
    return out;
}

// --------------------------------------------------------------------------
// Inter-event gap summary
// --------------------------------------------------------------------------

struct GapSummary {
    std::size_t count = 0;
    double mean = 0.0;
    double median = 0.0;
    std::uint64_t max = 0;
    double p99 = 0.0;
    bool right_skewed = false;  // median <= mean
};

inline double median_of_sorted(std::span<const std::uint64_t> sorted) {
    const std::size_t n = sorted.size();
    if (n % 2 == 1) return static_cast<double>(sorted[n / 2]);
    return 0.5 * (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2]));
}

// Nearest-rank percentile on a sorted sample.
inline double percentile_of_sorted(std::span<const std::uint64_t> sorted, double q) {
    const std::size_t n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    if (rank > n) rank = n;
    return static_cast<double>(sorted[rank - 1]);
}

inline GapSummary gap_summary(const EventSequence& seq) {
    if (seq.size() < 2) throw InsufficientData("gap_summary needs >= 2 events");
    std::vector<std::uint64_t> gaps = seq.gaps();
    GapSummary s;
    s.count = gaps.size();
    double total = 0.0;
    for (std::uint64_t g : gaps) total += static_cast<double>(g);
    s.mean = total / static_cast<double>(gaps.size());
    std::sort(gaps.begin(), gaps.end());
    s.median = median_of_sorted(gaps);
    s.max = gaps.back();
    s.p99 = percentile_of_sorted(gaps, 0.99);
    s.right_skewed = s.median <= s.mean;
    return s;
}

// --------------------------------------------------------------------------
// Block-occupancy PMF with discrete power-law exponent
// --------------------------------------------------------------------------

struct OccupancyPmf {
    std::vector<std::uint64_t> support;  // occupied-block event counts, x >= 1
    std::vector<double> pmf;
    double alpha_hat = 0.0;
};

// Riemann zeta and its derivative by direct summation with an
// Euler-Maclaurin tail. Accurate to ~1e-10 for alpha >= 1.05.
inline std::pair<double, double> zeta_with_derivative(double alpha) {
    constexpr int kTerms = 2000;
    double z = 0.0, dz = 0.0;
    for (int k = 1; k <= kTerms; ++k) {
        const double lk = std::log(static_cast<double>(k));
        const double t = std::exp(-alpha * lk);
        z += t;
        dz -= lk * t;
    }
    const double K = kTerms + 1;
    const double lK = std::log(K);
    const double fK = std::pow(K, -alpha);
    z += std::pow(K, 1.0 - alpha) / (alpha - 1.0) + 0.5 * fK + alpha * fK / K / 12.0;
    const double tail_int = std::pow(K, 1.0 - alpha) * (lK / (alpha - 1.0) +
                                                        1.0 / ((alpha - 1.0) * (alpha - 1.0)));
    dz -= tail_int + 0.5 * lK * fK;
    return {z, dz};
}

// Continuity-corrected closed form 1 + n / sum(ln(x_i / (x_min - 0.5))).
// Biased low for x_min = 1; serves as the bracket seed for the exact MLE.
inline double power_law_alpha_approx(std::span<const std::uint64_t> counts) {
    if (counts.empty()) throw std::invalid_argument("empty sample");
    double denom = 0.0;
    for (std::uint64_t x : counts) {
        if (x < 1) throw std::invalid_argument("power-law sample values must be >= 1");
        denom += std::log(static_cast<double>(x) / 0.5);
    }
    if (denom <= 0.0) throw DegenerateFit("all sample values are 1");
    return 1.0 + static_cast<double>(counts.size()) / denom;
}

// Exact discrete maximum-likelihood exponent with x_min = 1: solves
// -zeta'(a)/zeta(a) = mean(ln x) by bisection.
inline double power_law_alpha_mle(std::span<const std::uint64_t> counts) {
    if (counts.empty()) throw std::invalid_argument("empty sample");
    double mean_log = 0.0;
    for (std::uint64_t x : counts) {
        if (x < 1) throw std::invalid_argument("power-law sample values must be >= 1");
        mean_log += std::log(static_cast<double>(x));
    }
    mean_log /= static_cast<double>(counts.size());
    if (mean_log <= 0.0) throw DegenerateFit("all sample values are 1");

    auto excess = [&](double a) {
        auto [z, dz] = zeta_with_derivative(a);
        return -dz / z - mean_log;  // decreasing in a
    };
    double lo = 1.05, hi = 64.0;
    if (excess(lo) < 0.0) return lo;  // heavier than representable: clamp
    if (excess(hi) > 0.0) return hi;
    for (int iter = 0; iter < 200 && hi - lo > 1e-10; ++iter) {
        const double mid = 0.5 * (lo + hi);
        (excess(mid) > 0.0 ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

inline OccupancyPmf occupancy_pmf(std::span<const std::uint64_t> blocks) {
    if (blocks.empty()) throw std::invalid_argument("occupancy_pmf needs events");
    std::map<std::uint64_t, std::uint64_t> per_block;
    for (std::uint64_t b : blocks) ++per_block[b];
    std::map<std::uint64_t, std::size_t> histogram;  // event count -> #blocks
    std::vector<std::uint64_t> sample;
    sample.reserve(per_block.size());
    for (const auto& [block, count] : per_block) {
        ++histogram[count];
        sample.push_back(count);
    }
    if (histogram.size() == 1) {
        throw DegenerateFit("all occupied blocks hold the same event count");
    }
    OccupancyPmf out;
    const double n = static_cast<double>(sample.size());
    for (const auto& [x, freq] : histogram) {
        out.support.push_back(x);
        out.pmf.push_back(static_cast<double>(freq) / n);
    }
    out.alpha_hat = power_law_alpha_mle(sample);
    return out;
}

// Inverse-CDF sampler for the discrete power law p(x) = x^-alpha / zeta(alpha)
// over x >= 1; the paired generator for power_law_alpha_mle in tests.
class DiscretePowerLawSampler {
public:
    explicit DiscretePowerLawSampler(double alpha)
        : alpha_(alpha), norm_(zeta_with_derivative(alpha).first) {
        if (alpha <= 1.0) throw std::invalid_argument("alpha must exceed 1");
    }

    [[nodiscard]] std::uint64_t operator()(double u) const {
        const double target = u * norm_;
        double cdf = 0.0;
        for (std::uint64_t k = 1;; ++k) {
            cdf += std::pow(static_cast<double>(k), -alpha_);
            if (cdf >= target || k > 100000000ULL) return k;
        }
    }

private:
    double alpha_;
    double norm_;
};

// --------------------------------------------------------------------------
// Trigger-aligned conditional event probability
// --------------------------------------------------------------------------

// Blocks whose summed swap volume reaches the 95th percentile (nearest rank)
// of per-block volume, over blocks with nonzero volume.
inline std::vector<std::uint64_t> select_trigger_blocks(
    const std::map<std::uint64_t, double>& volume_per_block, double q = 0.95) {
    std::vector<double> volumes;
    for (const auto& [b, v] : volume_per_block) {
        if (v > 0.0) volumes.push_back(v);
    }
    if (volumes.empty()) return {};
    std::sort(volumes.begin(), volumes.end());
    std::size_t rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(volumes.size())));
    if (rank == 0) rank = 1;
    if (rank > volumes.size()) rank = volumes.size();
    const double threshold = volumes[rank - 1];
    std::vector<std::uint64_t> triggers;
    for (const auto& [b, v] : volume_per_block) {
        if (v >= threshold && v > 0.0) triggers.push_back(b);
    }
    return triggers;
}

struct OffsetProbability {
    int offset = 0;
    double probability = 0.0;
};

// P(k) = fraction of trigger blocks t with at least one protocol event at
// block t + k, for k in [-K, K].
inline std::vector<OffsetProbability> trigger_conditional_probability(
    std::span<const std::uint64_t> trigger_blocks,
    std::span<const std::uint64_t> protocol_event_blocks, int window) {
    if (trigger_blocks.empty()) throw std::invalid_argument("no trigger blocks");
    if (window < 0) throw std::invalid_argument("window must be >= 0");
    std::vector<std::uint64_t> occupied(protocol_event_blocks.begin(), protocol_event_blocks.end());
    std::sort(occupied.begin(), occupied.end());
    occupied.erase(std::unique(occupied.begin(), occupied.end()), occupied.end());
    auto has_event = [&](std::int64_t block) {
        if (block < 1) return false;
        return std::binary_search(occupied.begin(), occupied.end(),
                                  static_cast<std::uint64_t>(block));
    };
    std::vector<OffsetProbability> out;
    out.reserve(static_cast<std::size_t>(2 * window + 1));
    for (int k = -window; k <= window; ++k) {
        std::size_t hits = 0;
        for (std::uint64_t t : trigger_blocks) {
            if (has_event(static_cast<std::int64_t>(t) + k)) ++hits;
        }
        out.push_back({k, static_cast<double>(hits) / static_cast<double>(trigger_blocks.size())});
    }
    return out;
}

// --------------------------------------------------------------------------
// Burstiness: coefficient of variation of binned counts
// --------------------------------------------------------------------------

// CV = population std / mean of counts per wallclock bin, zero-count bins
// included across the spanned range. A half-open [begin, end) range may be
// supplied when the observation window extends past the last event.
inline double burstiness_cv_from_stamps(
    std::span<const std::uint64_t> stamps, std::uint64_t bin_seconds = 3600,
    std::optional<std::pair<std::uint64_t, std::uint64_t>> range = {}) {
    if (bin_seconds < 1) throw std::invalid_argument("bin_seconds must be >= 1");
    if (stamps.empty()) throw MissingWallclock("no wallclock stamps");
    const std::uint64_t t_min =
        range ? range->first : *std::min_element(stamps.begin(), stamps.end());
    const std::uint64_t t_max =
        range ? range->second - 1 : *std::max_element(stamps.begin(), stamps.end());
    if (t_max < t_min) throw std::invalid_argument("empty wallclock range");
    const std::size_t n_bins = static_cast<std::size_t>((t_max - t_min) / bin_seconds) + 1;
    std::vector<double> counts(n_bins, 0.0);
    for (std::uint64_t t : stamps) {
        if (t < t_min || t > t_max) continue;
        counts[(t - t_min) / bin_seconds] += 1.0;
    }
    double mean = 0.0;
    for (double c : counts) mean += c;
    mean /= static_cast<double>(n_bins);
    if (mean == 0.0) throw UndefinedStatistic("zero mean count");
    double var = 0.0;
    for (double c : counts) var += (c - mean) * (c - mean);
    var /= static_cast<double>(n_bins);
    return std::sqrt(var) / mean;
}

inline double burstiness_cv(const EventSequence& seq, std::uint64_t bin_seconds = 3600,
                            std::optional<std::pair<std::uint64_t, std::uint64_t>> range = {}) {
    std::vector<std::uint64_t> stamps;
    stamps.reserve(seq.size());
    for (const Event& e : seq.events) {
        if (!e.wallclock) throw MissingWallclock("event without wallclock at block " +
                                                 std::to_string(e.block));
        stamps.push_back(*e.wallclock);
    }
    return burstiness_cv_from_stamps(stamps, bin_seconds, range);
}

// --------------------------------------------------------------------------
// Lending event-count correlations
// --------------------------------------------------------------------------

inline std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n != y.size() || n < 2) throw std::invalid_argument("series length mismatch");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) { mx += x[i]; my += y[i]; }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;  // constant series
    return sxy / std::sqrt(sxx * syy);
}

// Average ranks with tie correction, then Pearson on the ranks.
inline std::vector<double> average_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

inline std::optional<double> spearman(std::span<const double> x, std::span<const double> y) {
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    return pearson(rx, ry);
}

struct CorrelationMatrix {
    std::vector<BaseEventKind> kinds;
    std::vector<std::vector<std::optional<double>>> pearson;
    std::vector<std::vector<std::optional<double>>> spearman;
};

// Counts per fixed wallclock window for each kind, then pairwise Pearson and
// Spearman. Constant series yield null entries off the diagonal.
inline CorrelationMatrix lending_correlations(
    const std::map<BaseEventKind, std::vector<std::uint64_t>>& wallclocks_per_kind,
    std::uint64_t window_seconds = 14400) {
    if (window_seconds < 1) throw std::invalid_argument("window must be >= 1");
    std::uint64_t t_min = UINT64_MAX, t_max = 0;
    for (const auto& [kind, stamps] : wallclocks_per_kind) {
        for (std::uint64_t t : stamps) {
            t_min = std::min(t_min, t);
            t_max = std::max(t_max, t);
        }
    }
    if (t_min > t_max) throw std::invalid_argument("no events");
    const std::size_t n_bins = static_cast<std::size_t>((t_max - t_min) / window_seconds) + 1;
    if (n_bins < 2) throw InsufficientData("lending_correlations needs >= 2 windows");

    CorrelationMatrix out;
    std::vector<std::vector<double>> series;
    for (const auto& [kind, stamps] : wallclocks_per_kind) {
        out.kinds.push_back(kind);
        std::vector<double> counts(n_bins, 0.0);
        for (std::uint64_t t : stamps) counts[(t - t_min) / window_seconds] += 1.0;
        series.push_back(std::move(counts));
    }
    const std::size_t m = series.size();
    out.pearson.assign(m, std::vector<std::optional<double>>(m));
    out.spearman.assign(m, std::vector<std::optional<double>>(m));
    for (std::size_t i = 0; i < m; ++i) {
        out.pearson[i][i] = 1.0;
        out.spearman[i][i] = 1.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            out.pearson[i][j] = out.pearson[j][i] = pearson(series[i], series[j]);
            out.spearman[i][j] = out.spearman[j][i] = spearman(series[i], series[j]);
        }
    }
    return out;
}

}  // namespace stats
}  // namespace ammtpp
