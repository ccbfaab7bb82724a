#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/model.hpp"
#include "ammtpp/tpp/sequence.hpp"

namespace ammtpp {
namespace tpp {

// Deterministic history summary replacing a learned recurrent encoder:
// [empty_flag, log1p(last_gap), three EMAs of log1p(gap), one-hot last mark,
// log1p(event_count)].
struct FeatureConfig {
    int num_marks = 31;
    static constexpr std::array<double, 3> kEmaDecays = {0.1, 0.5, 0.9};

    [[nodiscard]] int dim() const { return 6 + num_marks; }
};

struct FeatureState {
    std::size_t count = 0;
    double last_gap = -1.0;  // negative: no gap yet
    int last_mark = -1;
    std::array<double, 3> ema = {0.0, 0.0, 0.0};
    bool ema_ready = false;

    // Absorbs the next event; gap < 0 marks the first event of a sequence.
    void push(double gap, int mark) {
        ++count;
        last_mark = mark;
        if (gap >= 0.0) {
            last_gap = gap;
            const double z = std::log1p(gap);
            for (std::size_t d = 0; d < ema.size(); ++d) {
                ema[d] = ema_ready
                             ? FeatureConfig::kEmaDecays[d] * ema[d] +
                                   (1.0 - FeatureConfig::kEmaDecays[d]) * z
                             : z;
            }
            ema_ready = true;
        }
    }

    void fill(const FeatureConfig& config, std::span<double> x) const {
        for (auto& v : x) v = 0.0;
        if (count == 0) {
            x[0] = 1.0;
            return;
        }
        x[1] = last_gap >= 0.0 ? std::log1p(last_gap) : 0.0;
        for (std::size_t d = 0; d < ema.size(); ++d) x[2 + d] = ema_ready ? ema[d] : 0.0;
        if (last_mark >= 0 && last_mark < config.num_marks) x[5 + last_mark] = 1.0;
        x[5 + config.num_marks] = std::log1p(static_cast<double>(count));
    }
};

inline std::vector<double> history_features(const TimedSequence& history,
                                            const FeatureConfig& config) {
    FeatureState state;
    for (std::size_t i = 0; i < history.size(); ++i) {
        const double gap = i == 0 ? -1.0 : history.times[i] - history.times[i - 1];
        state.push(gap, history.marks[i]);
    }
    std::vector<double> x(config.dim());
    state.fill(config, x);
    return x;
}

namespace nn {

// out = W x + b with W row-major (rows x cols).
inline void linear_forward(std::span<const double> W, std::span<const double> b,
                           std::span<const double> x, std::span<double> out) {
    const std::size_t rows = b.size();
    const std::size_t cols = x.size();
    for (std::size_t r = 0; r < rows; ++r) {
        double acc = b[r];
        const double* wr = W.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
        out[r] = acc;
    }
}

// Accumulates gW += dout x^T, gb += dout, and optionally dx += W^T dout.
inline void linear_backward(std::span<const double> W, std::span<const double> x,
                            std::span<const double> dout, std::span<double> gW,
                            std::span<double> gb, std::span<double> dx = {}) {
    const std::size_t rows = dout.size();
    const std::size_t cols = x.size();
    for (std::size_t r = 0; r < rows; ++r) {
        const double d = dout[r];
        if (d == 0.0) continue;
        double* gwr = gW.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) gwr[c] += d * x[c];
        gb[r] += d;
        if (!dx.empty()) {
            const double* wr = W.data() + r * cols;
            for (std::size_t c = 0; c < cols; ++c) dx[c] += wr[c] * d;
        }
    }
}

inline void glorot_fill(std::span<double> W, std::size_t rows, std::size_t cols, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (auto& w : W) w = rng.uniform(-a, a);
}

inline double log_sum_exp(std::span<const double> v) {
    double m = v[0];
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double acc = 0.0;
    for (double x : v) acc += std::exp(x - m);
    return m + std::log(acc);
}

}  // namespace nn

// Per-position forward cache for the one-layer tanh trunk with inverted
// dropout. h is the post-dropout activation consumed by every head.
struct TrunkCache {
    std::vector<double> x;
    std::vector<double> h_pre;
    std::vector<double> h;
    std::vector<double> mask;  // empty when dropout is off
};

inline void trunk_forward(std::span<const double> W1, std::span<const double> b1,
                          std::span<const double> x, bool training, double dropout_rate,
                          Rng* dropout_rng, TrunkCache& cache) {
    const std::size_t H = b1.size();
    cache.x.assign(x.begin(), x.end());
    cache.h_pre.resize(H);
    nn::linear_forward(W1, b1, x, cache.h_pre);
    for (auto& h : cache.h_pre) h = std::tanh(h);
    cache.h = cache.h_pre;
    cache.mask.clear();
    if (training && dropout_rate > 0.0 && dropout_rng) {
        cache.mask.resize(H);
        const double keep = 1.0 - dropout_rate;
        for (std::size_t j = 0; j < H; ++j) {
            cache.mask[j] = dropout_rng->uniform() < dropout_rate ? 0.0 : 1.0 / keep;
            cache.h[j] *= cache.mask[j];
        }
    }
}

// dh is the gradient on the post-dropout activation; accumulates trunk
// parameter gradients.
inline void trunk_backward(std::span<const double> W1, const TrunkCache& cache,
                           std::span<double> dh, std::span<double> gW1, std::span<double> gb1) {
    const std::size_t H = cache.h_pre.size();
    for (std::size_t j = 0; j < H; ++j) {
        if (!cache.mask.empty()) dh[j] *= cache.mask[j];
        dh[j] *= 1.0 - cache.h_pre[j] * cache.h_pre[j];
    }
    nn::linear_backward(W1, cache.x, dh, gW1, gb1);
}

}  // namespace tpp
}  // namespace ammtpp
