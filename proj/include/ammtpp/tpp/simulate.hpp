#pragma once

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/hawkes.hpp"
#include "ammtpp/tpp/model.hpp"
#include "ammtpp/tpp/sequence.hpp"

namespace ammtpp {
namespace tpp {

struct ExplosionAborted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kMaxSimulatedEvents = 1000000;

// Ogata thinning for the exponential-kernel Hawkes process: the intensity
// decays between events, so the value just after the current time is a valid
// dominating rate.
inline TimedSequence simulate_hawkes_thinning(const HawkesParams& p, double t_start,
                                              double horizon, std::uint64_t seed,
                                              std::size_t max_events = kMaxSimulatedEvents) {
    if (!p.branching_stable()) {
        std::cerr << "warning: hawkes branching ratio >= 1, simulation may explode\n";
    }
    Rng rng(seed);
    const int K = p.num_marks;
    const auto a_tot = p.alpha_column_totals();
    const double M = p.total_mu();

    TimedSequence out;
    out.t_begin = t_start;
    out.t_end = t_start + horizon;
    detail::HawkesState state(K);
    double t = t_start;
    std::vector<double> lam(K, 0.0);

    while (true) {
        double bound = M;
        for (int m = 0; m < K; ++m) bound += a_tot[m] * state.g[m];
        if (bound <= 1e-15) break;
        const double step = rng.exponential(bound);
        if (t + step > t_start + horizon) break;
        t += step;
        state.advance(p.beta, step);
        double lam_tot = M;
        for (int m = 0; m < K; ++m) lam_tot += a_tot[m] * state.g[m];
        if (rng.uniform() * bound <= lam_tot) {
            for (int k = 0; k < K; ++k) {
                lam[k] = p.mu[k];
                for (int m = 0; m < K; ++m) lam[k] += p.alpha[k * K + m] * state.g[m];
            }
            const int mark = static_cast<int>(rng.categorical(lam));
            out.times.push_back(t);
            out.marks.push_back(mark);
            state.absorb(mark);
            if (out.times.size() > max_events) {
                throw ExplosionAborted("simulation exceeded " + std::to_string(max_events) +
                                       " events");
            }
        }
    }
    return out;
}

// Generic model simulation by repeated next-event sampling (thinning for the
// intensity-based families, closed-form inversion for the mixture).
inline TimedSequence simulate_model(const TppModel& model, double t_start, double horizon,
                                    std::uint64_t seed,
                                    std::size_t max_events = kMaxSimulatedEvents) {
    Rng rng(seed);
    TimedSequence out;
    out.t_begin = t_start;
    out.t_end = t_start + horizon;
    double t = t_start;
    while (true) {
        auto [gap, mark] = model.sample_next(out, rng);
        if (!std::isfinite(gap) || t + gap > t_start + horizon) break;
        t += gap;
        // shift-free: sequences sampled from a fresh start carry absolute times
        out.times.push_back(t);
        out.marks.push_back(mark);
        if (out.times.size() > max_events) {
            throw ExplosionAborted("simulation exceeded " + std::to_string(max_events) +
                                   " events");
        }
    }
    return out;
}

// Spec'd simulation entry point: continuous-time thinning followed by
// ceiling quantization onto the block axis with collision merge.
inline EventSequence simulate_thinning(const TppModel& model, double t_start, double horizon,
                                       std::uint64_t seed, const std::string& asset_id = {}) {
    TimedSequence continuous = simulate_model(model, t_start, horizon, seed);
    return quantize_to_blocks(continuous, model.num_marks(), asset_id);
}

}  // namespace tpp
}  // namespace ammtpp
