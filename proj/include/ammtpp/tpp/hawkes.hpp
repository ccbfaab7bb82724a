#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/model.hpp"
#include "ammtpp/tpp/sequence.hpp"

namespace ammtpp {
namespace tpp {

// Multivariate exponential-kernel Hawkes with a shared decay:
//   lambda_k(t) = mu[k] + sum_{t_j < t} alpha[k][y_j] exp(-beta (t - t_j)).
// alpha is row-major: alpha[k * K + m] excites future mark k from past mark m.
struct HawkesParams {
    int num_marks = 1;
    std::vector<double> mu;
    std::vector<double> alpha;
    double beta = 1.0;

    static HawkesParams uniform(int num_marks, double mu_val, double alpha_val, double beta_val) {
        HawkesParams p;
        p.num_marks = num_marks;
        p.mu.assign(num_marks, mu_val);
        p.alpha.assign(static_cast<std::size_t>(num_marks) * num_marks, alpha_val);
        p.beta = beta_val;
        return p;
    }

    [[nodiscard]] double total_mu() const {
        double m = 0.0;
        for (double v : mu) m += v;
        return m;
    }

    // Column sums of alpha: total excitation produced by one event of mark m.
    [[nodiscard]] std::vector<double> alpha_column_totals() const {
        std::vector<double> out(num_marks, 0.0);
        for (int k = 0; k < num_marks; ++k) {
            for (int m = 0; m < num_marks; ++m) out[m] += alpha[k * num_marks + m];
        }
        return out;
    }

    // Spectral stability proxy: every branching column total alpha_tot/beta
    // below 1. Violations risk explosive simulation.
    [[nodiscard]] bool branching_stable() const {
        for (double a : alpha_column_totals()) {
            if (a / beta >= 1.0) return false;
        }
        return true;
    }
};

namespace detail {

// Exponentially-discounted excitation state per source mark at a reference
// time:  g[m] = sum e^{-beta tau_j},  r[m] = sum tau_j e^{-beta tau_j},
// over absorbed events with age tau_j >= 0.
struct HawkesState {
    std::vector<double> g;
    std::vector<double> r;

    explicit HawkesState(int num_marks) : g(num_marks, 0.0), r(num_marks, 0.0) {}

    void advance(double beta, double delta) {
        const double decay = std::exp(-beta * delta);
        for (std::size_t m = 0; m < g.size(); ++m) {
            r[m] = (r[m] + delta * g[m]) * decay;
            g[m] *= decay;
        }
    }

    void absorb(int mark) { g[static_cast<std::size_t>(mark)] += 1.0; }
};

// State at the last event time with every event absorbed.
inline HawkesState state_at_end(const HawkesParams& p, const TimedSequence& history) {
    HawkesState s(p.num_marks);
    for (std::size_t i = 0; i < history.size(); ++i) {
        if (i > 0) s.advance(p.beta, history.times[i] - history.times[i - 1]);
        s.absorb(history.marks[i]);
    }
    return s;
}

}  // namespace detail

inline double hawkes_intensity(const HawkesParams& p, const TimedSequence& history, int mark,
                               double t) {
    if (mark < 0 || mark >= p.num_marks) throw std::invalid_argument("mark out of range");
    if (!history.empty() && t < history.times.back()) {
        throw InvalidTime("intensity requested before the last event");
    }
    double value = p.mu[mark];
    for (std::size_t j = 0; j < history.size(); ++j) {
        if (history.times[j] >= t) break;  // strict past only
        value += p.alpha[mark * p.num_marks + history.marks[j]] *
                 std::exp(-p.beta * (t - history.times[j]));
    }
    return value;
}

// Closed-form compensator of the exponential kernel over [t_begin, horizon].
inline double hawkes_compensator(const HawkesParams& p, const TimedSequence& seq,
                                 double horizon) {
    const auto a_tot = p.alpha_column_totals();
    double value = p.total_mu() * (horizon - seq.t_begin);
    for (std::size_t j = 0; j < seq.size(); ++j) {
        if (seq.times[j] > horizon) break;
        const double tau = horizon - seq.times[j];
        value += a_tot[seq.marks[j]] * (1.0 - std::exp(-p.beta * tau)) / p.beta;
    }
    return value;
}

struct HawkesNll {
    double value = 0.0;
    std::vector<double> grad_mu;
    std::vector<double> grad_alpha;
    double grad_beta = 0.0;
};

// Marked NLL  -sum_i log lambda_{y_i}(t_i) + Lambda(t_begin, t_end)  with
// analytic gradients in the natural parameters.
inline HawkesNll hawkes_nll_exact_with_grad(const HawkesParams& p, const TimedSequence& seq) {
    if (seq.empty()) throw std::invalid_argument("hawkes_nll needs >= 1 event");
    const int K = p.num_marks;
    HawkesNll out;
    out.grad_mu.assign(K, 0.0);
    out.grad_alpha.assign(static_cast<std::size_t>(K) * K, 0.0);

    detail::HawkesState state(K);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i > 0) state.advance(p.beta, seq.times[i] - seq.times[i - 1]);
        const int y = seq.marks[i];
        double lam = p.mu[y];
        double dlam_dbeta = 0.0;
        for (int m = 0; m < K; ++m) {
            lam += p.alpha[y * K + m] * state.g[m];
            dlam_dbeta -= p.alpha[y * K + m] * state.r[m];
        }
        if (!(lam > 0.0)) {
            throw NumericalUnderflow("non-positive intensity at event " + std::to_string(i));
        }
        out.value -= std::log(lam);
        out.grad_mu[y] -= 1.0 / lam;
        for (int m = 0; m < K; ++m) out.grad_alpha[y * K + m] -= state.g[m] / lam;
        out.grad_beta -= dlam_dbeta / lam;
        state.absorb(y);
    }

    // compensator and its gradients
    const double horizon = seq.t_end;
    const double window = horizon - seq.t_begin;
    out.value += p.total_mu() * window;
    for (int k = 0; k < K; ++k) out.grad_mu[k] += window;

    const auto a_tot = p.alpha_column_totals();
    std::vector<double> c(K, 0.0);  // per source mark: sum (1 - e^{-beta tau}) / beta
    for (std::size_t j = 0; j < seq.size(); ++j) {
        const double tau = horizon - seq.times[j];
        if (tau < 0.0) continue;
        const double e = std::exp(-p.beta * tau);
        const int m = seq.marks[j];
        c[m] += (1.0 - e) / p.beta;
        out.grad_beta += a_tot[m] * (tau * e / p.beta - (1.0 - e) / (p.beta * p.beta));
        out.value += a_tot[m] * (1.0 - e) / p.beta;
    }
    for (int k = 0; k < K; ++k) {
        for (int m = 0; m < K; ++m) out.grad_alpha[k * K + m] += c[m];
    }
    return out;
}

inline double hawkes_nll_exact(const HawkesParams& p, const TimedSequence& seq) {
    if (seq.empty()) throw std::invalid_argument("hawkes_nll needs >= 1 event");
    const int K = p.num_marks;
    double value = 0.0;
    detail::HawkesState state(K);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i > 0) state.advance(p.beta, seq.times[i] - seq.times[i - 1]);
        double lam = p.mu[seq.marks[i]];
        for (int m = 0; m < K; ++m) lam += p.alpha[seq.marks[i] * K + m] * state.g[m];
        if (!(lam > 0.0)) {
            throw NumericalUnderflow("non-positive intensity at event " + std::to_string(i));
        }
        value -= std::log(lam);
        state.absorb(seq.marks[i]);
    }
    return value + hawkes_compensator(p, seq, seq.t_end);
}

// Same event terms, compensator by per-interval uniform Monte Carlo with
// `samples_per_step` draws; deterministic for a given seed.
inline double hawkes_nll_mc(const HawkesParams& p, const TimedSequence& seq,
                            int samples_per_step = 20, std::uint64_t seed = 0) {
    if (seq.empty()) throw std::invalid_argument("hawkes_nll needs >= 1 event");
    if (samples_per_step < 1) throw std::invalid_argument("samples_per_step must be >= 1");
    const int K = p.num_marks;
    const auto a_tot = p.alpha_column_totals();
    const double total_mu = p.total_mu();
    Rng rng(seed);

    double event_terms = 0.0;
    double integral = 0.0;
    detail::HawkesState state(K);

    auto interval_mc = [&](double excitation, double length) {
        if (length <= 0.0) return 0.0;  // zero-length interval contributes 0
        double acc = 0.0;
        for (int s = 0; s < samples_per_step; ++s) {
            const double u = rng.uniform() * length;
            acc += total_mu + excitation * std::exp(-p.beta * u);
        }
        return acc * length / samples_per_step;
    };

    for (std::size_t i = 0; i < seq.size(); ++i) {
        // excitation just after the previous boundary (events <= i-1 absorbed)
        double excitation = 0.0;
        for (int m = 0; m < K; ++m) excitation += a_tot[m] * state.g[m];
        const double left = i == 0 ? seq.t_begin : seq.times[i - 1];
        integral += interval_mc(excitation, seq.times[i] - left);

        if (i > 0) state.advance(p.beta, seq.times[i] - seq.times[i - 1]);
        double lam = p.mu[seq.marks[i]];
        for (int m = 0; m < K; ++m) lam += p.alpha[seq.marks[i] * K + m] * state.g[m];
        if (!(lam > 0.0)) {
            throw NumericalUnderflow("non-positive intensity at event " + std::to_string(i));
        }
        event_terms -= std::log(lam);
        state.absorb(seq.marks[i]);
    }
    // trailing interval up to the observation horizon
    double excitation = 0.0;
    {
        detail::HawkesState end_state = detail::state_at_end(p, seq);
        for (int m = 0; m < K; ++m) excitation += a_tot[m] * end_state.g[m];
    }
    integral += interval_mc(excitation, seq.t_end - seq.last_time());
    return event_terms + integral;
}

}  // namespace tpp
}  // namespace ammtpp
