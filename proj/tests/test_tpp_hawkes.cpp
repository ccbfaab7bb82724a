#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ammtpp/tpp/hawkes.hpp"
#include "ammtpp/tpp/hawkes_model.hpp"
#include "ammtpp/tpp/simulate.hpp"
#include "helpers.hpp"

using namespace ammtpp;
using namespace ammtpp::tpp;
using Catch::Approx;

namespace {

TimedSequence toy_sequence() {
    TimedSequence seq;
    seq.push(1.0, 0);
    seq.push(2.0, 0);
    seq.t_begin = 0.0;
    seq.t_end = 3.0;
    return seq;
}

HawkesParams toy_params() { return HawkesParams::uniform(1, 0.5, 0.8, 1.0); }

double direct_intensity(const HawkesParams& p, const TimedSequence& seq, int k, double t) {
    double v = p.mu[k];
    for (std::size_t j = 0; j < seq.size(); ++j) {
        if (seq.times[j] < t) {
            v += p.alpha[k * p.num_marks + seq.marks[j]] * std::exp(-p.beta * (t - seq.times[j]));
        }
    }
    return v;
}

}  // namespace

TEST_CASE("hawkes intensity matches the direct summation oracle") {
    const auto p = toy_params();
    const auto seq = toy_sequence();
    const double lam3 = hawkes_intensity(p, seq, 0, 3.0);
    CHECK(lam3 == Approx(0.5 + 0.8 * (std::exp(-2.0) + std::exp(-1.0))).epsilon(1e-12));
    CHECK(lam3 == Approx(0.90257).margin(1e-5));

    TimedSequence empty;
    CHECK(hawkes_intensity(p, empty, 0, 7.0) == Approx(0.5));

    auto poisson = HawkesParams::uniform(1, 0.5, 0.0, 1.0);
    CHECK(hawkes_intensity(poisson, seq, 0, 2.5) == Approx(0.5));

    CHECK_THROWS_AS(hawkes_intensity(p, seq, 0, 1.5), InvalidTime);
}

TEST_CASE("closed-form compensator matches the worked value and quadrature") {
    const auto p = toy_params();
    const auto seq = toy_sequence();
    const double comp = hawkes_compensator(p, seq, 3.0);
    CHECK(comp == Approx(1.5 + 0.8 * ((1 - std::exp(-2.0)) + (1 - std::exp(-1.0)))).epsilon(1e-12));
    CHECK(comp == Approx(2.69743).margin(1e-5));

    // independent oracle: piecewise Simpson with the per-piece event prefix,
    // so the kink at each event lands exactly on a piece boundary
    auto lam_prefix = [&](std::size_t n_events, double t) {
        double v = p.mu[0];
        for (std::size_t j = 0; j < n_events; ++j) {
            v += p.alpha[0] * std::exp(-p.beta * (t - seq.times[j]));
        }
        return v;
    };
    const double numeric =
        testutil::simpson([&](double t) { return lam_prefix(0, t); }, 0.0, 1.0) +
        testutil::simpson([&](double t) { return lam_prefix(1, t); }, 1.0, 2.0) +
        testutil::simpson([&](double t) { return lam_prefix(2, t); }, 2.0, 3.0);
    CHECK(comp == Approx(numeric).epsilon(1e-8));
}

TEST_CASE("poisson reduction: NLL = -log mu + mu T for one event") {
    auto p = HawkesParams::uniform(1, 0.3, 0.0, 1.0);
    TimedSequence seq;
    seq.push(4.0, 0);
    seq.t_begin = 0.0;
    seq.t_end = 10.0;
    CHECK(hawkes_nll_exact(p, seq) == Approx(-std::log(0.3) + 0.3 * 10.0).epsilon(1e-12));
}

TEST_CASE("monte carlo compensator converges to the exact value") {
    const auto p = toy_params();
    const auto seq = toy_sequence();
    const double exact = hawkes_nll_exact(p, seq);
    const double comp_exact = hawkes_compensator(p, seq, 3.0);
    const double event_terms = exact - comp_exact;

    const double mc20 = hawkes_nll_mc(p, seq, 20, 2019);
    CHECK(std::abs((mc20 - event_terms) - comp_exact) <= 0.05 * comp_exact);

    const double mc1e5 = hawkes_nll_mc(p, seq, 100000, 2019);
    CHECK(std::abs((mc1e5 - event_terms) - comp_exact) <= 0.005 * comp_exact);
}

TEST_CASE("monte carlo vs exact on random small instances", "[property]") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const int K = 1 + static_cast<int>(rng.random_index(3));
        HawkesParams p;
        p.num_marks = K;
        p.mu.resize(K);
        p.alpha.resize(K * K);
        for (auto& v : p.mu) v = rng.uniform(0.2, 1.0);
        for (auto& v : p.alpha) v = rng.uniform(0.05, 0.5) / K;
        p.beta = rng.uniform(0.8, 2.0);
        auto seq = testutil::random_sequence(rng, 30 + rng.random_index(40), K);
        seq.t_end = seq.last_time() + rng.uniform(0.0, 2.0);

        const double exact = hawkes_nll_exact(p, seq);
        const double comp = hawkes_compensator(p, seq, seq.t_end);
        const double event_terms = exact - comp;
        const double mc = hawkes_nll_mc(p, seq, 100000, 2019 + trial);
        CHECK(std::abs((mc - event_terms) - comp) <= 0.005 * comp);
    }
}

TEST_CASE("exact NLL analytic gradient matches finite differences") {
    Rng rng(2019);
    for (int trial = 0; trial < 10; ++trial) {
        const int K = 1 + static_cast<int>(rng.random_index(3));
        HawkesParams p;
        p.num_marks = K;
        p.mu.resize(K);
        p.alpha.resize(K * K);
        for (auto& v : p.mu) v = rng.uniform(0.2, 1.0);
        for (auto& v : p.alpha) v = rng.uniform(0.1, 0.6) / K;
        p.beta = rng.uniform(0.8, 2.0);
        const auto seq = testutil::random_sequence(rng, 12, K);

        auto res = hawkes_nll_exact_with_grad(p, seq);
        CHECK(res.value == Approx(hawkes_nll_exact(p, seq)).epsilon(1e-12));

        std::vector<double> flat;
        flat.insert(flat.end(), p.mu.begin(), p.mu.end());
        flat.insert(flat.end(), p.alpha.begin(), p.alpha.end());
        flat.push_back(p.beta);
        auto unpack = [&](const std::vector<double>& v) {
            HawkesParams q = p;
            for (int k = 0; k < K; ++k) q.mu[k] = v[k];
            for (int i = 0; i < K * K; ++i) q.alpha[i] = v[K + i];
            q.beta = v.back();
            return q;
        };
        auto fd = testutil::fd_gradient(
            [&](const std::vector<double>& v) { return hawkes_nll_exact(unpack(v), seq); }, flat);

        std::vector<double> analytic;
        analytic.insert(analytic.end(), res.grad_mu.begin(), res.grad_mu.end());
        analytic.insert(analytic.end(), res.grad_alpha.begin(), res.grad_alpha.end());
        analytic.push_back(res.grad_beta);
        CHECK(testutil::max_rel_err(analytic, fd) < 1e-6);
    }
}

TEST_CASE("hawkes model: gap density integrates to one and matches exact NLL") {
    auto model = HawkesModel(HawkesModel::Config{2, GapQuadrature{}},
                             HawkesParams::uniform(2, 0.3, 0.2, 1.2));
    Rng rng(5);
    const auto grid = GapQuadrature{}.build();
    for (int trial = 0; trial < 5; ++trial) {
        const auto hist = testutil::random_sequence(rng, 5 + rng.random_index(10), 2);
        double mass = 0.0;
        for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
            mass += grid.weights[i] * std::exp(model.gap_log_density(hist, grid.nodes[i]));
        }
        CHECK(mass == Approx(1.0).margin(1e-3));

        const auto logpi = model.mark_log_probs(hist);
        double total = 0.0;
        for (double lp : logpi) total += std::exp(lp);
        CHECK(total == Approx(1.0).margin(1e-9));
    }

    // teacher-forced mark+time decomposition recomposes the exact marked NLL
    const auto seq = testutil::random_sequence(rng, 20, 2);
    const auto eval = model.evaluate(seq, EvalRequest{});
    double total = 0.0;
    for (const auto& p : eval.positions) total += p.nll_mark + p.nll_time;
    TimedSequence window = seq;
    window.t_begin = seq.times.front();
    window.t_end = seq.times.back();
    const auto nat = model.natural_params();
    const double exact = hawkes_nll_exact(nat, window);
    CHECK(total == Approx(exact + std::log(nat.mu[seq.marks.front()])).epsilon(1e-9));
}

TEST_CASE("hawkes model evaluate agrees with single-shot prefix calls") {
    auto model = HawkesModel(HawkesModel::Config{3, GapQuadrature{}},
                             HawkesParams::uniform(3, 0.2, 0.15, 1.0));
    Rng rng(11);
    const auto seq = testutil::random_sequence(rng, 8, 3);
    EvalRequest req;
    req.want_pred = true;
    const auto eval = model.evaluate(seq, req);
    REQUIRE(eval.positions.size() == seq.size() - 1);
    for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
        TimedSequence prefix;
        prefix.times.assign(seq.times.begin(), seq.times.begin() + i + 1);
        prefix.marks.assign(seq.marks.begin(), seq.marks.begin() + i + 1);
        prefix.t_begin = seq.t_begin;
        prefix.t_end = prefix.times.back();
        const double gap = seq.times[i + 1] - seq.times[i];
        CHECK(eval.positions[i].nll_time ==
              Approx(-model.gap_log_density(prefix, gap)).epsilon(1e-10));
        CHECK(eval.positions[i].nll_mark ==
              Approx(-model.mark_log_probs_at(prefix, gap)[seq.marks[i + 1]]).epsilon(1e-10));
        CHECK(eval.positions[i].pred_gap ==
              Approx(model.gap_point_prediction(prefix).gap).epsilon(1e-10));
    }
}

TEST_CASE("poisson gap expectation is 1/rate") {
    auto model = HawkesModel(HawkesModel::Config{1, GapQuadrature{}},
                             HawkesParams::uniform(1, 0.1, 0.0, 1.0));
    TimedSequence hist;
    hist.push(1.0, 0);
    const auto pred = model.gap_point_prediction(hist);
    CHECK_FALSE(pred.from_median);
    CHECK(pred.gap == Approx(10.0).epsilon(5e-3));
}

TEST_CASE("thinning simulation: poisson count, zero intensity, stationary rate") {
    auto poisson = HawkesParams::uniform(1, 0.5, 0.0, 1.0);
    const auto seq = simulate_hawkes_thinning(poisson, 0.0, 10000.0, 2019);
    CHECK(std::abs(static_cast<double>(seq.size()) - 5000.0) <= 3.0 * std::sqrt(5000.0));

    auto silent = HawkesParams::uniform(1, 0.0, 0.0, 1.0);
    CHECK(simulate_hawkes_thinning(silent, 0.0, 1000.0, 2019).empty());

    auto excited = HawkesParams::uniform(1, 0.5, 0.8, 1.0);
    const double horizon = 20000.0;
    const auto hseq = simulate_hawkes_thinning(excited, 0.0, horizon, 2019);
    const double rate = static_cast<double>(hseq.size()) / horizon;
    CHECK(rate == Approx(2.5).epsilon(0.10));
}

TEST_CASE("simulated poisson gaps pass a KS test against the exponential law") {
    auto poisson = HawkesParams::uniform(1, 0.5, 0.0, 1.0);
    const auto seq = simulate_hawkes_thinning(poisson, 0.0, 20100.0, 2020);
    REQUIRE(seq.size() >= 10001);
    std::vector<double> gaps;
    for (std::size_t i = 1; i <= 10000; ++i) gaps.push_back(seq.times[i] - seq.times[i - 1]);
    const double ks =
        testutil::ks_statistic(gaps, [](double x) { return 1.0 - std::exp(-0.5 * x); });
    CHECK(ks < 0.02);
}

TEST_CASE("explosion guard aborts unstable simulations") {
    auto unstable = HawkesParams::uniform(1, 5.0, 3.0, 1.0);  // branching ratio 3
    CHECK_FALSE(unstable.branching_stable());
    CHECK_THROWS_AS(simulate_hawkes_thinning(unstable, 0.0, 1e7, 2019, 20000), ExplosionAborted);
}

TEST_CASE("block quantization merges same-block collisions") {
    TimedSequence seq;
    seq.push(0.4, 0);   // ceil -> 1
    seq.push(0.9, 1);   // ceil -> 1, merges
    seq.push(2.0, 2);   // ceil -> 2
    seq.push(2.5, 0);   // ceil -> 3
    auto events = quantize_to_blocks(seq, 31, "sim");
    REQUIRE(events.size() == 3);
    CHECK(events.events[0].block == 1);
    // marks 0 and 1 are {SwapIn} and {SwapOut}: union has bitmask 3 -> class 2
    CHECK(events.events[0].mark == 2);
    CHECK(events.events[1].block == 2);
    CHECK(events.events[2].block == 3);
    for (std::uint64_t g : events.gaps()) CHECK(g >= 1);
}
