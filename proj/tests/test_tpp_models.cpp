#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ammtpp/tpp/checkpoint.hpp"
#include "ammtpp/tpp/encoder.hpp"
#include "ammtpp/tpp/hawkes_model.hpp"
#include "ammtpp/tpp/lognorm_mix.hpp"
#include "ammtpp/tpp/rmtpp_style.hpp"
#include "ammtpp/tpp/simulate.hpp"
#include "helpers.hpp"

using namespace ammtpp;
using namespace ammtpp::tpp;
using Catch::Approx;

TEST_CASE("history features: empty, single event, EMA fixed point") {
    FeatureConfig cfg{5};
    TimedSequence empty;
    auto x0 = history_features(empty, cfg);
    REQUIRE(x0.size() == static_cast<std::size_t>(cfg.dim()));
    CHECK(x0[0] == 1.0);
    for (std::size_t i = 1; i < x0.size(); ++i) CHECK(x0[i] == 0.0);

    TimedSequence one;
    one.push(3.0, 2);
    auto x1 = history_features(one, cfg);
    CHECK(x1[0] == 0.0);
    CHECK(x1[1] == 0.0);  // no gap yet
    CHECK(x1[2] == 0.0);
    CHECK(x1[5 + 2] == 1.0);
    CHECK(x1[5 + 5] == Approx(std::log1p(1.0)));

    // constant gaps g: every EMA equals log1p(g)
    TimedSequence constant;
    for (int i = 0; i < 12; ++i) constant.push(4.0 * (i + 1), 1);
    auto xc = history_features(constant, cfg);
    for (int d = 0; d < 3; ++d) CHECK(xc[2 + d] == Approx(std::log1p(4.0)).epsilon(1e-12));
}

TEST_CASE("rmtpp-style gap law reproduces the closed-form density") {
    detail::ExpSlopeGapLaw law{0.0, 1.0};
    CHECK(law.log_density(1.0) == Approx(1.0 - (std::exp(1.0) - 1.0)).epsilon(1e-12));
    CHECK(std::exp(law.log_density(1.0)) == Approx(std::exp(2.0 - std::exp(1.0))).epsilon(1e-12));
    CHECK(-law.log_density(1.0) == Approx(0.71828).margin(1e-5));

    // analytic identity: density integrates to one for positive slope
    const auto grid = GapQuadrature{}.build();
    double mass = 0.0;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
        mass += grid.weights[i] * std::exp(law.log_density(grid.nodes[i]));
    }
    CHECK(mass == Approx(1.0).margin(1e-3));
}

TEST_CASE("rmtpp-style expectation matches the exponential-integral closed form") {
    // E[gap] = (e^a / w) E1(a) with a = e^c / w, for w > 0
    const auto grid = GapQuadrature{}.build();
    for (const auto& [c, w] : std::vector<std::pair<double, double>>{
             {0.0, 1.0}, {-1.0, 0.5}, {0.5, 2.0}, {-2.0, 0.3}}) {
        detail::ExpSlopeGapLaw law{c, w};
        const auto pred = law.predict(grid);
        REQUIRE_FALSE(pred.from_median);
        const double a = std::exp(c) / w;
        const double e1 = -std::expint(-a);
        const double closed = std::exp(a) / w * e1;
        CHECK(pred.gap == Approx(closed).epsilon(5e-3));
    }
}

TEST_CASE("rmtpp-style expectation matches an inverse-CDF sampling oracle") {
    detail::ExpSlopeGapLaw law{0.0, 1.0};
    const auto grid = GapQuadrature{}.build();
    const double quad = law.predict(grid).gap;
    Rng rng(2019);
    double acc = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) acc += law.sample_gap(rng.uniform());
    CHECK(quad == Approx(acc / n).epsilon(0.01));
}

TEST_CASE("rmtpp-style defective tail falls back to the median") {
    // w < 0 with reachable median: hazard tops out above ln 2
    detail::ExpSlopeGapLaw law{0.5, -0.2};
    CHECK(law.tail_mass() > 1e-12);
    CHECK(law.tail_mass() < 0.5);
    const auto grid = GapQuadrature{}.build();
    const auto pred = law.predict(grid);
    CHECK(pred.from_median);
    CHECK(law.cumulative_hazard(pred.gap) == Approx(std::log(2.0)).epsilon(1e-9));

    // implicit-function gradient of the median agrees with finite differences
    auto median_of = [&](double cc, double ww) {
        return detail::ExpSlopeGapLaw{cc, ww}.predict(grid).gap;
    };
    const auto [dc, dw] = law.predict_grad(grid, pred);
    const double eps = 1e-6;
    CHECK(dc == Approx((median_of(0.5 + eps, -0.2) - median_of(0.5 - eps, -0.2)) / (2 * eps))
                    .epsilon(1e-5));
    CHECK(dw == Approx((median_of(0.5, -0.2 + eps) - median_of(0.5, -0.2 - eps)) / (2 * eps))
                    .epsilon(1e-5));
}

TEST_CASE("lognorm mixture law: density, mean, uniform marks") {
    detail::LogNormMixLaw law;
    law.u = {0.0};
    law.mu = {0.0};
    law.s = {0.0};
    CHECK(-law.log_density(1.0) == Approx(0.9189385).margin(1e-6));
    CHECK(law.mean() == Approx(std::exp(0.5)).epsilon(1e-12));

    LogNormMixModel model(LogNormMixModel::Config{31, 16, 3, GapQuadrature{}}, 2019);
    TimedSequence hist;
    hist.push(1.0, 4);
    hist.push(3.0, 9);
    const auto logpi = model.mark_log_probs(hist);
    double total = 0.0;
    for (double lp : logpi) total += std::exp(lp);
    CHECK(total == Approx(1.0).margin(1e-9));

    // uniform mark logits give -log pi = log 31
    std::vector<double> uniform_logits(31, 0.7);
    const double lse = nn::log_sum_exp(uniform_logits);
    CHECK(lse - 0.7 == Approx(std::log(31.0)).epsilon(1e-12));
}

TEST_CASE("gap densities integrate to one across random histories", "[property]") {
    const auto grid = GapQuadrature{}.build();
    Rng rng(99);
    RmtppStyleModel rmtpp(RmtppStyleModel::Config{5, 16, GapQuadrature{}}, 7);
    LogNormMixModel mix(LogNormMixModel::Config{5, 16, 3, GapQuadrature{}}, 8);
    for (int trial = 0; trial < 5; ++trial) {
        const auto hist = testutil::random_sequence(rng, 3 + rng.random_index(8), 5);
        for (const TppModel* model : {static_cast<const TppModel*>(&rmtpp),
                                      static_cast<const TppModel*>(&mix)}) {
            double mass = 0.0;
            for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
                mass += grid.weights[i] * std::exp(model->gap_log_density(hist, grid.nodes[i]));
            }
            CHECK(mass == Approx(1.0).margin(1e-3));
        }
    }
}

namespace {

double objective(const TppModel& model, const TimedSequence& seq, const EvalRequest& req) {
    const auto eval = model.evaluate(seq, req);
    double total = 0.0;
    for (const auto& p : eval.positions) {
        total += req.coef_mark * p.nll_mark + req.coef_time * p.nll_time;
        if (req.coef_mse != 0.0) {
            const double r = p.pred_gap - p.true_gap;
            total += req.coef_mse * r * r;
        }
    }
    return total;
}

void check_model_gradient(const TppModel& model, const TimedSequence& seq, EvalRequest req,
                          double tol = 1e-4) {
    std::vector<double> analytic(model.param_count(), 0.0);
    model.evaluate(seq, req, analytic);
    auto fd = testutil::fd_gradient(
        [&](const std::vector<double>& v) {
            auto clone = clone_model(model, v);
            return objective(*clone, seq, req);
        },
        model.raw_params());
    CHECK(testutil::max_rel_err(analytic, fd) < tol);
}

}  // namespace

TEST_CASE("gradients match finite differences for all three families") {
    Rng rng(2019);
    EvalRequest full;
    full.coef_mark = 1.0;
    full.coef_time = 1.0;
    full.coef_mse = 1.0;
    full.want_pred = true;

    for (int trial = 0; trial < 3; ++trial) {
        const auto seq = testutil::random_sequence(rng, 8, 3);

        HawkesModel hawkes(HawkesModel::Config{3, GapQuadrature{}},
                           HawkesParams::uniform(3, 0.4, 0.2, 1.3));
        check_model_gradient(hawkes, seq, full);

        RmtppStyleModel rmtpp(RmtppStyleModel::Config{3, 8, GapQuadrature{}}, 100 + trial);
        check_model_gradient(rmtpp, seq, full);

        LogNormMixModel mix(LogNormMixModel::Config{3, 8, 3, GapQuadrature{}}, 200 + trial);
        check_model_gradient(mix, seq, full);
    }
}

TEST_CASE("gradients are exact with dropout masks held fixed") {
    Rng rng(4);
    const auto seq = testutil::random_sequence(rng, 10, 3);
    RmtppStyleModel model(RmtppStyleModel::Config{3, 8, GapQuadrature{}}, 17);
    EvalRequest req;
    req.coef_mark = 1.0;
    req.coef_time = 1.0;
    req.training = true;
    req.dropout_rate = 0.5;
    req.dropout_seed = 999;
    check_model_gradient(model, seq, req);
}

TEST_CASE("checkpoints round-trip every family exactly") {
    Rng rng(3);
    const auto seq = testutil::random_sequence(rng, 6, 2);
    std::vector<std::unique_ptr<TppModel>> models;
    models.push_back(std::make_unique<HawkesModel>(HawkesModel::Config{2, GapQuadrature{}},
                                                   HawkesParams::uniform(2, 0.3, 0.1, 1.0)));
    models.push_back(
        std::make_unique<RmtppStyleModel>(RmtppStyleModel::Config{2, 8, GapQuadrature{}}, 5));
    models.push_back(
        std::make_unique<LogNormMixModel>(LogNormMixModel::Config{2, 8, 2, GapQuadrature{}}, 6));
    for (const auto& model : models) {
        const auto j = checkpoint_json(*model);
        const auto reloaded = model_from_checkpoint(j);
        CHECK(reloaded->family() == model->family());
        REQUIRE(reloaded->raw_params() == model->raw_params());
        const auto a = model->evaluate(seq, EvalRequest{});
        const auto b = reloaded->evaluate(seq, EvalRequest{});
        REQUIRE(a.positions.size() == b.positions.size());
        for (std::size_t i = 0; i < a.positions.size(); ++i) {
            CHECK(a.positions[i].nll_time == b.positions[i].nll_time);
            CHECK(a.positions[i].nll_mark == b.positions[i].nll_mark);
        }
    }
}

TEST_CASE("model_nll surfaces non-finite densities with the event index") {
    // force a near-zero mixture scale so an off-mode gap underflows
    LogNormMixModel model(LogNormMixModel::Config{2, 4, 1, GapQuadrature{}}, 9);
    std::vector<double> raw = model.raw_params();
    raw[raw.size() - 1] = -360.0;  // b_logscale: z-score squared overflows
    model.set_raw_params(raw);
    TimedSequence seq;
    seq.push(1.0, 0);
    seq.push(1.0 + 1e-9, 1);
    CHECK_THROWS_AS(model_nll(model, seq), NumericalUnderflow);
}

TEST_CASE("generic simulation respects the horizon and merges blocks") {
    LogNormMixModel model(LogNormMixModel::Config{31, 8, 2, GapQuadrature{}}, 23);
    const auto events = simulate_thinning(model, 0.0, 500.0, 2019, "sim-pool");
    for (std::uint64_t g : events.gaps()) CHECK(g >= 1);
    if (!events.empty()) CHECK(events.events.back().block <= 501);

    const auto again = simulate_thinning(model, 0.0, 500.0, 2019, "sim-pool");
    REQUIRE(again.size() == events.size());
    for (std::size_t i = 0; i < events.size(); ++i) {
        CHECK(again.events[i].block == events.events[i].block);
        CHECK(again.events[i].mark == events.events[i].mark);
    }
}
