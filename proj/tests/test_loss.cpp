#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "ammtpp/loss.hpp"
#include "ammtpp/train.hpp"
#include "helpers.hpp"
#include "stub_model.hpp"

using namespace ammtpp;
using namespace ammtpp::loss;
using Catch::Approx;

namespace {

tpp::TimedSequence constant_gap_sequence(std::size_t n, double gap, int mark) {
    tpp::TimedSequence seq;
    for (std::size_t i = 0; i < n; ++i) seq.push(gap * static_cast<double>(i + 1), mark);
    return seq;
}

}  // namespace

TEST_CASE("compute_terms: perfect predictors and the uniform-mark oracle") {
    // mark distribution concentrated on the observed class: mark_nll ~ 0
    std::vector<double> sharp(31, 1e-12);
    sharp[4] = 1.0 - 30e-12;
    testutil::StubModel perfect_marks(sharp, 1.0);
    const auto seq = constant_gap_sequence(5, 1.0, 4);
    auto batch = PaddedBatch::from_sequences(std::vector<tpp::TimedSequence>{seq});
    auto terms = compute_terms(perfect_marks, batch, Reduction::Sum);
    CHECK(terms.mark_nll == Approx(0.0).margin(1e-9));

    // gap predictions equal to the true gaps: mse = 0 (rate 1 => pred 1)
    CHECK(terms.time_mse == Approx(0.0).margin(1e-18));

    // uniform marks over 31 classes, 4 scored events, sum reduction
    std::vector<double> uniform(31, 1.0 / 31.0);
    testutil::StubModel uniform_marks(uniform, 1.0);
    const auto seq5 = constant_gap_sequence(5, 1.0, 7);
    auto b5 = PaddedBatch::from_sequences(std::vector<tpp::TimedSequence>{seq5});
    auto t5 = compute_terms(uniform_marks, b5, Reduction::Sum);
    CHECK(t5.n_events == 4);
    CHECK(t5.mark_nll == Approx(4.0 * std::log(31.0)).epsilon(1e-12));
    CHECK(t5.mark_nll == Approx(13.736).margin(1e-3));
}

TEST_CASE("padding is masked out exactly") {
    std::vector<double> probs(31, 1.0 / 31.0);
    testutil::StubModel model(probs, 0.5);
    std::vector<tpp::TimedSequence> seqs = {constant_gap_sequence(6, 2.0, 3),
                                            constant_gap_sequence(3, 5.0, 9)};
    auto unpadded = PaddedBatch::from_sequences(seqs);
    // append extra pad positions by hand to every row
    auto padded = unpadded;
    for (std::size_t r = 0; r < padded.rows(); ++r) {
        for (int extra = 0; extra < 4; ++extra) {
            padded.times[r].push_back(padded.times[r].back() + 1.0);
            padded.marks[r].push_back(padded.pad_id);
        }
    }
    const auto a = compute_terms(model, unpadded, Reduction::Sum);
    const auto b = compute_terms(model, padded, Reduction::Sum);
    CHECK(a.n_events == b.n_events);
    CHECK(a.mark_nll == b.mark_nll);
    CHECK(a.time_nll == b.time_nll);
    CHECK(a.time_mse == b.time_mse);
}

TEST_CASE("all-padded batches are rejected") {
    std::vector<double> probs(31, 1.0 / 31.0);
    testutil::StubModel model(probs, 0.5);
    PaddedBatch batch;
    batch.times = {{1.0, 2.0, 3.0}};
    batch.marks = {{batch.pad_id, batch.pad_id, batch.pad_id}};
    CHECK_THROWS_AS(compute_terms(model, batch), EmptyBatch);
}

TEST_CASE("combine_uwm: unit sigmas halve the term sum") {
    auto w = UncertaintyWeights::equal(3);
    for (std::size_t m = 0; m < 3; ++m) CHECK(w.sigma(m) == Approx(1.0).epsilon(1e-14));
    CHECK(w.s[0] == Approx(0.5413).margin(1e-4));

    const auto res = combine_uwm(std::vector<double>{2.0, 4.0, 6.0}, w);
    CHECK(res.value == Approx(6.0).margin(1e-12));

    CHECK(softplus(0.0) == Approx(std::log(2.0)).epsilon(1e-14));
}

TEST_CASE("combine_uwm is stationary at sigma_m^2 = l_m") {
    UncertaintyWeights w;
    w.s = {softplus_inverse(2.0), softplus_inverse(3.0), softplus_inverse(4.0)};
    const auto res = combine_uwm(std::vector<double>{4.0, 9.0, 16.0}, w);
    for (double g : res.grad_s) CHECK(g == Approx(0.0).margin(1e-12));
}

TEST_CASE("combine_uwm gradient matches finite differences") {
    const std::vector<double> terms = {0.7, 5.0, 123.0};
    auto value_at = [&](const std::vector<double>& s) {
        UncertaintyWeights w;
        w.s = s;
        return combine_uwm(terms, w).value;
    };
    const std::vector<double> s0 = {0.3, -0.8, 1.7};
    UncertaintyWeights w;
    w.s = s0;
    const auto res = combine_uwm(terms, w);
    const auto fd = testutil::fd_gradient(value_at, s0, 1e-6);
    CHECK(testutil::max_rel_err(res.grad_s, fd) < 1e-6);
}

TEST_CASE("minimizing over s reaches the envelope value") {
    const std::vector<double> terms = {4.0, 9.0, 25.0};
    UncertaintyWeights w = UncertaintyWeights::equal(3);
    train::AdamState adam(3);
    for (int iter = 0; iter < 40000; ++iter) {
        const auto res = combine_uwm(terms, w);
        train::adam_step(w.s, res.grad_s, adam, 0.01);
    }
    double envelope = 0.0;
    for (double t : terms) envelope += 0.5 * (1.0 + std::log(t));
    CHECK(combine_uwm(terms, w).value == Approx(envelope).margin(1e-8));
    for (std::size_t m = 0; m < 3; ++m) {
        CHECK(w.sigma(m) * w.sigma(m) == Approx(terms[m]).epsilon(1e-4));
    }
}

TEST_CASE("objective variants select their terms") {
    LossTerms terms;
    terms.mark_nll = 1.0;
    terms.time_nll = 2.0;
    terms.time_mse = 99.0;

    const auto nll = build_objective(ObjectiveVariant::Nll);
    CHECK(nll.value(terms, {}) == Approx(3.0));
    CHECK(nll.sigma_count() == 0);
    CHECK_FALSE(nll.uses_mse());

    const auto uw_nll = build_objective(ObjectiveVariant::UwNll);
    std::vector<double> s(2, softplus_inverse(1.0));
    LossTerms two;
    two.mark_nll = 2.0;
    two.time_nll = 4.0;
    two.time_mse = 12345.0;  // must be ignored
    CHECK(uw_nll.value(two, s) == Approx(3.0).margin(1e-12));
    CHECK(uw_nll.term_coefficients(s)[2] == 0.0);

    const auto uwm = build_objective(ObjectiveVariant::Uwm);
    std::vector<double> s3(3, softplus_inverse(1.0));
    CHECK(uwm.value(terms, s3) == Approx(0.5 * (1.0 + 2.0 + 99.0)).margin(1e-10));
    const auto coefs = uwm.term_coefficients(s3);
    CHECK(coefs[0] == Approx(0.5).margin(1e-12));

    const auto fixed = build_objective(ObjectiveVariant::FixedSigma, {1.0, 2.0, 3.0});
    CHECK(fixed.sigma_count() == 0);
    CHECK(fixed.value(terms, {}) ==
          Approx(0.5 * (1.0 / 1.0 + 2.0 / 4.0 + 99.0 / 9.0) + std::log(2.0) + std::log(3.0))
              .margin(1e-10));

    CHECK_THROWS_AS(build_objective(ObjectiveVariant::FixedSigma, {1.0, -2.0, 3.0}),
                    InvalidWeights);
    CHECK_THROWS_AS(build_objective(ObjectiveVariant::FixedSigma, {1.0}), InvalidWeights);
}

TEST_CASE("uwm sigma gradients agree with finite differences through the objective") {
    const auto uwm = build_objective(ObjectiveVariant::Uwm);
    LossTerms terms;
    terms.mark_nll = 3.4;
    terms.time_nll = 4.7;
    terms.time_mse = 148.5;
    const std::vector<double> s0 = {0.2, 0.9, -0.4};
    std::vector<double> analytic(3, 0.0);
    uwm.sigma_grad(terms, s0, analytic);
    const auto fd = testutil::fd_gradient(
        [&](const std::vector<double>& s) { return uwm.value(terms, s); }, s0, 1e-6);
    CHECK(testutil::max_rel_err(analytic, fd) < 1e-6);
}
