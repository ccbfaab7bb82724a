#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/encoder.hpp"
#include "ammtpp/tpp/model.hpp"

namespace ammtpp {
namespace tpp {

namespace detail {

// expm1(q)/q with a series for small |q|.
inline double phi0(double q) {
    if (std::abs(q) < 1e-5) return 1.0 + q / 2.0 + q * q / 6.0 + q * q * q / 24.0;
    return std::expm1(q) / q;
}

// (q e^q - expm1(q)) / q^2 with a series for small |q|.
inline double phi1(double q) {
    if (std::abs(q) < 1e-5) return 0.5 + q / 3.0 + q * q / 8.0 + q * q * q / 30.0;
    return (q * std::exp(q) - std::expm1(q)) / (q * q);
}

// Gompertz-type gap law with intensity exp(c + w d): the classic recurrent
// TPP time head. Cumulative hazard H(d) = e^c d phi0(w d).
struct ExpSlopeGapLaw {
    double c = 0.0;
    double w = 0.0;

    [[nodiscard]] double cumulative_hazard(double d) const {
        return std::exp(c) * d * phi0(w * d);
    }

    [[nodiscard]] double log_density(double d) const {
        return c + w * d - cumulative_hazard(d);
    }

    [[nodiscard]] double dlogf_dc(double d) const { return 1.0 - cumulative_hazard(d); }

    [[nodiscard]] double dlogf_dw(double d) const {
        return d - d * d * std::exp(c) * phi1(w * d);
    }

    // Mass escaping to infinity; zero for w >= 0.
    [[nodiscard]] double tail_mass() const {
        return w < 0.0 ? std::exp(std::exp(c) / w) : 0.0;
    }

    enum class PredBranch { Expectation, Median, ConditionalMean };

    [[nodiscard]] PredBranch branch() const {
        const double tail = tail_mass();
        if (tail < 1e-12) return PredBranch::Expectation;
        return tail <= 0.5 ? PredBranch::Median : PredBranch::ConditionalMean;
    }

    [[nodiscard]] GapPrediction predict(const GapQuadrature::Grid& grid) const {
        switch (branch()) {
            case PredBranch::Expectation: {
                double num = 0.0;
                for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
                    const double f = std::exp(log_density(grid.nodes[i]));
                    if (f < 1e-300) continue;
                    num += grid.weights[i] * grid.nodes[i] * f;
                }
                return {std::max(num, grid.nodes.front()), false};
            }
            case PredBranch::Median: {
                // H(d) = ln 2  =>  d = log1p(w ln2 e^{-c}) / w
                const double arg = w * std::log(2.0) * std::exp(-c);
                return {std::log1p(arg) / w, true};
            }
            case PredBranch::ConditionalMean: {
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
                    const double f = std::exp(log_density(grid.nodes[i]));
                    if (f < 1e-300) continue;
                    num += grid.weights[i] * grid.nodes[i] * f;
                    den += grid.weights[i] * f;
                }
                if (den <= 1e-300) return {grid.nodes.back(), true};
                return {num / den, true};
            }
        }
        return {grid.nodes.front(), false};
    }

    // (d pred / dc, d pred / dw) matching the branch taken by predict().
    [[nodiscard]] std::pair<double, double> predict_grad(const GapQuadrature::Grid& grid,
                                                         const GapPrediction& pred) const {
        switch (branch()) {
            case PredBranch::Expectation: {
                double dc = 0.0, dw = 0.0;
                for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
                    const double d = grid.nodes[i];
                    const double f = std::exp(log_density(d));
                    if (f < 1e-300) continue;
                    const double wdf = grid.weights[i] * d * f;
                    dc += wdf * dlogf_dc(d);
                    dw += wdf * dlogf_dw(d);
                }
                return {dc, dw};
            }
            case PredBranch::Median: {
                const double a = std::exp(c + w * pred.gap);
                const double ln2 = std::log(2.0);
                return {-ln2 / a, -pred.gap / w + ln2 / (w * a)};
            }
            case PredBranch::ConditionalMean: {
                double num = 0.0, den = 0.0, dnum_c = 0.0, dnum_w = 0.0, dden_c = 0.0,
                       dden_w = 0.0;
                for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
                    const double d = grid.nodes[i];
                    const double f = std::exp(log_density(d));
                    if (f < 1e-300) continue;
                    const double gc = dlogf_dc(d);
                    const double gw = dlogf_dw(d);
                    num += grid.weights[i] * d * f;
                    den += grid.weights[i] * f;
                    dnum_c += grid.weights[i] * d * f * gc;
                    dnum_w += grid.weights[i] * d * f * gw;
                    dden_c += grid.weights[i] * f * gc;
                    dden_w += grid.weights[i] * f * gw;
                }
                if (den <= 1e-300) return {0.0, 0.0};
                return {(dnum_c * den - num * dden_c) / (den * den),
                        (dnum_w * den - num * dden_w) / (den * den)};
            }
        }
        return {0.0, 0.0};
    }

    // Closed-form inverse CDF; +inf when the draw lands in the defective tail.
    [[nodiscard]] double sample_gap(double u) const {
        const double h = -std::log1p(-u);
        if (std::abs(w) < 1e-12) return h * std::exp(-c);
        const double arg = 1.0 + w * h * std::exp(-c);
        if (arg <= 0.0) return std::numeric_limits<double>::infinity();
        return std::log(arg) / w;
    }
};

}  // namespace detail

// Recurrent-style TPP: deterministic history features, one tanh layer, a
// categorical mark head, and an exponential-slope intensity time head.
class RmtppStyleModel final : public TppModel {
public:
    struct Config {
        int num_marks = 31;
        int hidden_size = 64;
        GapQuadrature quad;
    };

    RmtppStyleModel(Config config, std::uint64_t init_seed)
        : config_(config), feat_{config.num_marks}, grid_(config.quad.build()) {
        const int F = feat_.dim(), H = config.hidden_size, K = config.num_marks;
        raw_.assign(param_count(), 0.0);
        Rng rng(init_seed);
        nn::glorot_fill(std::span(raw_).subspan(off_w1(), static_cast<std::size_t>(H) * F), H, F,
                        rng);
        nn::glorot_fill(std::span(raw_).subspan(off_wm(), static_cast<std::size_t>(K) * H), K, H,
                        rng);
        nn::glorot_fill(std::span(raw_).subspan(off_wt(), H), 1, H, rng);
        raw_[off_slope()] = 0.1;
    }

    [[nodiscard]] std::string family() const override { return "rmtpp_style"; }
    [[nodiscard]] int num_marks() const override { return config_.num_marks; }

    [[nodiscard]] std::size_t param_count() const override {
        const std::size_t F = feat_.dim(), H = config_.hidden_size, K = config_.num_marks;
        return H * F + H + K * H + K + H + 1 + 1;
    }

    [[nodiscard]] std::vector<std::string> param_names() const override {
        std::vector<std::string> names;
        names.reserve(param_count());
        append_matrix_names(names, "w1", config_.hidden_size, feat_.dim());
        append_vector_names(names, "b1", config_.hidden_size);
        append_matrix_names(names, "w_mark", config_.num_marks, config_.hidden_size);
        append_vector_names(names, "b_mark", config_.num_marks);
        append_vector_names(names, "w_time", config_.hidden_size);
        names.push_back("b_time");
        names.push_back("slope");
        return names;
    }

    [[nodiscard]] const std::vector<double>& raw_params() const override { return raw_; }

    void set_raw_params(std::span<const double> values) override {
        if (values.size() != raw_.size()) throw std::invalid_argument("parameter size mismatch");
        raw_.assign(values.begin(), values.end());
    }

    [[nodiscard]] nlohmann::json config_json() const override {
        return {{"num_marks", config_.num_marks},
                {"hidden_size", config_.hidden_size},
                {"quad", {{"min_gap", config_.quad.min_gap},
                          {"max_gap", config_.quad.max_gap},
                          {"num_nodes", config_.quad.num_nodes}}}};
    }

    SequenceEval evaluate(const TimedSequence& seq, const EvalRequest& req,
                          std::span<double> grad = {}) const override {
        SequenceEval eval;
        if (seq.size() < 2) return eval;
        const int H = config_.hidden_size, K = config_.num_marks;
        const bool want_grad = !grad.empty();
        const bool want_pred = req.want_pred || req.coef_mse != 0.0;
        if (want_grad && grad.size() != param_count()) {
            throw std::invalid_argument("gradient buffer size mismatch");
        }

        const auto W1 = cspan(off_w1(), static_cast<std::size_t>(H) * feat_.dim());
        const auto b1 = cspan(off_b1(), H);
        const auto Wm = cspan(off_wm(), static_cast<std::size_t>(K) * H);
        const auto bm = cspan(off_bm(), K);
        const auto wt = cspan(off_wt(), H);
        const double bt = raw_[off_bt()];
        const double slope = raw_[off_slope()];

        const std::size_t n_pos = seq.size() - 1;
        std::vector<TrunkCache> caches(n_pos);
        std::vector<std::vector<double>> logpis(n_pos);
        std::vector<double> cs(n_pos), preds(n_pos, 0.0);
        std::vector<GapPrediction> pred_info(n_pos);

        Rng dropout_rng(req.dropout_seed);
        Rng* drop = req.training && req.dropout_rate > 0.0 ? &dropout_rng : nullptr;

        FeatureState fstate;
        std::vector<double> x(feat_.dim());
        for (std::size_t i = 0; i < n_pos; ++i) {
            fstate.push(i == 0 ? -1.0 : seq.times[i] - seq.times[i - 1], seq.marks[i]);
            fstate.fill(feat_, x);
            trunk_forward(W1, b1, x, req.training, req.dropout_rate, drop, caches[i]);

            std::vector<double> logits(K);
            nn::linear_forward(Wm, bm, caches[i].h, logits);
            const double lse = nn::log_sum_exp(logits);
            for (auto& v : logits) v -= lse;

            double c = bt;
            for (int j = 0; j < H; ++j) c += wt[j] * caches[i].h[j];
            cs[i] = c;

            const double delta = seq.times[i + 1] - seq.times[i];
            const int y = seq.marks[i + 1];
            const detail::ExpSlopeGapLaw law{c, slope};

            PositionEval pos;
            pos.true_gap = delta;
            pos.true_mark = y;
            pos.nll_mark = -logits[y];
            pos.nll_time = -law.log_density(delta);
            if (want_pred) {
                pred_info[i] = law.predict(grid_);
                preds[i] = pred_info[i].gap;
                pos.pred_gap = pred_info[i].gap;
                pos.pred_from_median = pred_info[i].from_median;
                pos.pred_mark = argmax(logits);
            }
            logpis[i] = std::move(logits);
            eval.positions.push_back(pos);
        }

        if (want_grad) {
            auto gW1 = subspan(grad, off_w1(), static_cast<std::size_t>(H) * feat_.dim());
            auto gb1 = subspan(grad, off_b1(), H);
            auto gWm = subspan(grad, off_wm(), static_cast<std::size_t>(K) * H);
            auto gbm = subspan(grad, off_bm(), K);
            auto gwt = subspan(grad, off_wt(), H);

            std::vector<double> dh(H), dlogits(K);
            for (std::size_t i = 0; i < n_pos; ++i) {
                std::fill(dh.begin(), dh.end(), 0.0);
                const double delta = seq.times[i + 1] - seq.times[i];
                const int y = seq.marks[i + 1];
                const detail::ExpSlopeGapLaw law{cs[i], slope};

                if (req.coef_mark != 0.0) {
                    for (int k = 0; k < K; ++k) {
                        dlogits[k] = req.coef_mark *
                                     (std::exp(logpis[i][k]) - (k == y ? 1.0 : 0.0));
                    }
                    nn::linear_backward(Wm, caches[i].h, dlogits, gWm, gbm, dh);
                }

                double dc = 0.0, dw = 0.0;
                if (req.coef_time != 0.0) {
                    dc += req.coef_time * -law.dlogf_dc(delta);
                    dw += req.coef_time * -law.dlogf_dw(delta);
                }
                if (req.coef_mse != 0.0) {
                    const double coef = req.coef_mse * 2.0 * (preds[i] - delta);
                    if (coef != 0.0) {
                        const auto [pc, pw] = law.predict_grad(grid_, pred_info[i]);
                        dc += coef * pc;
                        dw += coef * pw;
                    }
                }
                if (dc != 0.0) {
                    for (int j = 0; j < H; ++j) {
                        gwt[j] += dc * caches[i].h[j];
                        dh[j] += dc * wt[j];
                    }
                    grad[off_bt()] += dc;
                }
                grad[off_slope()] += dw;

                trunk_backward(W1, caches[i], dh, gW1, gb1);
            }
        }
        return eval;
    }

    [[nodiscard]] std::vector<double> mark_log_probs(const TimedSequence& history) const override {
        std::vector<double> h = encode(history);
        std::vector<double> logits(config_.num_marks);
        nn::linear_forward(cspan(off_wm(), static_cast<std::size_t>(config_.num_marks) *
                                               config_.hidden_size),
                           cspan(off_bm(), config_.num_marks), h, logits);
        const double lse = nn::log_sum_exp(logits);
        for (auto& v : logits) v -= lse;
        return logits;
    }

    [[nodiscard]] double gap_log_density(const TimedSequence& history, double gap) const override {
        return law_at(history).log_density(gap);
    }

    [[nodiscard]] GapPrediction gap_point_prediction(const TimedSequence& history) const override {
        return law_at(history).predict(grid_);
    }

    [[nodiscard]] std::pair<double, int> sample_next(const TimedSequence& history,
                                                     Rng& rng) const override {
        const auto law = law_at(history);
        const double gap = law.sample_gap(rng.uniform());
        std::vector<double> logpi = mark_log_probs(history);
        std::vector<double> probs(logpi.size());
        for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = std::exp(logpi[k]);
        return {gap, static_cast<int>(rng.categorical(probs))};
    }

    // Intensity of the time head at elapsed time `s` past the last event.
    [[nodiscard]] double intensity(const TimedSequence& history, double s) const {
        const auto law = law_at(history);
        return std::exp(law.c + law.w * s);
    }

private:
    [[nodiscard]] std::span<const double> cspan(std::size_t off, std::size_t n) const {
        return std::span(raw_).subspan(off, n);
    }
    static std::span<double> subspan(std::span<double> s, std::size_t off, std::size_t n) {
        return s.subspan(off, n);
    }

    [[nodiscard]] std::size_t off_w1() const { return 0; }
    [[nodiscard]] std::size_t off_b1() const {
        return static_cast<std::size_t>(config_.hidden_size) * feat_.dim();
    }
    [[nodiscard]] std::size_t off_wm() const { return off_b1() + config_.hidden_size; }
    [[nodiscard]] std::size_t off_bm() const {
        return off_wm() + static_cast<std::size_t>(config_.num_marks) * config_.hidden_size;
    }
    [[nodiscard]] std::size_t off_wt() const { return off_bm() + config_.num_marks; }
    [[nodiscard]] std::size_t off_bt() const { return off_wt() + config_.hidden_size; }
    [[nodiscard]] std::size_t off_slope() const { return off_bt() + 1; }

    [[nodiscard]] std::vector<double> encode(const TimedSequence& history) const {
        std::vector<double> x = history_features(history, feat_);
        TrunkCache cache;
        trunk_forward(cspan(off_w1(), static_cast<std::size_t>(config_.hidden_size) * feat_.dim()),
                      cspan(off_b1(), config_.hidden_size), x, false, 0.0, nullptr, cache);
        return cache.h;
    }

    [[nodiscard]] detail::ExpSlopeGapLaw law_at(const TimedSequence& history) const {
        std::vector<double> h = encode(history);
        double c = raw_[off_bt()];
        const auto wt = cspan(off_wt(), config_.hidden_size);
        for (int j = 0; j < config_.hidden_size; ++j) c += wt[j] * h[j];
        return {c, raw_[off_slope()]};
    }

    static int argmax(std::span<const double> v) {
        int best = 0;
        for (std::size_t k = 1; k < v.size(); ++k) {
            if (v[k] > v[best]) best = static_cast<int>(k);
        }
        return best;
    }

    static void append_matrix_names(std::vector<std::string>& names, const std::string& base,
                                    int rows, int cols) {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                names.push_back(base + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
            }
        }
    }
    static void append_vector_names(std::vector<std::string>& names, const std::string& base,
                                    int n) {
        for (int i = 0; i < n; ++i) names.push_back(base + "[" + std::to_string(i) + "]");
    }

    Config config_;
    FeatureConfig feat_;
    GapQuadrature::Grid grid_;
    std::vector<double> raw_;
};

}  // namespace tpp
}  // namespace ammtpp
