#pragma once

#include <algorithm>
#include <cmath>
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

constexpr double kHalfLog2Pi = 0.9189385332046727;  // 0.5 ln(2 pi)

// Mixture of log-normals over the gap: weight logits u, means mu, log-scales
// s with sigma = e^s. Closed-form mean and sampling.
struct LogNormMixLaw {
    std::vector<double> u;
    std::vector<double> mu;
    std::vector<double> s;

    [[nodiscard]] std::size_t components() const { return u.size(); }

    [[nodiscard]] std::vector<double> weights() const {
        std::vector<double> w(u.size());
        const double lse = nn::log_sum_exp(u);
        for (std::size_t m = 0; m < u.size(); ++m) w[m] = std::exp(u[m] - lse);
        return w;
    }

    [[nodiscard]] double log_density(double d) const {
        if (!(d > 0.0)) return -std::numeric_limits<double>::infinity();
        const double ld = std::log(d);
        const double lse_u = nn::log_sum_exp(u);
        std::vector<double> terms(u.size());
        for (std::size_t m = 0; m < u.size(); ++m) {
            const double sigma = std::exp(s[m]);
            const double z = (ld - mu[m]) / sigma;
            terms[m] = (u[m] - lse_u) - 0.5 * z * z - ld - s[m] - kHalfLog2Pi;
        }
        return nn::log_sum_exp(terms);
    }

    // Component responsibilities at gap d (posterior over components).
    [[nodiscard]] std::vector<double> responsibilities(double d, double logf) const {
        const double ld = std::log(d);
        const double lse_u = nn::log_sum_exp(u);
        std::vector<double> rho(u.size());
        for (std::size_t m = 0; m < u.size(); ++m) {
            const double sigma = std::exp(s[m]);
            const double z = (ld - mu[m]) / sigma;
            rho[m] = std::exp((u[m] - lse_u) - 0.5 * z * z - ld - s[m] - kHalfLog2Pi - logf);
        }
        return rho;
    }

    [[nodiscard]] double mean() const {
        const auto w = weights();
        double out = 0.0;
        for (std::size_t m = 0; m < u.size(); ++m) {
            const double sigma = std::exp(s[m]);
            out += w[m] * std::exp(std::min(mu[m] + 0.5 * sigma * sigma, 700.0));
        }
        return std::max(out, 1e-300);
    }

    [[nodiscard]] double sample(Rng& rng) const {
        const auto w = weights();
        const std::size_t m = rng.categorical(w);
        return std::exp(mu[m] + std::exp(s[m]) * rng.normal());
    }
};

}  // namespace detail

// Intensity-free family: the history feature trunk feeds a categorical mark
// head and a log-normal mixture over the next gap.
class LogNormMixModel final : public TppModel {
public:
    struct Config {
        int num_marks = 31;
        int hidden_size = 64;
        int components = 3;
        GapQuadrature quad;
    };

    LogNormMixModel(Config config, std::uint64_t init_seed)
        : config_(config), feat_{config.num_marks}, grid_(config.quad.build()) {
        const int F = feat_.dim(), H = config.hidden_size, K = config.num_marks,
                  M = config.components;
        raw_.assign(param_count(), 0.0);
        Rng rng(init_seed);
        nn::glorot_fill(std::span(raw_).subspan(off_w1(), static_cast<std::size_t>(H) * F), H, F,
                        rng);
        nn::glorot_fill(std::span(raw_).subspan(off_wm(), static_cast<std::size_t>(K) * H), K, H,
                        rng);
        nn::glorot_fill(std::span(raw_).subspan(off_wu(), static_cast<std::size_t>(M) * H), M, H,
                        rng);
        nn::glorot_fill(std::span(raw_).subspan(off_wmu(), static_cast<std::size_t>(M) * H), M, H,
                        rng);
        nn::glorot_fill(std::span(raw_).subspan(off_ws(), static_cast<std::size_t>(M) * H), M, H,
                        rng);
        // spread the component means so the mixture starts multi-scale
        for (int m = 0; m < M; ++m) raw_[off_bmu() + m] = static_cast<double>(m);
    }

    [[nodiscard]] std::string family() const override { return "lognorm_mix"; }
    [[nodiscard]] int num_marks() const override { return config_.num_marks; }

    [[nodiscard]] std::size_t param_count() const override {
        const std::size_t F = feat_.dim(), H = config_.hidden_size, K = config_.num_marks,
                          M = config_.components;
        return H * F + H + K * H + K + 3 * (M * H + M);
    }

    [[nodiscard]] std::vector<std::string> param_names() const override {
        std::vector<std::string> names;
        names.reserve(param_count());
        append_matrix(names, "w1", config_.hidden_size, feat_.dim());
        append_vector(names, "b1", config_.hidden_size);
        append_matrix(names, "w_mark", config_.num_marks, config_.hidden_size);
        append_vector(names, "b_mark", config_.num_marks);
        append_matrix(names, "w_weight", config_.components, config_.hidden_size);
        append_vector(names, "b_weight", config_.components);
        append_matrix(names, "w_mean", config_.components, config_.hidden_size);
        append_vector(names, "b_mean", config_.components);
        append_matrix(names, "w_logscale", config_.components, config_.hidden_size);
        append_vector(names, "b_logscale", config_.components);
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
                {"components", config_.components},
                {"quad", {{"min_gap", config_.quad.min_gap},
                          {"max_gap", config_.quad.max_gap},
                          {"num_nodes", config_.quad.num_nodes}}}};
    }

    SequenceEval evaluate(const TimedSequence& seq, const EvalRequest& req,
                          std::span<double> grad = {}) const override {
        SequenceEval eval;
        if (seq.size() < 2) return eval;
        const int H = config_.hidden_size, K = config_.num_marks, M = config_.components;
        const bool want_grad = !grad.empty();
        const bool want_pred = req.want_pred || req.coef_mse != 0.0;
        if (want_grad && grad.size() != param_count()) {
            throw std::invalid_argument("gradient buffer size mismatch");
        }

        const auto W1 = cspan(off_w1(), static_cast<std::size_t>(H) * feat_.dim());
        const auto b1 = cspan(off_b1(), H);
        const auto Wm = cspan(off_wm(), static_cast<std::size_t>(K) * H);
        const auto bm = cspan(off_bm(), K);
        const auto Wu = cspan(off_wu(), static_cast<std::size_t>(M) * H);
        const auto bu = cspan(off_bu(), M);
        const auto Wmu = cspan(off_wmu(), static_cast<std::size_t>(M) * H);
        const auto bmu = cspan(off_bmu(), M);
        const auto Ws = cspan(off_ws(), static_cast<std::size_t>(M) * H);
        const auto bs = cspan(off_bs(), M);

        const std::size_t n_pos = seq.size() - 1;
        std::vector<TrunkCache> caches(n_pos);
        std::vector<std::vector<double>> logpis(n_pos);
        std::vector<detail::LogNormMixLaw> laws(n_pos);
        std::vector<double> preds(n_pos, 0.0);

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

            detail::LogNormMixLaw law;
            law.u.resize(M);
            law.mu.resize(M);
            law.s.resize(M);
            nn::linear_forward(Wu, bu, caches[i].h, law.u);
            nn::linear_forward(Wmu, bmu, caches[i].h, law.mu);
            nn::linear_forward(Ws, bs, caches[i].h, law.s);

            const double delta = seq.times[i + 1] - seq.times[i];
            const int y = seq.marks[i + 1];

            PositionEval pos;
            pos.true_gap = delta;
            pos.true_mark = y;
            pos.nll_mark = -logits[y];
            pos.nll_time = -law.log_density(delta);
            if (want_pred) {
                preds[i] = law.mean();
                pos.pred_gap = preds[i];
                pos.pred_mark = argmax(logits);
            }
            logpis[i] = std::move(logits);
            laws[i] = std::move(law);
            eval.positions.push_back(pos);
        }

        if (want_grad) {
            auto gW1 = grad.subspan(off_w1(), static_cast<std::size_t>(H) * feat_.dim());
            auto gb1 = grad.subspan(off_b1(), H);
            auto gWm = grad.subspan(off_wm(), static_cast<std::size_t>(K) * H);
            auto gbm = grad.subspan(off_bm(), K);
            auto gWu = grad.subspan(off_wu(), static_cast<std::size_t>(M) * H);
            auto gbu = grad.subspan(off_bu(), M);
            auto gWmu = grad.subspan(off_wmu(), static_cast<std::size_t>(M) * H);
            auto gbmu = grad.subspan(off_bmu(), M);
            auto gWs = grad.subspan(off_ws(), static_cast<std::size_t>(M) * H);
            auto gbs = grad.subspan(off_bs(), M);

            std::vector<double> dh(H), dlogits(K), du(M), dmu(M), ds(M);
            for (std::size_t i = 0; i < n_pos; ++i) {
                std::fill(dh.begin(), dh.end(), 0.0);
                std::fill(du.begin(), du.end(), 0.0);
                std::fill(dmu.begin(), dmu.end(), 0.0);
                std::fill(ds.begin(), ds.end(), 0.0);
                const double delta = seq.times[i + 1] - seq.times[i];
                const int y = seq.marks[i + 1];
                const auto& law = laws[i];

                if (req.coef_mark != 0.0) {
                    for (int k = 0; k < K; ++k) {
                        dlogits[k] = req.coef_mark *
                                     (std::exp(logpis[i][k]) - (k == y ? 1.0 : 0.0));
                    }
                    nn::linear_backward(Wm, caches[i].h, dlogits, gWm, gbm, dh);
                }

                if (req.coef_time != 0.0) {
                    const double logf = law.log_density(delta);
                    if (std::isfinite(logf)) {
                        const auto w = law.weights();
                        const auto rho = law.responsibilities(delta, logf);
                        const double ld = std::log(delta);
                        for (int m = 0; m < M; ++m) {
                            const double sigma = std::exp(law.s[m]);
                            const double z = (ld - law.mu[m]) / sigma;
                            du[m] += req.coef_time * -(rho[m] - w[m]);
                            dmu[m] += req.coef_time * -(rho[m] * z / sigma);
                            ds[m] += req.coef_time * -(rho[m] * (z * z - 1.0));
                        }
                    }
                }

                if (req.coef_mse != 0.0) {
                    const double coef = req.coef_mse * 2.0 * (preds[i] - delta);
                    if (coef != 0.0) {
                        const auto w = law.weights();
                        const double mean = preds[i];
                        for (int m = 0; m < M; ++m) {
                            const double sigma = std::exp(law.s[m]);
                            const double expo = law.mu[m] + 0.5 * sigma * sigma;
                            const double em = std::exp(std::min(expo, 700.0));
                            du[m] += coef * w[m] * (em - mean);
                            if (expo < 700.0) {  // past the clamp the mean is flat in (mu, s)
                                dmu[m] += coef * w[m] * em;
                                ds[m] += coef * w[m] * em * sigma * sigma;
                            }
                        }
                    }
                }

                nn::linear_backward(Wu, caches[i].h, du, gWu, gbu, dh);
                nn::linear_backward(Wmu, caches[i].h, dmu, gWmu, gbmu, dh);
                nn::linear_backward(Ws, caches[i].h, ds, gWs, gbs, dh);
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
        return {law_at(history).mean(), false};
    }

    [[nodiscard]] std::pair<double, int> sample_next(const TimedSequence& history,
                                                     Rng& rng) const override {
        const auto law = law_at(history);
        const double gap = law.sample(rng);
        std::vector<double> logpi = mark_log_probs(history);
        std::vector<double> probs(logpi.size());
        for (std::size_t k = 0; k < probs.size(); ++k) probs[k] = std::exp(logpi[k]);
        return {gap, static_cast<int>(rng.categorical(probs))};
    }

    [[nodiscard]] detail::LogNormMixLaw law_at(const TimedSequence& history) const {
        std::vector<double> h = encode(history);
        const int M = config_.components;
        detail::LogNormMixLaw law;
        law.u.resize(M);
        law.mu.resize(M);
        law.s.resize(M);
        nn::linear_forward(cspan(off_wu(), static_cast<std::size_t>(M) * config_.hidden_size),
                           cspan(off_bu(), M), h, law.u);
        nn::linear_forward(cspan(off_wmu(), static_cast<std::size_t>(M) * config_.hidden_size),
                           cspan(off_bmu(), M), h, law.mu);
        nn::linear_forward(cspan(off_ws(), static_cast<std::size_t>(M) * config_.hidden_size),
                           cspan(off_bs(), M), h, law.s);
        return law;
    }

private:
    [[nodiscard]] std::span<const double> cspan(std::size_t off, std::size_t n) const {
        return std::span(raw_).subspan(off, n);
    }

    [[nodiscard]] std::size_t off_w1() const { return 0; }
    [[nodiscard]] std::size_t off_b1() const {
        return static_cast<std::size_t>(config_.hidden_size) * feat_.dim();
    }
    [[nodiscard]] std::size_t off_wm() const { return off_b1() + config_.hidden_size; }
    [[nodiscard]] std::size_t off_bm() const {
        return off_wm() + static_cast<std::size_t>(config_.num_marks) * config_.hidden_size;
    }
    [[nodiscard]] std::size_t off_wu() const { return off_bm() + config_.num_marks; }
    [[nodiscard]] std::size_t off_bu() const {
        return off_wu() + static_cast<std::size_t>(config_.components) * config_.hidden_size;
    }
    [[nodiscard]] std::size_t off_wmu() const { return off_bu() + config_.components; }
    [[nodiscard]] std::size_t off_bmu() const {
        return off_wmu() + static_cast<std::size_t>(config_.components) * config_.hidden_size;
    }
    [[nodiscard]] std::size_t off_ws() const { return off_bmu() + config_.components; }
    [[nodiscard]] std::size_t off_bs() const {
        return off_ws() + static_cast<std::size_t>(config_.components) * config_.hidden_size;
    }

    [[nodiscard]] std::vector<double> encode(const TimedSequence& history) const {
        std::vector<double> x = history_features(history, feat_);
        TrunkCache cache;
        trunk_forward(cspan(off_w1(), static_cast<std::size_t>(config_.hidden_size) * feat_.dim()),
                      cspan(off_b1(), config_.hidden_size), x, false, 0.0, nullptr, cache);
        return cache.h;
    }

    static int argmax(std::span<const double> v) {
        int best = 0;
        for (std::size_t k = 1; k < v.size(); ++k) {
            if (v[k] > v[best]) best = static_cast<int>(k);
        }
        return best;
    }

    static void append_matrix(std::vector<std::string>& names, const std::string& base, int rows,
                              int cols) {
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                names.push_back(base + "[" + std::to_string(r) + "][" + std::to_string(c) + "]");
            }
        }
    }
    static void append_vector(std::vector<std::string>& names, const std::string& base, int n) {
        for (int i = 0; i < n; ++i) names.push_back(base + "[" + std::to_string(i) + "]");
    }

    Config config_;
    FeatureConfig feat_;
    GapQuadrature::Grid grid_;
    std::vector<double> raw_;
};

}  // namespace tpp
}  // namespace ammtpp
