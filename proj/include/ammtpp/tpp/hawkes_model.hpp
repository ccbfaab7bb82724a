#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/hawkes.hpp"
#include "ammtpp/tpp/model.hpp"

namespace ammtpp {
namespace tpp {

namespace detail {

// Conditional gap law after a Hawkes history reduces to three scalars:
//   lambda_tot(d) = M + B e^{-beta d},   H(d) = M d + B (1 - e^{-beta d}) / beta.
struct HawkesGapLaw {
    double M = 0.0;
    double B = 0.0;
    double beta = 1.0;

    [[nodiscard]] double log_density(double d) const {
        const double e = std::exp(-beta * d);
        const double lam = M + B * e;
        if (!(lam > 0.0)) return -std::numeric_limits<double>::infinity();
        return std::log(lam) - M * d - B * (1.0 - e) / beta;
    }

    // Point prediction: expectation by quadrature when the density is
    // proper, median when the tail keeps mass but still crosses 1/2,
    // grid-conditional mean otherwise.
    [[nodiscard]] GapPrediction predict(const GapQuadrature::Grid& grid) const {
        if (M + B <= 1e-300) return {grid.nodes.back(), true};
        if (M <= 1e-300) {
            const double tail_mass = std::exp(-B / beta);
            if (tail_mass > 1e-12) {
                if (tail_mass <= 0.5) {
                    const double e_med = 1.0 - beta * std::log(2.0) / B;
                    return {-std::log(e_med) / beta, true};
                }
                double num = 0.0, den = 0.0;
                for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
                    const double f = std::exp(log_density(grid.nodes[i]));
                    num += grid.weights[i] * grid.nodes[i] * f;
                    den += grid.weights[i] * f;
                }
                if (den <= 1e-300) return {grid.nodes.back(), true};
                return {num / den, true};
            }
        }
        double num = 0.0;
        for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
            num += grid.weights[i] * grid.nodes[i] * std::exp(log_density(grid.nodes[i]));
        }
        return {std::max(num, grid.nodes.front()), false};
    }
};

}  // namespace detail

// Trainable Hawkes family. The optimizer sees softplus-reparameterized raw
// values; construction from natural parameters (including exact zeros for
// the Poisson reduction) goes through the math layer in hawkes.hpp.
class HawkesModel final : public TppModel {
public:
    struct Config {
        int num_marks = 31;
        GapQuadrature quad;
    };

    HawkesModel(Config config, const HawkesParams& natural)
        : config_(config), grid_(config.quad.build()) {
        if (natural.num_marks != config.num_marks) {
            throw std::invalid_argument("mark count mismatch");
        }
        raw_.resize(param_count());
        const std::size_t kk = static_cast<std::size_t>(config.num_marks) * config.num_marks;
        for (int k = 0; k < config.num_marks; ++k) raw_[k] = to_raw(natural.mu[k]);
        for (std::size_t i = 0; i < kk; ++i) raw_[config.num_marks + i] = to_raw(natural.alpha[i]);
        raw_.back() = to_raw(natural.beta);
    }

    static std::unique_ptr<HawkesModel> make_default(Config config, std::uint64_t seed) {
        Rng rng(seed);
        HawkesParams p;
        p.num_marks = config.num_marks;
        p.mu.resize(config.num_marks);
        p.alpha.resize(static_cast<std::size_t>(config.num_marks) * config.num_marks);
        for (auto& v : p.mu) v = rng.uniform(0.05, 0.2);
        for (auto& v : p.alpha) v = rng.uniform(0.01, 0.1) / config.num_marks;
        p.beta = rng.uniform(0.5, 2.0);
        return std::make_unique<HawkesModel>(config, p);
    }

    [[nodiscard]] std::string family() const override { return "hawkes"; }
    [[nodiscard]] int num_marks() const override { return config_.num_marks; }

    [[nodiscard]] std::size_t param_count() const override {
        const std::size_t k = config_.num_marks;
        return k + k * k + 1;
    }

    [[nodiscard]] std::vector<std::string> param_names() const override {
        std::vector<std::string> names;
        names.reserve(param_count());
        for (int k = 0; k < config_.num_marks; ++k) names.push_back("mu[" + std::to_string(k) + "]");
        for (int k = 0; k < config_.num_marks; ++k) {
            for (int m = 0; m < config_.num_marks; ++m) {
                names.push_back("alpha[" + std::to_string(k) + "][" + std::to_string(m) + "]");
            }
        }
        names.push_back("beta");
        return names;
    }

    [[nodiscard]] const std::vector<double>& raw_params() const override { return raw_; }

    void set_raw_params(std::span<const double> values) override {
        if (values.size() != raw_.size()) throw std::invalid_argument("parameter size mismatch");
        raw_.assign(values.begin(), values.end());
    }

    [[nodiscard]] nlohmann::json config_json() const override {
        return {{"num_marks", config_.num_marks},
                {"quad", {{"min_gap", config_.quad.min_gap},
                          {"max_gap", config_.quad.max_gap},
                          {"num_nodes", config_.quad.num_nodes}}}};
    }

    [[nodiscard]] HawkesParams natural_params() const {
        const int K = config_.num_marks;
        HawkesParams p;
        p.num_marks = K;
        p.mu.resize(K);
        p.alpha.resize(static_cast<std::size_t>(K) * K);
        for (int k = 0; k < K; ++k) p.mu[k] = softplus(raw_[k]);
        for (std::size_t i = 0; i < p.alpha.size(); ++i) p.alpha[i] = softplus(raw_[K + i]);
        p.beta = softplus(raw_.back());
        return p;
    }

    SequenceEval evaluate(const TimedSequence& seq, const EvalRequest& req,
                          std::span<double> grad = {}) const override {
        const HawkesParams p = natural_params();
        const int K = p.num_marks;
        const auto a_tot = p.alpha_column_totals();
        const double M = p.total_mu();
        const bool want_grad = !grad.empty();
        const bool want_pred = req.want_pred || req.coef_mse != 0.0;
        if (want_grad && grad.size() != param_count()) {
            throw std::invalid_argument("gradient buffer size mismatch");
        }

        SequenceEval eval;
        if (seq.size() < 2) return eval;
        eval.positions.reserve(seq.size() - 1);

        // gradient accumulators in natural parameters
        std::vector<double> gmu(want_grad ? K : 0, 0.0);
        std::vector<double> galpha(want_grad ? K * K : 0, 0.0);
        std::vector<double> gcol(want_grad ? K : 0, 0.0);  // broadcast adds per column
        double gbeta = 0.0;

        detail::HawkesState state(K);
        state.absorb(seq.marks[0]);
        std::vector<double> b_row(K, 0.0);

        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            const double delta = seq.times[i + 1] - seq.times[i];
            const int y = seq.marks[i + 1];

            double B = 0.0, Rt = 0.0;
            for (int m = 0; m < K; ++m) {
                B += a_tot[m] * state.g[m];
                Rt += a_tot[m] * state.r[m];
            }
            double b_y = 0.0, r_y = 0.0;
            for (int m = 0; m < K; ++m) {
                b_y += p.alpha[y * K + m] * state.g[m];
                r_y += p.alpha[y * K + m] * state.r[m];
            }

            const double E = std::exp(-p.beta * delta);
            const double lam_tot = M + B * E;
            const double lam_y = p.mu[y] + b_y * E;
            const detail::HawkesGapLaw law{M, B, p.beta};

            PositionEval pos;
            pos.true_gap = delta;
            pos.true_mark = y;
            pos.nll_time = lam_tot > 0.0
                               ? -std::log(lam_tot) + M * delta + B * (1.0 - E) / p.beta
                               : std::numeric_limits<double>::infinity();
            pos.nll_mark = (lam_y > 0.0 && lam_tot > 0.0)
                               ? -std::log(lam_y) + std::log(lam_tot)
                               : std::numeric_limits<double>::infinity();

            GapPrediction pred{0.0, false};
            if (want_pred) {
                pred = law.predict(grid_);
                pos.pred_gap = pred.gap;
                pos.pred_from_median = pred.from_median;
                const double e_hat = std::exp(-p.beta * pred.gap);
                int best = 0;
                double best_val = -std::numeric_limits<double>::infinity();
                for (int k = 0; k < K; ++k) {
                    double bk = 0.0;
                    for (int m = 0; m < K; ++m) bk += p.alpha[k * K + m] * state.g[m];
                    const double lk = p.mu[k] + bk * e_hat;
                    if (lk > best_val) {
                        best_val = lk;
                        best = k;
                    }
                }
                pos.pred_mark = best;
            }

            if (want_grad && lam_tot > 0.0 && lam_y > 0.0) {
                accumulate_position_grad(req, p, state, a_tot, law, delta, y, lam_tot, lam_y, E,
                                         B, Rt, b_y, r_y, pred, gmu, galpha, gcol, gbeta);
            }

            eval.positions.push_back(pos);
            state.advance(p.beta, delta);
            state.absorb(y);
        }

        if (want_grad) {
            for (int k = 0; k < K; ++k) {
                for (int m = 0; m < K; ++m) galpha[k * K + m] += gcol[m];
            }
            for (int k = 0; k < K; ++k) grad[k] += gmu[k] * logistic(raw_[k]);
            for (int i = 0; i < K * K; ++i) grad[K + i] += galpha[i] * logistic(raw_[K + i]);
            grad[param_count() - 1] += gbeta * logistic(raw_.back());
        }
        return eval;
    }

    [[nodiscard]] std::vector<double> mark_log_probs(const TimedSequence& history) const override {
        const HawkesParams p = natural_params();
        const GapPrediction pred = gap_point_prediction(history);
        return mark_log_probs_at(history, pred.gap);
    }

    // Intensity composition at the realized next-event time; used for the
    // teacher-forced mark term and for decode at the predicted gap.
    [[nodiscard]] std::vector<double> mark_log_probs_at(const TimedSequence& history,
                                                        double gap) const {
        const HawkesParams p = natural_params();
        const int K = p.num_marks;
        detail::HawkesState state = detail::state_at_end(p, history);
        const double e = std::exp(-p.beta * gap);
        std::vector<double> lam(K, 0.0);
        double total = 0.0;
        for (int k = 0; k < K; ++k) {
            double bk = 0.0;
            for (int m = 0; m < K; ++m) bk += p.alpha[k * K + m] * state.g[m];
            lam[k] = p.mu[k] + bk * e;
            total += lam[k];
        }
        std::vector<double> out(K);
        if (total <= 0.0) {
            const double u = -std::log(static_cast<double>(K));
            for (int k = 0; k < K; ++k) out[k] = u;
            return out;
        }
        for (int k = 0; k < K; ++k) {
            out[k] = lam[k] > 0.0 ? std::log(lam[k] / total)
                                  : -std::numeric_limits<double>::infinity();
        }
        return out;
    }

    [[nodiscard]] double gap_log_density(const TimedSequence& history, double gap) const override {
        return gap_law(history).log_density(gap);
    }

    [[nodiscard]] GapPrediction gap_point_prediction(const TimedSequence& history) const override {
        return gap_law(history).predict(grid_);
    }

    [[nodiscard]] std::pair<double, int> sample_next(const TimedSequence& history,
                                                     Rng& rng) const override {
        const HawkesParams p = natural_params();
        const int K = p.num_marks;
        detail::HawkesState state = detail::state_at_end(p, history);
        const auto a_tot = p.alpha_column_totals();
        const double M = p.total_mu();

        double elapsed = 0.0;
        for (int guard = 0; guard < 1000000; ++guard) {
            double bound = M;
            for (int m = 0; m < K; ++m) bound += a_tot[m] * state.g[m];
            if (bound <= 1e-15) return {std::numeric_limits<double>::infinity(), 0};
            const double step = rng.exponential(bound);
            elapsed += step;
            state.advance(p.beta, step);
            double lam_tot = M;
            for (int m = 0; m < K; ++m) lam_tot += a_tot[m] * state.g[m];
            if (rng.uniform() * bound <= lam_tot) {
                std::vector<double> lam(K, 0.0);
                for (int k = 0; k < K; ++k) {
                    lam[k] = p.mu[k];
                    for (int m = 0; m < K; ++m) lam[k] += p.alpha[k * K + m] * state.g[m];
                }
                return {elapsed, static_cast<int>(rng.categorical(lam))};
            }
        }
        throw NumericalUnderflow("thinning failed to accept within the guard limit");
    }

private:
    static double to_raw(double natural) {
        // softplus never reaches 0; clamp tiny naturals to a large negative raw
        return natural <= 1e-12 ? -30.0 : softplus_inverse(natural);
    }

    [[nodiscard]] detail::HawkesGapLaw gap_law(const TimedSequence& history) const {
        const HawkesParams p = natural_params();
        detail::HawkesState state = detail::state_at_end(p, history);
        const auto a_tot = p.alpha_column_totals();
        double B = 0.0;
        for (int m = 0; m < p.num_marks; ++m) B += a_tot[m] * state.g[m];
        return {p.total_mu(), B, p.beta};
    }

    void accumulate_position_grad(const EvalRequest& req, const HawkesParams& p,
                                  const detail::HawkesState& state,
                                  const std::vector<double>& a_tot,
                                  const detail::HawkesGapLaw& law, double delta, int y,
                                  double lam_tot, double lam_y, double E, double B, double Rt,
                                  double b_y, double r_y, const GapPrediction& pred,
                                  std::vector<double>& gmu, std::vector<double>& galpha,
                                  std::vector<double>& gcol, double& gbeta) const {
        const int K = p.num_marks;
        const double beta = p.beta;

        // d(nll_time): -dlog lam_tot + d compensator
        if (req.coef_time != 0.0) {
            const double ct = req.coef_time;
            for (int k = 0; k < K; ++k) gmu[k] += ct * (-1.0 / lam_tot + delta);
            const double col_coef = -E / lam_tot + (1.0 - E) / beta;
            for (int m = 0; m < K; ++m) gcol[m] += ct * col_coef * state.g[m];
            const double dlam_tot_dbeta = -E * (Rt + delta * B);
            const double dcomp_dbeta =
                -Rt * (1.0 - E) / beta + B * (delta * E / beta - (1.0 - E) / (beta * beta));
            gbeta += ct * (-dlam_tot_dbeta / lam_tot + dcomp_dbeta);
        }

        // d(nll_mark): -dlog lam_y + dlog lam_tot
        if (req.coef_mark != 0.0) {
            const double cm = req.coef_mark;
            for (int k = 0; k < K; ++k) gmu[k] += cm * (1.0 / lam_tot);
            gmu[y] += cm * (-1.0 / lam_y);
            for (int m = 0; m < K; ++m) {
                gcol[m] += cm * E * state.g[m] / lam_tot;
                galpha[y * K + m] += cm * (-E * state.g[m] / lam_y);
            }
            const double dlam_y_dbeta = -E * (r_y + delta * b_y);
            const double dlam_tot_dbeta = -E * (Rt + delta * B);
            gbeta += cm * (-dlam_y_dbeta / lam_y + dlam_tot_dbeta / lam_tot);
        }

        // d(mse) = 2 (pred - true) * d pred
        if (req.coef_mse != 0.0) {
            const double cp = req.coef_mse * 2.0 * (pred.gap - delta);
            if (cp != 0.0) {
                double dmu = 0.0, dcol = 0.0, dbeta_term = 0.0;
                gap_prediction_grad(law, Rt, pred, dmu, dcol, dbeta_term);
                for (int k = 0; k < K; ++k) gmu[k] += cp * dmu;
                for (int m = 0; m < K; ++m) gcol[m] += cp * dcol * state.g[m];
                gbeta += cp * dbeta_term;
            }
        }
    }

    // Derivatives of the point prediction with respect to (M, B, beta),
    // matching the branch taken in HawkesGapLaw::predict. The B derivative
    // is reported as a per-column coefficient (multiply by g[m]).
    void gap_prediction_grad(const detail::HawkesGapLaw& law, double Rt,
                             const GapPrediction& pred, double& dmu, double& dcol,
                             double& dbeta) const {
        const double M = law.M, B = law.B, beta = law.beta;
        dmu = dcol = dbeta = 0.0;
        if (M + B <= 1e-300) return;

        const bool proper = M > 1e-300 || std::exp(-B / beta) <= 1e-12;
        if (proper) {
            // expectation through the fixed quadrature weights
            for (std::size_t i = 0; i < grid_.nodes.size(); ++i) {
                const double d = grid_.nodes[i];
                const double e = std::exp(-beta * d);
                const double lam = M + B * e;
                if (!(lam > 0.0)) continue;
                const double f = std::exp(law.log_density(d));
                const double w = grid_.weights[i] * d * f;
                dmu += w * (1.0 / lam - d);
                dcol += w * (e / lam - (1.0 - e) / beta);
                const double dlam = -e * (Rt + d * B);
                const double dcomp =
                    -Rt * (1.0 - e) / beta + B * (d * e / beta - (1.0 - e) / (beta * beta));
                dbeta += w * (dlam / lam - dcomp);
            }
            return;
        }
        const double tail_mass = std::exp(-B / beta);
        if (tail_mass <= 0.5) {
            // median: H(d*) = ln 2, dd*/dtheta = -dH/dtheta / lam_tot(d*)
            const double d = pred.gap;
            const double e = std::exp(-beta * d);
            const double lam = M + B * e;
            const double dH_dmu = d;
            const double dH_dcol = (1.0 - e) / beta;
            const double dH_dbeta =
                -Rt * (1.0 - e) / beta + B * (d * e / beta - (1.0 - e) / (beta * beta));
            dmu = -dH_dmu / lam;
            dcol = -dH_dcol / lam;
            dbeta = -dH_dbeta / lam;
            return;
        }
        // grid-conditional mean N/D
        double num = 0.0, den = 0.0;
        double dnum_mu = 0.0, dnum_col = 0.0, dnum_beta = 0.0;
        double dden_mu = 0.0, dden_col = 0.0, dden_beta = 0.0;
        for (std::size_t i = 0; i < grid_.nodes.size(); ++i) {
            const double d = grid_.nodes[i];
            const double e = std::exp(-beta * d);
            const double lam = M + B * e;
            if (!(lam > 0.0)) continue;
            const double f = std::exp(law.log_density(d));
            const double dl_mu = 1.0 / lam - d;
            const double dl_col = e / lam - (1.0 - e) / beta;
            const double dlam = -e * (Rt + d * B);
            const double dcomp =
                -Rt * (1.0 - e) / beta + B * (d * e / beta - (1.0 - e) / (beta * beta));
            const double dl_beta = dlam / lam - dcomp;
            num += grid_.weights[i] * d * f;
            den += grid_.weights[i] * f;
            dnum_mu += grid_.weights[i] * d * f * dl_mu;
            dnum_col += grid_.weights[i] * d * f * dl_col;
            dnum_beta += grid_.weights[i] * d * f * dl_beta;
            dden_mu += grid_.weights[i] * f * dl_mu;
            dden_col += grid_.weights[i] * f * dl_col;
            dden_beta += grid_.weights[i] * f * dl_beta;
        }
        if (den <= 1e-300) return;
        dmu = (dnum_mu * den - num * dden_mu) / (den * den);
        dcol = (dnum_col * den - num * dden_col) / (den * den);
        dbeta = (dnum_beta * den - num * dden_beta) / (den * den);
    }

    Config config_;
    GapQuadrature::Grid grid_;
    std::vector<double> raw_;
};

}  // namespace tpp
}  // namespace ammtpp
