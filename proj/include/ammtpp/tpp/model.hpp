#pragma once

#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/sequence.hpp"

namespace ammtpp {
namespace tpp {

struct NumericalUnderflow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidTime : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Fixed log-spaced grid with trapezoid weights, shared by gap expectations
// and density-normalization checks.
struct GapQuadrature {
    double min_gap = 1e-4;
    double max_gap = 1e6;
    int num_nodes = 400;

    struct Grid {
        std::vector<double> nodes;
        std::vector<double> weights;
    };

    [[nodiscard]] Grid build() const {
        if (num_nodes < 3) throw std::invalid_argument("quadrature needs >= 3 nodes");
        Grid g;
        g.nodes.resize(num_nodes);
        g.weights.resize(num_nodes);
        const double lmin = std::log(min_gap);
        const double step = (std::log(max_gap) - lmin) / (num_nodes - 1);
        for (int i = 0; i < num_nodes; ++i) g.nodes[i] = std::exp(lmin + i * step);
        for (int i = 0; i < num_nodes; ++i) {
            const double left = i == 0 ? g.nodes[0] : g.nodes[i - 1];
            const double right = i + 1 == num_nodes ? g.nodes[num_nodes - 1] : g.nodes[i + 1];
            g.weights[i] = 0.5 * (right - left);
        }
        return g;
    }
};

struct GapPrediction {
    double gap = 0.0;
    bool from_median = false;  // set when the expectation diverges
};

// Teacher-forced outputs for predicting event i+1 from the prefix 0..i.
struct PositionEval {
    double nll_mark = 0.0;  // -log pi[y_true]
    double nll_time = 0.0;  // -log f(gap_true)
    double pred_gap = 0.0;
    int pred_mark = -1;
    double true_gap = 0.0;
    int true_mark = -1;
    bool pred_from_median = false;
};

struct SequenceEval {
    std::vector<PositionEval> positions;
};

// Per-call options for evaluate(). Gradient coefficients scale the three
// term gradients accumulated into the caller's buffer; the mse path also
// forces point predictions on.
struct EvalRequest {
    bool want_pred = false;
    double coef_mark = 0.0;
    double coef_time = 0.0;
    double coef_mse = 0.0;
    bool training = false;
    double dropout_rate = 0.0;
    std::uint64_t dropout_seed = 0;
};

// Contract shared by the three model families: a categorical next-mark
// distribution, a conditional gap density, a positive point prediction, and
// seeded sampling. Parameters are exposed as one flat unconstrained vector.
class TppModel {
public:
    virtual ~TppModel() = default;

    [[nodiscard]] virtual std::string family() const = 0;
    [[nodiscard]] virtual int num_marks() const = 0;
    [[nodiscard]] virtual std::size_t param_count() const = 0;
    [[nodiscard]] virtual std::vector<std::string> param_names() const = 0;
    [[nodiscard]] virtual const std::vector<double>& raw_params() const = 0;
    virtual void set_raw_params(std::span<const double> values) = 0;
    [[nodiscard]] virtual nlohmann::json config_json() const = 0;

    // Scores every predictable position (>= 1 event of history). When grad
    // is non-empty, accumulates
    //   coef_mark * d(sum nll_mark) + coef_time * d(sum nll_time)
    //   + coef_mse * d(sum (pred_gap - true_gap)^2)
    // with respect to the raw parameter vector.
    virtual SequenceEval evaluate(const TimedSequence& seq, const EvalRequest& req,
                                  std::span<double> grad = {}) const = 0;

    [[nodiscard]] virtual std::vector<double> mark_log_probs(
        const TimedSequence& history) const = 0;
    [[nodiscard]] virtual double gap_log_density(const TimedSequence& history,
                                                 double gap) const = 0;
    [[nodiscard]] virtual GapPrediction gap_point_prediction(
        const TimedSequence& history) const = 0;
    [[nodiscard]] virtual std::pair<double, int> sample_next(const TimedSequence& history,
                                                             Rng& rng) const = 0;
};

// Per-event (-log pi, -log f) pairs; throws NumericalUnderflow naming the
// first non-finite position.
struct EventNll {
    std::vector<double> mark;
    std::vector<double> time;
};

inline EventNll model_nll(const TppModel& model, const TimedSequence& seq) {
    if (seq.size() < 2) throw std::invalid_argument("model_nll needs >= 2 events");
    EvalRequest req;
    SequenceEval eval = model.evaluate(seq, req);
    EventNll out;
    for (std::size_t i = 0; i < eval.positions.size(); ++i) {
        const auto& p = eval.positions[i];
        if (!std::isfinite(p.nll_mark) || !std::isfinite(p.nll_time)) {
            throw NumericalUnderflow("non-finite density at event " + std::to_string(i + 1));
        }
        out.mark.push_back(p.nll_mark);
        out.time.push_back(p.nll_time);
    }
    return out;
}

}  // namespace tpp
}  // namespace ammtpp
