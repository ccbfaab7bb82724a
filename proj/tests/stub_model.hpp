#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "ammtpp/tpp/model.hpp"

namespace testutil {

// Fixed-distribution model: a constant categorical over marks and an
// exponential gap law. Lets loss/eval tests assert exact values without
// depending on any trainable family.
class StubModel final : public ammtpp::tpp::TppModel {
public:
    StubModel(std::vector<double> mark_probs, double rate)
        : mark_probs_(std::move(mark_probs)), rate_(rate) {}

    [[nodiscard]] std::string family() const override { return "stub"; }
    [[nodiscard]] int num_marks() const override { return static_cast<int>(mark_probs_.size()); }
    [[nodiscard]] std::size_t param_count() const override { return 0; }
    [[nodiscard]] std::vector<std::string> param_names() const override { return {}; }
    [[nodiscard]] const std::vector<double>& raw_params() const override { return empty_; }
    void set_raw_params(std::span<const double>) override {}
    [[nodiscard]] nlohmann::json config_json() const override { return nlohmann::json::object(); }

    ammtpp::tpp::SequenceEval evaluate(const ammtpp::tpp::TimedSequence& seq,
                                       const ammtpp::tpp::EvalRequest&,
                                       std::span<double> = {}) const override {
        ammtpp::tpp::SequenceEval eval;
        for (std::size_t i = 0; i + 1 < seq.size(); ++i) {
            ammtpp::tpp::PositionEval pos;
            pos.true_gap = seq.times[i + 1] - seq.times[i];
            pos.true_mark = seq.marks[i + 1];
            pos.nll_mark = -std::log(mark_probs_[pos.true_mark]);
            pos.nll_time = -(std::log(rate_) - rate_ * pos.true_gap);
            pos.pred_gap = 1.0 / rate_;
            pos.pred_mark = argmax();
            eval.positions.push_back(pos);
        }
        return eval;
    }

    [[nodiscard]] std::vector<double> mark_log_probs(
        const ammtpp::tpp::TimedSequence&) const override {
        std::vector<double> out(mark_probs_.size());
        for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::log(mark_probs_[k]);
        return out;
    }

    [[nodiscard]] double gap_log_density(const ammtpp::tpp::TimedSequence&,
                                         double gap) const override {
        return std::log(rate_) - rate_ * gap;
    }

    [[nodiscard]] ammtpp::tpp::GapPrediction gap_point_prediction(
        const ammtpp::tpp::TimedSequence&) const override {
        return {1.0 / rate_, false};
    }

    [[nodiscard]] std::pair<double, int> sample_next(const ammtpp::tpp::TimedSequence&,
                                                     ammtpp::Rng& rng) const override {
        return {rng.exponential(rate_), static_cast<int>(rng.categorical(mark_probs_))};
    }

private:
    [[nodiscard]] int argmax() const {
        int best = 0;
        for (std::size_t k = 1; k < mark_probs_.size(); ++k) {
            if (mark_probs_[k] > mark_probs_[best]) best = static_cast<int>(k);
        }
        return best;
    }

    std::vector<double> mark_probs_;
    double rate_;
    std::vector<double> empty_;
};

}  // namespace testutil
