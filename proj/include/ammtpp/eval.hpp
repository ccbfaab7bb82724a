#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <vector>

#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/model.hpp"

namespace ammtpp {
namespace eval {

struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class RolloutMode { Deterministic, Sampled };

struct OtdConfig {
    double delete_cost = 1.0;
    std::vector<int> horizons = {3, 5, 7, 9, 11};
    RolloutMode rollout = RolloutMode::Deterministic;
    int n_draws = 10;
    std::uint64_t seed = 2019;
    double anchor_fraction = 0.5;
};

struct MetricsReport {
    double type_accuracy = 0.0;
    double time_rmse = 0.0;
    std::map<int, double> otd;
    std::size_t n_events = 0;
};

struct NextPrediction {
    int mark = 0;
    double gap = 0.0;
};

// Argmax decode with ties broken toward the lowest class index.
inline NextPrediction decode_next(const tpp::TppModel& model,
                                  const tpp::TimedSequence& history) {
    const auto logpi = model.mark_log_probs(history);
    int best = 0;
    for (std::size_t k = 1; k < logpi.size(); ++k) {
        if (logpi[k] > logpi[best]) best = static_cast<int>(k);
    }
    return {best, model.gap_point_prediction(history).gap};
}

inline double type_accuracy(std::span<const int> preds, std::span<const int> truths) {
    if (preds.size() != truths.size()) throw ShapeError("prediction/truth length mismatch");
    if (preds.empty()) throw ShapeError("empty prediction vectors");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == truths[i] ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

inline double time_rmse(std::span<const double> pred_gaps, std::span<const double> true_gaps) {
    if (pred_gaps.size() != true_gaps.size()) throw ShapeError("prediction/truth length mismatch");
    if (pred_gaps.empty()) throw ShapeError("empty prediction vectors");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred_gaps.size(); ++i) {
        const double r = pred_gaps[i] - true_gaps[i];
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(pred_gaps.size()));
}

struct TimedMark {
    double time = 0.0;
    int mark = 0;
};

// Minimum-cost monotone alignment: matching is allowed only between equal
// marks at cost |t_pred - t_true|; every unmatched event on either side
// costs the deletion constant.
inline double otd(std::span<const TimedMark> pred, std::span<const TimedMark> truth,
                  double delete_cost = 1.0) {
    const std::size_t n = pred.size(), m = truth.size();
    std::vector<double> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = delete_cost * static_cast<double>(j);
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = delete_cost * static_cast<double>(i);
        for (std::size_t j = 1; j <= m; ++j) {
            double best = std::min(prev[j], cur[j - 1]) + delete_cost;
            if (pred[i - 1].mark == truth[j - 1].mark) {
                best = std::min(best, prev[j - 1] + std::abs(pred[i - 1].time - truth[j - 1].time));
            }
            cur[j] = best;
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

// Deterministic autoregressive rollout: repeat decode_next, appending each
// prediction to the working history.
inline std::vector<TimedMark> rollout(const tpp::TppModel& model,
                                      const tpp::TimedSequence& history, int horizon) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    tpp::TimedSequence work = history;
    std::vector<TimedMark> out;
    out.reserve(horizon);
    for (int h = 0; h < horizon; ++h) {
        const auto next = decode_next(model, work);
        const double t = work.last_time() + std::max(next.gap, 1e-12);
        out.push_back({t, next.mark});
        work.push(t, next.mark);
    }
    return out;
}

inline std::vector<TimedMark> rollout_sampled(const tpp::TppModel& model,
                                              const tpp::TimedSequence& history, int horizon,
                                              Rng& rng) {
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    tpp::TimedSequence work = history;
    std::vector<TimedMark> out;
    for (int h = 0; h < horizon; ++h) {
        auto [gap, mark] = model.sample_next(work, rng);
        if (!std::isfinite(gap)) break;
        const double t = work.last_time() + std::max(gap, 1e-12);
        out.push_back({t, mark});
        work.push(t, mark);
    }
    return out;
}

// Teacher-forced next-event metrics over every predictable position, plus
// OTD from a fixed anchor prefix (first anchor_fraction of events) per
// horizon, averaged over sequences.
inline MetricsReport evaluate_model(const tpp::TppModel& model,
                                    std::span<const tpp::TimedSequence> test,
                                    const OtdConfig& config = {}) {
    if (test.empty()) throw std::invalid_argument("empty test split");
    MetricsReport report;
    std::size_t mark_hits = 0;
    double sq_err = 0.0;
    std::map<int, double> otd_sums;
    std::size_t otd_sequences = 0;

    tpp::EvalRequest req;
    req.want_pred = true;

    for (std::size_t si = 0; si < test.size(); ++si) {
        const auto& seq = test[si];
        if (seq.size() >= 2) {
            const auto eval = model.evaluate(seq, req);
            for (const auto& p : eval.positions) {
                mark_hits += p.pred_mark == p.true_mark ? 1 : 0;
                const double r = p.pred_gap - p.true_gap;
                sq_err += r * r;
                ++report.n_events;
            }
        }

        if (seq.size() < 2) continue;
        const std::size_t n_anchor = std::max<std::size_t>(
            1, static_cast<std::size_t>(static_cast<double>(seq.size()) * config.anchor_fraction));
        tpp::TimedSequence anchor;
        anchor.times.assign(seq.times.begin(), seq.times.begin() + n_anchor);
        anchor.marks.assign(seq.marks.begin(), seq.marks.begin() + n_anchor);
        anchor.t_begin = seq.t_begin;
        anchor.t_end = anchor.times.back();
        ++otd_sequences;
        for (int H : config.horizons) {
            // cap the horizon at the available true future so sequence-end
            // truncation never charges deletions against a perfect model
            const int h_eff = static_cast<int>(
                std::min<std::size_t>(static_cast<std::size_t>(H), seq.size() - n_anchor));
            if (h_eff < 1) continue;
            std::vector<TimedMark> truth;
            for (std::size_t j = n_anchor; j < n_anchor + static_cast<std::size_t>(h_eff); ++j) {
                truth.push_back({seq.times[j], seq.marks[j]});
            }
            double value = 0.0;
            if (config.rollout == RolloutMode::Deterministic) {
                const auto pred = rollout(model, anchor, h_eff);
                value = otd(pred, truth, config.delete_cost);
            } else {
                for (int d = 0; d < config.n_draws; ++d) {
                    Rng rng(Rng::mix(config.seed, si * 1000003 + d));
                    const auto pred = rollout_sampled(model, anchor, h_eff, rng);
                    value += otd(pred, truth, config.delete_cost);
                }
                value /= static_cast<double>(config.n_draws);
            }
            otd_sums[H] += value;
        }
    }

    if (report.n_events == 0) throw std::invalid_argument("no scorable positions in test split");
    report.type_accuracy =
        static_cast<double>(mark_hits) / static_cast<double>(report.n_events);
    report.time_rmse = std::sqrt(sq_err / static_cast<double>(report.n_events));
    for (const auto& [H, total] : otd_sums) {
        report.otd[H] = total / static_cast<double>(otd_sequences);
    }
    return report;
}

inline nlohmann::json metrics_json(const MetricsReport& report) {
    nlohmann::json j;
    j["type_accuracy"] = report.type_accuracy;
    j["time_rmse"] = report.time_rmse;
    nlohmann::json otd = nlohmann::json::object();
    for (const auto& [H, v] : report.otd) otd[std::to_string(H)] = v;
    j["otd"] = otd;
    j["n_events"] = report.n_events;
    return j;
}

}  // namespace eval
}  // namespace ammtpp
