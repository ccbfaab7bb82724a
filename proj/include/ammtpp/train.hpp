#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ammtpp/eval.hpp"
#include "ammtpp/events.hpp"
#include "ammtpp/loss.hpp"
#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/checkpoint.hpp"
#include "ammtpp/tpp/model.hpp"

namespace ammtpp {
namespace train {

struct AbortStep : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingDiverged : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    long t = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// One bias-corrected Adam update; deterministic, aborts on non-finite input.
inline void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
                      double lr, const AdamConfig& config = {}) {
    if (params.size() != grads.size() || params.size() != state.m.size()) {
        throw std::invalid_argument("adam_step shape mismatch");
    }
    for (double g : grads) {
        if (!std::isfinite(g)) throw AbortStep("non-finite gradient");
    }
    ++state.t;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grads[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grads[i] * grads[i];
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
}

struct TrainConfig {
    double learning_rate = 1e-3;
    std::vector<double> lr_grid;  // non-empty: select by validation log-likelihood
    int batch_size = 16;
    int grad_accumulation = 4;
    int max_epochs = 100;
    int patience = 10;
    double dropout = 0.1;
    loss::Reduction reduction = loss::Reduction::PerEventMean;
    AdamConfig adam;
    std::vector<std::uint64_t> seeds = {2019, 2020, 2021, 2022, 2023};

    void validate() const {
        if (learning_rate <= 0.0 || batch_size < 1 || grad_accumulation < 1 || max_epochs < 1 ||
            patience < 0 || dropout < 0.0 || dropout >= 1.0) {
            throw std::invalid_argument("invalid training configuration");
        }
        if (patience > max_epochs) throw std::invalid_argument("patience exceeds max_epochs");
    }
};

struct TimedSplit {
    std::vector<tpp::TimedSequence> train;
    std::vector<tpp::TimedSequence> val;
    std::vector<tpp::TimedSequence> test;
};

inline TimedSplit to_timed(const DatasetSplit& split) {
    TimedSplit out;
    for (const auto& s : split.train) out.train.push_back(tpp::TimedSequence::from_events(s));
    for (const auto& s : split.val) out.val.push_back(tpp::TimedSequence::from_events(s));
    for (const auto& s : split.test) out.test.push_back(tpp::TimedSequence::from_events(s));
    return out;
}

struct EpochTrace {
    int epoch = 0;
    std::string split;
    double mark_nll = 0.0;
    double time_nll = 0.0;
    double time_mse = 0.0;
    std::array<double, 3> sigma = {1.0, 1.0, 1.0};
    double total = 0.0;
};

struct TrainResult {
    std::vector<double> best_params;
    std::vector<double> best_s;
    int best_epoch = 0;
    double best_val_ll = -std::numeric_limits<double>::infinity();
    int epochs_run = 0;
    double learning_rate = 0.0;
    std::vector<EpochTrace> trace;
};

namespace detail {

// Unweighted per-event mark+time log-likelihood; the model-selection metric
// regardless of the training objective.
inline double validation_ll(const tpp::TppModel& model,
                            std::span<const tpp::TimedSequence> val) {
    const auto batch = loss::PaddedBatch::from_sequences(val);
    const auto terms = loss::compute_terms(model, batch, loss::Reduction::PerEventMean);
    return -(terms.mark_nll + terms.time_nll);
}

inline std::array<double, 3> sigma_snapshot(const loss::Objective& objective,
                                            std::span<const double> s) {
    std::array<double, 3> out = {1.0, 1.0, 1.0};
    if (objective.learns_sigma()) {
        const auto& active = objective.active_terms();
        for (std::size_t m = 0; m < active.size(); ++m) out[active[m]] = softplus(s[m]);
    }
    return out;
}

}  // namespace detail

// Deterministic epoch loop: seeded shuffle, right-padded micro-batches,
// gradient accumulation, Adam on [model params | s], early stop on the
// validation log-likelihood. The model is left at the best checkpoint.
inline TrainResult train_model(tpp::TppModel& model, const TimedSplit& split,
                               const loss::Objective& objective, const TrainConfig& config,
                               std::uint64_t seed) {
    config.validate();
    if (split.train.empty()) throw std::invalid_argument("empty training split");
    const bool has_val = !split.val.empty();

    std::vector<double> params = model.raw_params();
    std::vector<double> s(objective.sigma_count(), softplus_inverse(1.0));
    AdamState adam(params.size() + s.size());

    TrainResult result;
    result.learning_rate = config.learning_rate;
    result.best_params = params;
    result.best_s = s;

    std::vector<std::size_t> order(split.train.size());
    std::iota(order.begin(), order.end(), 0);

    const std::size_t micro_size = static_cast<std::size_t>(config.batch_size);
    const std::size_t step_size = micro_size * static_cast<std::size_t>(config.grad_accumulation);
    std::vector<double> grad(params.size(), 0.0);
    std::vector<double> full_grad(params.size() + s.size(), 0.0);
    std::uint64_t dropout_counter = 0;
    int stale = 0;

    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        Rng shuffle_rng(Rng::mix(seed, static_cast<std::uint64_t>(epoch)));
        shuffle(std::span(order), shuffle_rng);
        model.set_raw_params(params);

        double ep_mark = 0.0, ep_time = 0.0, ep_mse = 0.0;
        std::size_t ep_events = 0;

        for (std::size_t step_begin = 0; step_begin < order.size(); step_begin += step_size) {
            const auto coefs = objective.term_coefficients(s);
            std::fill(grad.begin(), grad.end(), 0.0);
            double sum_mark = 0.0, sum_time = 0.0, sum_mse = 0.0;
            std::size_t n_step = 0;

            const std::size_t step_end = std::min(order.size(), step_begin + step_size);
            for (std::size_t micro_begin = step_begin; micro_begin < step_end;
                 micro_begin += micro_size) {
                const std::size_t micro_end = std::min(step_end, micro_begin + micro_size);
                std::vector<tpp::TimedSequence> micro;
                for (std::size_t i = micro_begin; i < micro_end; ++i) {
                    micro.push_back(split.train[order[i]]);
                }
                const auto batch = loss::PaddedBatch::from_sequences(micro);
                for (std::size_t r = 0; r < batch.rows(); ++r) {
                    const tpp::TimedSequence row = batch.row(r);
                    if (row.size() < 2) continue;
                    tpp::EvalRequest req;
                    req.coef_mark = coefs[0];
                    req.coef_time = coefs[1];
                    req.coef_mse = coefs[2];
                    req.want_pred = objective.uses_mse();
                    req.training = config.dropout > 0.0;
                    req.dropout_rate = config.dropout;
                    req.dropout_seed = Rng::mix(seed, ++dropout_counter);
                    const auto eval = model.evaluate(row, req, grad);
                    for (const auto& p : eval.positions) {
                        sum_mark += p.nll_mark;
                        sum_time += p.nll_time;
                        if (req.want_pred) {
                            const double res = p.pred_gap - p.true_gap;
                            sum_mse += res * res;
                        }
                        ++n_step;
                    }
                }
            }
            if (n_step == 0) continue;
            if (!std::isfinite(sum_mark) || !std::isfinite(sum_time) || !std::isfinite(sum_mse)) {
                throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) +
                                       ", step " + std::to_string(step_begin / step_size));
            }

            const double scale = config.reduction == loss::Reduction::PerEventMean
                                     ? 1.0 / static_cast<double>(n_step)
                                     : 1.0;
            loss::LossTerms step_terms;
            step_terms.mark_nll = sum_mark * scale;
            step_terms.time_nll = sum_time * scale;
            step_terms.time_mse = sum_mse * scale;
            step_terms.reduction = config.reduction;
            step_terms.n_events = n_step;

            for (std::size_t i = 0; i < params.size(); ++i) full_grad[i] = grad[i] * scale;
            if (!s.empty()) {
                objective.sigma_grad(step_terms, s, std::span(full_grad).subspan(params.size()));
            }

            std::vector<double> joint(params);
            joint.insert(joint.end(), s.begin(), s.end());
            try {
                adam_step(joint, full_grad, adam, config.learning_rate, config.adam);
            } catch (const AbortStep& e) {
                throw TrainingDiverged(std::string(e.what()) + " at epoch " +
                                       std::to_string(epoch));
            }
            std::copy(joint.begin(), joint.begin() + params.size(), params.begin());
            std::copy(joint.begin() + params.size(), joint.end(), s.begin());
            model.set_raw_params(params);

            ep_mark += sum_mark;
            ep_time += sum_time;
            ep_mse += sum_mse;
            ep_events += n_step;
        }

        // epoch trace (training terms under the configured reduction)
        const double tr_scale = config.reduction == loss::Reduction::PerEventMean && ep_events
                                    ? 1.0 / static_cast<double>(ep_events)
                                    : 1.0;
        loss::LossTerms train_terms;
        train_terms.mark_nll = ep_mark * tr_scale;
        train_terms.time_nll = ep_time * tr_scale;
        train_terms.time_mse = ep_mse * tr_scale;
        train_terms.reduction = config.reduction;
        train_terms.n_events = ep_events;
        EpochTrace tr;
        tr.epoch = epoch;
        tr.split = "train";
        tr.mark_nll = train_terms.mark_nll;
        tr.time_nll = train_terms.time_nll;
        tr.time_mse = train_terms.time_mse;
        tr.sigma = detail::sigma_snapshot(objective, s);
        tr.total = objective.value(train_terms, s);
        result.trace.push_back(tr);

        const auto& val_split = has_val ? split.val : split.train;
        const auto val_batch = loss::PaddedBatch::from_sequences(val_split);
        const auto val_terms =
            loss::compute_terms(model, val_batch, loss::Reduction::PerEventMean);
        const double val_ll = -(val_terms.mark_nll + val_terms.time_nll);
        EpochTrace vr;
        vr.epoch = epoch;
        vr.split = "val";
        vr.mark_nll = val_terms.mark_nll;
        vr.time_nll = val_terms.time_nll;
        vr.time_mse = val_terms.time_mse;
        vr.sigma = tr.sigma;
        vr.total = objective.value(val_terms, s);
        result.trace.push_back(vr);

        result.epochs_run = epoch;
        if (val_ll > result.best_val_ll) {
            result.best_val_ll = val_ll;
            result.best_params = params;
            result.best_s = s;
            result.best_epoch = epoch;
            stale = 0;
        } else {
            ++stale;
        }
        if (stale >= config.patience) break;
    }

    model.set_raw_params(result.best_params);
    return result;
}

// Trains once per grid learning rate and keeps the best validation
// log-likelihood; with an empty grid this is a single train_model call.
inline TrainResult train_with_lr_selection(tpp::TppModel& model, const TimedSplit& split,
                                           const loss::Objective& objective,
                                           const TrainConfig& config, std::uint64_t seed) {
    if (config.lr_grid.empty()) return train_model(model, split, objective, config, seed);
    const std::vector<double> init = model.raw_params();
    std::optional<TrainResult> best;
    for (double lr : config.lr_grid) {
        TrainConfig c = config;
        c.learning_rate = lr;
        c.lr_grid.clear();
        model.set_raw_params(init);
        TrainResult r = train_model(model, split, objective, c, seed);
        if (!best || r.best_val_ll > best->best_val_ll) best = std::move(r);
    }
    model.set_raw_params(best->best_params);
    return *best;
}

// ---------------------------------------------------------------------------
// Benchmark grid: families x objectives x seeds
// ---------------------------------------------------------------------------

struct SeedRun {
    std::uint64_t seed = 0;
    double learning_rate = 0.0;
    double val_ll = 0.0;
    int best_epoch = 0;
    std::map<std::string, double> metrics;
};

struct GridCell {
    std::string family;
    std::string objective;
    std::vector<SeedRun> runs;
    std::vector<std::string> failures;
};

struct BenchReport {
    std::vector<GridCell> cells;
    double wall_seconds = 0.0;
};

inline std::map<std::string, double> flatten_metrics(const eval::MetricsReport& m) {
    std::map<std::string, double> out;
    out["type_accuracy"] = m.type_accuracy;
    out["time_rmse"] = m.time_rmse;
    for (const auto& [H, v] : m.otd) out["otd_" + std::to_string(H)] = v;
    return out;
}

// Population mean/std per metric over the completed seed runs of a cell.
inline void cell_mean_std(const GridCell& cell, std::map<std::string, double>& mean,
                          std::map<std::string, double>& std_dev) {
    mean.clear();
    std_dev.clear();
    if (cell.runs.empty()) return;
    for (const auto& run : cell.runs) {
        for (const auto& [k, v] : run.metrics) mean[k] += v;
    }
    const double n = static_cast<double>(cell.runs.size());
    for (auto& [k, v] : mean) v /= n;
    for (const auto& run : cell.runs) {
        for (const auto& [k, v] : run.metrics) {
            const double d = v - mean[k];
            std_dev[k] += d * d;
        }
    }
    for (auto& [k, v] : std_dev) v = std::sqrt(v / n);
}

struct BenchSpec {
    std::vector<std::pair<std::string, nlohmann::json>> families;  // family -> model config
    std::vector<loss::ObjectiveVariant> objectives;
    std::vector<double> fixed_sigma = {1.0, 1.0, 1.0};
    eval::OtdConfig eval_config;
};

inline BenchReport run_benchmark(const BenchSpec& spec, const TimedSplit& split,
                                 const TrainConfig& config) {
    if (spec.families.empty() || spec.objectives.empty()) {
        throw std::invalid_argument("benchmark needs at least one model and one objective");
    }
    const auto t0 = std::chrono::steady_clock::now();
    BenchReport report;
    for (const auto& [family, model_config] : spec.families) {
        for (const auto variant : spec.objectives) {
            GridCell cell;
            cell.family = family;
            cell.objective = loss::to_string(variant);
            const auto objective = loss::build_objective(
                variant, variant == loss::ObjectiveVariant::FixedSigma ? spec.fixed_sigma
                                                                       : std::vector<double>{});
            for (std::uint64_t seed : config.seeds) {
                try {
                    auto model = tpp::make_model(family, model_config, seed);
                    TrainResult r =
                        train_with_lr_selection(*model, split, objective, config, seed);
                    const auto metrics =
                        eval::evaluate_model(*model, split.test, spec.eval_config);
                    SeedRun run;
                    run.seed = seed;
                    run.learning_rate = r.learning_rate;
                    run.val_ll = r.best_val_ll;
                    run.best_epoch = r.best_epoch;
                    run.metrics = flatten_metrics(metrics);
                    cell.runs.push_back(std::move(run));
                } catch (const std::exception& e) {
                    cell.failures.push_back("seed " + std::to_string(seed) + ": " + e.what());
                }
            }
            report.cells.push_back(std::move(cell));
        }
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

inline nlohmann::json bench_report_json(const BenchReport& report) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& cell : report.cells) {
        nlohmann::json c;
        c["family"] = cell.family;
        c["objective"] = cell.objective;
        nlohmann::json runs = nlohmann::json::array();
        for (const auto& run : cell.runs) {
            runs.push_back({{"seed", run.seed},
                            {"learning_rate", run.learning_rate},
                            {"val_ll", run.val_ll},
                            {"best_epoch", run.best_epoch},
                            {"metrics", run.metrics}});
        }
        c["runs"] = runs;
        c["failures"] = cell.failures;
        std::map<std::string, double> mean, std_dev;
        cell_mean_std(cell, mean, std_dev);
        c["mean"] = mean;
        c["std"] = std_dev;
        cells.push_back(c);
    }
    nlohmann::json j;
    j["cells"] = cells;
    j["wall_seconds"] = report.wall_seconds;
    return j;
}

}  // namespace train
}  // namespace ammtpp
