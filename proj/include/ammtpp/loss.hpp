#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "ammtpp/rng.hpp"
#include "ammtpp/tpp/model.hpp"

namespace ammtpp {
namespace loss {

struct EmptyBatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidWeights : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class Reduction { Sum, PerEventMean };

// The three objective components. mark_nll / time_nll / time_mse are reduced
// per `reduction` over every scored (non-padded) position.
struct LossTerms {
    double mark_nll = 0.0;
    double time_nll = 0.0;
    double time_mse = 0.0;
    Reduction reduction = Reduction::PerEventMean;
    std::size_t n_events = 0;

    [[nodiscard]] std::array<double, 3> as_array() const {
        return {mark_nll, time_nll, time_mse};
    }
};

// Right-padded batch. Pad positions carry the pad mark id and are masked out
// of every term by trimming (padding only ever appears on the right).
struct PaddedBatch {
    int pad_id = MarkCodec::kPadId;
    std::vector<std::vector<double>> times;
    std::vector<std::vector<int>> marks;

    static PaddedBatch from_sequences(std::span<const tpp::TimedSequence> seqs,
                                      int pad_id = MarkCodec::kPadId) {
        PaddedBatch batch;
        batch.pad_id = pad_id;
        std::size_t max_len = 0;
        for (const auto& s : seqs) max_len = std::max(max_len, s.size());
        for (const auto& s : seqs) {
            std::vector<double> t(s.times.begin(), s.times.end());
            std::vector<int> m(s.marks.begin(), s.marks.end());
            double last = s.times.empty() ? 0.0 : s.times.back();
            while (t.size() < max_len) {
                last += 1.0;
                t.push_back(last);
                m.push_back(pad_id);
            }
            batch.times.push_back(std::move(t));
            batch.marks.push_back(std::move(m));
        }
        return batch;
    }

    [[nodiscard]] std::size_t rows() const { return times.size(); }

    // Masked view of one row: events up to the first pad position.
    [[nodiscard]] tpp::TimedSequence row(std::size_t r) const {
        tpp::TimedSequence seq;
        for (std::size_t i = 0; i < times[r].size(); ++i) {
            if (marks[r][i] == pad_id) break;
            seq.times.push_back(times[r][i]);
            seq.marks.push_back(marks[r][i]);
        }
        seq.t_begin = seq.times.empty() ? 0.0 : seq.times.front();
        seq.t_end = seq.times.empty() ? 0.0 : seq.times.back();
        return seq;
    }
};

inline LossTerms compute_terms(const tpp::TppModel& model, const PaddedBatch& batch,
                               Reduction reduction = Reduction::PerEventMean) {
    LossTerms terms;
    terms.reduction = reduction;
    tpp::EvalRequest req;
    req.want_pred = true;
    for (std::size_t r = 0; r < batch.rows(); ++r) {
        const tpp::TimedSequence seq = batch.row(r);
        if (seq.size() < 2) continue;
        const auto eval = model.evaluate(seq, req);
        for (const auto& p : eval.positions) {
            terms.mark_nll += p.nll_mark;
            terms.time_nll += p.nll_time;
            const double res = p.pred_gap - p.true_gap;
            terms.time_mse += res * res;
            ++terms.n_events;
        }
    }
    if (terms.n_events == 0) throw EmptyBatch("no scorable positions in batch");
    if (reduction == Reduction::PerEventMean) {
        const double n = static_cast<double>(terms.n_events);
        terms.mark_nll /= n;
        terms.time_nll /= n;
        terms.time_mse /= n;
    }
    return terms;
}

// Learnable homoscedastic task weights sigma_m = softplus(s_m).
struct UncertaintyWeights {
    std::vector<double> s;

    static UncertaintyWeights equal(std::size_t n) {
        UncertaintyWeights w;
        w.s.assign(n, softplus_inverse(1.0));
        return w;
    }

    [[nodiscard]] double sigma(std::size_t m) const { return softplus(s[m]); }

    [[nodiscard]] std::vector<double> sigmas() const {
        std::vector<double> out(s.size());
        for (std::size_t m = 0; m < s.size(); ++m) out[m] = sigma(m);
        return out;
    }
};

struct UwmResult {
    double value = 0.0;
    std::vector<double> grad_s;
};

// loss = 1/2 sum_m ( l_m / sigma_m^2 + 2 log sigma_m ), with the term values
// treated as constants with respect to s.
inline UwmResult combine_uwm(std::span<const double> term_values,
                             const UncertaintyWeights& weights) {
    if (term_values.size() != weights.s.size()) {
        throw std::invalid_argument("term/weight count mismatch");
    }
    UwmResult out;
    out.grad_s.assign(weights.s.size(), 0.0);
    for (std::size_t m = 0; m < term_values.size(); ++m) {
        const double sigma = weights.sigma(m);
        out.value += 0.5 * (term_values[m] / (sigma * sigma) + 2.0 * std::log(sigma));
        out.grad_s[m] =
            (-term_values[m] / (sigma * sigma * sigma) + 1.0 / sigma) * logistic(weights.s[m]);
    }
    return out;
}

enum class ObjectiveVariant { Nll, Uwm, UwNll, UwEventMse, FixedSigma };

inline const char* to_string(ObjectiveVariant v) {
    switch (v) {
        case ObjectiveVariant::Nll: return "nll";
        case ObjectiveVariant::Uwm: return "uwm";
        case ObjectiveVariant::UwNll: return "uw_nll";
        case ObjectiveVariant::UwEventMse: return "uw_event_mse";
        case ObjectiveVariant::FixedSigma: return "fixed_sigma";
    }
    return "?";
}

inline ObjectiveVariant objective_variant_from_string(const std::string& name) {
    if (name == "nll") return ObjectiveVariant::Nll;
    if (name == "uwm") return ObjectiveVariant::Uwm;
    if (name == "uw_nll") return ObjectiveVariant::UwNll;
    if (name == "uw_event_mse") return ObjectiveVariant::UwEventMse;
    if (name == "fixed_sigma") return ObjectiveVariant::FixedSigma;
    throw std::invalid_argument("unknown objective variant: " + name);
}

// Training objective over the three terms. `active` lists the term indices
// (0 mark, 1 time, 2 mse) that participate; UW variants learn one s per
// active term.
class Objective {
public:
    Objective(ObjectiveVariant variant, std::vector<int> active, std::vector<double> fixed_sigma)
        : variant_(variant), active_(std::move(active)), fixed_sigma_(std::move(fixed_sigma)) {}

    [[nodiscard]] ObjectiveVariant variant() const { return variant_; }
    [[nodiscard]] const std::vector<int>& active_terms() const { return active_; }

    [[nodiscard]] std::size_t sigma_count() const {
        return learns_sigma() ? active_.size() : 0;
    }

    [[nodiscard]] bool learns_sigma() const {
        return variant_ == ObjectiveVariant::Uwm || variant_ == ObjectiveVariant::UwNll ||
               variant_ == ObjectiveVariant::UwEventMse;
    }

    [[nodiscard]] bool uses_mse() const {
        for (int a : active_) {
            if (a == 2) return true;
        }
        return false;
    }

    [[nodiscard]] double value(const LossTerms& terms, std::span<const double> s) const {
        const auto all = terms.as_array();
        if (variant_ == ObjectiveVariant::Nll) return all[0] + all[1];
        std::vector<double> picked;
        for (int a : active_) picked.push_back(all[a]);
        UncertaintyWeights w = weights_from(s);
        return combine_uwm(picked, w).value;
    }

    // d value / d term for each of the three terms at the current s.
    [[nodiscard]] std::array<double, 3> term_coefficients(std::span<const double> s) const {
        std::array<double, 3> coefs = {0.0, 0.0, 0.0};
        if (variant_ == ObjectiveVariant::Nll) {
            coefs[0] = coefs[1] = 1.0;
            return coefs;
        }
        UncertaintyWeights w = weights_from(s);
        for (std::size_t m = 0; m < active_.size(); ++m) {
            const double sigma = w.sigma(m);
            coefs[active_[m]] = 0.5 / (sigma * sigma);
        }
        return coefs;
    }

    void sigma_grad(const LossTerms& terms, std::span<const double> s,
                    std::span<double> out) const {
        if (!learns_sigma()) return;
        const auto all = terms.as_array();
        std::vector<double> picked;
        for (int a : active_) picked.push_back(all[a]);
        UncertaintyWeights w = weights_from(s);
        const auto res = combine_uwm(picked, w);
        for (std::size_t m = 0; m < res.grad_s.size(); ++m) out[m] = res.grad_s[m];
    }

private:
    [[nodiscard]] UncertaintyWeights weights_from(std::span<const double> s) const {
        UncertaintyWeights w;
        if (learns_sigma()) {
            if (s.size() != active_.size()) throw std::invalid_argument("sigma size mismatch");
            w.s.assign(s.begin(), s.end());
        } else {
            for (double sigma : fixed_sigma_) w.s.push_back(softplus_inverse(sigma));
        }
        return w;
    }

    ObjectiveVariant variant_;
    std::vector<int> active_;
    std::vector<double> fixed_sigma_;
};

inline Objective build_objective(ObjectiveVariant variant,
                                 std::vector<double> fixed_sigma = {}) {
    switch (variant) {
        case ObjectiveVariant::Nll:
            return Objective(variant, {0, 1}, {});
        case ObjectiveVariant::Uwm:
            return Objective(variant, {0, 1, 2}, {});
        case ObjectiveVariant::UwNll:
            return Objective(variant, {0, 1}, {});
        case ObjectiveVariant::UwEventMse:
            return Objective(variant, {0, 2}, {});
        case ObjectiveVariant::FixedSigma: {
            if (fixed_sigma.size() != 3) {
                throw InvalidWeights("fixed_sigma requires exactly 3 values");
            }
            for (double v : fixed_sigma) {
                if (!(v > 0.0)) throw InvalidWeights("fixed sigma values must be positive");
            }
            return Objective(variant, {0, 1, 2}, std::move(fixed_sigma));
        }
    }
    throw std::invalid_argument("unknown objective variant");
}

}  // namespace loss
}  // namespace ammtpp
