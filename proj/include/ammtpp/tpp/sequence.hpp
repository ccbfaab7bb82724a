#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ammtpp/events.hpp"

namespace ammtpp {
namespace tpp {

// Event stream on a continuous time axis. Block-indexed sequences convert by
// rebasing to the first block; simulation produces real-valued times before
// quantization. The observation window [t_begin, t_end] bounds compensator
// integrals.
struct TimedSequence {
    std::vector<double> times;
    std::vector<int> marks;
    double t_begin = 0.0;
    double t_end = 0.0;

    [[nodiscard]] std::size_t size() const { return times.size(); }
    [[nodiscard]] bool empty() const { return times.empty(); }

    [[nodiscard]] double last_time() const { return times.empty() ? t_begin : times.back(); }

    [[nodiscard]] std::vector<double> gaps() const {
        std::vector<double> out;
        for (std::size_t i = 1; i < times.size(); ++i) out.push_back(times[i] - times[i - 1]);
        return out;
    }

    void push(double t, int mark) {
        if (!times.empty() && t <= times.back()) {
            throw std::invalid_argument("times must be strictly increasing");
        }
        times.push_back(t);
        marks.push_back(mark);
        if (t > t_end) t_end = t;
    }

    // Rebases block heights to the sequence start so windowed sequences keep
    // small time values; gaps are unchanged (block values themselves are
    // never normalized).
    static TimedSequence from_events(const EventSequence& seq, bool rebase = true) {
        TimedSequence out;
        if (seq.empty()) return out;
        const double base = rebase ? static_cast<double>(seq.events.front().block) : 0.0;
        out.times.reserve(seq.size());
        out.marks.reserve(seq.size());
        for (const Event& e : seq.events) {
            out.times.push_back(static_cast<double>(e.block) - base);
            out.marks.push_back(e.mark);
        }
        out.t_begin = 0.0;
        out.t_end = out.times.back();
        return out;
    }
};

// Ceiling quantization onto the block axis with same-block collision merge.
// With the full 31-class codec, colliding marks merge by kind-set union;
// with a generic mark count the first event of the block wins.
inline EventSequence quantize_to_blocks(const TimedSequence& seq, int num_marks,
                                        const std::string& asset_id = {}) {
    EventSequence out;
    out.asset_id = asset_id;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        auto block = static_cast<std::uint64_t>(std::ceil(std::max(seq.times[i], 1e-12)));
        if (block == 0) block = 1;
        if (!out.events.empty() && out.events.back().block == block) {
            if (num_marks == MarkCodec::kNumClasses) {
                const unsigned merged = (static_cast<unsigned>(out.events.back().mark) + 1) |
                                        (static_cast<unsigned>(seq.marks[i]) + 1);
                out.events.back().mark = static_cast<int>(merged) - 1;
            }
            continue;
        }
        out.events.push_back(Event{block, seq.marks[i], asset_id, std::nullopt});
    }
    return out;
}

}  // namespace tpp
}  // namespace ammtpp
