#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ammtpp {

// The five TPP kinds take part in mark encoding; the lending kinds appear
// only in protocol statistics and never inside a mark.
enum class BaseEventKind {
    SwapIn,
    SwapOut,
    Mint,
    Burn,
    UpdateImpliedRate,
    Supply,
    Borrow,
    Withdraw,
    Repay,
    Liquidate,
};

inline constexpr bool is_tpp_kind(BaseEventKind k) {
    return static_cast<int>(k) <= static_cast<int>(BaseEventKind::UpdateImpliedRate);
}

inline const char* to_string(BaseEventKind k) {
    switch (k) {
        case BaseEventKind::SwapIn: return "SwapIn";
        case BaseEventKind::SwapOut: return "SwapOut";
        case BaseEventKind::Mint: return "Mint";
        case BaseEventKind::Burn: return "Burn";
        case BaseEventKind::UpdateImpliedRate: return "UpdateImpliedRate";
        case BaseEventKind::Supply: return "Supply";
        case BaseEventKind::Borrow: return "Borrow";
        case BaseEventKind::Withdraw: return "Withdraw";
        case BaseEventKind::Repay: return "Repay";
        case BaseEventKind::Liquidate: return "Liquidate";
    }
    return "?";
}

inline std::optional<BaseEventKind> kind_from_string(std::string_view s) {
    static constexpr std::array<BaseEventKind, 10> kAll = {
        BaseEventKind::SwapIn, BaseEventKind::SwapOut, BaseEventKind::Mint,
        BaseEventKind::Burn, BaseEventKind::UpdateImpliedRate, BaseEventKind::Supply,
        BaseEventKind::Borrow, BaseEventKind::Withdraw, BaseEventKind::Repay,
        BaseEventKind::Liquidate};
    for (BaseEventKind k : kAll) {
        if (s == to_string(k)) return k;
    }
    return std::nullopt;
}

struct InvalidMark : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InsufficientData : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bijection between non-empty subsets of the five TPP kinds and class ids
// 0..30. Class id = bitmask - 1, which keeps the pad id 31 outside the
// valid range.
class MarkCodec {
public:
    static constexpr int kNumClasses = 31;
    static constexpr int kPadId = 31;

    static int bit_of(BaseEventKind k) {
        if (!is_tpp_kind(k)) {
            throw InvalidMark(std::string("lending kind in mark: ") + to_string(k));
        }
        return static_cast<int>(k);
    }

    static int encode(const std::vector<BaseEventKind>& kinds) {
        if (kinds.empty()) throw InvalidMark("empty kind set");
        unsigned mask = 0;
        for (BaseEventKind k : kinds) mask |= 1u << bit_of(k);
        return static_cast<int>(mask) - 1;
    }

    static std::vector<BaseEventKind> decode(int mark) {
        if (mark < 0 || mark >= kNumClasses) {
            throw InvalidMark("mark out of range: " + std::to_string(mark));
        }
        const unsigned mask = static_cast<unsigned>(mark) + 1;
        std::vector<BaseEventKind> kinds;
        for (int bit = 0; bit < 5; ++bit) {
            if (mask & (1u << bit)) kinds.push_back(static_cast<BaseEventKind>(bit));
        }
        return kinds;
    }
};

struct Event {
    std::uint64_t block = 0;
    int mark = 0;
    std::string pool_id;
    std::optional<std::uint64_t> wallclock;
};

// Block heights are strictly increasing after same-block collapse, so every
// derived gap is >= 1.
struct EventSequence {
    std::string asset_id;
    std::vector<Event> events;

    [[nodiscard]] std::size_t size() const { return events.size(); }
    [[nodiscard]] bool empty() const { return events.empty(); }

    [[nodiscard]] std::uint64_t start_block() const {
        if (events.empty()) throw InsufficientData("start_block of empty sequence");
        return events.front().block;
    }

    [[nodiscard]] std::vector<std::uint64_t> gaps() const {
        std::vector<std::uint64_t> out;
        if (events.size() < 2) return out;
        out.reserve(events.size() - 1);
        for (std::size_t i = 1; i < events.size(); ++i) {
            out.push_back(events[i].block - events[i - 1].block);
        }
        return out;
    }
};

struct DatasetSplit {
    std::vector<EventSequence> train;
    std::vector<EventSequence> val;
    std::vector<EventSequence> test;
    std::vector<std::string> warnings;
};

// One event per distinct block; its mark encodes the union of the kinds seen
// at that block. Input must already be sorted by (block, log order).
inline EventSequence collapse_block(
    const std::vector<std::pair<std::uint64_t, BaseEventKind>>& raw,
    std::string pool_id = {}) {
    EventSequence seq;
    seq.asset_id = pool_id;
    std::size_t i = 0;
    while (i < raw.size()) {
        const std::uint64_t block = raw[i].first;
        unsigned mask = 0;
        while (i < raw.size() && raw[i].first == block) {
            mask |= 1u << MarkCodec::bit_of(raw[i].second);
            ++i;
        }
        seq.events.push_back(Event{block, static_cast<int>(mask) - 1, pool_id, std::nullopt});
    }
    return seq;
}

// Greedy, non-overlapping windows of at most max_len events; concatenating
// the windows reproduces the input.
inline std::vector<EventSequence> window_split(const EventSequence& seq,
                                               std::size_t max_len = 300) {
    if (max_len < 2) throw std::invalid_argument("window_split requires max_len >= 2");
    std::vector<EventSequence> out;
    std::size_t offset = 0;
    std::size_t window_index = 0;
    while (offset < seq.events.size()) {
        const std::size_t len = std::min(max_len, seq.events.size() - offset);
        EventSequence w;
        w.asset_id = seq.asset_id;
        if (seq.events.size() > max_len) {
            w.asset_id += "#w" + std::to_string(window_index);
        }
        w.events.assign(seq.events.begin() + static_cast<std::ptrdiff_t>(offset),
                        seq.events.begin() + static_cast<std::ptrdiff_t>(offset + len));
        out.push_back(std::move(w));
        offset += len;
        ++window_index;
    }
    return out;
}

// Sorts by start block and cuts at cumulative-ratio boundaries: floor for
// train and val counts, remainder to test.
inline DatasetSplit chronological_split(std::vector<EventSequence> seqs,
                                        std::array<double, 3> ratios = {0.70, 0.15, 0.15}) {
    for (double r : ratios) {
        if (!(r > 0.0)) throw std::invalid_argument("split ratios must be positive");
    }
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9) {
        throw std::invalid_argument("split ratios must sum to 1");
    }
    if (seqs.size() < 3) throw InsufficientData("chronological_split needs >= 3 sequences");

    std::sort(seqs.begin(), seqs.end(), [](const EventSequence& a, const EventSequence& b) {
        const auto ka = a.start_block();
        const auto kb = b.start_block();
        if (ka != kb) return ka < kb;
        return a.asset_id < b.asset_id;
    });

    const std::size_t n = seqs.size();
    const std::size_t n_train = static_cast<std::size_t>(std::floor(ratios[0] * static_cast<double>(n)));
    const std::size_t n_val = static_cast<std::size_t>(std::floor(ratios[1] * static_cast<double>(n)));

    DatasetSplit split;
    split.train.assign(seqs.begin(), seqs.begin() + static_cast<std::ptrdiff_t>(n_train));
    split.val.assign(seqs.begin() + static_cast<std::ptrdiff_t>(n_train),
                     seqs.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    split.test.assign(seqs.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), seqs.end());
    if (split.train.empty()) split.warnings.push_back("train split is empty");
    if (split.val.empty()) split.warnings.push_back("validation split is empty");
    if (split.test.empty()) split.warnings.push_back("test split is empty");
    return split;
}

}  // namespace ammtpp
