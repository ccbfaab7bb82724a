#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ammtpp/events.hpp"
#include "ammtpp/io.hpp"

namespace ammtpp {

enum class Protocol { Uniswap, Aave, Morpho, Pendle };

inline const char* to_string(Protocol p) {
    switch (p) {
        case Protocol::Uniswap: return "uniswap";
        case Protocol::Aave: return "aave";
        case Protocol::Morpho: return "morpho";
        case Protocol::Pendle: return "pendle";
    }
    return "?";
}

inline std::optional<Protocol> protocol_from_string(std::string_view s) {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "uniswap") return Protocol::Uniswap;
    if (lower == "aave") return Protocol::Aave;
    if (lower == "morpho") return Protocol::Morpho;
    if (lower == "pendle") return Protocol::Pendle;
    return std::nullopt;
}

struct UnknownEventType : std::runtime_error {
    UnknownEventType(Protocol p, const std::string& value)
        : std::runtime_error(std::string("unknown event type for ") + to_string(p) + ": " + value) {}
};

struct MalformedRecord : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Raw protocol log entry. Amounts are kept as exact decimal strings because
// wei-scale integers exceed 64-bit range; as_double() is the lossy view.
struct RawRecord {
    Protocol protocol = Protocol::Uniswap;
    std::uint64_t block = 0;
    BaseEventKind kind = BaseEventKind::SwapIn;
    std::string tx_hash;
    std::uint64_t log_index = 0;
    std::optional<std::uint64_t> tx_index;
    std::optional<std::uint64_t> wallclock;
    std::map<std::string, std::string> amounts;

    [[nodiscard]] std::optional<double> amount_as_double(const std::string& field) const {
        auto it = amounts.find(field);
        if (it == amounts.end()) return std::nullopt;
        return std::stod(it->second);
    }
};

namespace detail {

inline bool is_integer_string(const std::string& s) {
    if (s.empty()) return false;
    std::size_t i = s[0] == '-' ? 1 : 0;
    if (i == s.size()) return false;
    for (; i < s.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(s[i]))) return false;
    }
    return true;
}

inline int sign_of_decimal(const std::string& s) {
    bool neg = !s.empty() && s[0] == '-';
    for (std::size_t i = neg ? 1 : 0; i < s.size(); ++i) {
        if (s[i] != '0') return neg ? -1 : 1;
    }
    return 0;
}

// Numeric JSON values are normalized back to decimal strings so the lossless
// round-trip contract holds regardless of how the extract serialized them.
inline std::optional<std::string> json_decimal(const nlohmann::json& v) {
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s.empty()) return std::nullopt;  // "empty string if not recorded"
        return s;
    }
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
    return std::nullopt;
}

inline void take_amount(const nlohmann::json& j, const char* field, RawRecord& rec,
                        bool required = false) {
    if (!j.contains(field)) {
        if (required) throw MalformedRecord(std::string("missing field: ") + field);
        return;
    }
    auto s = json_decimal(j.at(field));
    if (!s) {
        if (required) throw MalformedRecord(std::string("empty required field: ") + field);
        return;  // absent entry, not zero
    }
    if (!is_integer_string(*s)) {
        throw MalformedRecord(std::string("unparseable decimal in ") + field + ": " + *s);
    }
    rec.amounts[field] = *s;
}

inline std::uint64_t require_block(const nlohmann::json& j, const char* field) {
    if (!j.contains(field)) throw MalformedRecord(std::string("missing block number (") + field + ")");
    const auto& v = j.at(field);
    if (v.is_number_unsigned() || v.is_number_integer()) {
        const auto b = v.get<long long>();
        if (b <= 0) throw MalformedRecord("block number must be positive");
        return static_cast<std::uint64_t>(b);
    }
    if (v.is_string() && is_integer_string(v.get<std::string>())) {
        return static_cast<std::uint64_t>(std::stoull(v.get<std::string>()));
    }
    throw MalformedRecord(std::string("bad block number in ") + field);
}

inline std::optional<std::uint64_t> optional_u64(const nlohmann::json& j, const char* field) {
    if (!j.contains(field) || j.at(field).is_null()) return std::nullopt;
    const auto& v = j.at(field);
    if (v.is_number_unsigned() || v.is_number_integer()) {
        return static_cast<std::uint64_t>(v.get<long long>());
    }
    if (v.is_string() && is_integer_string(v.get<std::string>())) {
        return static_cast<std::uint64_t>(std::stoull(v.get<std::string>()));
    }
    return std::nullopt;
}

}  // namespace detail

// Parses one protocol-specific JSON object into a RawRecord. Swap direction
// conventions: Uniswap by the sign of amount0 (positive = token0 into the
// pool = SwapIn); Pendle by the sign of netPtOut (positive = PT out to the
// receiver = SwapOut).
inline RawRecord parse_record(Protocol protocol, const nlohmann::json& j) {
    RawRecord rec;
    rec.protocol = protocol;

    switch (protocol) {
        case Protocol::Uniswap: {
            rec.block = detail::require_block(j, "blockNumber");
            rec.wallclock = detail::optional_u64(j, "timestamp");
            rec.tx_hash = j.value("txHash", std::string{});
            rec.log_index = detail::optional_u64(j, "logIndex").value_or(0);
            if (!j.contains("type")) throw MalformedRecord("missing event type");
            const std::string type = j.at("type").get<std::string>();
            detail::take_amount(j, "amount0", rec);
            detail::take_amount(j, "amount1", rec);
            if (type == "mint") {
                rec.kind = BaseEventKind::Mint;
            } else if (type == "burn") {
                rec.kind = BaseEventKind::Burn;
            } else if (type == "swap") {
                auto it = rec.amounts.find("amount0");
                if (it == rec.amounts.end()) {
                    throw MalformedRecord("swap without amount0: direction undefined");
                }
                const int sign = detail::sign_of_decimal(it->second);
                if (sign == 0) throw MalformedRecord("swap with zero amount0: direction undefined");
                rec.kind = sign > 0 ? BaseEventKind::SwapIn : BaseEventKind::SwapOut;
            } else {
                throw UnknownEventType(protocol, type);
            }
            break;
        }
        case Protocol::Aave: {
            rec.block = detail::require_block(j, "block_number");
            rec.wallclock = detail::optional_u64(j, "timestamp");
            rec.tx_hash = j.value("transaction_hash", std::string{});
            rec.log_index = detail::optional_u64(j, "log_index").value_or(0);
            rec.tx_index = detail::optional_u64(j, "tx_index");
            if (!j.contains("event_type")) throw MalformedRecord("missing event type");
            const std::string type = j.at("event_type").get<std::string>();
            if (type == "Supply") rec.kind = BaseEventKind::Supply;
            else if (type == "Borrow") rec.kind = BaseEventKind::Borrow;
            else if (type == "Withdraw") rec.kind = BaseEventKind::Withdraw;
            else if (type == "Repay") rec.kind = BaseEventKind::Repay;
            else throw UnknownEventType(protocol, type);
            detail::take_amount(j, "amount", rec);
            break;
        }
        case Protocol::Morpho: {
            rec.block = detail::require_block(j, "block_number");
            rec.wallclock = detail::optional_u64(j, "timestamp");
            rec.tx_hash = j.value("transaction_hash", std::string{});
            rec.log_index = detail::optional_u64(j, "log_index").value_or(0);
            if (!j.contains("event_type")) throw MalformedRecord("missing event type");
            const std::string type = j.at("event_type").get<std::string>();
            if (type == "Supply") rec.kind = BaseEventKind::Supply;
            else if (type == "Borrow") rec.kind = BaseEventKind::Borrow;
            else if (type == "Withdraw") rec.kind = BaseEventKind::Withdraw;
            else if (type == "Repay") rec.kind = BaseEventKind::Repay;
            else if (type == "Liquidate") rec.kind = BaseEventKind::Liquidate;
            else throw UnknownEventType(protocol, type);
            detail::take_amount(j, "amount", rec);
            detail::take_amount(j, "net_amount", rec);
            break;
        }
        case Protocol::Pendle: {
            rec.block = detail::require_block(j, "block_number");
            rec.wallclock = detail::optional_u64(j, "timestamp");
            rec.tx_hash = j.value("transaction_hash", std::string{});
            rec.log_index = detail::optional_u64(j, "log_index").value_or(0);
            if (!j.contains("event_type")) throw MalformedRecord("missing event type");
            const std::string type = j.at("event_type").get<std::string>();
            if (type == "Mint") {
                rec.kind = BaseEventKind::Mint;
                detail::take_amount(j, "netLpMinted", rec);
                detail::take_amount(j, "netSyUsed", rec);
                detail::take_amount(j, "netPtUsed", rec);
            } else if (type == "Burn") {
                rec.kind = BaseEventKind::Burn;
                detail::take_amount(j, "netLpBurned", rec);
                detail::take_amount(j, "netSyOut", rec);
                detail::take_amount(j, "netPtOut", rec);
            } else if (type == "UpdateImpliedRate") {
                rec.kind = BaseEventKind::UpdateImpliedRate;
                detail::take_amount(j, "lnLastImpliedRate", rec);
            } else if (type == "Swap") {
                detail::take_amount(j, "netPtOut", rec);
                detail::take_amount(j, "netSyOut", rec);
                detail::take_amount(j, "netSyFee", rec);
                detail::take_amount(j, "netSyToReserve", rec);
                auto it = rec.amounts.find("netPtOut");
                if (it == rec.amounts.end()) {
                    throw MalformedRecord("swap without netPtOut: direction undefined");
                }
                const int sign = detail::sign_of_decimal(it->second);
                if (sign == 0) throw MalformedRecord("swap with zero netPtOut: direction undefined");
                rec.kind = sign > 0 ? BaseEventKind::SwapOut : BaseEventKind::SwapIn;
            } else {
                throw UnknownEventType(protocol, type);
            }
            break;
        }
    }
    return rec;
}

inline nlohmann::json raw_record_json(const RawRecord& rec) {
    nlohmann::json j;
    j["protocol"] = to_string(rec.protocol);
    j["block"] = rec.block;
    j["kind"] = to_string(rec.kind);
    j["tx_hash"] = rec.tx_hash;
    j["log_index"] = rec.log_index;
    if (rec.tx_index) j["tx_index"] = *rec.tx_index;
    if (rec.wallclock) j["wallclock"] = *rec.wallclock;
    nlohmann::json amounts = nlohmann::json::object();
    for (const auto& [k, v] : rec.amounts) amounts[k] = v;
    j["amounts"] = amounts;
    return j;
}

inline RawRecord raw_record_from_json(const nlohmann::json& j) {
    RawRecord rec;
    rec.protocol = protocol_from_string(j.at("protocol").get<std::string>()).value();
    rec.block = j.at("block").get<std::uint64_t>();
    rec.kind = kind_from_string(j.at("kind").get<std::string>()).value();
    rec.tx_hash = j.at("tx_hash").get<std::string>();
    rec.log_index = j.at("log_index").get<std::uint64_t>();
    if (j.contains("tx_index")) rec.tx_index = j["tx_index"].get<std::uint64_t>();
    if (j.contains("wallclock")) rec.wallclock = j["wallclock"].get<std::uint64_t>();
    for (const auto& [k, v] : j.at("amounts").items()) rec.amounts[k] = v.get<std::string>();
    return rec;
}

enum class IngestPolicy { Strict, Lenient };

struct IngestResult {
    EventSequence seq;                 // collapsed TPP events; empty for lending pools
    std::vector<ReplayFields> replay;  // parallel to seq.events
    std::vector<RawRecord> records;    // all parsed records, execution order
    std::map<BaseEventKind, std::size_t> kind_counts;  // raw, pre-collapse
    std::size_t raw_records = 0;
    std::size_t skipped = 0;
    std::vector<std::string> errors;
};

namespace detail {

// Net reserve deltas per record in (x, y) = (token0, token1) for Uniswap and
// (PT, SY) for Pendle. Swap/burn "out" amounts leave the pool, so their pool
// delta is the negated value.
inline void accumulate_replay(const RawRecord& rec, ReplayFields& acc) {
    auto add = [](std::optional<double>& slot, double v) {
        slot = slot.value_or(0.0) + v;
    };
    switch (rec.protocol) {
        case Protocol::Uniswap: {
            const auto a0 = rec.amount_as_double("amount0");
            const auto a1 = rec.amount_as_double("amount1");
            if (rec.kind == BaseEventKind::Mint) {
                if (a0) add(acc.delta_x, *a0);
                if (a1) add(acc.delta_y, *a1);
            } else if (rec.kind == BaseEventKind::Burn) {
                if (a0) add(acc.delta_x, -*a0);
                if (a1) add(acc.delta_y, -*a1);
            } else if (rec.kind == BaseEventKind::SwapIn || rec.kind == BaseEventKind::SwapOut) {
                if (a0) add(acc.delta_x, *a0);
                if (a1) add(acc.delta_y, *a1);
                if (a0) add(acc.swap_volume, std::abs(*a0));
            }
            break;
        }
        case Protocol::Pendle: {
            if (rec.kind == BaseEventKind::Mint) {
                if (auto pt = rec.amount_as_double("netPtUsed")) add(acc.delta_x, *pt);
                if (auto sy = rec.amount_as_double("netSyUsed")) add(acc.delta_y, *sy);
            } else if (rec.kind == BaseEventKind::Burn) {
                if (auto pt = rec.amount_as_double("netPtOut")) add(acc.delta_x, -*pt);
                if (auto sy = rec.amount_as_double("netSyOut")) add(acc.delta_y, -*sy);
            } else if (rec.kind == BaseEventKind::SwapIn || rec.kind == BaseEventKind::SwapOut) {
                if (auto pt = rec.amount_as_double("netPtOut")) {
                    add(acc.delta_x, -*pt);
                    add(acc.swap_volume, std::abs(*pt));
                }
                if (auto sy = rec.amount_as_double("netSyOut")) add(acc.delta_y, -*sy);
            }
            break;
        }
        case Protocol::Aave:
        case Protocol::Morpho:
            break;  // lending events carry no pool-pair deltas
    }
}

}  // namespace detail

// Parses, sorts by (block, tx_index, log_index), and collapses a pool's raw
// records into one unified sequence. Lenient mode skips malformed records
// and counts them; strict mode rethrows with the record index.
inline IngestResult ingest_pool(const std::vector<nlohmann::json>& records, Protocol protocol,
                                const std::string& pool_id,
                                IngestPolicy policy = IngestPolicy::Lenient) {
    IngestResult result;
    std::vector<RawRecord> parsed;
    parsed.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            parsed.push_back(parse_record(protocol, records[i]));
        } catch (const std::exception& e) {
            if (policy == IngestPolicy::Strict) {
                throw MalformedRecord("record " + std::to_string(i) + ": " + e.what());
            }
            ++result.skipped;
            result.errors.push_back("record " + std::to_string(i) + ": " + e.what());
        }
    }
    result.raw_records = parsed.size();
    for (const RawRecord& r : parsed) ++result.kind_counts[r.kind];

    std::stable_sort(parsed.begin(), parsed.end(), [](const RawRecord& a, const RawRecord& b) {
        if (a.block != b.block) return a.block < b.block;
        const auto ta = a.tx_index.value_or(0), tb = b.tx_index.value_or(0);
        if (ta != tb) return ta < tb;
        return a.log_index < b.log_index;
    });

    // Only the five TPP kinds enter a mark; lending records are retained in
    // `records` for protocol statistics but produce no collapsed sequence.
    result.seq.asset_id = pool_id;
    std::size_t i = 0;
    while (i < parsed.size()) {
        const std::uint64_t block = parsed[i].block;
        unsigned mask = 0;
        std::optional<std::uint64_t> wallclock;
        ReplayFields extra;
        while (i < parsed.size() && parsed[i].block == block) {
            if (is_tpp_kind(parsed[i].kind)) {
                mask |= 1u << MarkCodec::bit_of(parsed[i].kind);
                if (!wallclock && parsed[i].wallclock) wallclock = parsed[i].wallclock;
                detail::accumulate_replay(parsed[i], extra);
            }
            ++i;
        }
        if (mask != 0) {
            result.seq.events.push_back(
                Event{block, static_cast<int>(mask) - 1, pool_id, wallclock});
            result.replay.push_back(extra);
        }
    }
    result.records = std::move(parsed);
    return result;
}

// Lending records cannot enter a 5-bit TPP mark; pools from Aave/Morpho are
// summarized in the manifest (kind counts, block span) but produce no
// unified sequence.
inline bool protocol_has_tpp_marks(Protocol p) {
    return p == Protocol::Uniswap || p == Protocol::Pendle;
}

struct PoolManifest {
    std::string protocol;
    std::size_t raw_records = 0;
    std::size_t collapsed_events = 0;
    std::size_t skipped = 0;
    std::uint64_t min_block = 0;
    std::uint64_t max_block = 0;
    std::map<std::string, std::size_t> kind_counts;
};

struct ScanResult {
    std::map<std::string, IngestResult> pools;       // key: "<protocol>/<pool>"
    std::map<std::string, PoolManifest> manifest;    // same keys
    std::map<std::string, std::string> file_errors;  // relative path -> message
    std::size_t total_events = 0;                    // raw records across pools
};

namespace detail {

inline std::vector<nlohmann::json> load_record_array(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::vector<nlohmann::json> records;
    if (path.extension() == ".jsonl") {
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            try {
                records.push_back(nlohmann::json::parse(line));
            } catch (const nlohmann::json::exception& e) {
                throw std::runtime_error("line " + std::to_string(lineno) + ": " + e.what());
            }
        }
    } else {
        nlohmann::json j;
        in >> j;
        if (!j.is_array()) throw std::runtime_error("expected a JSON array of records");
        for (auto& item : j) records.push_back(std::move(item));
    }
    return records;
}

}  // namespace detail

// Walks <root>/<protocol>/<pool>.json|.jsonl in lexicographic order.
// Unreadable files are recorded and the scan continues.
inline ScanResult scan_dataset(const std::filesystem::path& root,
                               IngestPolicy policy = IngestPolicy::Lenient) {
    ScanResult result;
    if (!std::filesystem::exists(root)) return result;

    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (!entry.is_regular_file()) continue;
        const auto ext = entry.path().extension();
        if (ext == ".json" || ext == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    for (const auto& path : files) {
        const auto rel = std::filesystem::relative(path, root).generic_string();
        const auto proto_name = path.parent_path().filename().string();
        const auto protocol = protocol_from_string(proto_name);
        if (!protocol) {
            result.file_errors[rel] = "unknown protocol directory: " + proto_name;
            continue;
        }
        const std::string pool_id = path.stem().string();
        const std::string key = std::string(to_string(*protocol)) + "/" + pool_id;
        try {
            auto records = detail::load_record_array(path);
            IngestResult ing = ingest_pool(records, *protocol, pool_id, policy);
            PoolManifest pm;
            pm.protocol = to_string(*protocol);
            pm.raw_records = ing.raw_records;
            pm.collapsed_events = ing.seq.size();
            pm.skipped = ing.skipped;
            if (!ing.records.empty()) {
                pm.min_block = ing.records.front().block;
                pm.max_block = ing.records.back().block;
            }
            for (const auto& [k, n] : ing.kind_counts) pm.kind_counts[to_string(k)] = n;
            result.total_events += ing.raw_records;
            result.manifest[key] = std::move(pm);
            result.pools[key] = std::move(ing);
        } catch (const std::exception& e) {
            result.file_errors[rel] = e.what();
        }
    }
    return result;
}

inline nlohmann::json manifest_json(const ScanResult& scan) {
    nlohmann::json pools = nlohmann::json::object();
    for (const auto& [key, pm] : scan.manifest) {
        nlohmann::json p;
        p["protocol"] = pm.protocol;
        p["raw_records"] = pm.raw_records;
        p["collapsed_events"] = pm.collapsed_events;
        p["skipped"] = pm.skipped;
        p["min_block"] = pm.min_block;
        p["max_block"] = pm.max_block;
        p["kind_counts"] = pm.kind_counts;
        pools[key] = p;
    }
    nlohmann::json j;
    j["pools"] = pools;
    j["errors"] = scan.file_errors;
    j["total_events"] = scan.total_events;
    return j;
}

}  // namespace ammtpp
