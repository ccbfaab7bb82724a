#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ammtpp/events.hpp"

namespace ammtpp {

// Per-event replay payload carried alongside the canonical unified fields.
// delta_x / delta_y are net signed reserve changes for the block (token
// units, lossy double view); swap_volume is the summed absolute swap size.
struct ReplayFields {
    std::optional<double> delta_x;
    std::optional<double> delta_y;
    std::optional<double> swap_volume;
};

struct UnifiedEventFile {
    EventSequence seq;
    std::vector<ReplayFields> replay;  // parallel to seq.events
};

inline nlohmann::json unified_event_json(const Event& e, const std::string& asset_id,
                                         const ReplayFields& extra = {}) {
    nlohmann::json j;
    j["asset_id"] = asset_id;
    j["block"] = e.block;
    j["mark"] = e.mark;
    nlohmann::json kinds = nlohmann::json::array();
    for (BaseEventKind k : MarkCodec::decode(e.mark)) kinds.push_back(to_string(k));
    j["kinds"] = kinds;
    if (e.wallclock) j["wallclock"] = *e.wallclock; else j["wallclock"] = nullptr;
    if (extra.delta_x) j["delta_x"] = *extra.delta_x;
    if (extra.delta_y) j["delta_y"] = *extra.delta_y;
    if (extra.swap_volume) j["swap_volume"] = *extra.swap_volume;
    return j;
}

inline void write_events_jsonl(const std::filesystem::path& path, const EventSequence& seq,
                               const std::vector<ReplayFields>* replay = nullptr) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    for (std::size_t i = 0; i < seq.events.size(); ++i) {
        const ReplayFields extra = replay && i < replay->size() ? (*replay)[i] : ReplayFields{};
        out << unified_event_json(seq.events[i], seq.asset_id, extra).dump() << "\n";
    }
}

inline UnifiedEventFile read_events_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    UnifiedEventFile file;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
        Event ev;
        ev.block = j.at("block").get<std::uint64_t>();
        ev.mark = j.at("mark").get<int>();
        ev.pool_id = j.value("asset_id", std::string{});
        if (j.contains("wallclock") && !j["wallclock"].is_null()) {
            ev.wallclock = j["wallclock"].get<std::uint64_t>();
        }
        if (file.seq.asset_id.empty()) file.seq.asset_id = ev.pool_id;
        ReplayFields extra;
        if (j.contains("delta_x")) extra.delta_x = j["delta_x"].get<double>();
        if (j.contains("delta_y")) extra.delta_y = j["delta_y"].get<double>();
        if (j.contains("swap_volume")) extra.swap_volume = j["swap_volume"].get<double>();
        file.seq.events.push_back(std::move(ev));
        file.replay.push_back(extra);
    }
    return file;
}

// All *.jsonl files under root, lexicographic by relative path.
inline std::vector<std::filesystem::path> list_jsonl_files(const std::filesystem::path& root) {
    std::vector<std::filesystem::path> files;
    if (!std::filesystem::exists(root)) return files;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(root)) {
        if (entry.is_regular_file() && entry.path().extension() == ".jsonl") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    return files;
}

inline std::vector<EventSequence> read_events_dir(const std::filesystem::path& root) {
    std::vector<EventSequence> seqs;
    for (const auto& path : list_jsonl_files(root)) {
        UnifiedEventFile file = read_events_jsonl(path);
        if (file.seq.asset_id.empty()) file.seq.asset_id = path.stem().string();
        if (!file.seq.empty()) seqs.push_back(std::move(file.seq));
    }
    return seqs;
}

// Fixed-format float for CSV cells: shortest of %.10g that round-trips the
// value closely enough for downstream plotting; full precision lives in the
// JSON artifacts.
inline std::string csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(const std::filesystem::path& path) : out_(path) {
        if (!out_) throw std::runtime_error("cannot open for writing: " + path.string());
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << j.dump(2) << "\n";
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    nlohmann::json j;
    in >> j;
    return j;
}

}  // namespace ammtpp
