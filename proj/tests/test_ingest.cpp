#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "ammtpp/ingest.hpp"

using namespace ammtpp;
using nlohmann::json;

namespace {
std::filesystem::path fixtures() {
    const char* env = std::getenv("AMMTPP_FIXTURES");
    REQUIRE(env != nullptr);
    return std::filesystem::path(env);
}
}  // namespace

TEST_CASE("uniswap swaps are refined by the sign of amount0") {
    json rec = {{"type", "swap"},     {"blockNumber", 19000001}, {"txHash", "0xab"},
                {"timestamp", 1704067200}, {"amount0", "-500"},       {"amount1", "900"}};
    RawRecord out = parse_record(Protocol::Uniswap, rec);
    CHECK(out.kind == BaseEventKind::SwapOut);
    CHECK(out.block == 19000001);
    CHECK(out.wallclock == 1704067200);
    CHECK(out.amounts.at("amount0") == "-500");

    rec["amount0"] = "500";
    CHECK(parse_record(Protocol::Uniswap, rec).kind == BaseEventKind::SwapIn);

    rec["amount0"] = "0";
    CHECK_THROWS_AS(parse_record(Protocol::Uniswap, rec), MalformedRecord);
}

TEST_CASE("pendle swaps are refined by the sign of netPtOut") {
    json rec = {{"event_type", "Swap"},      {"block_number", 19000005},
                {"transaction_hash", "0xcd"}, {"log_index", 4},
                {"timestamp", 1704067248},    {"netPtOut", "200"},
                {"netSyOut", "-450"},         {"netSyFee", "3"},
                {"netSyToReserve", "1"}};
    CHECK(parse_record(Protocol::Pendle, rec).kind == BaseEventKind::SwapOut);
    rec["netPtOut"] = "-120";
    CHECK(parse_record(Protocol::Pendle, rec).kind == BaseEventKind::SwapIn);

    json upd = {{"event_type", "UpdateImpliedRate"},
                {"block_number", 19000002},
                {"transaction_hash", "0xcd"},
                {"log_index", 3},
                {"lnLastImpliedRate", "41000000000000000"}};
    RawRecord out = parse_record(Protocol::Pendle, upd);
    CHECK(out.kind == BaseEventKind::UpdateImpliedRate);
    CHECK(out.amounts.at("lnLastImpliedRate") == "41000000000000000");
}

TEST_CASE("lending kinds map directly") {
    json aave = {{"event_type", "Repay"},       {"block_number", 19000003},
                 {"transaction_hash", "0xef"},  {"tx_index", 2},
                 {"log_index", 7},              {"timestamp", 1704067236},
                 {"amount", "99000"},           {"repayer", "0x13"},
                 {"use_a_tokens", false}};
    CHECK(parse_record(Protocol::Aave, aave).kind == BaseEventKind::Repay);

    json morpho = {{"event_type", "Liquidate"},  {"block_number", 19000011},
                   {"transaction_hash", "0xdd"}, {"log_index", 3},
                   {"market_id", "0xm1"},        {"amount", "83500000000"},
                   {"net_amount", "83400000000"}};
    CHECK(parse_record(Protocol::Morpho, morpho).kind == BaseEventKind::Liquidate);
}

TEST_CASE("parse errors carry the offending value") {
    json unknown = {{"event_type", "FlashLoan"}, {"block_number", 1}, {"transaction_hash", "0x"}};
    CHECK_THROWS_AS(parse_record(Protocol::Aave, unknown), UnknownEventType);

    json no_block = {{"type", "mint"}, {"txHash", "0x"}};
    CHECK_THROWS_AS(parse_record(Protocol::Uniswap, no_block), MalformedRecord);

    json bad_amount = {{"event_type", "Supply"},      {"block_number", 5},
                       {"transaction_hash", "0x"},    {"log_index", 0},
                       {"amount", "12.5"}};
    CHECK_THROWS_AS(parse_record(Protocol::Aave, bad_amount), MalformedRecord);
}

TEST_CASE("empty-string amounts become absent entries") {
    json rec = {{"type", "mint"},   {"blockNumber", 10},  {"txHash", "0x"},
                {"timestamp", 100}, {"amount0", ""},      {"amount1", "50"}};
    RawRecord out = parse_record(Protocol::Uniswap, rec);
    CHECK(out.amounts.count("amount0") == 0);
    CHECK(out.amounts.at("amount1") == "50");
}

TEST_CASE("raw record serialization preserves decimal strings exactly") {
    json rec = {{"event_type", "Supply"},
                {"block_number", 19000002},
                {"transaction_hash", "0xdd01"},
                {"log_index", 1},
                {"market_id", "0xm1"},
                {"amount", "28200000000000000019"},
                {"net_amount", "-28199000000000000007"}};
    RawRecord original = parse_record(Protocol::Morpho, rec);
    RawRecord reloaded = raw_record_from_json(raw_record_json(original));
    CHECK(reloaded.amounts == original.amounts);
    CHECK(reloaded.block == original.block);
    CHECK(reloaded.kind == original.kind);
    CHECK(reloaded.tx_hash == original.tx_hash);
}

TEST_CASE("ingest_pool sorts, collapses, and reports per-kind counts") {
    std::vector<json> records = {
        {{"type", "swap"}, {"blockNumber", 12}, {"txHash", "0x3"}, {"timestamp", 30},
         {"amount0", "700"}, {"amount1", "-900"}},
        {{"type", "mint"}, {"blockNumber", 10}, {"txHash", "0x1"}, {"timestamp", 10},
         {"amount0", "100"}, {"amount1", "100"}},
        {{"type", "burn"}, {"blockNumber", 10}, {"txHash", "0x2"}, {"timestamp", 10},
         {"amount0", "40"}, {"amount1", "40"}},
    };
    IngestResult out = ingest_pool(records, Protocol::Uniswap, "poolA");
    REQUIRE(out.seq.size() == 2);
    CHECK(out.seq.events[0].block == 10);
    CHECK(out.seq.events[0].mark == 11);  // Mint+Burn
    CHECK(out.seq.events[1].block == 12);
    CHECK(out.seq.events[1].mark == 0);  // SwapIn
    CHECK(out.kind_counts.at(BaseEventKind::Mint) == 1);
    CHECK(out.kind_counts.at(BaseEventKind::SwapIn) == 1);
    CHECK(out.skipped == 0);

    // replay deltas: block 10 nets mint - burn, block 12 carries the swap
    REQUIRE(out.replay.size() == 2);
    CHECK(out.replay[0].delta_x == Catch::Approx(60.0));
    CHECK(out.replay[0].delta_y == Catch::Approx(60.0));
    CHECK(out.replay[1].delta_x == Catch::Approx(700.0));
    CHECK(out.replay[1].swap_volume == Catch::Approx(700.0));

    CHECK(ingest_pool({}, Protocol::Uniswap, "empty").seq.empty());
}

TEST_CASE("lenient mode skips malformed records, strict mode aborts") {
    std::vector<json> records = {
        {{"type", "teleport"}, {"blockNumber", 5}, {"txHash", "0x"}, {"timestamp", 1}}};
    IngestResult lenient = ingest_pool(records, Protocol::Uniswap, "p");
    CHECK(lenient.seq.empty());
    CHECK(lenient.skipped == 1);
    REQUIRE(lenient.errors.size() == 1);

    CHECK_THROWS_AS(ingest_pool(records, Protocol::Uniswap, "p", IngestPolicy::Strict),
                    MalformedRecord);
}

TEST_CASE("ingest output blocks strictly increase", "[property]") {
    std::vector<json> records;
    for (int i = 0; i < 200; ++i) {
        records.push_back({{"type", i % 3 == 0 ? "mint" : "swap"},
                           {"blockNumber", 1 + (i * 7919) % 50},
                           {"txHash", "0x"},
                           {"timestamp", 1000 + i},
                           {"amount0", std::to_string((i % 5) + 1)},
                           {"amount1", "1"}});
    }
    IngestResult out = ingest_pool(records, Protocol::Uniswap, "p");
    for (std::size_t i = 1; i < out.seq.size(); ++i) {
        CHECK(out.seq.events[i].block > out.seq.events[i - 1].block);
    }
}

TEST_CASE("scan_dataset walks the fixture tree and counts per kind") {
    ScanResult scan = scan_dataset(fixtures() / "raw");

    // corrupt.jsonl is recorded under errors but does not stop the scan
    REQUIRE(scan.file_errors.size() == 1);
    CHECK(scan.file_errors.begin()->first == "uniswap/corrupt.jsonl");

    REQUIRE(scan.pools.count("uniswap/usdc_eth") == 1);
    REQUIRE(scan.pools.count("pendle/pt_susde") == 1);
    REQUIRE(scan.pools.count("aave/usdc") == 1);
    REQUIRE(scan.pools.count("morpho/market1") == 1);

    // per-kind counts match a hand count of the fixture lines
    const PoolManifest& uni = scan.manifest.at("uniswap/usdc_eth");
    CHECK(uni.raw_records == 5);
    CHECK(uni.kind_counts.at("Mint") == 2);
    CHECK(uni.kind_counts.at("Burn") == 1);
    CHECK(uni.kind_counts.at("SwapOut") == 1);
    CHECK(uni.kind_counts.at("SwapIn") == 1);
    CHECK(uni.min_block == 19000001);
    CHECK(uni.max_block == 19000010);

    const PoolManifest& pen = scan.manifest.at("pendle/pt_susde");
    CHECK(pen.raw_records == 5);
    CHECK(pen.kind_counts.at("Mint") == 1);
    CHECK(pen.kind_counts.at("UpdateImpliedRate") == 1);
    CHECK(pen.kind_counts.at("SwapOut") == 1);
    CHECK(pen.kind_counts.at("SwapIn") == 1);
    CHECK(pen.kind_counts.at("Burn") == 1);
    CHECK(scan.pools.at("pendle/pt_susde").seq.size() == 4);  // two events share block 19000002

    CHECK(scan.total_events == 5 + 5 + 4 + 2);

    const json manifest = manifest_json(scan);
    CHECK(manifest.at("total_events") == 16);
    CHECK(manifest.at("errors").size() == 1);

    ScanResult empty = scan_dataset(fixtures() / "raw" / "no_such_dir");
    CHECK(empty.pools.empty());
    CHECK(empty.total_events == 0);
}
