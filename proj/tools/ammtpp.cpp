// Command-line front end: ingest raw protocol extracts, compute dataset
// statistics, replay pool reserves, and run the TPP train/eval pipeline.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ammtpp/amm.hpp"
#include "ammtpp/config.hpp"
#include "ammtpp/eval.hpp"
#include "ammtpp/events.hpp"
#include "ammtpp/ingest.hpp"
#include "ammtpp/io.hpp"
#include "ammtpp/loss.hpp"
#include "ammtpp/stats.hpp"
#include "ammtpp/tpp/checkpoint.hpp"
#include "ammtpp/tpp/simulate.hpp"
#include "ammtpp/train.hpp"

namespace fs = std::filesystem;
using namespace ammtpp;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

int fail_usage(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return kUsageError;
}

int fail_runtime(const std::string& message) {
    std::cerr << "error: " << message << "\n";
    return kRuntimeError;
}

void write_snapshot(const fs::path& dir, const json& resolved) {
    fs::create_directories(dir);
    write_json_file(dir / "resolved_config.json", resolved);
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

int run_ingest(const std::string& root, const std::string& out, bool strict) {
    if (!fs::exists(root)) return fail_usage("ingest root does not exist: " + root);
    try {
        const auto policy = strict ? IngestPolicy::Strict : IngestPolicy::Lenient;
        ScanResult scan = scan_dataset(root, policy);
        fs::create_directories(out);
        for (const auto& [key, ing] : scan.pools) {
            if (ing.seq.empty()) continue;  // lending pools appear in the manifest only
            const fs::path path = fs::path(out) / (key + ".jsonl");
            fs::create_directories(path.parent_path());
            write_events_jsonl(path, ing.seq, &ing.replay);
        }
        write_json_file(fs::path(out) / "manifest.json", manifest_json(scan));
        write_snapshot(out, json{{"command", "ingest"},
                                 {"root", root},
                                 {"out", out},
                                 {"strict", strict}});
        std::cout << "ingested " << scan.pools.size() << " pools, " << scan.total_events
                  << " raw records";
        if (!scan.file_errors.empty()) std::cout << ", " << scan.file_errors.size() << " file errors";
        std::cout << "\n";
        return kOk;
    } catch (const std::exception& e) {
        return fail_runtime(e.what());
    }
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

int run_stats(const std::string& root, const std::string& out, std::uint64_t bin_size,
              std::uint64_t corr_window, std::uint64_t cv_bin, int trigger_window,
              double trigger_quantile) {
    if (!fs::exists(root)) return fail_usage("stats root does not exist: " + root);
    try {
        ScanResult scan = scan_dataset(root);
        fs::create_directories(out);

        CsvWriter gaps(fs::path(out) / "gap_summary.csv");
        gaps.row({"pool", "count", "mean", "median", "p99", "max"});
        for (const auto& [key, ing] : scan.pools) {
            if (ing.seq.size() < 2) continue;
            const auto s = stats::gap_summary(ing.seq);
            gaps.row({key, std::to_string(s.count), csv_double(s.mean), csv_double(s.median),
                      csv_double(s.p99), std::to_string(s.max)});
        }

        CsvWriter epb(fs::path(out) / "epb.csv");
        epb.row({"pool", "bin_start", "events_per_block"});
        for (const auto& [key, ing] : scan.pools) {
            std::vector<std::uint64_t> blocks;
            for (const auto& r : ing.records) blocks.push_back(r.block);
            for (const auto& bin : stats::events_per_block(blocks, bin_size)) {
                epb.row({key, std::to_string(bin.bin_start), csv_double(bin.events_per_block)});
            }
        }

        // per-protocol block occupancy and power-law exponent
        std::map<std::string, std::vector<std::uint64_t>> blocks_by_protocol;
        for (const auto& [key, ing] : scan.pools) {
            auto& blocks = blocks_by_protocol[key.substr(0, key.find('/'))];
            for (const auto& r : ing.records) blocks.push_back(r.block);
        }
        CsvWriter occ(fs::path(out) / "occupancy_pmf.csv");
        occ.row({"protocol", "events_in_block", "pmf"});
        json alphas = json::object();
        for (const auto& [protocol, blocks] : blocks_by_protocol) {
            if (blocks.empty()) continue;
            try {
                const auto pmf = stats::occupancy_pmf(blocks);
                for (std::size_t i = 0; i < pmf.support.size(); ++i) {
                    occ.row({protocol, std::to_string(pmf.support[i]), csv_double(pmf.pmf[i])});
                }
                alphas[protocol] = pmf.alpha_hat;
            } catch (const stats::DegenerateFit&) {
                alphas[protocol] = nullptr;
            }
        }

        // trigger alignment against high-volume uniswap blocks
        std::map<std::uint64_t, double> volume_per_block;
        for (const auto& [key, ing] : scan.pools) {
            if (key.rfind("uniswap/", 0) != 0) continue;
            for (std::size_t i = 0; i < ing.replay.size(); ++i) {
                if (ing.replay[i].swap_volume) {
                    volume_per_block[ing.seq.events[i].block] += *ing.replay[i].swap_volume;
                }
            }
        }
        if (!volume_per_block.empty()) {
            const auto triggers = stats::select_trigger_blocks(volume_per_block, trigger_quantile);
            if (!triggers.empty()) {
                CsvWriter trig(fs::path(out) / "trigger_alignment.csv");
                trig.row({"protocol", "offset", "probability"});
                for (const auto& [protocol, blocks] : blocks_by_protocol) {
                    if (blocks.empty()) continue;
                    for (const auto& p :
                         stats::trigger_conditional_probability(triggers, blocks, trigger_window)) {
                        trig.row({protocol, std::to_string(p.offset), csv_double(p.probability)});
                    }
                }
            }
        }

        CsvWriter cv(fs::path(out) / "burstiness.csv");
        cv.row({"pool", "cv"});
        for (const auto& [key, ing] : scan.pools) {
            std::vector<std::uint64_t> stamps;
            for (const auto& r : ing.records) {
                if (r.wallclock) stamps.push_back(*r.wallclock);
            }
            if (stamps.size() != ing.records.size() || stamps.empty()) continue;
            try {
                cv.row({key, csv_double(stats::burstiness_cv_from_stamps(stamps, cv_bin))});
            } catch (const stats::UndefinedStatistic&) {
            }
        }

        // lending correlations per protocol with wallclock coverage
        CsvWriter corr(fs::path(out) / "lending_correlations.csv");
        corr.row({"protocol", "kind_a", "kind_b", "pearson", "spearman"});
        for (const std::string protocol : {"aave", "morpho"}) {
            std::map<BaseEventKind, std::vector<std::uint64_t>> streams;
            bool have_stamps = true;
            for (const auto& [key, ing] : scan.pools) {
                if (key.rfind(protocol + "/", 0) != 0) continue;
                for (const auto& r : ing.records) {
                    if (!r.wallclock) {
                        have_stamps = false;
                        break;
                    }
                    streams[r.kind].push_back(*r.wallclock);
                }
            }
            if (!have_stamps || streams.size() < 2) continue;
            try {
                const auto m = stats::lending_correlations(streams, corr_window);
                for (std::size_t i = 0; i < m.kinds.size(); ++i) {
                    for (std::size_t j = i + 1; j < m.kinds.size(); ++j) {
                        corr.row({protocol, to_string(m.kinds[i]), to_string(m.kinds[j]),
                                  m.pearson[i][j] ? csv_double(*m.pearson[i][j]) : "",
                                  m.spearman[i][j] ? csv_double(*m.spearman[i][j]) : ""});
                    }
                }
            } catch (const InsufficientData&) {
            }
        }

        write_json_file(fs::path(out) / "stats_summary.json",
                        json{{"alpha_hat", alphas},
                             {"pools", scan.pools.size()},
                             {"total_events", scan.total_events}});
        write_snapshot(out, json{{"command", "stats"},
                                 {"root", root},
                                 {"out", out},
                                 {"bin_size", bin_size},
                                 {"corr_window", corr_window},
                                 {"cv_bin", cv_bin},
                                 {"trigger_window", trigger_window},
                                 {"trigger_quantile", trigger_quantile}});
        std::cout << "stats written to " << out << "\n";
        return kOk;
    } catch (const std::exception& e) {
        return fail_runtime(e.what());
    }
}

// ---------------------------------------------------------------------------
// replay
// ---------------------------------------------------------------------------

int run_replay(const std::string& events_file, double x0, double y0, const std::string& out) {
    if (!fs::exists(events_file)) return fail_usage("events file does not exist: " + events_file);
    if (x0 <= 0.0 || y0 <= 0.0) return fail_usage("initial reserves must be positive");
    try {
        const auto file = read_events_jsonl(events_file);
        amm::PoolState pool = amm::PoolState::make(x0, y0);
        CsvWriter csv(out);
        csv.row({"block", "reserve_x", "reserve_y", "spot_price"});
        csv.row({"0", csv_double(pool.reserve_x), csv_double(pool.reserve_y),
                 csv_double(amm::spot_price(pool))});
        for (std::size_t i = 0; i < file.seq.size(); ++i) {
            const auto& extra = file.replay[i];
            if (extra.delta_x || extra.delta_y) {
                pool = amm::apply_reserve_delta(pool, extra.delta_x.value_or(0.0),
                                                extra.delta_y.value_or(0.0));
            }
            csv.row({std::to_string(file.seq.events[i].block), csv_double(pool.reserve_x),
                     csv_double(pool.reserve_y), csv_double(amm::spot_price(pool))});
        }
        std::cout << "replayed " << file.seq.size() << " events\n";
        return kOk;
    } catch (const std::exception& e) {
        return fail_runtime(e.what());
    }
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

int run_simulate(const std::string& checkpoint, double horizon, double t_start,
                 std::uint64_t seed, const std::string& asset_id, const std::string& out) {
    if (!fs::exists(checkpoint)) return fail_usage("checkpoint does not exist: " + checkpoint);
    if (horizon <= 0.0) return fail_usage("horizon must be positive");
    try {
        const auto model = tpp::model_from_checkpoint(read_json_file(checkpoint));
        const EventSequence events =
            tpp::simulate_thinning(*model, t_start, horizon, seed, asset_id);
        write_events_jsonl(out, events);
        write_json_file(out + ".config.json", json{{"command", "simulate"},
                                                   {"checkpoint", checkpoint},
                                                   {"horizon", horizon},
                                                   {"t_start", t_start},
                                                   {"seed", seed},
                                                   {"asset_id", asset_id},
                                                   {"out", out}});
        std::cout << "simulated " << events.size() << " events\n";
        return kOk;
    } catch (const std::exception& e) {
        return fail_runtime(e.what());
    }
}

// ---------------------------------------------------------------------------
// train / eval / report
// ---------------------------------------------------------------------------

std::vector<EventSequence> load_windowed_sequences(const fs::path& root, int max_len,
                                                   const std::optional<std::string>& protocol) {
    std::vector<EventSequence> windows;
    for (const auto& path : list_jsonl_files(root)) {
        if (protocol) {
            const auto dir = path.parent_path().filename().string();
            if (dir != *protocol) continue;
        }
        UnifiedEventFile file = read_events_jsonl(path);
        if (file.seq.asset_id.empty()) file.seq.asset_id = path.stem().string();
        if (file.seq.empty()) continue;
        for (auto& w : window_split(file.seq, static_cast<std::size_t>(max_len))) {
            windows.push_back(std::move(w));
        }
    }
    return windows;
}

void write_trace_csv(const fs::path& path, const std::vector<train::EpochTrace>& trace) {
    CsvWriter csv(path);
    csv.row({"epoch", "split", "mark_nll", "time_nll", "time_mse", "sigma1", "sigma2", "sigma3",
             "total"});
    for (const auto& row : trace) {
        csv.row({std::to_string(row.epoch), row.split, csv_double(row.mark_nll),
                 csv_double(row.time_nll), csv_double(row.time_mse), csv_double(row.sigma[0]),
                 csv_double(row.sigma[1]), csv_double(row.sigma[2]), csv_double(row.total)});
    }
}

int run_train(const std::string& config_file, std::optional<std::uint64_t> seed_override,
              std::optional<std::string> out_override) {
    if (!fs::exists(config_file)) return fail_usage("config does not exist: " + config_file);
    config::ExperimentConfig cfg;
    try {
        cfg = config::ExperimentConfig::from_json(read_json_file(config_file));
    } catch (const std::exception& e) {
        return fail_usage(std::string("bad config: ") + e.what());
    }
    if (seed_override) cfg.seed = *seed_override;
    if (out_override) cfg.output_dir = *out_override;
    if (!fs::exists(cfg.data_root)) return fail_usage("data root does not exist: " + cfg.data_root);

    try {
        auto windows = load_windowed_sequences(cfg.data_root, cfg.max_len, cfg.protocol_filter);
        if (windows.size() < 3) {
            return fail_usage("need at least 3 sequences after windowing, got " +
                              std::to_string(windows.size()));
        }
        const DatasetSplit split = chronological_split(std::move(windows), cfg.ratios);
        for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
        const train::TimedSplit timed = train::to_timed(split);

        const fs::path out(cfg.output_dir);
        fs::create_directories(out);

        if (!cfg.grid_families.empty() && !cfg.grid_objectives.empty()) {
            train::BenchSpec spec;
            for (const auto& family : cfg.grid_families) {
                spec.families.emplace_back(family, cfg.model_config_json());
            }
            for (const auto& name : cfg.grid_objectives) {
                spec.objectives.push_back(loss::objective_variant_from_string(name));
            }
            spec.fixed_sigma = cfg.fixed_sigma;
            spec.eval_config = cfg.otd;
            const auto report = train::run_benchmark(spec, timed, cfg.train_config);
            json grid = train::bench_report_json(report);
            grid["config"] = cfg.to_json();
            write_json_file(out / "grid.json", grid);
            write_snapshot(out, cfg.to_json());
            std::cout << "benchmark grid written to " << (out / "grid.json").string() << "\n";
            return kOk;
        }

        auto model = tpp::make_model(cfg.family, cfg.model_config_json(), cfg.seed);
        const auto objective = cfg.build_objective_for(cfg.objective);
        const auto result = train::train_with_lr_selection(*model, timed, objective,
                                                           cfg.train_config, cfg.seed);

        json ckpt = tpp::checkpoint_json(*model);
        ckpt["uncertainty_s"] = result.best_s;
        write_json_file(out / "checkpoint.json", ckpt);
        write_trace_csv(out / "trace.csv", result.trace);

        const auto metrics = eval::evaluate_model(*model, timed.test, cfg.otd);
        json mj = eval::metrics_json(metrics);
        mj["val_ll"] = result.best_val_ll;
        mj["best_epoch"] = result.best_epoch;
        mj["learning_rate"] = result.learning_rate;
        mj["epochs_run"] = result.epochs_run;
        write_json_file(out / "metrics.json", mj);
        write_snapshot(out, cfg.to_json());
        std::cout << "trained " << cfg.family << "/" << cfg.objective << ": val_ll "
                  << result.best_val_ll << ", test rmse " << metrics.time_rmse << "\n";
        return kOk;
    } catch (const std::exception& e) {
        return fail_runtime(e.what());
    }
}

int run_eval(const std::string& checkpoint, const std::string& data, std::vector<int> horizons,
             double otd_cost, const std::string& rollout_mode, int draws, std::uint64_t seed,
             int max_len, const std::string& out) {
    if (!fs::exists(checkpoint)) return fail_usage("checkpoint does not exist: " + checkpoint);
    if (!fs::exists(data)) return fail_usage("data root does not exist: " + data);
    if (otd_cost <= 0.0) return fail_usage("otd cost must be positive");
    try {
        const auto model = tpp::model_from_checkpoint(read_json_file(checkpoint));
        auto windows = load_windowed_sequences(data, max_len, std::nullopt);
        std::vector<tpp::TimedSequence> timed;
        for (const auto& w : windows) timed.push_back(tpp::TimedSequence::from_events(w));

        eval::OtdConfig config;
        config.delete_cost = otd_cost;
        if (!horizons.empty()) config.horizons = std::move(horizons);
        config.rollout = rollout_mode == "sampled" ? eval::RolloutMode::Sampled
                                                   : eval::RolloutMode::Deterministic;
        config.n_draws = draws;
        config.seed = seed;

        const auto metrics = eval::evaluate_model(*model, timed, config);
        const fs::path out_dir(out);
        fs::create_directories(out_dir);
        write_json_file(out_dir / "metrics.json", eval::metrics_json(metrics));

        CsvWriter csv(out_dir / "metrics_row.csv");
        std::vector<std::string> header = {"family", "type_accuracy", "time_rmse", "n_events"};
        std::vector<std::string> row = {model->family(), csv_double(metrics.type_accuracy),
                                        csv_double(metrics.time_rmse),
                                        std::to_string(metrics.n_events)};
        for (const auto& [H, v] : metrics.otd) {
            header.push_back("otd_" + std::to_string(H));
            row.push_back(csv_double(v));
        }
        csv.row(header);
        csv.row(row);
        write_snapshot(out_dir, json{{"command", "eval"},
                                     {"checkpoint", checkpoint},
                                     {"data", data},
                                     {"horizons", config.horizons},
                                     {"otd_cost", otd_cost},
                                     {"rollout", rollout_mode},
                                     {"n_draws", draws},
                                     {"seed", seed},
                                     {"max_len", max_len}});
        std::cout << "type_accuracy " << metrics.type_accuracy << ", time_rmse "
                  << metrics.time_rmse << "\n";
        return kOk;
    } catch (const std::exception& e) {
        return fail_runtime(e.what());
    }
}

int run_report(const std::string& grid_file, const std::string& out) {
    if (!fs::exists(grid_file)) return fail_usage("grid file does not exist: " + grid_file);
    try {
        const json grid = read_json_file(grid_file);
        CsvWriter csv(out);
        csv.row({"family", "objective", "metric", "mean", "std", "n_seeds"});
        for (const auto& cell : grid.at("cells")) {
            // recompute the aggregation from the per-seed runs
            train::GridCell c;
            c.family = cell.at("family").get<std::string>();
            c.objective = cell.at("objective").get<std::string>();
            for (const auto& run : cell.at("runs")) {
                train::SeedRun r;
                r.seed = run.at("seed").get<std::uint64_t>();
                r.metrics = run.at("metrics").get<std::map<std::string, double>>();
                c.runs.push_back(std::move(r));
            }
            std::map<std::string, double> mean, std_dev;
            train::cell_mean_std(c, mean, std_dev);
            for (const auto& [metric, m] : mean) {
                csv.row({c.family, c.objective, metric, csv_double(m),
                         csv_double(std_dev[metric]), std::to_string(c.runs.size())});
            }
        }
        std::cout << "report written to " << out << "\n";
        return kOk;
    } catch (const std::exception& e) {
        return fail_runtime(e.what());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Marked temporal point processes over AMM on-chain event streams"};
    app.require_subcommand(1);

    // ingest
    auto* ingest_cmd = app.add_subcommand("ingest", "Parse raw protocol extracts into unified event files");
    std::string ingest_root, ingest_out;
    bool ingest_strict = false;
    ingest_cmd->add_option("--root", ingest_root, "Raw dataset root (<protocol>/<pool>.json[l])")
        ->required();
    ingest_cmd->add_option("--out", ingest_out, "Output directory")->required();
    ingest_cmd->add_flag("--strict", ingest_strict, "Abort on the first malformed record");

    // stats
    auto* stats_cmd = app.add_subcommand("stats", "Dataset statistics from a raw protocol tree");
    std::string stats_root, stats_out;
    std::uint64_t stats_bin = 10000, stats_corr = 14400, stats_cv = 3600;
    int stats_trigger_window = 5;
    double stats_trigger_q = 0.95;
    stats_cmd->add_option("--root", stats_root, "Raw dataset root")->required();
    stats_cmd->add_option("--out", stats_out, "Output directory")->required();
    stats_cmd->add_option("--bin-size", stats_bin, "Blocks per EpB bin");
    stats_cmd->add_option("--corr-window", stats_corr, "Lending correlation window (seconds)");
    stats_cmd->add_option("--cv-bin", stats_cv, "Burstiness bin (seconds)");
    stats_cmd->add_option("--trigger-window", stats_trigger_window, "Trigger offset window K");
    stats_cmd->add_option("--trigger-quantile", stats_trigger_q, "Trigger volume quantile");

    // replay
    auto* replay_cmd = app.add_subcommand("replay", "Replay reserve deltas from a unified event file");
    std::string replay_events, replay_out;
    double replay_x0 = 0.0, replay_y0 = 0.0;
    replay_cmd->add_option("--events", replay_events, "Unified JSONL event file")->required();
    replay_cmd->add_option("--x0", replay_x0, "Initial reserve of token X")->required();
    replay_cmd->add_option("--y0", replay_y0, "Initial reserve of token Y")->required();
    replay_cmd->add_option("--out", replay_out, "Output CSV path")->required();

    // simulate
    auto* sim_cmd = app.add_subcommand("simulate", "Sample a synthetic event stream from a checkpoint");
    std::string sim_ckpt, sim_out, sim_asset = "simulated";
    double sim_horizon = 0.0, sim_t_start = 0.0;
    std::uint64_t sim_seed = 2019;
    sim_cmd->add_option("--checkpoint", sim_ckpt, "Model checkpoint JSON")->required();
    sim_cmd->add_option("--horizon", sim_horizon, "Simulation horizon (blocks)")->required();
    sim_cmd->add_option("--t-start", sim_t_start, "Start time");
    sim_cmd->add_option("--seed", sim_seed, "RNG seed");
    sim_cmd->add_option("--asset-id", sim_asset, "Asset id for the output file");
    sim_cmd->add_option("--out", sim_out, "Output JSONL path")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model (or a benchmark grid) from a config");
    std::string train_config;
    std::optional<std::uint64_t> train_seed;
    std::optional<std::string> train_out;
    train_cmd->add_option("--config", train_config, "Experiment config JSON")->required();
    train_cmd->add_option("--seed", train_seed, "Seed override");
    train_cmd->add_option("--out", train_out, "Output directory override");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a unified event directory");
    std::string eval_ckpt, eval_data, eval_out = "out", eval_rollout = "deterministic";
    std::vector<int> eval_horizons;
    double eval_cost = 1.0;
    int eval_draws = 10, eval_max_len = 300;
    std::uint64_t eval_seed = 2019;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "Model checkpoint JSON")->required();
    eval_cmd->add_option("--data", eval_data, "Unified event directory")->required();
    eval_cmd->add_option("--horizons", eval_horizons, "OTD horizons")->delimiter(',');
    eval_cmd->add_option("--otd-cost", eval_cost, "OTD deletion/insertion cost");
    eval_cmd->add_option("--rollout", eval_rollout, "Rollout mode: deterministic|sampled");
    eval_cmd->add_option("--draws", eval_draws, "Sampled-rollout draws");
    eval_cmd->add_option("--seed", eval_seed, "Sampled-rollout seed");
    eval_cmd->add_option("--max-len", eval_max_len, "Window length for evaluation sequences");
    eval_cmd->add_option("--out", eval_out, "Output directory");

    // report
    auto* report_cmd = app.add_subcommand("report", "Aggregate a benchmark grid into CSV");
    std::string report_grid, report_out;
    report_cmd->add_option("--grid", report_grid, "grid.json from a benchmark run")->required();
    report_cmd->add_option("--out", report_out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (ingest_cmd->parsed()) return run_ingest(ingest_root, ingest_out, ingest_strict);
        if (stats_cmd->parsed()) {
            return run_stats(stats_root, stats_out, stats_bin, stats_corr, stats_cv,
                             stats_trigger_window, stats_trigger_q);
        }
        if (replay_cmd->parsed()) return run_replay(replay_events, replay_x0, replay_y0, replay_out);
        if (sim_cmd->parsed()) {
            return run_simulate(sim_ckpt, sim_horizon, sim_t_start, sim_seed, sim_asset, sim_out);
        }
        if (train_cmd->parsed()) return run_train(train_config, train_seed, train_out);
        if (eval_cmd->parsed()) {
            return run_eval(eval_ckpt, eval_data, eval_horizons, eval_cost, eval_rollout,
                            eval_draws, eval_seed, eval_max_len, eval_out);
        }
        if (report_cmd->parsed()) return run_report(report_grid, report_out);
    } catch (const std::exception& e) {
        return fail_runtime(e.what());
    }
    return kUsageError;
}
