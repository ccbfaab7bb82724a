#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ammtpp/eval.hpp"
#include "ammtpp/loss.hpp"
#include "ammtpp/train.hpp"

namespace ammtpp {
namespace config {

// Experiment file consumed by `train` and `eval`. Every field has a default;
// what the file sets wins, and command-line flags win over the file.
struct ExperimentConfig {
    // data
    std::string data_root;
    std::optional<std::string> protocol_filter;
    int max_len = 300;
    std::array<double, 3> ratios = {0.70, 0.15, 0.15};

    // model
    std::string family = "rmtpp_style";
    int num_marks = 31;
    int hidden_size = 64;
    int mixture_components = 3;

    // objective
    std::string objective = "uwm";
    std::vector<double> fixed_sigma = {1.0, 1.0, 1.0};

    // training
    train::TrainConfig train_config;
    std::uint64_t seed = 2019;

    // grid mode (non-empty lists switch `train` to the benchmark grid)
    std::vector<std::string> grid_families;
    std::vector<std::string> grid_objectives;

    // evaluation
    eval::OtdConfig otd;

    std::string output_dir = "out";

    [[nodiscard]] nlohmann::json model_config_json() const {
        return {{"num_marks", num_marks},
                {"hidden_size", hidden_size},
                {"components", mixture_components}};
    }

    [[nodiscard]] loss::Objective build_objective_for(const std::string& name) const {
        const auto variant = loss::objective_variant_from_string(name);
        return loss::build_objective(
            variant, variant == loss::ObjectiveVariant::FixedSigma ? fixed_sigma
                                                                   : std::vector<double>{});
    }

    [[nodiscard]] nlohmann::json to_json() const {
        nlohmann::json j;
        j["data"] = {{"root", data_root},
                     {"protocol", protocol_filter ? nlohmann::json(*protocol_filter)
                                                  : nlohmann::json(nullptr)},
                     {"max_len", max_len},
                     {"ratios", ratios}};
        j["model"] = {{"family", family},
                      {"num_marks", num_marks},
                      {"hidden_size", hidden_size},
                      {"mixture_components", mixture_components}};
        j["objective"] = {{"variant", objective}, {"fixed_sigma", fixed_sigma}};
        j["train"] = {{"learning_rate", train_config.learning_rate},
                      {"lr_grid", train_config.lr_grid},
                      {"batch_size", train_config.batch_size},
                      {"grad_accumulation", train_config.grad_accumulation},
                      {"max_epochs", train_config.max_epochs},
                      {"patience", train_config.patience},
                      {"dropout", train_config.dropout},
                      {"reduction", train_config.reduction == loss::Reduction::Sum
                                        ? "sum"
                                        : "per_event_mean"},
                      {"adam", {{"beta1", train_config.adam.beta1},
                                {"beta2", train_config.adam.beta2},
                                {"eps", train_config.adam.eps}}},
                      {"seed", seed},
                      {"seeds", train_config.seeds}};
        j["grid"] = {{"families", grid_families}, {"objectives", grid_objectives}};
        j["eval"] = {{"otd_cost", otd.delete_cost},
                     {"horizons", otd.horizons},
                     {"rollout", otd.rollout == eval::RolloutMode::Sampled ? "sampled"
                                                                           : "deterministic"},
                     {"n_draws", otd.n_draws},
                     {"rollout_seed", otd.seed},
                     {"anchor_fraction", otd.anchor_fraction}};
        j["output_dir"] = output_dir;
        return j;
    }

    static ExperimentConfig from_json(const nlohmann::json& j) {
        ExperimentConfig c;
        if (j.contains("data")) {
            const auto& d = j["data"];
            c.data_root = d.value("root", c.data_root);
            if (d.contains("protocol") && !d["protocol"].is_null()) {
                c.protocol_filter = d["protocol"].get<std::string>();
            }
            c.max_len = d.value("max_len", c.max_len);
            if (d.contains("ratios")) c.ratios = d["ratios"].get<std::array<double, 3>>();
        }
        if (j.contains("model")) {
            const auto& m = j["model"];
            c.family = m.value("family", c.family);
            c.num_marks = m.value("num_marks", c.num_marks);
            c.hidden_size = m.value("hidden_size", c.hidden_size);
            c.mixture_components = m.value("mixture_components", c.mixture_components);
        }
        if (j.contains("objective")) {
            const auto& o = j["objective"];
            c.objective = o.value("variant", c.objective);
            if (o.contains("fixed_sigma")) {
                c.fixed_sigma = o["fixed_sigma"].get<std::vector<double>>();
            }
        }
        if (j.contains("train")) {
            const auto& t = j["train"];
            c.train_config.learning_rate = t.value("learning_rate", c.train_config.learning_rate);
            if (t.contains("lr_grid") && !t["lr_grid"].is_null()) {
                c.train_config.lr_grid = t["lr_grid"].get<std::vector<double>>();
            }
            c.train_config.batch_size = t.value("batch_size", c.train_config.batch_size);
            c.train_config.grad_accumulation =
                t.value("grad_accumulation", c.train_config.grad_accumulation);
            c.train_config.max_epochs = t.value("max_epochs", c.train_config.max_epochs);
            c.train_config.patience = t.value("patience", c.train_config.patience);
            c.train_config.dropout = t.value("dropout", c.train_config.dropout);
            if (t.contains("reduction")) {
                c.train_config.reduction = t["reduction"].get<std::string>() == "sum"
                                               ? loss::Reduction::Sum
                                               : loss::Reduction::PerEventMean;
            }
            if (t.contains("adam")) {
                c.train_config.adam.beta1 = t["adam"].value("beta1", c.train_config.adam.beta1);
                c.train_config.adam.beta2 = t["adam"].value("beta2", c.train_config.adam.beta2);
                c.train_config.adam.eps = t["adam"].value("eps", c.train_config.adam.eps);
            }
            c.seed = t.value("seed", c.seed);
            if (t.contains("seeds")) {
                c.train_config.seeds = t["seeds"].get<std::vector<std::uint64_t>>();
            }
        }
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            if (g.contains("families")) {
                c.grid_families = g["families"].get<std::vector<std::string>>();
            }
            if (g.contains("objectives")) {
                c.grid_objectives = g["objectives"].get<std::vector<std::string>>();
            }
        }
        if (j.contains("eval")) {
            const auto& e = j["eval"];
            c.otd.delete_cost = e.value("otd_cost", c.otd.delete_cost);
            if (e.contains("horizons")) c.otd.horizons = e["horizons"].get<std::vector<int>>();
            if (e.contains("rollout")) {
                c.otd.rollout = e["rollout"].get<std::string>() == "sampled"
                                    ? eval::RolloutMode::Sampled
                                    : eval::RolloutMode::Deterministic;
            }
            c.otd.n_draws = e.value("n_draws", c.otd.n_draws);
            c.otd.seed = e.value("rollout_seed", c.otd.seed);
            c.otd.anchor_fraction = e.value("anchor_fraction", c.otd.anchor_fraction);
        }
        c.output_dir = j.value("output_dir", c.output_dir);
        return c;
    }
};

}  // namespace config
}  // namespace ammtpp
