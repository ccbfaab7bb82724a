#pragma once

#include <memory>
#include <string>

#include <json.hpp>

#include "ammtpp/tpp/hawkes_model.hpp"
#include "ammtpp/tpp/lognorm_mix.hpp"
#include "ammtpp/tpp/model.hpp"
#include "ammtpp/tpp/rmtpp_style.hpp"

namespace ammtpp {
namespace tpp {

inline GapQuadrature quad_from_json(const nlohmann::json& j) {
    GapQuadrature q;
    if (j.contains("min_gap")) q.min_gap = j["min_gap"].get<double>();
    if (j.contains("max_gap")) q.max_gap = j["max_gap"].get<double>();
    if (j.contains("num_nodes")) q.num_nodes = j["num_nodes"].get<int>();
    return q;
}

// Model factory used by the CLI, checkpoints, and the benchmark grid.
inline std::unique_ptr<TppModel> make_model(const std::string& family,
                                            const nlohmann::json& config,
                                            std::uint64_t init_seed) {
    const int num_marks = config.value("num_marks", 31);
    GapQuadrature quad =
        config.contains("quad") ? quad_from_json(config["quad"]) : GapQuadrature{};
    if (family == "hawkes") {
        HawkesModel::Config c{num_marks, quad};
        return HawkesModel::make_default(c, init_seed);
    }
    if (family == "rmtpp_style") {
        RmtppStyleModel::Config c{num_marks, config.value("hidden_size", 64), quad};
        return std::make_unique<RmtppStyleModel>(c, init_seed);
    }
    if (family == "lognorm_mix") {
        LogNormMixModel::Config c{num_marks, config.value("hidden_size", 64),
                                  config.value("components", 3), quad};
        return std::make_unique<LogNormMixModel>(c, init_seed);
    }
    throw std::invalid_argument("unknown model family: " + family);
}

inline nlohmann::json checkpoint_json(const TppModel& model) {
    nlohmann::json j;
    j["family"] = model.family();
    j["param_names"] = model.param_names();
    j["values"] = model.raw_params();
    j["config"] = model.config_json();
    return j;
}

inline std::unique_ptr<TppModel> model_from_checkpoint(const nlohmann::json& j) {
    auto model = make_model(j.at("family").get<std::string>(), j.at("config"), 0);
    const auto values = j.at("values").get<std::vector<double>>();
    model->set_raw_params(values);
    return model;
}

inline std::unique_ptr<TppModel> clone_model(const TppModel& model,
                                             std::span<const double> values = {}) {
    auto copy = model_from_checkpoint(checkpoint_json(model));
    if (!values.empty()) copy->set_raw_params(values);
    return copy;
}

}  // namespace tpp
}  // namespace ammtpp
