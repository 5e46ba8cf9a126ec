#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rampflow/boosting.hpp"

namespace rampflow::model_io {

constexpr int kSchemaVersion = 1;

inline nlohmann::json tree_to_json(const tree::RegressionTree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes)
        nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    return {{"n_features", t.n_features},
            {"max_depth", t.max_depth},
            {"min_samples_leaf", t.min_samples_leaf},
            {"nodes", std::move(nodes)}};
}

inline tree::RegressionTree tree_from_json(const nlohmann::json& j) {
    tree::RegressionTree t;
    t.n_features = j.at("n_features").get<std::size_t>();
    t.max_depth = j.at("max_depth").get<int>();
    t.min_samples_leaf = j.at("min_samples_leaf").get<int>();
    for (const auto& jn : j.at("nodes")) {
        tree::Node n;
        n.feature = jn.at(0).get<int>();
        n.threshold = jn.at(1).get<double>();
        n.left = jn.at(2).get<int>();
        n.right = jn.at(3).get<int>();
        n.value = jn.at(4).get<double>();
        t.nodes.push_back(n);
    }
    return t;
}

inline nlohmann::json config_to_json(const boosting::BoostConfig& c) {
    return {{"n_estimators", c.n_estimators},
            {"learning_rate", c.learning_rate},
            {"max_depth", c.max_depth},
            {"loss", boosting::loss_name(c.loss)},
            {"steps", c.steps},
            {"folds", c.folds},
            {"min_samples_leaf", c.min_samples_leaf},
            {"seed", c.seed}};
}

inline boosting::BoostConfig config_from_json(const nlohmann::json& j) {
    boosting::BoostConfig c;
    c.n_estimators = j.value("n_estimators", c.n_estimators);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.max_depth = j.value("max_depth", c.max_depth);
    c.loss = boosting::loss_from_name(j.value("loss", "linear"));
    c.steps = j.value("steps", c.steps);
    c.folds = j.value("folds", c.folds);
    c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
    c.seed = j.value("seed", c.seed);
    return c;
}

inline nlohmann::json standardizer_to_json(const ridge::Standardizer& s) {
    return {{"means", std::vector<double>(s.means.data(), s.means.data() + s.means.size())},
            {"stds", std::vector<double>(s.stds.data(), s.stds.data() + s.stds.size())},
            {"label_mean", s.label_mean}};
}

inline ridge::Standardizer standardizer_from_json(const nlohmann::json& j) {
    ridge::Standardizer s;
    const auto means = j.at("means").get<std::vector<double>>();
    const auto stds = j.at("stds").get<std::vector<double>>();
    s.means = Eigen::Map<const Eigen::VectorXd>(means.data(), static_cast<Eigen::Index>(means.size()));
    s.stds = Eigen::Map<const Eigen::VectorXd>(stds.data(), static_cast<Eigen::Index>(stds.size()));
    s.label_mean = j.value("label_mean", 0.0);
    return s;
}

inline nlohmann::json tra_model_to_json(const boosting::TraModel& m) {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& s : m.model.stages)
        stages.push_back({{"tree", tree_to_json(s.tree)},
                          {"stage_weight", s.stage_weight},
                          {"beta", s.beta},
                          {"epsilon", s.epsilon}});
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : m.step_log)
        steps.push_back({{"cv_error", s.cv_error},
                         {"beta", s.beta},
                         {"z", s.z},
                         {"target_mass", s.target_mass}});
    std::vector<double> cv;
    for (double e : m.cv_errors) cv.push_back(std::isfinite(e) ? e : -1.0);
    return {{"schema_version", kSchemaVersion},
            {"config", config_to_json(m.config)},
            {"selected_step", m.selected_step},
            {"cv_errors", cv},
            {"step_log", std::move(steps)},
            {"stages", std::move(stages)},
            {"provenance",
             {{"matched_source_location", m.provenance.matched_source_location},
              {"target_location", m.provenance.target_location},
              {"ramp_kind", m.provenance.ramp_kind},
              {"substitute_indices", m.provenance.substitute_indices},
              {"selected_mask", m.provenance.selected_mask},
              {"substitute_theta", m.provenance.substitute_theta},
              {"standardizer", standardizer_to_json(m.provenance.standardizer)}}}};
}

inline boosting::TraModel tra_model_from_json(const nlohmann::json& j) {
    const int version = j.at("schema_version").get<int>();
    if (version != kSchemaVersion)
        throw Error("unsupported model schema_version " + std::to_string(version));
    boosting::TraModel m;
    m.config = config_from_json(j.at("config"));
    m.selected_step = j.at("selected_step").get<std::size_t>();
    for (double e : j.at("cv_errors").get<std::vector<double>>())
        m.cv_errors.push_back(e < 0.0 ? std::numeric_limits<double>::infinity() : e);
    for (const auto& js : j.at("step_log"))
        m.step_log.push_back({js.at("cv_error").get<double>(), js.at("beta").get<double>(),
                              js.at("z").get<double>(), js.at("target_mass").get<double>()});
    for (const auto& js : j.at("stages")) {
        boosting::Stage s;
        s.tree = tree_from_json(js.at("tree"));
        s.stage_weight = js.at("stage_weight").get<double>();
        s.beta = js.at("beta").get<double>();
        s.epsilon = js.at("epsilon").get<double>();
        m.model.stages.push_back(std::move(s));
    }
    const auto& jp = j.at("provenance");
    m.provenance.matched_source_location = jp.value("matched_source_location", "");
    m.provenance.target_location = jp.value("target_location", "");
    m.provenance.ramp_kind = jp.value("ramp_kind", "");
    m.provenance.substitute_indices = jp.value("substitute_indices", std::vector<std::size_t>{});
    m.provenance.selected_mask = jp.value("selected_mask", std::vector<bool>{});
    m.provenance.substitute_theta = jp.value("substitute_theta", 0.0);
    if (jp.contains("standardizer")) m.provenance.standardizer = standardizer_from_json(jp.at("standardizer"));
    return m;
}

inline void save_tra_model(const std::string& path, const boosting::TraModel& m) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write model file " + path);
    f << tra_model_to_json(m).dump(1) << '\n';
}

inline boosting::TraModel load_tra_model(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open model file " + path);
    nlohmann::json j;
    f >> j;
    return tra_model_from_json(j);
}

}  // namespace rampflow::model_io
