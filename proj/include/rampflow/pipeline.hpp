#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "rampflow/boosting.hpp"
#include "rampflow/dataset.hpp"
#include "rampflow/eval.hpp"
#include "rampflow/ingest.hpp"
#include "rampflow/matching.hpp"
#include "rampflow/model_io.hpp"
#include "rampflow/ridge.hpp"
#include "rampflow/synth.hpp"

namespace rampflow::pipeline {

struct RunPaths {
    std::string source_raw;
    std::string target_raw;
    std::string source_corridor;
    std::string target_corridor;
    std::string truth;  // optional; evaluation is skipped when empty
    std::string out_dir = "out";
};

struct RidgeOptions {
    std::vector<double> grid = ridge::default_lambda_grid();
    int folds = 5;
    int runs = 10;
    double threshold = 10.0;
};

struct RunConfig {
    RunPaths paths;
    RidgeOptions ridge;
    double substitution_fraction = 0.10;
    boosting::BoostConfig boost;  // Table-2 style defaults
    boosting::GridRanges grid{{0.0001, 0.001, 0.01, 0.1}, {1, 5, 10, 15, 20, 25, 30},
                              {50, 100, 150, 200, 250, 300}};
    std::uint64_t seed = 1;
    std::int64_t utc_offset_seconds = -25200;
    unsigned threads = 0;  // 0 = hardware concurrency
    int eval_runs = 10;
    bool record_timings = false;
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
    RunConfig cfg;
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        cfg.paths.source_raw = p.value("source_raw", "");
        cfg.paths.target_raw = p.value("target_raw", "");
        cfg.paths.source_corridor = p.value("source_corridor", "");
        cfg.paths.target_corridor = p.value("target_corridor", "");
        cfg.paths.truth = p.value("truth", "");
        cfg.paths.out_dir = p.value("out_dir", cfg.paths.out_dir);
    }
    if (j.contains("ridge")) {
        const auto& r = j.at("ridge");
        if (r.contains("grid")) cfg.ridge.grid = r.at("grid").get<std::vector<double>>();
        cfg.ridge.folds = r.value("folds", cfg.ridge.folds);
        cfg.ridge.runs = r.value("runs", cfg.ridge.runs);
        cfg.ridge.threshold = r.value("threshold", cfg.ridge.threshold);
    }
    cfg.substitution_fraction = j.value("substitution_fraction", cfg.substitution_fraction);
    if (j.contains("boost")) cfg.boost = model_io::config_from_json(j.at("boost"));
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        if (g.contains("learning_rates"))
            cfg.grid.learning_rates = g.at("learning_rates").get<std::vector<double>>();
        if (g.contains("max_depths")) cfg.grid.max_depths = g.at("max_depths").get<std::vector<int>>();
        if (g.contains("n_estimators"))
            cfg.grid.n_estimators = g.at("n_estimators").get<std::vector<int>>();
    }
    cfg.seed = j.value("seed", cfg.seed);
    cfg.utc_offset_seconds = j.value("utc_offset_seconds", cfg.utc_offset_seconds);
    cfg.threads = j.value("threads", cfg.threads);
    cfg.eval_runs = j.value("eval_runs", cfg.eval_runs);
    cfg.record_timings = j.value("record_timings", cfg.record_timings);
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open config " + path);
    nlohmann::json j;
    f >> j;
    return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Matrix bridges between feature tables and the numeric layers.

inline Eigen::MatrixXd feature_matrix(const dataset::FeatureTable& rows) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(stats::kFeatureCount));
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t j = 0; j < stats::kFeatureCount; ++j)
            X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i].features[j];
    return X;
}

inline std::optional<double> label_of(const stats::FeatureVector& row, const std::string& kind) {
    return kind == "on" ? row.on_flow : row.off_flow;
}

inline Table table_from_matrix(const Eigen::MatrixXd& X) {
    Table t(static_cast<std::size_t>(X.cols()));
    t.data.resize(static_cast<std::size_t>(X.rows() * X.cols()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j)
            t.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = X(i, j);
    return t;
}

// ---------------------------------------------------------------------------
// Stage: aggregate

inline ingest::Dataset stage_aggregate(const std::string& raw_path, const std::string& corridor_path,
                                       std::int64_t utc_offset, const std::string& out_features,
                                       const std::string& out_validity) {
    const auto spec = ingest::load_corridor_spec(corridor_path);
    const auto records = ingest::parse_raw_records(raw_path, spec);
    auto ds = ingest::build_dataset(records, spec, utc_offset);
    if (!out_features.empty()) dataset::write_feature_csv(out_features, ds.rows);
    if (!out_validity.empty()) ingest::write_validity_report(out_validity, ds.validity);
    return ds;
}

// ---------------------------------------------------------------------------
// Stage: select-features

struct Selection {
    ridge::Standardizer standardizer;  // fitted on the source corridor's rows
    ridge::RidgeModel on_model;
    ridge::RidgeModel off_model;
    std::vector<bool> union_mask;
    double threshold = 10.0;
};

inline Selection select_features(const dataset::FeatureTable& source_rows, const RidgeOptions& opts,
                                 std::uint64_t seed) {
    if (source_rows.empty()) throw Error("select_features: empty source table");
    Selection sel;
    sel.threshold = opts.threshold;
    const Eigen::MatrixXd X_all = feature_matrix(source_rows);
    sel.standardizer.fit(X_all);

    auto fit_kind = [&](const std::string& kind) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < source_rows.size(); ++i)
            if (label_of(source_rows[i], kind)) rows.push_back(i);
        if (rows.size() < 2) throw Error("select_features: too few labeled rows for " + kind + "-ramp");
        Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), X_all.cols());
        Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            X.row(static_cast<Eigen::Index>(i)) = X_all.row(static_cast<Eigen::Index>(rows[i]));
            y(static_cast<Eigen::Index>(i)) = *label_of(source_rows[rows[i]], kind);
        }
        const Eigen::MatrixXd Z = sel.standardizer.transform(X);
        const Eigen::VectorXd Yc = y.array() - y.mean();
        return ridge::fit_ridge_model(Z, Yc, opts.grid, opts.folds, opts.runs, opts.threshold,
                                      derive_seed(seed, "ridge_" + kind));
    };
    sel.on_model = fit_kind("on");
    sel.off_model = fit_kind("off");
    sel.union_mask = ridge::mask_union(sel.on_model.selected_mask, sel.off_model.selected_mask);
    return sel;
}

inline void write_selection_csv(const std::string& path, const Selection& sel) {
    LineWriter w(path);
    w.write("variable,on_ramp_coefficient,off_ramp_coefficient,selected_on,selected_off");
    const auto& names = stats::feature_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%d,%d", names[i].c_str(),
                      sel.on_model.coefficients(static_cast<Eigen::Index>(i)),
                      sel.off_model.coefficients(static_cast<Eigen::Index>(i)),
                      sel.on_model.selected_mask[i] ? 1 : 0, sel.off_model.selected_mask[i] ? 1 : 0);
        w.write(buf);
    }
}

inline nlohmann::json selection_to_json(const Selection& sel) {
    auto model_json = [](const ridge::RidgeModel& m) {
        return nlohmann::json{
            {"lambda", m.lambda},
            {"coefficients",
             std::vector<double>(m.coefficients.data(), m.coefficients.data() + m.coefficients.size())},
            {"selected_mask", m.selected_mask},
            {"threshold", m.threshold},
            {"runs", m.runs}};
    };
    return {{"standardizer", model_io::standardizer_to_json(sel.standardizer)},
            {"on", model_json(sel.on_model)},
            {"off", model_json(sel.off_model)},
            {"union_mask", sel.union_mask},
            {"threshold", sel.threshold}};
}

inline Selection selection_from_json(const nlohmann::json& j) {
    Selection sel;
    sel.standardizer = model_io::standardizer_from_json(j.at("standardizer"));
    auto model_from = [](const nlohmann::json& jm) {
        ridge::RidgeModel m;
        const auto coefs = jm.at("coefficients").get<std::vector<double>>();
        m.coefficients =
            Eigen::Map<const Eigen::VectorXd>(coefs.data(), static_cast<Eigen::Index>(coefs.size()));
        m.selected_mask = jm.at("selected_mask").get<std::vector<bool>>();
        m.lambda = jm.value("lambda", 0.0);
        m.threshold = jm.value("threshold", 10.0);
        m.runs = jm.value("runs", 10);
        return m;
    };
    sel.on_model = model_from(j.at("on"));
    sel.off_model = model_from(j.at("off"));
    sel.union_mask = j.at("union_mask").get<std::vector<bool>>();
    sel.threshold = j.value("threshold", 10.0);
    return sel;
}

inline void save_selection(const std::string& path, const Selection& sel) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write " + path);
    f << selection_to_json(sel).dump(1) << '\n';
}

inline Selection load_selection(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open " + path);
    nlohmann::json j;
    f >> j;
    return selection_from_json(j);
}

// ---------------------------------------------------------------------------
// Stage: match

inline std::vector<matching::LocationTable> location_tables(const dataset::FeatureTable& rows) {
    std::vector<matching::LocationTable> tables;
    for (const auto& id : dataset::location_ids(rows)) {
        matching::LocationTable t;
        t.location_id = id;
        t.rows = dataset::rows_for_location(rows, id);
        tables.push_back(std::move(t));
    }
    return tables;
}

inline matching::MatchResult stage_match(const dataset::FeatureTable& source_rows,
                                         const dataset::FeatureTable& target_rows,
                                         const std::vector<bool>& union_mask) {
    const auto vars = ridge::mask_indices(union_mask);
    return matching::match_locations(location_tables(source_rows), location_tables(target_rows), vars);
}

inline void write_match_csv(const std::string& path, const std::string& breakdown_path,
                            const matching::MatchResult& match, const std::vector<bool>& union_mask) {
    LineWriter w(path);
    w.write("target_location,source_location,correlation_sum");
    for (const auto& [tgt, entry] : match) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%s,%.6f", tgt.c_str(), entry.source_location.c_str(),
                      entry.correlation_sum);
        w.write(buf);
    }
    if (breakdown_path.empty()) return;
    LineWriter b(breakdown_path);
    b.write("target_location,source_location,variable,correlation");
    const auto vars = ridge::mask_indices(union_mask);
    const auto& names = stats::feature_names();
    for (const auto& [tgt, entry] : match)
        for (std::size_t k = 0; k < vars.size(); ++k) {
            char buf[200];
            std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.6f", tgt.c_str(), entry.source_location.c_str(),
                          names[vars[k]].c_str(), entry.per_variable[k]);
            b.write(buf);
        }
}

inline matching::MatchResult read_match_csv(const std::string& path) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line)) throw ParseError("empty match file " + path, 1);
    matching::MatchResult match;
    std::size_t line_no = 1;
    while (reader.next(line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_row(line);
        if (cells.size() != 3) throw ParseError("wrong column count in match file", line_no);
        matching::MatchEntry e;
        e.source_location = cells[1];
        e.correlation_sum = parse_double_field(cells[2], line_no, "correlation_sum");
        match.emplace(cells[0], std::move(e));
    }
    return match;
}

// ---------------------------------------------------------------------------
// Stage: train

struct TrainBlocks {
    boosting::LabeledData d_source;      // matched source rows minus substitutes
    boosting::LabeledData d_substitute;  // the target-like substitute block
    matching::SubstituteSet subset;
};

// Substitution happens once per target location on the union mask; the
// per-kind blocks then carry that kind's labels.
inline matching::SubstituteSet compute_substitutes(const dataset::FeatureTable& source_loc_rows,
                                                   const dataset::FeatureTable& target_loc_rows,
                                                   const Selection& sel, double fraction) {
    const Eigen::MatrixXd Zs =
        ridge::apply_mask(sel.standardizer.transform(feature_matrix(source_loc_rows)), sel.union_mask);
    const Eigen::MatrixXd Zt =
        ridge::apply_mask(sel.standardizer.transform(feature_matrix(target_loc_rows)), sel.union_mask);
    return matching::substitute_target_data(Zs, Zt, fraction);
}

inline TrainBlocks build_train_blocks(const dataset::FeatureTable& source_loc_rows,
                                      const matching::SubstituteSet& subset, const Selection& sel,
                                      const std::string& kind) {
    const auto& mask = kind == "on" ? sel.on_model.selected_mask : sel.off_model.selected_mask;
    const Eigen::MatrixXd Z =
        ridge::apply_mask(sel.standardizer.transform(feature_matrix(source_loc_rows)), mask);
    std::set<std::size_t> subs(subset.indices.begin(), subset.indices.end());
    TrainBlocks blocks;
    blocks.subset = subset;
    blocks.d_source.X = Table(static_cast<std::size_t>(Z.cols()));
    blocks.d_substitute.X = Table(static_cast<std::size_t>(Z.cols()));
    std::vector<double> row(static_cast<std::size_t>(Z.cols()));
    for (std::size_t i = 0; i < source_loc_rows.size(); ++i) {
        const auto label = label_of(source_loc_rows[i], kind);
        if (!label) continue;
        for (Eigen::Index j = 0; j < Z.cols(); ++j)
            row[static_cast<std::size_t>(j)] = Z(static_cast<Eigen::Index>(i), j);
        if (subs.count(i)) {
            blocks.d_substitute.X.push_row(row);
            blocks.d_substitute.y.push_back(*label);
        } else {
            blocks.d_source.X.push_row(row);
            blocks.d_source.y.push_back(*label);
        }
    }
    return blocks;
}

struct TrainedModels {
    // keyed by (target_location, kind)
    std::map<std::pair<std::string, std::string>, boosting::TraModel> models;
};

inline TrainedModels stage_train(const dataset::FeatureTable& source_rows,
                                 const dataset::FeatureTable& target_rows, const Selection& sel,
                                 const matching::MatchResult& match, const boosting::BoostConfig& boost,
                                 double fraction, std::uint64_t seed, unsigned threads) {
    struct Cell {
        std::string target_loc, source_loc, kind;
    };
    std::vector<Cell> cells;
    for (const auto& [tgt, entry] : match)
        for (const char* kind : {"on", "off"}) cells.push_back({tgt, entry.source_location, kind});

    std::vector<boosting::TraModel> fitted(cells.size());
    std::vector<std::string> failures(cells.size());
    parallel_for(cells.size(), threads, [&](std::size_t c) {
        const auto& cell = cells[c];
        try {
            const auto src_rows = dataset::rows_for_location(source_rows, cell.source_loc);
            const auto tgt_rows = dataset::rows_for_location(target_rows, cell.target_loc);
            if (src_rows.empty()) throw Error("no source rows for " + cell.source_loc);
            const auto subset = compute_substitutes(src_rows, tgt_rows, sel, fraction);
            const auto blocks = build_train_blocks(src_rows, subset, sel, cell.kind);
            boosting::BoostConfig cfg = boost;
            cfg.seed = derive_seed(seed, "tra:" + cell.target_loc + ":" + cell.kind);
            auto model = boosting::fit_two_stage_tra(blocks.d_source, blocks.d_substitute, cfg, 1);
            model.provenance.matched_source_location = cell.source_loc;
            model.provenance.target_location = cell.target_loc;
            model.provenance.ramp_kind = cell.kind;
            model.provenance.substitute_indices = subset.indices;
            model.provenance.substitute_theta = subset.theta;
            model.provenance.selected_mask =
                cell.kind == std::string("on") ? sel.on_model.selected_mask : sel.off_model.selected_mask;
            model.provenance.standardizer = sel.standardizer;
            fitted[c] = std::move(model);
        } catch (const Error& e) {
            failures[c] = e.what();
        }
    });

    TrainedModels out;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        if (!failures[c].empty())
            throw Error("training " + cells[c].target_loc + "/" + cells[c].kind + ": " + failures[c]);
        out.models.emplace(std::make_pair(cells[c].target_loc, cells[c].kind), std::move(fitted[c]));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stage: estimate

struct EstimateRow {
    std::string location_id;
    std::int64_t interval_start = 0;
    double on_flow_hat = 0.0;
    double off_flow_hat = 0.0;
};

inline std::vector<double> predict_rows(const boosting::TraModel& model,
                                        const dataset::FeatureTable& rows) {
    const Eigen::MatrixXd Z = ridge::apply_mask(
        model.provenance.standardizer.transform(feature_matrix(rows)), model.provenance.selected_mask);
    std::vector<double> out;
    out.reserve(rows.size());
    std::vector<double> x(static_cast<std::size_t>(Z.cols()));
    for (Eigen::Index i = 0; i < Z.rows(); ++i) {
        for (Eigen::Index j = 0; j < Z.cols(); ++j) x[static_cast<std::size_t>(j)] = Z(i, j);
        out.push_back(model.predict(x));
    }
    return out;
}

inline std::vector<EstimateRow> stage_estimate(const TrainedModels& models,
                                               const dataset::FeatureTable& target_rows) {
    std::vector<EstimateRow> out;
    for (const auto& id : dataset::location_ids(target_rows)) {
        const auto rows = dataset::rows_for_location(target_rows, id);
        auto on_it = models.models.find({id, "on"});
        auto off_it = models.models.find({id, "off"});
        if (on_it == models.models.end() || off_it == models.models.end())
            throw Error("stage_estimate: missing model for location " + id);
        const auto on_hat = predict_rows(on_it->second, rows);
        const auto off_hat = predict_rows(off_it->second, rows);
        for (std::size_t i = 0; i < rows.size(); ++i)
            out.push_back({id, rows[i].interval_start, on_hat[i], off_hat[i]});
    }
    return out;
}

inline void write_estimates_csv(const std::string& path, std::span<const EstimateRow> rows) {
    LineWriter w(path);
    w.write("location_id,interval_start,on_flow_hat,off_flow_hat");
    for (const auto& r : rows) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%s,%lld,%.4f,%.4f", r.location_id.c_str(),
                      static_cast<long long>(r.interval_start), r.on_flow_hat, r.off_flow_hat);
        w.write(buf);
    }
}

// ---------------------------------------------------------------------------
// Stage: evaluate

struct TruthIndex {
    std::map<std::pair<std::string, std::int64_t>, std::pair<double, double>> flows;

    explicit TruthIndex(std::span<const synth::TruthRow> rows) {
        for (const auto& r : rows) flows[{r.location_id, r.interval_start}] = {r.on_flow, r.off_flow};
    }
};

inline std::vector<eval::ComparisonTask> build_eval_tasks(const dataset::FeatureTable& source_rows,
                                                          const dataset::FeatureTable& target_rows,
                                                          const Selection& sel,
                                                          const matching::MatchResult& match,
                                                          const TruthIndex& truth) {
    std::vector<eval::ComparisonTask> tasks;
    for (const auto& [tgt, entry] : match) {
        const auto src_rows = dataset::rows_for_location(source_rows, entry.source_location);
        const auto tgt_rows = dataset::rows_for_location(target_rows, tgt);
        for (const char* kind : {"on", "off"}) {
            const auto& mask = kind == std::string("on") ? sel.on_model.selected_mask
                                                         : sel.off_model.selected_mask;
            eval::ComparisonTask task;
            task.location_id = tgt;
            task.ramp = kind;
            const Eigen::MatrixXd Zs =
                ridge::apply_mask(sel.standardizer.transform(feature_matrix(src_rows)), mask);
            task.train.X = Table(static_cast<std::size_t>(Zs.cols()));
            for (Eigen::Index i = 0; i < Zs.rows(); ++i) {
                const auto label = label_of(src_rows[static_cast<std::size_t>(i)], kind);
                if (!label) continue;
                std::vector<double> row(static_cast<std::size_t>(Zs.cols()));
                for (Eigen::Index j = 0; j < Zs.cols(); ++j) row[static_cast<std::size_t>(j)] = Zs(i, j);
                task.train.X.push_row(row);
                task.train.y.push_back(*label);
            }
            dataset::FeatureTable scored_rows;
            for (const auto& r : tgt_rows) {
                auto it = truth.flows.find({r.location_id, r.interval_start});
                if (it == truth.flows.end()) continue;
                scored_rows.push_back(r);
                task.test_y.push_back(kind == std::string("on") ? it->second.first : it->second.second);
            }
            if (task.test_y.empty())
                throw Error("evaluate: no ground truth rows for " + tgt + "/" + kind);
            const Eigen::MatrixXd Zt =
                ridge::apply_mask(sel.standardizer.transform(feature_matrix(scored_rows)), mask);
            task.test_X = table_from_matrix(Zt);
            tasks.push_back(std::move(task));
        }
    }
    return tasks;
}

// The model line-up for the comparison table: the transfer model, a
// source-only AdaBoost.R2, and the KNN and mean floor baselines.
inline std::vector<eval::EvalModel> standard_eval_models(const boosting::BoostConfig& boost,
                                                         double fraction) {
    std::vector<eval::EvalModel> models;
    models.push_back(
        {"TrA", [boost, fraction](const boosting::LabeledData& train, const Table& test, std::uint64_t seed) {
             const Eigen::Index cols = static_cast<Eigen::Index>(train.X.cols);
             Eigen::MatrixXd Xs(static_cast<Eigen::Index>(train.size()), cols);
             for (std::size_t i = 0; i < train.size(); ++i)
                 for (Eigen::Index j = 0; j < cols; ++j)
                     Xs(static_cast<Eigen::Index>(i), j) = train.X.at(i, static_cast<std::size_t>(j));
             Eigen::MatrixXd Xt(static_cast<Eigen::Index>(test.rows()), cols);
             for (std::size_t i = 0; i < test.rows(); ++i)
                 for (Eigen::Index j = 0; j < cols; ++j)
                     Xt(static_cast<Eigen::Index>(i), j) = test.at(i, static_cast<std::size_t>(j));
             const auto subset = matching::substitute_target_data(Xs, Xt, fraction);
             std::set<std::size_t> subs(subset.indices.begin(), subset.indices.end());
             boosting::LabeledData d_src, d_sub;
             d_src.X = Table(train.X.cols);
             d_sub.X = Table(train.X.cols);
             for (std::size_t i = 0; i < train.size(); ++i) {
                 if (subs.count(i)) {
                     d_sub.X.push_row(train.X.row(i));
                     d_sub.y.push_back(train.y[i]);
                 } else {
                     d_src.X.push_row(train.X.row(i));
                     d_src.y.push_back(train.y[i]);
                 }
             }
             boosting::BoostConfig cfg = boost;
             cfg.seed = seed;
             const auto model = boosting::fit_two_stage_tra(d_src, d_sub, cfg, 1);
             std::vector<double> preds;
             preds.reserve(test.rows());
             for (std::size_t i = 0; i < test.rows(); ++i) preds.push_back(model.predict(test.row(i)));
             return preds;
         }});
    models.push_back(
        {"AdaBoostR2_source", [boost](const boosting::LabeledData& train, const Table& test, std::uint64_t) {
             std::vector<double> w(train.size(), 1.0 / static_cast<double>(train.size()));
             const auto model = boosting::fit_adaboost_r2(train.X, train.y, w, boost);
             std::vector<double> preds;
             preds.reserve(test.rows());
             for (std::size_t i = 0; i < test.rows(); ++i) preds.push_back(model.predict(test.row(i)));
             return preds;
         }});
    models.push_back({"KNN", [](const boosting::LabeledData& train, const Table& test, std::uint64_t) {
                          const int k = static_cast<int>(std::min<std::size_t>(30, train.size()));
                          return eval::knn_baseline(train.X, train.y, test, k);
                      }});
    models.push_back({"Mean", [](const boosting::LabeledData& train, const Table& test, std::uint64_t) {
                          return eval::mean_baseline(train.y, test.rows());
                      }});
    return models;
}

inline void write_scores_csv(const std::string& path, const eval::ScoreTable& table) {
    LineWriter w(path);
    w.write("model,location_id,ramp,mae_veh_h,rmse_veh_h,train_seconds");
    for (const auto& r : table) {
        char buf[220];
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.4f,%.4f,%.3f", r.model.c_str(),
                      r.location_id.c_str(), r.ramp.c_str(), r.mae_veh_h, r.rmse_veh_h, r.train_seconds);
        w.write(buf);
    }
}

// ---------------------------------------------------------------------------
// run: the whole framework end to end

struct RunSummary {
    std::vector<std::string> selected_on, selected_off;
    matching::MatchResult match;
    std::map<std::pair<std::string, std::string>, std::vector<double>> cv_errors;
    eval::ScoreTable scores;
    bool evaluated = false;
    std::vector<std::string> notes;
};

inline void write_summary(const std::string& path, const RunSummary& s) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw Error("cannot write " + path);
    f << "selected on-ramp variables:";
    for (const auto& v : s.selected_on) f << ' ' << v;
    f << "\nselected off-ramp variables:";
    for (const auto& v : s.selected_off) f << ' ' << v;
    f << "\n\nlocation matches:\n";
    for (const auto& [tgt, entry] : s.match) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "  %s -> %s (correlation sum %.4f)\n", tgt.c_str(),
                      entry.source_location.c_str(), entry.correlation_sum);
        f << buf;
    }
    f << "\nper-step CV RMSE:\n";
    for (const auto& [key, errors] : s.cv_errors) {
        f << "  " << key.first << '/' << key.second << ':';
        for (double e : errors) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), " %.3f", e);
            f << buf;
        }
        f << '\n';
    }
    if (s.evaluated) {
        f << "\nscores (mean over repeated runs):\n";
        for (const auto& r : s.scores) {
            char buf[200];
            std::snprintf(buf, sizeof(buf), "  %-18s %s %-3s MAE %.2f RMSE %.2f\n", r.model.c_str(),
                          r.location_id.c_str(), r.ramp.c_str(), r.mae_veh_h, r.rmse_veh_h);
            f << buf;
        }
    }
    for (const auto& n : s.notes) f << '\n' << n << '\n';
}

inline RunSummary run_pipeline(const RunConfig& cfg) {
    namespace fs = std::filesystem;
    const fs::path out(cfg.paths.out_dir);
    fs::create_directories(out / "models");
    RunSummary summary;

    auto stage = [](const std::string& name, auto&& fn) {
        try {
            return fn();
        } catch (const Error& e) {
            throw Error(name + ": " + e.what());
        }
    };

    const auto source_ds = stage("aggregate-source", [&] {
        return stage_aggregate(cfg.paths.source_raw, cfg.paths.source_corridor, cfg.utc_offset_seconds,
                               (out / "source_features.csv").string(),
                               (out / "source_validity.csv").string());
    });
    const auto target_ds = stage("aggregate-target", [&] {
        return stage_aggregate(cfg.paths.target_raw, cfg.paths.target_corridor, cfg.utc_offset_seconds,
                               (out / "target_features.csv").string(),
                               (out / "target_validity.csv").string());
    });

    const auto sel = stage("select-features", [&] {
        auto s = select_features(source_ds.rows, cfg.ridge, derive_seed(cfg.seed, "select"));
        write_selection_csv((out / "selection.csv").string(), s);
        save_selection((out / "selection.json").string(), s);
        return s;
    });
    const auto& names = stats::feature_names();
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (sel.on_model.selected_mask[i]) summary.selected_on.push_back(names[i]);
        if (sel.off_model.selected_mask[i]) summary.selected_off.push_back(names[i]);
    }

    summary.match = stage("match", [&] {
        auto m = stage_match(source_ds.rows, target_ds.rows, sel.union_mask);
        write_match_csv((out / "match.csv").string(), (out / "match_breakdown.csv").string(), m,
                        sel.union_mask);
        return m;
    });

    const auto models = stage("train", [&] {
        auto m = stage_train(source_ds.rows, target_ds.rows, sel, summary.match, cfg.boost,
                             cfg.substitution_fraction, cfg.seed, cfg.threads);
        for (const auto& [key, model] : m.models)
            model_io::save_tra_model((out / "models" / (key.first + "_" + key.second + ".model.json")).string(),
                                     model);
        return m;
    });
    for (const auto& [key, model] : models.models) summary.cv_errors[key] = model.cv_errors;

    stage("estimate", [&] {
        const auto estimates = stage_estimate(models, target_ds.rows);
        write_estimates_csv((out / "estimates.csv").string(), estimates);
        return 0;
    });

    if (cfg.paths.truth.empty()) {
        summary.notes.push_back("evaluation skipped: no ground-truth table provided");
    } else {
        summary.scores = stage("evaluate", [&] {
            const auto truth_rows = synth::read_truth_csv(cfg.paths.truth);
            const TruthIndex truth(truth_rows);
            const auto tasks = build_eval_tasks(source_ds.rows, target_ds.rows, sel, summary.match, truth);
            const auto eval_models = standard_eval_models(cfg.boost, cfg.substitution_fraction);
            auto table = eval::compare(eval_models, tasks, cfg.eval_runs, derive_seed(cfg.seed, "evaluate"),
                                       cfg.threads, cfg.record_timings);
            write_scores_csv((out / "scores.csv").string(), table);
            return table;
        });
        summary.evaluated = true;
    }

    write_summary((out / "summary.txt").string(), summary);
    return summary;
}

}  // namespace rampflow::pipeline
