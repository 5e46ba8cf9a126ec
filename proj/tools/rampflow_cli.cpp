// Command-line driver for the ramp-flow estimation pipeline. Every
// subcommand is also runnable standalone on the previous stage's files.
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rampflow/rampflow.hpp"

namespace fs = std::filesystem;
using namespace rampflow;

namespace {

struct GlobalOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned threads = 0;
    bool threads_set = false;
};

pipeline::RunConfig effective_config(const GlobalOpts& g) {
    pipeline::RunConfig cfg;
    if (!g.config_path.empty()) cfg = pipeline::load_run_config(g.config_path);
    if (g.seed_set) cfg.seed = g.seed;
    if (g.threads_set) cfg.threads = g.threads;
    if (!g.out_dir.empty()) cfg.paths.out_dir = g.out_dir;
    return cfg;
}

int cmd_synth(const GlobalOpts& g, const std::string& synth_config, const std::string& out_dir) {
    synth::SynthConfig cfg = synth::default_config("SRC", g.seed_set ? g.seed : 1);
    if (!synth_config.empty()) {
        std::ifstream f(synth_config);
        if (!f) throw Error("cannot open " + synth_config);
        nlohmann::json j;
        f >> j;
        cfg = synth::config_from_json(j);
        if (g.seed_set) cfg.seed = g.seed;
    }
    fs::create_directories(out_dir);
    const auto result = synth::generate_corridor(cfg, (fs::path(out_dir) / "raw.csv.gz").string());
    synth::write_truth_csv((fs::path(out_dir) / "truth.csv").string(), result.truth);
    std::ofstream cj(fs::path(out_dir) / "corridor.json");
    cj << ingest::corridor_spec_to_json(result.corridor).dump(1) << '\n';
    std::ofstream mj(fs::path(out_dir) / "corridor_mainline.json");
    mj << ingest::corridor_spec_to_json(result.corridor_mainline).dump(1) << '\n';
    std::cout << "wrote raw.csv.gz, truth.csv, corridor.json, corridor_mainline.json to " << out_dir
              << "\n";
    return 0;
}

int cmd_aggregate(const GlobalOpts& g, const std::string& raw, const std::string& corridor) {
    const auto cfg = effective_config(g);
    fs::create_directories(cfg.paths.out_dir);
    const fs::path out(cfg.paths.out_dir);
    const auto ds = pipeline::stage_aggregate(raw, corridor, cfg.utc_offset_seconds,
                                              (out / "features.csv").string(),
                                              (out / "validity.csv").string());
    std::cout << "wrote " << ds.rows.size() << " feature rows (" << ds.validity.size()
              << " invalid intervals) to " << (out / "features.csv").string() << "\n";
    return 0;
}

int cmd_select_features(const GlobalOpts& g, const std::string& features) {
    const auto cfg = effective_config(g);
    fs::create_directories(cfg.paths.out_dir);
    const fs::path out(cfg.paths.out_dir);
    const auto rows = dataset::read_feature_csv(features);
    const auto sel = pipeline::select_features(rows, cfg.ridge, derive_seed(cfg.seed, "select"));
    pipeline::write_selection_csv((out / "selection.csv").string(), sel);
    pipeline::save_selection((out / "selection.json").string(), sel);
    int on = 0, off = 0;
    for (bool b : sel.on_model.selected_mask) on += b ? 1 : 0;
    for (bool b : sel.off_model.selected_mask) off += b ? 1 : 0;
    std::cout << "selected " << on << " on-ramp and " << off << " off-ramp variables\n";
    return 0;
}

int cmd_match(const GlobalOpts& g, const std::string& source_features, const std::string& target_features,
              const std::string& selection) {
    const auto cfg = effective_config(g);
    fs::create_directories(cfg.paths.out_dir);
    const fs::path out(cfg.paths.out_dir);
    const auto sel = pipeline::load_selection(selection);
    const auto match = pipeline::stage_match(dataset::read_feature_csv(source_features),
                                             dataset::read_feature_csv(target_features), sel.union_mask);
    pipeline::write_match_csv((out / "match.csv").string(), (out / "match_breakdown.csv").string(), match,
                              sel.union_mask);
    for (const auto& [tgt, entry] : match)
        std::cout << tgt << " -> " << entry.source_location << "\n";
    return 0;
}

int cmd_train(const GlobalOpts& g, const std::string& source_features, const std::string& target_features,
              const std::string& selection, const std::string& match_path) {
    const auto cfg = effective_config(g);
    const fs::path out(cfg.paths.out_dir);
    fs::create_directories(out / "models");
    const auto sel = pipeline::load_selection(selection);
    const auto match = pipeline::read_match_csv(match_path);
    const auto models =
        pipeline::stage_train(dataset::read_feature_csv(source_features),
                              dataset::read_feature_csv(target_features), sel, match, cfg.boost,
                              cfg.substitution_fraction, cfg.seed, cfg.threads);
    for (const auto& [key, model] : models.models) {
        const auto path = out / "models" / (key.first + "_" + key.second + ".model.json");
        model_io::save_tra_model(path.string(), model);
        std::cout << path.string() << " (selected step " << model.selected_step + 1 << ")\n";
    }
    return 0;
}

int cmd_gridsearch(const GlobalOpts& g, const std::string& source_features,
                   const std::string& target_features, const std::string& selection,
                   const std::string& match_path) {
    const auto cfg = effective_config(g);
    fs::create_directories(cfg.paths.out_dir);
    const fs::path out(cfg.paths.out_dir);
    const auto sel = pipeline::load_selection(selection);
    const auto match = pipeline::read_match_csv(match_path);
    const auto source_rows = dataset::read_feature_csv(source_features);
    const auto target_rows = dataset::read_feature_csv(target_features);

    // Grid scan over the first matched pair's on-ramp task.
    if (match.empty()) throw Error("gridsearch: empty match table");
    const auto& [tgt, entry] = *match.begin();
    const auto src_rows = dataset::rows_for_location(source_rows, entry.source_location);
    const auto tgt_rows = dataset::rows_for_location(target_rows, tgt);
    const auto subset = pipeline::compute_substitutes(src_rows, tgt_rows, sel, cfg.substitution_fraction);
    const auto blocks = pipeline::build_train_blocks(src_rows, subset, sel, "on");
    boosting::BoostConfig base = cfg.boost;
    base.seed = derive_seed(cfg.seed, "gridsearch");
    const auto result =
        boosting::grid_search(blocks.d_source, blocks.d_substitute, cfg.grid, base, cfg.threads);

    LineWriter w((out / "gridsearch.csv").string());
    w.write("learning_rate,max_depth,n_estimators,cv_rmse");
    for (const auto& cell : result.table) {
        char buf[120];
        std::snprintf(buf, sizeof(buf), "%g,%d,%d,%.4f", cell.learning_rate, cell.max_depth,
                      cell.n_estimators, cell.score);
        w.write(buf);
    }
    std::cout << "best: learning_rate=" << result.best.learning_rate
              << " max_depth=" << result.best.max_depth << " n_estimators=" << result.best.n_estimators
              << "\n";
    return 0;
}

int cmd_estimate(const GlobalOpts& g, const std::string& models_dir, const std::string& features,
                 const std::string& out_path) {
    const auto cfg = effective_config(g);
    const auto rows = dataset::read_feature_csv(features);
    pipeline::TrainedModels models;
    for (const auto& entry : fs::directory_iterator(models_dir)) {
        if (entry.path().extension() != ".json") continue;
        auto model = model_io::load_tra_model(entry.path().string());
        models.models.emplace(std::make_pair(model.provenance.target_location, model.provenance.ramp_kind),
                              std::move(model));
    }
    if (models.models.empty()) throw Error("estimate: no model files in " + models_dir);
    const auto estimates = pipeline::stage_estimate(models, rows);
    std::string out_file = out_path;
    if (out_file.empty()) {
        fs::create_directories(cfg.paths.out_dir);
        out_file = (fs::path(cfg.paths.out_dir) / "estimates.csv").string();
    }
    pipeline::write_estimates_csv(out_file, estimates);
    std::cout << "wrote " << estimates.size() << " estimates to " << out_file << "\n";
    return 0;
}

int cmd_evaluate(const GlobalOpts& g, const std::string& source_features,
                 const std::string& target_features, const std::string& selection,
                 const std::string& match_path, const std::string& truth_path) {
    auto cfg = effective_config(g);
    cfg.record_timings = true;  // standalone evaluation reports wall clock
    fs::create_directories(cfg.paths.out_dir);
    const fs::path out(cfg.paths.out_dir);
    const auto sel = pipeline::load_selection(selection);
    const auto match = pipeline::read_match_csv(match_path);
    const pipeline::TruthIndex truth(synth::read_truth_csv(truth_path));
    const auto tasks = pipeline::build_eval_tasks(dataset::read_feature_csv(source_features),
                                                  dataset::read_feature_csv(target_features), sel, match,
                                                  truth);
    const auto models = pipeline::standard_eval_models(cfg.boost, cfg.substitution_fraction);
    const auto table = eval::compare(models, tasks, cfg.eval_runs, derive_seed(cfg.seed, "evaluate"),
                                     cfg.threads, cfg.record_timings);
    pipeline::write_scores_csv((out / "scores.csv").string(), table);
    std::cout << "wrote " << table.size() << " score rows to " << (out / "scores.csv").string() << "\n";
    return 0;
}

int cmd_run(const GlobalOpts& g) {
    const auto cfg = effective_config(g);
    const auto summary = pipeline::run_pipeline(cfg);
    std::cout << "pipeline complete; artifacts in " << cfg.paths.out_dir << "\n";
    for (const auto& note : summary.notes) std::cout << note << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"On-ramp / off-ramp flow estimation from mainline loop detectors"};
    app.require_subcommand(1);

    GlobalOpts g;
    app.add_option("--config", g.config_path, "pipeline configuration JSON");
    app.add_option("--out-dir", g.out_dir, "output directory override");
    app.add_option("--seed", g.seed, "seed override")->each([&](const std::string&) { g.seed_set = true; });
    app.add_option("--threads", g.threads, "worker thread cap")->each([&](const std::string&) {
        g.threads_set = true;
    });

    std::string synth_config, synth_out = "synth_out";
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corridor");
    synth_cmd->add_option("--config", synth_config, "synthetic corridor config JSON");
    synth_cmd->add_option("--out-dir", synth_out, "output directory");

    std::string agg_raw, agg_corridor;
    auto* agg_cmd = app.add_subcommand("aggregate", "raw 20 s records -> 15-minute feature table");
    agg_cmd->add_option("--raw", agg_raw, "raw detector CSV (.gz accepted)")->required();
    agg_cmd->add_option("--corridor", agg_corridor, "corridor spec JSON")->required();

    std::string sf_features;
    auto* sf_cmd = app.add_subcommand("select-features", "ridge-regression variable selection");
    sf_cmd->add_option("--features", sf_features, "source feature table CSV")->required();

    std::string m_source, m_target, m_selection;
    auto* m_cmd = app.add_subcommand("match", "inter-corridor similar-location matching");
    m_cmd->add_option("--source", m_source, "source feature table")->required();
    m_cmd->add_option("--target", m_target, "target feature table")->required();
    m_cmd->add_option("--selection", m_selection, "selection.json from select-features")->required();

    std::string t_source, t_target, t_selection, t_match;
    auto* t_cmd = app.add_subcommand("train", "fit transfer models per target location");
    t_cmd->add_option("--source", t_source, "source feature table")->required();
    t_cmd->add_option("--target", t_target, "target feature table")->required();
    t_cmd->add_option("--selection", t_selection, "selection.json")->required();
    t_cmd->add_option("--match", t_match, "match.csv")->required();

    std::string gs_source, gs_target, gs_selection, gs_match;
    auto* gs_cmd = app.add_subcommand("gridsearch", "hyperparameter grid scan");
    gs_cmd->add_option("--source", gs_source, "source feature table")->required();
    gs_cmd->add_option("--target", gs_target, "target feature table")->required();
    gs_cmd->add_option("--selection", gs_selection, "selection.json")->required();
    gs_cmd->add_option("--match", gs_match, "match.csv")->required();

    std::string e_models, e_features, e_out;
    auto* e_cmd = app.add_subcommand("estimate", "predict ramp flows with trained models");
    e_cmd->add_option("--model", e_models, "directory of model JSON files")->required();
    e_cmd->add_option("--features", e_features, "target feature table")->required();
    e_cmd->add_option("--out", e_out, "output CSV path");

    std::string ev_source, ev_target, ev_selection, ev_match, ev_truth;
    auto* ev_cmd = app.add_subcommand("evaluate", "score models against ground truth");
    ev_cmd->add_option("--source", ev_source, "source feature table")->required();
    ev_cmd->add_option("--target", ev_target, "target feature table")->required();
    ev_cmd->add_option("--selection", ev_selection, "selection.json")->required();
    ev_cmd->add_option("--match", ev_match, "match.csv")->required();
    ev_cmd->add_option("--truth", ev_truth, "ground-truth CSV")->required();

    auto* run_cmd = app.add_subcommand("run", "full pipeline from a run config");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_cmd->parsed()) return cmd_synth(g, synth_config, synth_out);
        if (agg_cmd->parsed()) return cmd_aggregate(g, agg_raw, agg_corridor);
        if (sf_cmd->parsed()) return cmd_select_features(g, sf_features);
        if (m_cmd->parsed()) return cmd_match(g, m_source, m_target, m_selection);
        if (t_cmd->parsed()) return cmd_train(g, t_source, t_target, t_selection, t_match);
        if (gs_cmd->parsed()) return cmd_gridsearch(g, gs_source, gs_target, gs_selection, gs_match);
        if (e_cmd->parsed()) return cmd_estimate(g, e_models, e_features, e_out);
        if (ev_cmd->parsed()) return cmd_evaluate(g, ev_source, ev_target, ev_selection, ev_match, ev_truth);
        if (run_cmd->parsed()) return cmd_run(g);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
