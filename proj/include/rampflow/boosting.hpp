#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rampflow/common.hpp"
#include "rampflow/ridge.hpp"
#include "rampflow/tree.hpp"

namespace rampflow::boosting {

enum class Loss { linear, square, exponential };

inline const char* loss_name(Loss l) {
    switch (l) {
        case Loss::linear: return "linear";
        case Loss::square: return "square";
        case Loss::exponential: return "exponential";
    }
    return "?";
}

inline Loss loss_from_name(const std::string& s) {
    if (s == "linear") return Loss::linear;
    if (s == "square") return Loss::square;
    if (s == "exponential") return Loss::exponential;
    throw Error("unknown loss '" + s + "'");
}

struct BoostConfig {
    int n_estimators = 200;
    double learning_rate = 0.1;
    int max_depth = 20;
    Loss loss = Loss::linear;
    int steps = 10;  // S
    int folds = 5;   // F
    int min_samples_leaf = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_estimators < 1) throw Error("BoostConfig: n_estimators must be >= 1");
        if (!(learning_rate > 0.0 && learning_rate <= 1.0))
            throw Error("BoostConfig: learning_rate must be in (0,1]");
        if (max_depth < 1) throw Error("BoostConfig: max_depth must be >= 1");
        if (steps < 2) throw Error("BoostConfig: steps must be >= 2");
        if (folds < 2) throw Error("BoostConfig: folds must be >= 2");
    }
};

class UnlearnableError : public Error {
public:
    UnlearnableError() : Error("first boosting stage has adjusted error >= 0.5") {}
};

// AdaBoost.R2 adjusted errors: residuals scaled into [0,1] by the largest
// absolute residual, then passed through the loss shape.
inline std::vector<double> adjusted_errors(std::span<const double> y, std::span<const double> y_hat,
                                           Loss loss) {
    if (y.size() != y_hat.size()) throw Error("adjusted_errors: size mismatch");
    const std::size_t n = y.size();
    std::vector<double> e(n, 0.0);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(y[i] - y_hat[i]));
    if (d == 0.0) return e;
    for (std::size_t i = 0; i < n; ++i) {
        const double r = std::abs(y[i] - y_hat[i]) / d;
        switch (loss) {
            case Loss::linear: e[i] = r; break;
            case Loss::square: e[i] = r * r; break;
            case Loss::exponential: e[i] = 1.0 - std::exp(-r); break;
        }
    }
    return e;
}

struct Stage {
    tree::RegressionTree tree;
    double stage_weight = 0.0;  // learning_rate * ln(1/beta)
    double beta = 0.0;
    double epsilon = 0.0;
};

struct AdaBoostR2Model {
    std::vector<Stage> stages;

    double predict(std::span<const double> x) const {
        // Weighted median of the stage predictions.
        std::vector<std::pair<double, double>> preds;
        preds.reserve(stages.size());
        double total = 0.0;
        for (const auto& s : stages) {
            preds.emplace_back(s.tree.predict(x), s.stage_weight);
            total += s.stage_weight;
        }
        std::sort(preds.begin(), preds.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        double cum = 0.0;
        for (const auto& [p, w] : preds) {
            cum += w;
            if (cum >= 0.5 * total) return p;
        }
        return preds.back().first;
    }
};

inline double predict_ensemble(const AdaBoostR2Model& model, std::span<const double> x) {
    return model.predict(x);
}

constexpr double kPerfectFitEps = 1e-12;

// Drucker's AdaBoost.R2 with direct weighted tree fitting. Rows flagged in
// frozen_mask keep their relative weights (the source block when called
// from the two-stage loop); renormalization still spans all rows.
inline AdaBoostR2Model fit_adaboost_r2(const Table& X, std::span<const double> y,
                                       std::span<const double> init_weights, const BoostConfig& cfg,
                                       const std::vector<bool>& frozen_mask = {}) {
    cfg.validate();
    const std::size_t n = X.rows();
    if (n == 0) throw Error("fit_adaboost_r2: empty input");
    if (y.size() != n || init_weights.size() != n) throw Error("fit_adaboost_r2: size mismatch");
    if (!frozen_mask.empty() && frozen_mask.size() != n)
        throw Error("fit_adaboost_r2: frozen mask size mismatch");

    std::vector<double> w(init_weights.begin(), init_weights.end());
    const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
    if (wsum <= 0.0) throw Error("fit_adaboost_r2: weights sum to zero");
    if (std::abs(wsum - 1.0) > 1e-12)  // already-normalized input stays bit-identical
        for (double& v : w) v /= wsum;

    AdaBoostR2Model model;
    std::vector<double> y_hat(n);
    for (int k = 0; k < cfg.n_estimators; ++k) {
        Stage stage;
        stage.tree = tree::fit_tree(X, y, w, cfg.max_depth, cfg.min_samples_leaf);
        for (std::size_t i = 0; i < n; ++i) y_hat[i] = stage.tree.predict(X.row(i));
        const auto e = adjusted_errors(y, y_hat, cfg.loss);
        double eps = 0.0;
        for (std::size_t i = 0; i < n; ++i) eps += w[i] * e[i];
        if (eps >= 0.5) {
            if (model.stages.empty()) throw UnlearnableError();
            break;  // discard this stage
        }
        stage.epsilon = eps;
        const double eps_floor = std::max(eps, kPerfectFitEps);
        stage.beta = eps_floor / (1.0 - eps_floor);
        stage.stage_weight = cfg.learning_rate * std::log(1.0 / stage.beta);
        model.stages.push_back(std::move(stage));
        if (eps <= kPerfectFitEps) break;

        const double beta = model.stages.back().beta;
        for (std::size_t i = 0; i < n; ++i) {
            if (!frozen_mask.empty() && frozen_mask[i]) continue;
            w[i] *= std::pow(beta, cfg.learning_rate * (1.0 - e[i]));
        }
        const double z = std::accumulate(w.begin(), w.end(), 0.0);
        for (double& v : w) v /= z;
    }
    return model;
}

// Finds beta in [0,1] so that scaling source row i by beta^{e_i} and
// renormalizing leaves exactly target_fraction of the mass on the target
// block. A target_fraction of 1 zeroes the source block outright (the
// e_i = 0 rows could otherwise never vanish).
inline double solve_beta(std::span<const double> weights, std::span<const double> e,
                         const std::vector<bool>& source_mask, double target_fraction) {
    if (weights.size() != e.size() || weights.size() != source_mask.size())
        throw Error("solve_beta: size mismatch");
    double target_mass = 0.0, total = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        total += weights[i];
        if (!source_mask[i]) target_mass += weights[i];
    }
    const double current = target_mass / total;
    if (target_fraction < current - 1e-12)
        throw Error("solve_beta: target fraction below current target mass");
    if (target_fraction >= 1.0) return 0.0;

    auto mass_at = [&](double beta) {
        double src = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i)
            if (source_mask[i]) src += weights[i] * std::pow(beta, e[i]);
        return target_mass / (target_mass + src);
    };

    double lo = 0.0, hi = 1.0, mid = 1.0;
    for (int it = 0; it < 200; ++it) {
        mid = 0.5 * (lo + hi);
        const double mass = mass_at(mid);
        if (std::abs(mass - target_fraction) <= 1e-12) return mid;
        if (mass > target_fraction)
            lo = mid;  // too much target mass: let source keep more
        else
            hi = mid;
    }
    return mid;
}

// Applies the step-4 update: source rows scale by beta^{e_i}, then the
// whole vector renormalizes to sum 1. Returns the normalizer Z.
inline double apply_source_scaling(std::span<double> weights, std::span<const double> e,
                                   const std::vector<bool>& source_mask, double beta) {
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!source_mask[i]) continue;
        weights[i] = beta == 0.0 ? 0.0 : weights[i] * std::pow(beta, e[i]);
    }
    const double z = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (z <= 0.0) throw Error("apply_source_scaling: weights vanished");
    for (double& w : weights) w /= z;
    return z;
}

struct LabeledData {
    Table X;
    std::vector<double> y;

    std::size_t size() const { return y.size(); }
};

struct TraStepLog {
    double cv_error = 0.0;
    double beta = 0.0;
    double z = 0.0;
    double target_mass = 0.0;  // after the step's update
};

struct TraProvenance {
    std::string matched_source_location;
    std::string target_location;
    std::string ramp_kind;  // "on" or "off"
    std::vector<std::size_t> substitute_indices;
    std::vector<bool> selected_mask;  // into the 33-feature layout
    ridge::Standardizer standardizer;
    double substitute_theta = 0.0;
};

struct TraModel {
    AdaBoostR2Model model;
    std::size_t selected_step = 0;  // 0-based argmin of cv_errors
    std::vector<double> cv_errors;
    std::vector<TraStepLog> step_log;
    BoostConfig config;
    TraProvenance provenance;

    double predict(std::span<const double> x) const { return model.predict(x); }
};

// Two-stage TrAdaBoost.R2. Source rows sit in front, substitute-target
// rows behind; the step schedule moves the target block's weight mass from
// m/(n+m) at step 1 to 1 at step S. Each step's candidate is scored by
// F-fold CV over the target block only; the returned model is retrained on
// everything with the winning step's weights.
inline TraModel fit_two_stage_tra(const LabeledData& source, const LabeledData& substitute,
                                  const BoostConfig& cfg, unsigned threads = 1) {
    cfg.validate();
    const std::size_t n = source.size();
    const std::size_t m = substitute.size();
    if (n < 1 || m < 1) throw Error("fit_two_stage_tra: both blocks must be non-empty");
    if (m < static_cast<std::size_t>(cfg.folds))
        throw Error("fit_two_stage_tra: substitute block smaller than fold count");
    if (source.X.cols != substitute.X.cols) throw Error("fit_two_stage_tra: column mismatch");

    const std::size_t total = n + m;
    Table X(source.X.cols);
    X.data.reserve(total * X.cols);
    X.data.insert(X.data.end(), source.X.data.begin(), source.X.data.end());
    X.data.insert(X.data.end(), substitute.X.data.begin(), substitute.X.data.end());
    std::vector<double> y(source.y);
    y.insert(y.end(), substitute.y.begin(), substitute.y.end());
    std::vector<bool> source_mask(total, false);
    std::fill(source_mask.begin(), source_mask.begin() + static_cast<std::ptrdiff_t>(n), true);

    // Fold assignment over the target block, fixed across steps.
    std::vector<std::size_t> target_order(m);
    std::iota(target_order.begin(), target_order.end(), 0);
    std::mt19937_64 fold_rng(derive_seed(cfg.seed, "tra_folds"));
    deterministic_shuffle(target_order, fold_rng);
    std::vector<int> fold_of(m);
    for (std::size_t i = 0; i < m; ++i) fold_of[target_order[i]] = static_cast<int>(i % static_cast<std::size_t>(cfg.folds));

    std::vector<double> w(total, 1.0 / static_cast<double>(total));
    const double init_target_fraction = static_cast<double>(m) / static_cast<double>(total);

    TraModel out;
    out.config = cfg;
    std::vector<std::vector<double>> step_weights;
    step_weights.reserve(static_cast<std::size_t>(cfg.steps));

    for (int t = 1; t <= cfg.steps; ++t) {
        step_weights.push_back(w);

        // F-fold CV over the target block with the current weights.
        std::vector<double> fold_rmse(static_cast<std::size_t>(cfg.folds), 0.0);
        std::vector<bool> fold_failed(static_cast<std::size_t>(cfg.folds), false);
        parallel_for(static_cast<std::size_t>(cfg.folds), threads, [&](std::size_t f) {
            Table Xf(X.cols);
            std::vector<double> yf, wf;
            for (std::size_t i = 0; i < n; ++i) {
                Xf.push_row(X.row(i));
                yf.push_back(y[i]);
                wf.push_back(w[i]);
            }
            for (std::size_t j = 0; j < m; ++j) {
                if (fold_of[j] == static_cast<int>(f)) continue;
                Xf.push_row(X.row(n + j));
                yf.push_back(y[n + j]);
                wf.push_back(w[n + j]);
            }
            std::vector<bool> frozen(yf.size(), false);
            std::fill(frozen.begin(), frozen.begin() + static_cast<std::ptrdiff_t>(n), true);
            try {
                const auto fold_model = fit_adaboost_r2(Xf, yf, wf, cfg, frozen);
                double se = 0.0;
                std::size_t cnt = 0;
                for (std::size_t j = 0; j < m; ++j) {
                    if (fold_of[j] != static_cast<int>(f)) continue;
                    const double r = y[n + j] - fold_model.predict(X.row(n + j));
                    se += r * r;
                    ++cnt;
                }
                fold_rmse[f] = cnt ? std::sqrt(se / static_cast<double>(cnt)) : 0.0;
            } catch (const UnlearnableError&) {
                fold_failed[f] = true;
            }
        });
        double err = 0.0;
        bool failed = false;
        for (int f = 0; f < cfg.folds; ++f) {
            if (fold_failed[static_cast<std::size_t>(f)]) failed = true;
            err += fold_rmse[static_cast<std::size_t>(f)];
        }
        const double cv_error = failed ? std::numeric_limits<double>::infinity()
                                       : err / static_cast<double>(cfg.folds);
        out.cv_errors.push_back(cv_error);

        // Weight update toward the next schedule point.
        const auto weak = tree::fit_tree(X, y, w, cfg.max_depth, cfg.min_samples_leaf);
        std::vector<double> y_hat(total);
        for (std::size_t i = 0; i < total; ++i) y_hat[i] = weak.predict(X.row(i));
        const auto e = adjusted_errors(y, y_hat, cfg.loss);
        const double target_fraction =
            init_target_fraction +
            (static_cast<double>(t - 1) / static_cast<double>(cfg.steps - 1)) * (1.0 - init_target_fraction);
        const double beta = solve_beta(w, e, source_mask, target_fraction);
        const double z = apply_source_scaling(w, e, source_mask, beta);
        double tmass = 0.0;
        for (std::size_t i = n; i < total; ++i) tmass += w[i];
        out.step_log.push_back({cv_error, beta, z, tmass});
    }

    std::size_t best = 0;
    for (std::size_t t = 1; t < out.cv_errors.size(); ++t)
        if (out.cv_errors[t] < out.cv_errors[best]) best = t;
    if (!std::isfinite(out.cv_errors[best])) throw UnlearnableError();
    out.selected_step = best;

    std::vector<bool> frozen(total, false);
    std::fill(frozen.begin(), frozen.begin() + static_cast<std::ptrdiff_t>(n), true);
    out.model = fit_adaboost_r2(X, y, step_weights[best], cfg, frozen);
    return out;
}

struct GridCell {
    double learning_rate = 0.0;
    int max_depth = 0;
    int n_estimators = 0;
    double score = 0.0;  // selected step's CV error
};

struct GridSearchResult {
    BoostConfig best;
    std::vector<GridCell> table;  // in scan order
};

struct GridRanges {
    std::vector<double> learning_rates;
    std::vector<int> max_depths;
    std::vector<int> n_estimators;
};

// Exhaustive Cartesian scan over the hyperparameter ranges; ties keep the
// first cell in scan order. Cells run independently with derived seeds.
inline GridSearchResult grid_search(const LabeledData& source, const LabeledData& substitute,
                                    const GridRanges& grids, const BoostConfig& base,
                                    unsigned threads = 1) {
    if (grids.learning_rates.empty() || grids.max_depths.empty() || grids.n_estimators.empty())
        throw Error("grid_search: empty grid");
    std::vector<BoostConfig> cells;
    for (double lr : grids.learning_rates)
        for (int depth : grids.max_depths)
            for (int n_est : grids.n_estimators) {
                BoostConfig c = base;
                c.learning_rate = lr;
                c.max_depth = depth;
                c.n_estimators = n_est;
                const std::string tag = "grid lr=" + format_double(lr) + " depth=" + std::to_string(depth) +
                                        " n=" + std::to_string(n_est);
                c.seed = derive_seed(base.seed, tag);
                cells.push_back(c);
            }

    std::vector<double> scores(cells.size(), std::numeric_limits<double>::infinity());
    parallel_for(cells.size(), threads, [&](std::size_t i) {
        try {
            const auto model = fit_two_stage_tra(source, substitute, cells[i], 1);
            scores[i] = model.cv_errors[model.selected_step];
        } catch (const UnlearnableError&) {
            scores[i] = std::numeric_limits<double>::infinity();
        }
    });

    GridSearchResult result;
    std::size_t best = 0;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        result.table.push_back(
            {cells[i].learning_rate, cells[i].max_depth, cells[i].n_estimators, scores[i]});
        if (scores[i] < scores[best]) best = i;
    }
    result.best = cells[best];
    return result;
}

}  // namespace rampflow::boosting
