#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "rampflow/boosting.hpp"
#include "rampflow/common.hpp"

namespace rampflow::eval {

inline double mae(std::span<const double> y_hat, std::span<const double> y) {
    if (y_hat.size() != y.size()) throw Error("mae: size mismatch");
    if (y.empty()) throw Error("mae: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += std::abs(y_hat[i] - y[i]);
    return acc / static_cast<double>(y.size());
}

inline double rmse(std::span<const double> y_hat, std::span<const double> y) {
    if (y_hat.size() != y.size()) throw Error("rmse: size mismatch");
    if (y.empty()) throw Error("rmse: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double r = y_hat[i] - y[i];
        acc += r * r;
    }
    return std::sqrt(acc / static_cast<double>(y.size()));
}

// Mean label of the k Euclidean-nearest training rows; distance ties break
// by row index. Features are expected to be standardized by the caller.
inline std::vector<double> knn_baseline(const Table& train_X, std::span<const double> train_y,
                                        const Table& test_X, int k) {
    if (k < 1) throw Error("knn_baseline: k must be >= 1");
    const std::size_t n = train_X.rows();
    if (static_cast<std::size_t>(k) > n) throw Error("knn_baseline: k exceeds training size");
    if (train_y.size() != n) throw Error("knn_baseline: label size mismatch");
    if (train_X.cols != test_X.cols) throw Error("knn_baseline: column mismatch");

    std::vector<double> out;
    out.reserve(test_X.rows());
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t q = 0; q < test_X.rows(); ++q) {
        const auto query = test_X.row(q);
        for (std::size_t i = 0; i < n; ++i) {
            double d2 = 0.0;
            const auto row = train_X.row(i);
            for (std::size_t j = 0; j < train_X.cols; ++j) {
                const double d = row[j] - query[j];
                d2 += d * d;
            }
            dist[i] = {d2, i};
        }
        std::sort(dist.begin(), dist.end());
        double sum = 0.0;
        for (int j = 0; j < k; ++j) sum += train_y[dist[static_cast<std::size_t>(j)].second];
        out.push_back(sum / k);
    }
    return out;
}

inline std::vector<double> mean_baseline(std::span<const double> train_y, std::size_t test_size) {
    if (train_y.empty()) throw Error("mean_baseline: empty training labels");
    const double m = std::accumulate(train_y.begin(), train_y.end(), 0.0) /
                     static_cast<double>(train_y.size());
    return std::vector<double>(test_size, m);
}

struct EvalModel {
    std::string name;
    // Trains on `train` and returns predictions for the rows of `test`.
    std::function<std::vector<double>(const boosting::LabeledData& train, const Table& test,
                                      std::uint64_t seed)>
        fit_predict;
};

struct ComparisonTask {
    std::string location_id;
    std::string ramp;  // "on" or "off"
    boosting::LabeledData train;
    Table test_X;
    std::vector<double> test_y;  // ground truth
};

struct ScoreRow {
    std::string model;
    std::string location_id;
    std::string ramp;
    double mae_veh_h = 0.0;
    double rmse_veh_h = 0.0;
    double train_seconds = 0.0;
};

using ScoreTable = std::vector<ScoreRow>;

// Per-location, per-ramp MAE/RMSE for each model, averaged over `runs`
// seeded repeats. With record_timings off the timing column stays 0 so the
// emitted CSV is byte-reproducible.
inline ScoreTable compare(std::span<const EvalModel> models, std::span<const ComparisonTask> tasks,
                          int runs, std::uint64_t base_seed, unsigned threads = 1,
                          bool record_timings = true) {
    if (runs < 1) throw Error("compare: runs must be >= 1");
    for (const auto& t : tasks)
        if (t.test_y.empty()) throw Error("compare: task " + t.location_id + "/" + t.ramp +
                                          " has no ground-truth labels");

    struct Cell {
        double mae_sum = 0.0, rmse_sum = 0.0, seconds = 0.0;
    };
    std::vector<Cell> cells(models.size() * tasks.size());
    parallel_for(cells.size(), threads, [&](std::size_t c) {
        const auto& model = models[c / tasks.size()];
        const auto& task = tasks[c % tasks.size()];
        Cell& cell = cells[c];
        for (int r = 0; r < runs; ++r) {
            const std::uint64_t seed =
                derive_seed(base_seed, model.name + ":" + task.location_id + ":" + task.ramp,
                            static_cast<std::uint64_t>(r));
            const auto t0 = std::chrono::steady_clock::now();
            const auto preds = model.fit_predict(task.train, task.test_X, seed);
            const auto t1 = std::chrono::steady_clock::now();
            cell.seconds += std::chrono::duration<double>(t1 - t0).count();
            cell.mae_sum += mae(preds, task.test_y);
            cell.rmse_sum += rmse(preds, task.test_y);
        }
    });

    ScoreTable table;
    for (std::size_t mi = 0; mi < models.size(); ++mi)
        for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
            const Cell& cell = cells[mi * tasks.size() + ti];
            ScoreRow row;
            row.model = models[mi].name;
            row.location_id = tasks[ti].location_id;
            row.ramp = tasks[ti].ramp;
            row.mae_veh_h = cell.mae_sum / runs;
            row.rmse_veh_h = cell.rmse_sum / runs;
            row.train_seconds = record_timings ? cell.seconds : 0.0;
            table.push_back(std::move(row));
        }
    return table;
}

}  // namespace rampflow::eval
