#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "rampflow/common.hpp"

namespace rampflow::ridge {

// Column z-scoring fitted on source-domain training data. Zero-variance
// columns map to all-zeros so constant features cannot blow up.
struct Standardizer {
    Eigen::VectorXd means;
    Eigen::VectorXd stds;
    double label_mean = 0.0;

    void fit(const Eigen::MatrixXd& X) {
        const auto n = static_cast<double>(X.rows());
        means = X.colwise().sum() / n;
        stds = Eigen::VectorXd::Zero(X.cols());
        if (X.rows() > 1) {
            for (Eigen::Index j = 0; j < X.cols(); ++j) {
                const double ss = (X.col(j).array() - means(j)).square().sum();
                stds(j) = std::sqrt(ss / (n - 1.0));
            }
        }
    }

    Eigen::MatrixXd transform(const Eigen::MatrixXd& X) const {
        Eigen::MatrixXd Z(X.rows(), X.cols());
        for (Eigen::Index j = 0; j < X.cols(); ++j) {
            if (stds(j) > 0.0)
                Z.col(j) = (X.col(j).array() - means(j)) / stds(j);
            else
                Z.col(j).setZero();
        }
        return Z;
    }

    Eigen::VectorXd transform_row(const Eigen::VectorXd& x) const {
        Eigen::VectorXd z(x.size());
        for (Eigen::Index j = 0; j < x.size(); ++j)
            z(j) = stds(j) > 0.0 ? (x(j) - means(j)) / stds(j) : 0.0;
        return z;
    }
};

namespace detail {

inline Eigen::VectorXd solve_normal_system(Eigen::MatrixXd gram, const Eigen::VectorXd& rhs, double lambda) {
    const auto p = gram.rows();
    gram.diagonal().array() += lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() == Eigen::Success) {
        Eigen::VectorXd beta = llt.solve(rhs);
        const double resid = (gram * beta - rhs).norm();
        if (resid <= 1e-6 * (1.0 + rhs.norm())) return beta;
    }
    if (lambda == 0.0)
        throw Error("singular normal system at lambda = 0; use lambda > 0");
    // Jitter fallback for near-singular Gram matrices from collinear features.
    gram.diagonal().array() += 1e-10 * gram.trace() / static_cast<double>(p);
    Eigen::LLT<Eigen::MatrixXd> retry(gram);
    if (retry.info() != Eigen::Success) throw Error("ridge solve failed even with jitter");
    return retry.solve(rhs);
}

}  // namespace detail

// beta = (X'X + lambda I)^-1 X'Y via a symmetric positive-definite solve.
inline Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y, double lambda) {
    if (X.rows() < 1) throw Error("fit_ridge: empty design matrix");
    if (lambda < 0.0) throw Error("fit_ridge: lambda must be non-negative");
    return detail::solve_normal_system(X.transpose() * X, X.transpose() * Y, lambda);
}

// Grid value minimizing mean fold MSE; ties go to the larger lambda.
inline double select_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                            std::span<const double> grid, int folds, std::uint64_t shuffle_seed) {
    if (grid.empty()) throw Error("select_lambda: empty grid");
    if (folds < 2) throw Error("select_lambda: need at least 2 folds");
    const auto n = X.rows();
    if (n < folds) throw Error("select_lambda: fewer samples than folds");

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(shuffle_seed);
    deterministic_shuffle(order, rng);

    // Per-fold Gram pieces; each lambda then costs only a p x p solve.
    const Eigen::MatrixXd gram_all = X.transpose() * X;
    const Eigen::VectorXd rhs_all = X.transpose() * Y;
    std::vector<Eigen::MatrixXd> fold_gram(folds);
    std::vector<Eigen::VectorXd> fold_rhs(folds);
    std::vector<std::vector<Eigen::Index>> fold_rows(folds);
    for (int f = 0; f < folds; ++f) {
        fold_gram[f] = Eigen::MatrixXd::Zero(X.cols(), X.cols());
        fold_rhs[f] = Eigen::VectorXd::Zero(X.cols());
    }
    for (std::size_t i = 0; i < order.size(); ++i) {
        const int f = static_cast<int>(i % static_cast<std::size_t>(folds));
        const auto row = order[i];
        fold_gram[f].noalias() += X.row(row).transpose() * X.row(row);
        fold_rhs[f].noalias() += X.row(row).transpose() * Y(row);
        fold_rows[f].push_back(row);
    }

    double best_lambda = grid.front();
    double best_mse = std::numeric_limits<double>::infinity();
    for (double lambda : grid) {
        double mse_sum = 0.0;
        for (int f = 0; f < folds; ++f) {
            const Eigen::VectorXd beta =
                detail::solve_normal_system(gram_all - fold_gram[f], rhs_all - fold_rhs[f], lambda);
            double se = 0.0;
            for (auto row : fold_rows[f]) {
                const double r = Y(row) - X.row(row).dot(beta);
                se += r * r;
            }
            mse_sum += se / static_cast<double>(fold_rows[f].size());
        }
        const double mse = mse_sum / folds;
        if (mse < best_mse || (mse == best_mse && lambda > best_lambda)) {
            best_mse = mse;
            best_lambda = lambda;
        }
    }
    return best_lambda;
}

inline std::vector<double> default_lambda_grid() {
    // 13 points log-spaced over [1e-3, 1e3].
    std::vector<double> grid;
    for (int k = 0; k <= 12; ++k) grid.push_back(std::pow(10.0, -3.0 + 0.5 * k));
    return grid;
}

struct RidgeRunLog {
    std::vector<double> lambdas;                // one per run
    std::vector<Eigen::VectorXd> coefficients;  // one per run
};

// Repeats CV lambda selection + full fit with fold-shuffle seeds
// seed0+1 .. seed0+runs and averages the coefficient vectors.
inline Eigen::VectorXd averaged_coefficients(const Eigen::MatrixXd& X, const Eigen::VectorXd& Y,
                                             std::span<const double> grid, int folds, int runs,
                                             std::uint64_t seed0, RidgeRunLog* log = nullptr) {
    if (runs < 1) throw Error("averaged_coefficients: runs must be >= 1");
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(X.cols());
    for (int r = 1; r <= runs; ++r) {
        const double lambda = select_lambda(X, Y, grid, folds, seed0 + static_cast<std::uint64_t>(r));
        const Eigen::VectorXd beta = fit_ridge(X, Y, lambda);
        sum += beta;
        if (log) {
            log->lambdas.push_back(lambda);
            log->coefficients.push_back(beta);
        }
    }
    return sum / static_cast<double>(runs);
}

inline std::vector<bool> select_variables(const Eigen::VectorXd& coefficients, double threshold = 10.0) {
    std::vector<bool> mask(static_cast<std::size_t>(coefficients.size()));
    bool any = false;
    for (Eigen::Index i = 0; i < coefficients.size(); ++i) {
        mask[static_cast<std::size_t>(i)] = std::abs(coefficients(i)) > threshold;
        any = any || mask[static_cast<std::size_t>(i)];
    }
    if (!any) throw Error("select_variables: no coefficient exceeds the threshold; lower the threshold");
    return mask;
}

struct RidgeModel {
    double lambda = 0.0;              // median over the run lambdas
    Eigen::VectorXd coefficients;     // averaged over runs
    std::vector<bool> selected_mask;
    double threshold = 10.0;
    int runs = 10;
};

inline RidgeModel fit_ridge_model(const Eigen::MatrixXd& Z, const Eigen::VectorXd& Yc,
                                  std::span<const double> grid, int folds, int runs, double threshold,
                                  std::uint64_t seed0, RidgeRunLog* log = nullptr) {
    RidgeModel model;
    RidgeRunLog local;
    RidgeRunLog* use_log = log ? log : &local;
    model.coefficients = averaged_coefficients(Z, Yc, grid, folds, runs, seed0, use_log);
    std::vector<double> lambdas = use_log->lambdas;
    std::sort(lambdas.begin(), lambdas.end());
    model.lambda = lambdas[lambdas.size() / 2];
    model.threshold = threshold;
    model.runs = runs;
    model.selected_mask = select_variables(model.coefficients, threshold);
    return model;
}

inline std::vector<std::size_t> mask_indices(const std::vector<bool>& mask) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) idx.push_back(i);
    return idx;
}

inline std::vector<bool> mask_union(const std::vector<bool>& a, const std::vector<bool>& b) {
    std::vector<bool> u(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) u[i] = a[i] || b[i];
    return u;
}

inline Eigen::MatrixXd apply_mask(const Eigen::MatrixXd& X, const std::vector<bool>& mask) {
    const auto idx = mask_indices(mask);
    Eigen::MatrixXd out(X.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = X.col(static_cast<Eigen::Index>(idx[j]));
    return out;
}

}  // namespace rampflow::ridge
