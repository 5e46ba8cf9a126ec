#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rampflow/common.hpp"
#include "rampflow/stats.hpp"

namespace rampflow::matching {

class DegenerateCorrelationError : public Error {
public:
    DegenerateCorrelationError() : Error("pearson correlation undefined for zero-variance input") {}
};

inline double pearson_corr(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw Error("pearson_corr: length mismatch");
    const std::size_t n = a.size();
    if (n < 2) throw Error("pearson_corr: need at least 2 samples");
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(n);
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(n);
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0) throw DegenerateCorrelationError();
    return sab / std::sqrt(saa * sbb);
}

struct LocationTable {
    std::string location_id;
    std::vector<stats::FeatureVector> rows;  // sorted by interval_start
};

struct MatchEntry {
    std::string source_location;
    double correlation_sum = 0.0;
    std::vector<double> per_variable;  // one per selected variable
};

using MatchResult = std::map<std::string, MatchEntry>;  // keyed by target location

namespace detail {

// Shared clock positions of two interval-sorted tables.
inline void aligned_rows(const LocationTable& a, const LocationTable& b,
                         std::vector<std::size_t>& ia, std::vector<std::size_t>& ib) {
    ia.clear();
    ib.clear();
    std::size_t i = 0, j = 0;
    while (i < a.rows.size() && j < b.rows.size()) {
        if (a.rows[i].interval_start < b.rows[j].interval_start)
            ++i;
        else if (a.rows[i].interval_start > b.rows[j].interval_start)
            ++j;
        else {
            ia.push_back(i++);
            ib.push_back(j++);
        }
    }
}

}  // namespace detail

// Eq.-13-style matching: for each target location, the source location
// maximizing the sum of per-variable Pearson correlations over the shared
// intervals. Zero-variance pairs contribute 0; sum ties break toward the
// lexicographically smaller source location id.
inline MatchResult match_locations(std::span<const LocationTable> source,
                                   std::span<const LocationTable> target,
                                   std::span<const std::size_t> variable_indices) {
    if (source.empty() || target.empty()) throw Error("match_locations: empty corridor");
    std::vector<std::size_t> source_order(source.size());
    std::iota(source_order.begin(), source_order.end(), 0);
    std::sort(source_order.begin(), source_order.end(), [&](std::size_t x, std::size_t y) {
        return source[x].location_id < source[y].location_id;
    });

    MatchResult result;
    std::vector<std::size_t> ia, ib;
    std::vector<double> a, b;
    for (const auto& tgt : target) {
        bool have_best = false;
        MatchEntry best;
        for (std::size_t so : source_order) {
            const auto& src = source[so];
            detail::aligned_rows(src, tgt, ia, ib);
            if (ia.size() < 2)
                throw Error("match_locations: no shared intervals between " + tgt.location_id + " and " +
                            src.location_id);
            MatchEntry entry;
            entry.source_location = src.location_id;
            for (std::size_t var : variable_indices) {
                a.clear();
                b.clear();
                for (std::size_t k = 0; k < ia.size(); ++k) {
                    a.push_back(src.rows[ia[k]].features[var]);
                    b.push_back(tgt.rows[ib[k]].features[var]);
                }
                double c = 0.0;
                try {
                    c = pearson_corr(a, b);
                } catch (const DegenerateCorrelationError&) {
                    c = 0.0;
                }
                entry.per_variable.push_back(c);
                entry.correlation_sum += c;
            }
            if (!have_best || entry.correlation_sum > best.correlation_sum) {
                best = std::move(entry);
                have_best = true;
            }
        }
        result.emplace(tgt.location_id, std::move(best));
    }
    return result;
}

struct SubstituteSet {
    std::vector<std::size_t> indices;  // ascending source row indices
    double theta = 0.0;                // smallest selected similarity score
    double fraction = 0.10;
};

// Scores each source row by its best cosine similarity to any target row
// and keeps the ceil(fraction * n) highest scorers. Rows are expected to
// be standardized and restricted to the selected-variable columns.
inline SubstituteSet substitute_target_data(const Eigen::MatrixXd& source_rows,
                                            const Eigen::MatrixXd& target_rows, double fraction = 0.10) {
    if (fraction <= 0.0 || fraction > 1.0) throw Error("substitute_target_data: fraction must be in (0,1]");
    if (source_rows.rows() == 0 || target_rows.rows() == 0)
        throw Error("substitute_target_data: empty input");
    if (source_rows.cols() != target_rows.cols())
        throw Error("substitute_target_data: column mismatch");

    const auto n = source_rows.rows();
    const auto k = target_rows.rows();
    Eigen::MatrixXd s_unit(n, source_rows.cols());
    std::vector<bool> s_zero(static_cast<std::size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double norm = source_rows.row(i).norm();
        if (norm == 0.0) {
            s_zero[static_cast<std::size_t>(i)] = true;
            s_unit.row(i).setZero();
        } else {
            s_unit.row(i) = source_rows.row(i) / norm;
        }
    }
    Eigen::MatrixXd t_unit(k, target_rows.cols());
    std::vector<bool> t_zero(static_cast<std::size_t>(k), false);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double norm = target_rows.row(i).norm();
        if (norm == 0.0) {
            t_zero[static_cast<std::size_t>(i)] = true;
            t_unit.row(i).setZero();
        } else {
            t_unit.row(i) = target_rows.row(i) / norm;
        }
    }

    // Cosine through the unit-vector distance, 1 - |u-v|^2/2: identical
    // rows score exactly 1, so the index tie-break stays observable.
    std::vector<double> scores(static_cast<std::size_t>(n), -1.0);
    const auto q = source_rows.cols();
    for (Eigen::Index i = 0; i < n; ++i) {
        if (s_zero[static_cast<std::size_t>(i)]) continue;  // cosine undefined, never selected
        double best = -1.0;
        for (Eigen::Index j = 0; j < k; ++j) {
            if (t_zero[static_cast<std::size_t>(j)]) continue;
            double d2 = 0.0;
            for (Eigen::Index c = 0; c < q; ++c) {
                const double d = s_unit(i, c) - t_unit(j, c);
                d2 += d * d;
            }
            best = std::max(best, 1.0 - 0.5 * d2);
        }
        scores[static_cast<std::size_t>(i)] = std::clamp(best, -1.0, 1.0);
    }

    const std::size_t take = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(n)) + 0.5);
    std::vector<std::size_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        if (scores[x] != scores[y]) return scores[x] > scores[y];
        return x < y;  // ties keep the lower row index
    });

    SubstituteSet out;
    out.fraction = fraction;
    out.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(take));
    out.theta = scores[out.indices.back()];  // smallest selected score
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

}  // namespace rampflow::matching
