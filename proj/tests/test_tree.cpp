#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "rampflow/tree.hpp"

using namespace rampflow;
using Catch::Approx;

namespace {

Table column(const std::vector<double>& values) {
    Table t(1);
    for (double v : values) t.push_row(std::vector<double>{v});
    return t;
}

Table random_table(std::mt19937_64& rng, std::size_t n, std::size_t p) {
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    Table t(p);
    std::vector<double> row(p);
    for (std::size_t i = 0; i < n; ++i) {
        for (auto& v : row) v = u(rng);
        t.push_row(row);
    }
    return t;
}

double weighted_sse_of(const tree::RegressionTree& t, const Table& X, const std::vector<double>& y,
                       const std::vector<double>& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) {
        const double r = y[i] - t.predict(X.row(i));
        s += w[i] * r * r;
    }
    return s;
}

}  // namespace

TEST_CASE("constant labels make a single leaf") {
    const auto X = column({1, 2, 3, 4});
    const std::vector<double> y(4, 7.0), w(4, 1.0);
    const auto t = tree::fit_tree(X, y, w, 5);
    REQUIRE(t.nodes.size() == 1);
    CHECK(t.predict(std::vector<double>{99.0}) == 7.0);
}

TEST_CASE("depth-1 step function splits at the midpoint") {
    const auto X = column({0, 1, 2, 3});
    const std::vector<double> y{0, 0, 10, 10}, w(4, 1.0);
    const auto t = tree::fit_tree(X, y, w, 1);
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].feature == 0);
    CHECK(t.nodes[0].threshold == Approx(1.5));
    CHECK(t.predict(std::vector<double>{0.2}) == Approx(0.0));
    CHECK(t.predict(std::vector<double>{2.6}) == Approx(10.0));
}

TEST_CASE("zero-weight rows cannot steer the fit") {
    const auto X = column({0, 1, 2, 3, 4, 5});
    const std::vector<double> y{5, 9, 1, 7, 3, 8};
    std::vector<double> w(6, 0.0);
    w[1] = 1.0;
    w[4] = 1.0;
    const auto t = tree::fit_tree(X, y, w, 4);

    Table X2(1);
    X2.push_row(std::vector<double>{1.0});
    X2.push_row(std::vector<double>{4.0});
    const std::vector<double> y2{9, 3}, w2(2, 1.0);
    const auto t2 = tree::fit_tree(X2, y2, w2, 4);

    CHECK(t.predict(std::vector<double>{1.0}) == t2.predict(std::vector<double>{1.0}));
    CHECK(t.predict(std::vector<double>{4.0}) == t2.predict(std::vector<double>{4.0}));
}

TEST_CASE("prediction routes by feature < threshold") {
    std::mt19937_64 rng(97);
    const auto X = random_table(rng, 50, 3);
    std::vector<double> y(50), w(50, 1.0);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (auto& v : y) v = u(rng);
    const auto t = tree::fit_tree(X, y, w, 3);
    for (std::size_t i = 0; i < X.rows(); ++i) {
        int at = 0;
        while (t.nodes[static_cast<std::size_t>(at)].feature >= 0) {
            const auto& node = t.nodes[static_cast<std::size_t>(at)];
            at = X.at(i, static_cast<std::size_t>(node.feature)) < node.threshold ? node.left
                                                                                  : node.right;
        }
        CHECK(t.predict(X.row(i)) == t.nodes[static_cast<std::size_t>(at)].value);
    }
    CHECK_THROWS_AS(t.predict(std::vector<double>{1.0}), Error);
}

TEST_CASE("a deep tree memorizes distinct rows") {
    std::mt19937_64 rng(101);
    const auto X = random_table(rng, 64, 2);
    std::vector<double> y(64), w(64, 1.0);
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (auto& v : y) v = u(rng);
    const auto t = tree::fit_tree(X, y, w, 12);
    for (std::size_t i = 0; i < X.rows(); ++i) CHECK(t.predict(X.row(i)) == Approx(y[i]).margin(1e-12));
}

TEST_CASE("training weighted SSE is monotone in depth") {
    std::mt19937_64 rng(103);
    const auto X = random_table(rng, 120, 4);
    std::vector<double> y(120), w(120);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : y) v = 10.0 * u(rng);
    for (auto& v : w) v = 0.1 + u(rng);
    double prev = std::numeric_limits<double>::infinity();
    for (int depth = 1; depth <= 8; ++depth) {
        const auto t = tree::fit_tree(X, y, w, depth);
        const double sse = weighted_sse_of(t, X, y, w);
        CHECK(sse <= prev + 1e-9);
        prev = sse;
    }
}

TEST_CASE("weight scaling leaves the tree unchanged") {
    std::mt19937_64 rng(107);
    const auto X = random_table(rng, 80, 3);
    std::vector<double> y(80), w(80);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : y) v = u(rng);
    for (auto& v : w) v = 0.2 + u(rng);
    std::vector<double> scaled(w);
    for (auto& v : scaled) v *= 32.0;  // dyadic scale keeps the arithmetic exact
    const auto t1 = tree::fit_tree(X, y, w, 5);
    const auto t2 = tree::fit_tree(X, y, scaled, 5);
    REQUIRE(t1.nodes.size() == t2.nodes.size());
    for (std::size_t i = 0; i < t1.nodes.size(); ++i) {
        CHECK(t1.nodes[i].feature == t2.nodes[i].feature);
        CHECK(t1.nodes[i].threshold == t2.nodes[i].threshold);
        CHECK(t1.nodes[i].value == Approx(t2.nodes[i].value).margin(1e-12));
    }
}

TEST_CASE("leaf values stay within the member label range") {
    std::mt19937_64 rng(109);
    const auto X = random_table(rng, 100, 3);
    std::vector<double> y(100), w(100);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : y) v = 100.0 * u(rng);
    for (auto& v : w) v = u(rng);
    const auto t = tree::fit_tree(X, y, w, 6);
    const double lo = *std::min_element(y.begin(), y.end());
    const double hi = *std::max_element(y.begin(), y.end());
    for (const auto& node : t.nodes) {
        if (node.feature >= 0) continue;
        CHECK(node.value >= lo - 1e-12);
        CHECK(node.value <= hi + 1e-12);
    }
    CHECK_THROWS_AS(tree::fit_tree(Table(3), {}, {}, 3), Error);
}

TEST_CASE("min_samples_leaf keeps small groups together") {
    const auto X = column({0, 1, 2, 3, 4, 5, 6, 7});
    const std::vector<double> y{0, 0, 0, 0, 10, 10, 10, 10}, w(8, 1.0);
    const auto t = tree::fit_tree(X, y, w, 8, 4);
    // Only the midpoint split keeps 4 rows on both sides.
    REQUIRE(t.nodes.size() == 3);
    CHECK(t.nodes[0].threshold == Approx(3.5));
}
