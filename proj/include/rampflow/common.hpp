#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace rampflow {

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error(what + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

// FNV-1a over the name, folded into the base seed. std::hash is
// implementation-defined, so sub-seed derivation uses this instead.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view name) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return base ^ h;
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view name, std::uint64_t index) {
    return derive_seed(base, name) ^ (0x9e3779b97f4a7c15ull * (index + 1));
}

// Runs fn(i) for i in [0, n) across at most `threads` workers. Each index
// owns its output slot, so results are identical for any thread count.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
    if (threads == 0) threads = std::thread::hardware_concurrency();
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::vector<std::thread> pool;
    pool.reserve(workers);
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += workers) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// Row-major numeric table; rows are feature vectors.
struct Table {
    std::size_t cols = 0;
    std::vector<double> data;

    Table() = default;
    explicit Table(std::size_t c) : cols(c) {}

    std::size_t rows() const { return cols == 0 ? 0 : data.size() / cols; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
    void push_row(std::span<const double> r) {
        if (r.size() != cols) throw Error("Table: row width mismatch");
        data.insert(data.end(), r.begin(), r.end());
    }
};

// Fisher-Yates with an explicit generator contract. std::shuffle's draw
// sequence is implementation-defined, so seeded reproducibility uses this.
template <typename T, typename Rng>
void deterministic_shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(items[i - 1], items[j]);
    }
}

inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

}  // namespace rampflow
