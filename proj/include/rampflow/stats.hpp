#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rampflow/common.hpp"

namespace rampflow::stats {

class DegenerateSeriesError : public Error {
public:
    DegenerateSeriesError() : Error("degenerate series: zero standard deviation") {}
};

inline double mean(std::span<const double> series) {
    if (series.empty()) throw Error("mean of empty series");
    double sum = 0.0;
    for (double r : series) sum += r;
    return sum / static_cast<double>(series.size());
}

// Sample variance with the n-1 divisor.
inline double variance(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 2) throw Error("variance needs at least 2 samples");
    const double m = mean(series);
    double ss = 0.0;
    for (double r : series) {
        const double d = r - m;
        ss += d * d;
    }
    return ss / static_cast<double>(n - 1);
}

inline double std_dev(std::span<const double> series) {
    return std::sqrt(variance(series));
}

// Excess kurtosis: 1/n sum(((r - mean)/sigma)^4) - 3, with sigma the n-1
// standard deviation. Constant series have sigma 0 and are rejected.
inline double kurtosis(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 2) throw Error("kurtosis needs at least 2 samples");
    const double m = mean(series);
    const double sd = std_dev(series);
    if (sd == 0.0) throw DegenerateSeriesError();
    double acc = 0.0;
    for (double r : series) {
        const double z = (r - m) / sd;
        acc += z * z * z * z;
    }
    return acc / static_cast<double>(n) - 3.0;
}

inline double skewness(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 2) throw Error("skewness needs at least 2 samples");
    const double m = mean(series);
    const double sd = std_dev(series);
    if (sd == 0.0) throw DegenerateSeriesError();
    double acc = 0.0;
    for (double r : series) {
        const double z = (r - m) / sd;
        acc += z * z * z;
    }
    return acc / static_cast<double>(n);
}

struct TimeEncoding {
    int moh;  // quarter of the hour, 1..4
    int hod;  // hour of day, 0..23
    int dow;  // day of week, Sunday=1 .. Saturday=7
};

// Calendar encodings on local time. utc_offset_seconds shifts the epoch
// timestamp into local time (fixed offset, no DST).
inline TimeEncoding encode_time(std::int64_t utc_seconds, std::int64_t utc_offset_seconds) {
    const std::int64_t local = utc_seconds + utc_offset_seconds;
    auto floor_div = [](std::int64_t a, std::int64_t b) {
        std::int64_t q = a / b;
        if (a % b != 0 && ((a < 0) != (b < 0))) --q;
        return q;
    };
    const std::int64_t days = floor_div(local, 86400);
    const std::int64_t sec_of_day = local - days * 86400;
    TimeEncoding e;
    e.hod = static_cast<int>(sec_of_day / 3600);
    const int minute = static_cast<int>((sec_of_day % 3600) / 60);
    e.moh = 1 + minute / 15;
    // 1970-01-01 was a Thursday; Sunday maps to 1.
    e.dow = static_cast<int>((days + 4) % 7) + 1;
    return e;
}

constexpr std::size_t kFeatureCount = 33;

inline const std::array<std::string, kFeatureCount>& feature_names() {
    static const std::array<std::string, kFeatureCount> names = {
        "Up_flow",
        "Up_flow_variance",
        "Up_flow_standard_deviation",
        "Up_flow_Kurtosis",
        "Up_flow_Skewness",
        "Up_speed_mean",
        "Up_speed_variance",
        "Up_speed_standard_deviation",
        "Up_speed_Kurtosis",
        "Up_speed_Skewness",
        "Up_occupancy_mean",
        "Up_occupancy_variance",
        "Up_occupancy_standard_deviation",
        "Up_occupancy_Kurtosis",
        "Up_occupancy_Skewness",
        "Down_flow",
        "Down_flow_variance",
        "Down_flow_standard_deviation",
        "Down_flow_Kurtosis",
        "Down_flow_Skewness",
        "Down_speed_mean",
        "Down_speed_variance",
        "Down_speed_standard_deviation",
        "Down_speed_Kurtosis",
        "Down_speed_Skewness",
        "Down_occupancy_mean",
        "Down_occupancy_variance",
        "Down_occupancy_standard_deviation",
        "Down_occupancy_Kurtosis",
        "Down_occupancy_Skewness",
        "DOW",
        "HOD",
        "MOH",
    };
    return names;
}

struct FeatureVector {
    std::string location_id;
    std::int64_t interval_start = 0;
    std::array<double, kFeatureCount> features{};
    std::optional<double> on_flow;   // veh/h
    std::optional<double> off_flow;  // veh/h
};

namespace detail {

inline bool is_constant(std::span<const double> series) {
    for (double r : series)
        if (r != series.front()) return false;
    return true;
}

// Fills [var, std, kurt, skew] with the degenerate rule: a constant series
// yields zeros instead of propagating the sigma=0 error.
inline void spread_block(std::span<const double> series, double* out) {
    if (series.size() < 2 || is_constant(series)) {
        out[0] = out[1] = out[2] = out[3] = 0.0;
        return;
    }
    out[0] = variance(series);
    out[1] = std_dev(series);
    try {
        out[2] = kurtosis(series);
        out[3] = skewness(series);
    } catch (const DegenerateSeriesError&) {
        out[2] = 0.0;
        out[3] = 0.0;
    }
}

}  // namespace detail

struct SegmentSeries {
    std::vector<double> volumes;     // veh/20s, one entry per tick
    std::vector<double> speeds;      // non-missing ticks only
    std::vector<double> occupancies; // non-missing ticks only
    double flow_rate_veh_h = 0.0;    // 4 x sum of tick volumes
};

// One side (upstream or downstream) of the 33-feature layout: flow rate,
// flow spread moments over tick volumes, then mean+spread for speed and
// occupancy over the non-missing ticks.
inline void fill_side(const SegmentSeries& s, double* out) {
    out[0] = s.flow_rate_veh_h;
    detail::spread_block(s.volumes, out + 1);
    out[5] = s.speeds.empty() ? 0.0 : mean(s.speeds);
    detail::spread_block(s.speeds, out + 6);
    out[10] = s.occupancies.empty() ? 0.0 : mean(s.occupancies);
    detail::spread_block(s.occupancies, out + 11);
}

inline FeatureVector featurize(const std::string& location_id, std::int64_t interval_start,
                               const SegmentSeries& up, const SegmentSeries& down,
                               std::int64_t utc_offset_seconds,
                               std::optional<double> on_flow = std::nullopt,
                               std::optional<double> off_flow = std::nullopt) {
    FeatureVector fv;
    fv.location_id = location_id;
    fv.interval_start = interval_start;
    fill_side(up, fv.features.data());
    fill_side(down, fv.features.data() + 15);
    const TimeEncoding t = encode_time(interval_start, utc_offset_seconds);
    fv.features[30] = static_cast<double>(t.dow);
    fv.features[31] = static_cast<double>(t.hod);
    fv.features[32] = static_cast<double>(t.moh);
    fv.on_flow = on_flow;
    fv.off_flow = off_flow;
    return fv;
}

}  // namespace rampflow::stats
