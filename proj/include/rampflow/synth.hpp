#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "rampflow/csv.hpp"
#include "rampflow/ingest.hpp"

namespace rampflow::synth {

struct DomainShift {
    double demand_scale = 1.0;
    double peak_shift_hours = 0.0;
};

struct FundamentalDiagram {
    double free_flow_speed_mph = 65.0;
    double critical_occupancy_pct = 22.0;
};

struct SynthConfig {
    std::string corridor_id = "SRC";
    std::uint64_t seed = 1;
    int days = 14;
    int locations = 4;
    double base_demand_veh_h = 3200.0;
    double am_peak_factor = 1.7;
    double pm_peak_factor = 1.9;
    double am_peak_hour = 7.5;
    double pm_peak_hour = 16.5;
    std::vector<double> on_fractions;   // one per location, in (0,1)
    std::vector<double> off_fractions;  // one per location, in (0,1)
    double noise_std = 0.8;             // veh/20s, per detector
    double daily_demand_jitter = 0.10;  // std of the per-day demand multiplier
    DomainShift domain_shift;
    FundamentalDiagram fd;
    std::int64_t start_epoch = 1564902000;  // 2019-08-04 00:00 local at UTC-7
    std::int64_t utc_offset_seconds = -25200;

    void validate() const {
        if (days < 1) throw Error("SynthConfig: days must be >= 1");
        if (locations < 1) throw Error("SynthConfig: locations must be >= 1");
        if (base_demand_veh_h <= 0.0) throw Error("SynthConfig: base demand must be positive");
        if (noise_std < 0.0) throw Error("SynthConfig: noise_std must be non-negative");
        if (on_fractions.size() != static_cast<std::size_t>(locations) ||
            off_fractions.size() != static_cast<std::size_t>(locations))
            throw Error("SynthConfig: need one on/off fraction per location");
        for (double f : on_fractions)
            if (!(f > 0.0 && f < 1.0)) throw Error("SynthConfig: on fraction outside (0,1)");
        for (double f : off_fractions)
            if (!(f > 0.0 && f < 1.0)) throw Error("SynthConfig: off fraction outside (0,1)");
        if (start_epoch % ingest::kIntervalSeconds != 0)
            throw Error("SynthConfig: start_epoch must sit on the 15-minute grid");
    }
};

inline SynthConfig default_config(const std::string& corridor_id, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.corridor_id = corridor_id;
    cfg.seed = seed;
    cfg.on_fractions = {0.12, 0.15, 0.10, 0.14};
    cfg.off_fractions = {0.10, 0.09, 0.13, 0.11};
    return cfg;
}

inline SynthConfig config_from_json(const nlohmann::json& j) {
    SynthConfig cfg;
    cfg.corridor_id = j.value("corridor_id", cfg.corridor_id);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.days = j.value("days", cfg.days);
    cfg.locations = j.value("locations", cfg.locations);
    cfg.base_demand_veh_h = j.value("base_demand_veh_h", cfg.base_demand_veh_h);
    cfg.am_peak_factor = j.value("am_peak_factor", cfg.am_peak_factor);
    cfg.pm_peak_factor = j.value("pm_peak_factor", cfg.pm_peak_factor);
    cfg.am_peak_hour = j.value("am_peak_hour", cfg.am_peak_hour);
    cfg.pm_peak_hour = j.value("pm_peak_hour", cfg.pm_peak_hour);
    if (j.contains("on_fractions")) cfg.on_fractions = j.at("on_fractions").get<std::vector<double>>();
    if (j.contains("off_fractions")) cfg.off_fractions = j.at("off_fractions").get<std::vector<double>>();
    cfg.noise_std = j.value("noise_std", cfg.noise_std);
    cfg.daily_demand_jitter = j.value("daily_demand_jitter", cfg.daily_demand_jitter);
    if (j.contains("domain_shift")) {
        cfg.domain_shift.demand_scale = j.at("domain_shift").value("demand_scale", 1.0);
        cfg.domain_shift.peak_shift_hours = j.at("domain_shift").value("peak_shift_hours", 0.0);
    }
    if (j.contains("fundamental_diagram")) {
        cfg.fd.free_flow_speed_mph =
            j.at("fundamental_diagram").value("free_flow_speed_mph", cfg.fd.free_flow_speed_mph);
        cfg.fd.critical_occupancy_pct =
            j.at("fundamental_diagram").value("critical_occupancy_pct", cfg.fd.critical_occupancy_pct);
    }
    cfg.start_epoch = j.value("start_epoch", cfg.start_epoch);
    cfg.utc_offset_seconds = j.value("utc_offset_seconds", cfg.utc_offset_seconds);
    if (cfg.on_fractions.empty()) {
        const auto defaults = default_config(cfg.corridor_id, cfg.seed);
        cfg.on_fractions.assign(defaults.on_fractions.begin(), defaults.on_fractions.end());
        cfg.off_fractions.assign(defaults.off_fractions.begin(), defaults.off_fractions.end());
    }
    cfg.on_fractions.resize(static_cast<std::size_t>(cfg.locations),
                            cfg.on_fractions.empty() ? 0.12 : cfg.on_fractions.back());
    cfg.off_fractions.resize(static_cast<std::size_t>(cfg.locations),
                             cfg.off_fractions.empty() ? 0.10 : cfg.off_fractions.back());
    return cfg;
}

inline nlohmann::json config_to_json(const SynthConfig& cfg) {
    nlohmann::json j;
    j["corridor_id"] = cfg.corridor_id;
    j["seed"] = cfg.seed;
    j["days"] = cfg.days;
    j["locations"] = cfg.locations;
    j["base_demand_veh_h"] = cfg.base_demand_veh_h;
    j["am_peak_factor"] = cfg.am_peak_factor;
    j["pm_peak_factor"] = cfg.pm_peak_factor;
    j["am_peak_hour"] = cfg.am_peak_hour;
    j["pm_peak_hour"] = cfg.pm_peak_hour;
    j["on_fractions"] = cfg.on_fractions;
    j["off_fractions"] = cfg.off_fractions;
    j["noise_std"] = cfg.noise_std;
    j["daily_demand_jitter"] = cfg.daily_demand_jitter;
    j["domain_shift"] = {{"demand_scale", cfg.domain_shift.demand_scale},
                         {"peak_shift_hours", cfg.domain_shift.peak_shift_hours}};
    j["fundamental_diagram"] = {{"free_flow_speed_mph", cfg.fd.free_flow_speed_mph},
                                {"critical_occupancy_pct", cfg.fd.critical_occupancy_pct}};
    j["start_epoch"] = cfg.start_epoch;
    j["utc_offset_seconds"] = cfg.utc_offset_seconds;
    return j;
}

namespace detail {

// Double-peak daily demand profile in veh/h at a local clock hour. The
// daytime hump keeps overnight demand near a quarter of the daytime base;
// the am/pm factors add rush-hour bumps on top.
inline double demand_at(const SynthConfig& cfg, double local_hour, double day_multiplier) {
    const double width = 1.5;  // peak width in hours
    const double am = cfg.am_peak_hour + cfg.domain_shift.peak_shift_hours;
    const double pm = cfg.pm_peak_hour + cfg.domain_shift.peak_shift_hours;
    auto bump = [&](double peak_hour) {
        const double d = local_hour - peak_hour;
        return std::exp(-d * d / (2.0 * width * width));
    };
    const double mid = local_hour - 13.0;
    const double daybase = 0.25 + 0.75 * std::exp(-mid * mid / (2.0 * 5.5 * 5.5));
    const double shape =
        daybase + (cfg.am_peak_factor - 1.0) * bump(am) + (cfg.pm_peak_factor - 1.0) * bump(pm);
    return cfg.base_demand_veh_h * cfg.domain_shift.demand_scale * day_multiplier * shape;
}

inline int stochastic_round(double x, std::mt19937_64& rng) {
    const double fl = std::floor(x);
    const double frac = x - fl;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int v = static_cast<int>(fl);
    if (frac > 0.0 && u(rng) < frac) ++v;
    return v;
}

// Saturating occupancy map and a speed map flat below the critical
// occupancy, linearly dropping above it. Keeps occ in [0,100) and speed in
// (0, free_flow].
inline double occupancy_for(int volume_20s) {
    return 100.0 * volume_20s / (volume_20s + 60.0);
}

inline double speed_for(double occupancy, const FundamentalDiagram& fd) {
    if (occupancy <= fd.critical_occupancy_pct) return fd.free_flow_speed_mph;
    const double over = (occupancy - fd.critical_occupancy_pct) / (100.0 - fd.critical_occupancy_pct);
    return fd.free_flow_speed_mph * std::max(0.2, 1.0 - 0.75 * over);
}

}  // namespace detail

struct TruthRow {
    std::string location_id;
    std::int64_t interval_start = 0;
    double on_flow = 0.0;   // veh/h
    double off_flow = 0.0;  // veh/h
};

struct SynthResult {
    ingest::CorridorSpec corridor;           // with ramp detectors
    ingest::CorridorSpec corridor_mainline;  // ramp entries stripped
    std::vector<TruthRow> truth;
};

inline std::string location_name(const SynthConfig& cfg, int loc) {
    return cfg.corridor_id + "_L" + (loc + 1 < 10 ? "0" : "") + std::to_string(loc + 1);
}

// Generates per-lane 20 s records for every location and writes them in
// timestamp order. Tick counts are built so that downstream equals
// upstream + on - off exactly before downstream detector noise.
inline SynthResult generate_corridor(const SynthConfig& cfg, const std::string& raw_path) {
    cfg.validate();

    SynthResult result;
    result.corridor.corridor_id = cfg.corridor_id;
    result.corridor_mainline.corridor_id = cfg.corridor_id;
    for (int loc = 0; loc < cfg.locations; ++loc) {
        const std::string name = location_name(cfg, loc);
        ingest::LocationSpec full;
        full.location_id = name;
        full.upstream = {name + "_up"};
        full.downstream = {name + "_down"};
        full.on_ramp = {name + "_on"};
        full.off_ramp = {name + "_off"};
        ingest::LocationSpec mainline = full;
        mainline.on_ramp.clear();
        mainline.off_ramp.clear();
        result.corridor.locations.push_back(full);
        result.corridor_mainline.locations.push_back(mainline);
    }

    const int ticks_per_day = 86400 / ingest::kTickSeconds;
    struct DayCell {
        int up, down, on, off;
        double up_speed, down_speed, ramp_speed;
        double up_occ, down_occ, on_occ, off_occ;
        int hov;
    };

    LineWriter raw(raw_path);
    raw.write(ingest::detail::kRawHeader);

    std::vector<std::vector<DayCell>> day_cells(static_cast<std::size_t>(cfg.locations));
    std::vector<std::vector<TruthRow>> day_truth(static_cast<std::size_t>(cfg.locations));

    std::string line;
    auto emit = [&](std::int64_t ts, const std::string& det, int lane, const char* lane_type, int volume,
                    double speed, double occ) {
        line = std::to_string(ts);
        line += ',';
        line += det;
        line += ',';
        line += std::to_string(lane);
        line += ',';
        line += lane_type;
        line += ',';
        line += std::to_string(volume);
        line += ',';
        line += format_double(speed);
        line += ',';
        line += format_double(occ);
        raw.write(line);
    };

    for (int day = 0; day < cfg.days; ++day) {
        for (int loc = 0; loc < cfg.locations; ++loc) {
            auto& cells = day_cells[static_cast<std::size_t>(loc)];
            cells.assign(static_cast<std::size_t>(ticks_per_day), DayCell{});
            auto& truth = day_truth[static_cast<std::size_t>(loc)];
            truth.clear();

            std::mt19937_64 rng(derive_seed(derive_seed(cfg.seed, "synth_day", static_cast<std::uint64_t>(day)),
                                            "loc", static_cast<std::uint64_t>(loc)));
            std::normal_distribution<double> noise(0.0, cfg.noise_std);
            std::normal_distribution<double> jitter(0.0, cfg.daily_demand_jitter);
            const double day_mult =
                cfg.daily_demand_jitter > 0.0 ? std::clamp(std::exp(jitter(rng)), 0.75, 1.35) : 1.0;

            const double a = cfg.on_fractions[static_cast<std::size_t>(loc)];
            const double b = cfg.off_fractions[static_cast<std::size_t>(loc)];

            long long on_acc = 0, off_acc = 0;
            for (int k = 0; k < ticks_per_day; ++k) {
                const std::int64_t ts = cfg.start_epoch + static_cast<std::int64_t>(day) * 86400 +
                                        static_cast<std::int64_t>(k) * ingest::kTickSeconds;
                const std::int64_t local = ts + cfg.utc_offset_seconds;
                const double local_hour = static_cast<double>(local % 86400) / 3600.0;
                const double mu = detail::demand_at(cfg, local_hour, day_mult) / 180.0;  // veh/20s

                auto draw = [&](double mean) {
                    const double v = cfg.noise_std > 0.0 ? mean + noise(rng) : mean;
                    return std::max(0.0, v);
                };
                const int up = detail::stochastic_round(draw(mu), rng);
                const int on = detail::stochastic_round(draw(a * mu), rng);
                int off = detail::stochastic_round(draw(b * mu), rng);
                if (off > up + on) off = up + on;
                const int down_exact = up + on - off;
                int down = down_exact;
                if (cfg.noise_std > 0.0)
                    down = std::max(0, detail::stochastic_round(down_exact + noise(rng), rng));

                DayCell& c = cells[static_cast<std::size_t>(k)];
                c.up = up;
                c.down = down;
                c.on = on;
                c.off = off;
                c.up_occ = detail::occupancy_for(up);
                c.down_occ = detail::occupancy_for(down);
                c.on_occ = detail::occupancy_for(on);
                c.off_occ = detail::occupancy_for(off);
                c.up_speed = detail::speed_for(c.up_occ, cfg.fd);
                c.down_speed = detail::speed_for(c.down_occ, cfg.fd);
                c.ramp_speed = cfg.fd.free_flow_speed_mph * 0.6;  // ramps run slower
                c.hov = detail::stochastic_round(0.08 * mu, rng);

                on_acc += on;
                off_acc += off;
                if ((k + 1) % ingest::kTicksPerInterval == 0) {
                    TruthRow row;
                    row.location_id = location_name(cfg, loc);
                    row.interval_start = ts - (ingest::kTicksPerInterval - 1) * ingest::kTickSeconds;
                    row.on_flow = 4.0 * static_cast<double>(on_acc);
                    row.off_flow = 4.0 * static_cast<double>(off_acc);
                    truth.push_back(std::move(row));
                    on_acc = off_acc = 0;
                }
            }
        }

        // Flush this day in timestamp order across locations.
        for (int k = 0; k < ticks_per_day; ++k) {
            const std::int64_t ts = cfg.start_epoch + static_cast<std::int64_t>(day) * 86400 +
                                    static_cast<std::int64_t>(k) * ingest::kTickSeconds;
            for (int loc = 0; loc < cfg.locations; ++loc) {
                const std::string name = location_name(cfg, loc);
                const DayCell& c = day_cells[static_cast<std::size_t>(loc)][static_cast<std::size_t>(k)];
                const int up1 = c.up / 2, up2 = c.up - c.up / 2;
                const int down1 = c.down / 2, down2 = c.down - c.down / 2;
                emit(ts, name + "_up", 1, "general", up1, c.up_speed, c.up_occ);
                emit(ts, name + "_up", 2, "general", up2, c.up_speed, c.up_occ);
                emit(ts, name + "_up", 3, "hov", c.hov, cfg.fd.free_flow_speed_mph, c.up_occ * 0.3);
                emit(ts, name + "_down", 1, "general", down1, c.down_speed, c.down_occ);
                emit(ts, name + "_down", 2, "general", down2, c.down_speed, c.down_occ);
                emit(ts, name + "_down", 3, "hov", c.hov, cfg.fd.free_flow_speed_mph, c.down_occ * 0.3);
                emit(ts, name + "_on", 1, "general", c.on, c.ramp_speed, c.on_occ);
                emit(ts, name + "_off", 1, "general", c.off, c.ramp_speed, c.off_occ);
            }
        }
        for (int loc = 0; loc < cfg.locations; ++loc)
            for (auto& row : day_truth[static_cast<std::size_t>(loc)]) result.truth.push_back(std::move(row));
    }
    raw.close();

    // Truth rows ordered by (location, interval_start) like the datasets.
    std::stable_sort(result.truth.begin(), result.truth.end(), [](const TruthRow& x, const TruthRow& y) {
        if (x.location_id != y.location_id) return x.location_id < y.location_id;
        return x.interval_start < y.interval_start;
    });
    return result;
}

inline void write_truth_csv(const std::string& path, std::span<const TruthRow> rows) {
    LineWriter w(path);
    w.write("location_id,interval_start,on_flow,off_flow");
    for (const auto& r : rows)
        w.write(r.location_id + "," + std::to_string(r.interval_start) + "," + format_double(r.on_flow) +
                "," + format_double(r.off_flow));
}

inline std::vector<TruthRow> read_truth_csv(const std::string& path) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line)) throw ParseError("empty truth table " + path, 1);
    if (line != "location_id,interval_start,on_flow,off_flow")
        throw ParseError("unexpected truth header in " + path, 1);
    std::vector<TruthRow> rows;
    std::size_t line_no = 1;
    while (reader.next(line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_row(line);
        if (cells.size() != 4) throw ParseError("wrong column count in truth table", line_no);
        TruthRow r;
        r.location_id = cells[0];
        r.interval_start = parse_int_field(cells[1], line_no, "interval_start");
        r.on_flow = parse_double_field(cells[2], line_no, "on_flow");
        r.off_flow = parse_double_field(cells[3], line_no, "off_flow");
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace rampflow::synth
