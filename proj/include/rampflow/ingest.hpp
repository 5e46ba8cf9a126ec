#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "rampflow/csv.hpp"
#include "rampflow/stats.hpp"

namespace rampflow::ingest {

class RangeError : public ParseError {
public:
    RangeError(const std::string& what, std::size_t line) : ParseError(what, line) {}
};

enum class LaneType { general, hov };

enum class SegmentRole { upstream, downstream, on_ramp, off_ramp };

inline const char* role_name(SegmentRole r) {
    switch (r) {
        case SegmentRole::upstream: return "upstream";
        case SegmentRole::downstream: return "downstream";
        case SegmentRole::on_ramp: return "on_ramp";
        case SegmentRole::off_ramp: return "off_ramp";
    }
    return "?";
}

// One 20-second per-lane loop detector observation.
struct RawRecord {
    std::int64_t timestamp = 0;
    std::string detector_id;
    int lane_id = 0;
    LaneType lane_type = LaneType::general;
    int volume = 0;       // veh per 20 s
    double speed = 0.0;   // mph
    double occupancy = 0.0;  // percent
};

// Lane-combined 20-second observation for one segment. Speed and occupancy
// are volume-weighted and missing when the tick carried no vehicles.
struct SegmentTick {
    std::int64_t timestamp = 0;
    int volume = 0;
    std::optional<double> speed;
    std::optional<double> occupancy;
};

constexpr int kTicksPerInterval = 45;
constexpr int kIntervalSeconds = 900;
constexpr int kTickSeconds = 20;
constexpr int kMaxMissingSpeedTicks = 9;

struct IntervalSeries {
    std::int64_t interval_start = 0;
    SegmentRole role = SegmentRole::upstream;
    std::vector<SegmentTick> ticks;  // exactly 45, consecutive, 20 s apart

    double flow_rate_veh_h() const {
        long long sum = 0;
        for (const auto& t : ticks) sum += t.volume;
        return 4.0 * static_cast<double>(sum);
    }
};

struct LocationSpec {
    std::string location_id;
    std::vector<std::string> upstream;
    std::vector<std::string> downstream;
    std::vector<std::string> on_ramp;   // may be empty
    std::vector<std::string> off_ramp;  // may be empty
};

struct CorridorSpec {
    std::string corridor_id;
    std::vector<LocationSpec> locations;

    const std::vector<std::string>& detectors(std::size_t loc, SegmentRole role) const {
        const auto& l = locations[loc];
        switch (role) {
            case SegmentRole::upstream: return l.upstream;
            case SegmentRole::downstream: return l.downstream;
            case SegmentRole::on_ramp: return l.on_ramp;
            case SegmentRole::off_ramp: return l.off_ramp;
        }
        return l.upstream;
    }
};

inline CorridorSpec corridor_spec_from_json(const nlohmann::json& j) {
    CorridorSpec spec;
    spec.corridor_id = j.at("corridor_id").get<std::string>();
    for (const auto& jl : j.at("locations")) {
        LocationSpec loc;
        loc.location_id = jl.at("location_id").get<std::string>();
        auto ids = [&](const char* key) {
            std::vector<std::string> out;
            if (jl.contains(key))
                for (const auto& v : jl.at(key)) out.push_back(v.get<std::string>());
            return out;
        };
        loc.upstream = ids("upstream");
        loc.downstream = ids("downstream");
        loc.on_ramp = ids("on_ramp");
        loc.off_ramp = ids("off_ramp");
        if (loc.upstream.empty() || loc.downstream.empty())
            throw Error("location " + loc.location_id + " needs upstream and downstream detectors");
        for (const auto* role : {&loc.upstream, &loc.downstream, &loc.on_ramp, &loc.off_ramp}) {
            std::unordered_set<std::string> seen(role->begin(), role->end());
            if (seen.size() != role->size())
                throw Error("duplicate detector id within a role at location " + loc.location_id);
        }
        spec.locations.push_back(std::move(loc));
    }
    return spec;
}

inline nlohmann::json corridor_spec_to_json(const CorridorSpec& spec) {
    nlohmann::json j;
    j["corridor_id"] = spec.corridor_id;
    j["locations"] = nlohmann::json::array();
    for (const auto& loc : spec.locations) {
        nlohmann::json jl;
        jl["location_id"] = loc.location_id;
        jl["upstream"] = loc.upstream;
        jl["downstream"] = loc.downstream;
        jl["on_ramp"] = loc.on_ramp;
        jl["off_ramp"] = loc.off_ramp;
        j["locations"].push_back(std::move(jl));
    }
    return j;
}

inline CorridorSpec load_corridor_spec(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error("cannot open corridor spec " + path);
    nlohmann::json j;
    f >> j;
    return corridor_spec_from_json(j);
}

using RecordsByDetector = std::unordered_map<std::string, std::vector<RawRecord>>;

namespace detail {

inline const std::string kRawHeader = "timestamp,detector_id,lane_id,lane_type,volume,speed,occupancy";

template <typename NextLine>
RecordsByDetector parse_raw_records_impl(NextLine&& next_line, const CorridorSpec& spec) {
    std::unordered_set<std::string> wanted;
    for (std::size_t i = 0; i < spec.locations.size(); ++i)
        for (auto role : {SegmentRole::upstream, SegmentRole::downstream, SegmentRole::on_ramp,
                          SegmentRole::off_ramp})
            for (const auto& id : spec.detectors(i, role)) wanted.insert(id);

    RecordsByDetector out;
    std::string line;
    std::size_t line_no = 0;
    if (!next_line(line)) throw ParseError("empty input", 1);
    ++line_no;
    if (line != kRawHeader) throw ParseError("unexpected header '" + line + "'", 1);

    while (next_line(line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_row(line);
        if (cells.size() != 7) throw ParseError("expected 7 fields, got " + std::to_string(cells.size()), line_no);
        RawRecord rec;
        rec.timestamp = parse_int_field(cells[0], line_no, "timestamp");
        rec.detector_id = cells[1];
        rec.lane_id = static_cast<int>(parse_int_field(cells[2], line_no, "lane_id"));
        if (cells[3] == "general")
            rec.lane_type = LaneType::general;
        else if (cells[3] == "hov")
            rec.lane_type = LaneType::hov;
        else
            throw ParseError("unknown lane_type '" + cells[3] + "'", line_no);
        rec.volume = static_cast<int>(parse_int_field(cells[4], line_no, "volume"));
        rec.speed = parse_double_field(cells[5], line_no, "speed");
        rec.occupancy = parse_double_field(cells[6], line_no, "occupancy");

        if (rec.timestamp % kTickSeconds != 0)
            throw RangeError("timestamp not aligned to 20 s grid", line_no);
        if (rec.volume < 0) throw RangeError("negative volume", line_no);
        if (rec.speed < 0.0) throw RangeError("negative speed", line_no);
        if (rec.occupancy < 0.0 || rec.occupancy > 100.0)
            throw RangeError("occupancy outside [0,100]", line_no);

        if (rec.lane_type == LaneType::hov) continue;  // HOV lanes are excluded
        if (!wanted.count(rec.detector_id)) continue;
        out[rec.detector_id].push_back(std::move(rec));
    }
    for (auto& [id, recs] : out)
        std::stable_sort(recs.begin(), recs.end(),
                         [](const RawRecord& a, const RawRecord& b) { return a.timestamp < b.timestamp; });
    return out;
}

}  // namespace detail

inline RecordsByDetector parse_raw_records(std::istream& in, const CorridorSpec& spec) {
    return detail::parse_raw_records_impl(
        [&in](std::string& line) {
            if (!std::getline(in, line)) return false;
            while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
            return true;
        },
        spec);
}

inline RecordsByDetector parse_raw_records(const std::string& path, const CorridorSpec& spec) {
    LineReader reader(path);
    return detail::parse_raw_records_impl([&reader](std::string& line) { return reader.next(line); }, spec);
}

// Volume-weighted lane combination for one timestamp of one segment.
inline SegmentTick combine_lanes_per_tick(std::span<const RawRecord> lanes) {
    if (lanes.empty()) throw Error("combine_lanes_per_tick: empty input");
    SegmentTick tick;
    tick.timestamp = lanes.front().timestamp;
    long long volume = 0;
    double speed_sum = 0.0;
    double occ_sum = 0.0;
    for (const auto& r : lanes) {
        if (r.timestamp != tick.timestamp) throw Error("combine_lanes_per_tick: mixed timestamps");
        volume += r.volume;
        speed_sum += r.speed * r.volume;
        occ_sum += r.occupancy * r.volume;
    }
    tick.volume = static_cast<int>(volume);
    if (volume > 0) {
        tick.speed = speed_sum / static_cast<double>(volume);
        tick.occupancy = occ_sum / static_cast<double>(volume);
    }
    return tick;
}

struct InvalidInterval {
    std::int64_t interval_start = 0;
    std::string reason;  // "<role>_incomplete" or "<role>_speed_coverage"
};

struct AggregationResult {
    std::vector<IntervalSeries> valid;
    std::vector<InvalidInterval> invalid;
};

// Groups segment ticks into 15-minute intervals of exactly 45 ticks.
// Incomplete intervals are invalid. Mainline intervals additionally need
// speed on at least 36 of the 45 ticks; ramp segments only contribute
// volume so the speed rule does not apply to them.
inline AggregationResult aggregate_to_intervals(std::span<const SegmentTick> ticks, SegmentRole role) {
    AggregationResult result;
    std::map<std::int64_t, std::vector<SegmentTick>> groups;
    for (const auto& t : ticks) {
        const std::int64_t start = t.timestamp - ((t.timestamp % kIntervalSeconds + kIntervalSeconds) % kIntervalSeconds);
        groups[start].push_back(t);
    }
    const bool mainline = role == SegmentRole::upstream || role == SegmentRole::downstream;
    for (auto& [start, group] : groups) {
        bool complete = group.size() == static_cast<std::size_t>(kTicksPerInterval);
        if (complete) {
            for (int k = 0; k < kTicksPerInterval; ++k)
                if (group[k].timestamp != start + static_cast<std::int64_t>(k) * kTickSeconds) {
                    complete = false;
                    break;
                }
        }
        if (!complete) {
            result.invalid.push_back({start, std::string(role_name(role)) + "_incomplete"});
            continue;
        }
        if (mainline) {
            int missing_speed = 0;
            for (const auto& t : group)
                if (!t.speed) ++missing_speed;
            if (missing_speed > kMaxMissingSpeedTicks) {
                result.invalid.push_back({start, std::string(role_name(role)) + "_speed_coverage"});
                continue;
            }
        }
        IntervalSeries series;
        series.interval_start = start;
        series.role = role;
        series.ticks = std::move(group);
        result.valid.push_back(std::move(series));
    }
    return result;
}

inline std::vector<SegmentTick> build_segment_ticks(const RecordsByDetector& records,
                                                    const std::vector<std::string>& detector_ids) {
    std::map<std::int64_t, std::vector<RawRecord>> by_time;
    for (const auto& id : detector_ids) {
        auto it = records.find(id);
        if (it == records.end()) continue;
        for (const auto& r : it->second) by_time[r.timestamp].push_back(r);
    }
    std::vector<SegmentTick> ticks;
    ticks.reserve(by_time.size());
    for (const auto& [ts, recs] : by_time) ticks.push_back(combine_lanes_per_tick(recs));
    return ticks;
}

struct ValidityEntry {
    std::string location_id;
    std::int64_t interval_start = 0;
    std::string reason;
};

struct Dataset {
    std::vector<stats::FeatureVector> rows;  // ordered by (location, interval_start)
    std::vector<ValidityEntry> validity;
};

inline stats::SegmentSeries to_segment_series(const IntervalSeries& interval) {
    stats::SegmentSeries s;
    s.volumes.reserve(interval.ticks.size());
    for (const auto& t : interval.ticks) {
        s.volumes.push_back(static_cast<double>(t.volume));
        if (t.speed) s.speeds.push_back(*t.speed);
        if (t.occupancy) s.occupancies.push_back(*t.occupancy);
    }
    s.flow_rate_veh_h = interval.flow_rate_veh_h();
    return s;
}

// Featurizes every interval where both mainline segments are valid. Ramp
// labels attach when the location has ramp detectors and the ramp interval
// is itself complete; otherwise the label stays absent.
inline Dataset build_dataset(const RecordsByDetector& records, const CorridorSpec& spec,
                             std::int64_t utc_offset_seconds) {
    Dataset ds;
    for (std::size_t li = 0; li < spec.locations.size(); ++li) {
        const auto& loc = spec.locations[li];
        std::map<std::int64_t, IntervalSeries> up_map, down_map, on_map, off_map;
        auto aggregate_role = [&](SegmentRole role, std::map<std::int64_t, IntervalSeries>& dst) {
            const auto& dets = spec.detectors(li, role);
            if (dets.empty()) return;
            auto ticks = build_segment_ticks(records, dets);
            auto agg = aggregate_to_intervals(ticks, role);
            for (auto& iv : agg.valid) dst.emplace(iv.interval_start, std::move(iv));
            for (const auto& bad : agg.invalid) ds.validity.push_back({loc.location_id, bad.interval_start, bad.reason});
        };
        aggregate_role(SegmentRole::upstream, up_map);
        aggregate_role(SegmentRole::downstream, down_map);
        aggregate_role(SegmentRole::on_ramp, on_map);
        aggregate_role(SegmentRole::off_ramp, off_map);

        std::size_t produced = 0;
        for (const auto& [start, up] : up_map) {
            auto dit = down_map.find(start);
            if (dit == down_map.end()) continue;
            std::optional<double> on, off;
            if (auto it = on_map.find(start); it != on_map.end()) on = it->second.flow_rate_veh_h();
            if (auto it = off_map.find(start); it != off_map.end()) off = it->second.flow_rate_veh_h();
            ds.rows.push_back(stats::featurize(loc.location_id, start, to_segment_series(up),
                                               to_segment_series(dit->second), utc_offset_seconds, on, off));
            ++produced;
        }
        if (produced == 0)
            throw Error("location " + loc.location_id + " has no aligned valid intervals");
    }
    return ds;
}

inline void write_validity_report(const std::string& path, std::span<const ValidityEntry> entries) {
    LineWriter w(path);
    w.write("location_id,interval_start,reason");
    for (const auto& e : entries)
        w.write(e.location_id + "," + std::to_string(e.interval_start) + "," + e.reason);
}

}  // namespace rampflow::ingest
