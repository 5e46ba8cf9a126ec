#pragma once

#include <span>
#include <string>
#include <vector>

#include "rampflow/csv.hpp"
#include "rampflow/stats.hpp"

namespace rampflow::dataset {

using FeatureTable = std::vector<stats::FeatureVector>;

inline std::string feature_csv_header() {
    std::string h = "location_id,interval_start";
    for (const auto& name : stats::feature_names()) h += "," + name;
    h += ",on_flow,off_flow";
    return h;
}

inline void write_feature_csv(const std::string& path, std::span<const stats::FeatureVector> rows) {
    LineWriter w(path);
    w.write(feature_csv_header());
    std::string line;
    for (const auto& r : rows) {
        line = r.location_id + "," + std::to_string(r.interval_start);
        for (double v : r.features) {
            line += ',';
            line += format_double(v);
        }
        line += ',';
        if (r.on_flow) line += format_double(*r.on_flow);
        line += ',';
        if (r.off_flow) line += format_double(*r.off_flow);
        w.write(line);
    }
}

inline FeatureTable read_feature_csv(const std::string& path) {
    LineReader reader(path);
    std::string line;
    if (!reader.next(line)) throw ParseError("empty feature table " + path, 1);
    if (line != feature_csv_header()) throw ParseError("unexpected feature table header in " + path, 1);
    FeatureTable rows;
    std::size_t line_no = 1;
    while (reader.next(line)) {
        ++line_no;
        if (line.empty()) continue;
        auto cells = split_csv_row(line);
        if (cells.size() != 2 + stats::kFeatureCount + 2)
            throw ParseError("wrong column count in feature table", line_no);
        stats::FeatureVector fv;
        fv.location_id = cells[0];
        fv.interval_start = parse_int_field(cells[1], line_no, "interval_start");
        for (std::size_t i = 0; i < stats::kFeatureCount; ++i)
            fv.features[i] = parse_double_field(cells[2 + i], line_no, "feature");
        const auto& on = cells[2 + stats::kFeatureCount];
        const auto& off = cells[3 + stats::kFeatureCount];
        if (!on.empty()) fv.on_flow = parse_double_field(on, line_no, "on_flow");
        if (!off.empty()) fv.off_flow = parse_double_field(off, line_no, "off_flow");
        rows.push_back(std::move(fv));
    }
    return rows;
}

inline std::vector<std::string> location_ids(const FeatureTable& table) {
    std::vector<std::string> ids;
    for (const auto& r : table)
        if (ids.empty() || ids.back() != r.location_id) {
            bool seen = false;
            for (const auto& id : ids)
                if (id == r.location_id) seen = true;
            if (!seen) ids.push_back(r.location_id);
        }
    return ids;
}

inline FeatureTable rows_for_location(const FeatureTable& table, const std::string& location_id) {
    FeatureTable out;
    for (const auto& r : table)
        if (r.location_id == location_id) out.push_back(r);
    return out;
}

}  // namespace rampflow::dataset
