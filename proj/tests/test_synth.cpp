#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "rampflow/ingest.hpp"
#include "rampflow/synth.hpp"

using namespace rampflow;
using Catch::Approx;
namespace fs = std::filesystem;

namespace {

std::string temp_dir() {
    static int counter = 0;
    const auto dir = fs::temp_directory_path() / ("rampflow_synth_" + std::to_string(counter++));
    fs::create_directories(dir);
    return dir.string();
}

std::string file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// Interval flows per (location, role) recomputed from the raw file.
std::map<std::pair<std::string, std::int64_t>, std::array<double, 4>> interval_flows(
    const std::string& raw_path, const ingest::CorridorSpec& spec) {
    const auto records = ingest::parse_raw_records(raw_path, spec);
    std::map<std::pair<std::string, std::int64_t>, std::array<double, 4>> flows;
    for (std::size_t li = 0; li < spec.locations.size(); ++li) {
        const auto& loc = spec.locations[li];
        int role_idx = 0;
        for (auto role : {ingest::SegmentRole::upstream, ingest::SegmentRole::downstream,
                          ingest::SegmentRole::on_ramp, ingest::SegmentRole::off_ramp}) {
            const auto ticks = ingest::build_segment_ticks(records, spec.detectors(li, role));
            const auto agg = ingest::aggregate_to_intervals(ticks, role);
            for (const auto& iv : agg.valid)
                flows[{loc.location_id, iv.interval_start}][static_cast<std::size_t>(role_idx)] =
                    iv.flow_rate_veh_h();
            ++role_idx;
        }
    }
    return flows;
}

}  // namespace

TEST_CASE("noise-free corridors conserve flow exactly at every interval") {
    auto cfg = synth::default_config("CONS", 5);
    cfg.days = 7;
    cfg.locations = 2;
    cfg.on_fractions = {0.12, 0.15};
    cfg.off_fractions = {0.10, 0.09};
    cfg.noise_std = 0.0;
    const auto dir = temp_dir();
    const auto raw = dir + "/raw.csv.gz";
    const auto result = synth::generate_corridor(cfg, raw);

    const auto flows = interval_flows(raw, result.corridor);
    REQUIRE(flows.size() == static_cast<std::size_t>(7 * 96 * 2));
    for (const auto& [key, f] : flows) {
        const double up = f[0], down = f[1], on = f[2], off = f[3];
        CHECK(down == up + on - off);
    }
}

TEST_CASE("generation is byte-identical for the same seed") {
    auto cfg = synth::default_config("DET", 11);
    cfg.days = 2;
    cfg.locations = 2;
    cfg.on_fractions = {0.12, 0.15};
    cfg.off_fractions = {0.10, 0.09};
    const auto dir = temp_dir();
    synth::generate_corridor(cfg, dir + "/a.csv");
    synth::generate_corridor(cfg, dir + "/b.csv");
    CHECK(file_bytes(dir + "/a.csv") == file_bytes(dir + "/b.csv"));

    auto other = cfg;
    other.seed = 12;
    synth::generate_corridor(other, dir + "/c.csv");
    CHECK(file_bytes(dir + "/a.csv") != file_bytes(dir + "/c.csv"));
}

TEST_CASE("demand scaling lifts the mean daily flow proportionally") {
    auto src_cfg = synth::default_config("S", 21);
    src_cfg.days = 7;
    src_cfg.locations = 1;
    src_cfg.on_fractions = {0.12};
    src_cfg.off_fractions = {0.10};
    src_cfg.daily_demand_jitter = 0.0;

    auto tgt_cfg = src_cfg;
    tgt_cfg.corridor_id = "T";
    tgt_cfg.seed = 22;  // independent seed
    tgt_cfg.domain_shift.demand_scale = 1.25;
    tgt_cfg.domain_shift.peak_shift_hours = 1.0;

    const auto dir = temp_dir();
    const auto src = synth::generate_corridor(src_cfg, dir + "/src.csv.gz");
    const auto tgt = synth::generate_corridor(tgt_cfg, dir + "/tgt.csv.gz");

    auto mean_up = [&](const std::string& path, const ingest::CorridorSpec& spec) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& [key, f] : interval_flows(path, spec)) {
            sum += f[0];
            ++count;
        }
        return sum / static_cast<double>(count);
    };
    const double ratio =
        mean_up(dir + "/tgt.csv.gz", tgt.corridor) / mean_up(dir + "/src.csv.gz", src.corridor);
    CHECK(ratio == Approx(1.25).epsilon(0.02));
}

TEST_CASE("generated values respect the physical bounds") {
    auto cfg = synth::default_config("B", 31);
    cfg.days = 1;
    cfg.locations = 1;
    cfg.on_fractions = {0.12};
    cfg.off_fractions = {0.10};
    const auto dir = temp_dir();
    const auto result = synth::generate_corridor(cfg, dir + "/raw.csv");

    LineReader reader(dir + "/raw.csv");
    std::string line;
    REQUIRE(reader.next(line));  // header
    std::size_t rows = 0;
    while (reader.next(line)) {
        const auto cells = split_csv_row(line);
        REQUIRE(cells.size() == 7);
        const double volume = std::stod(cells[4]);
        const double speed = std::stod(cells[5]);
        const double occ = std::stod(cells[6]);
        CHECK(volume >= 0.0);
        CHECK(speed > 0.0);
        CHECK(speed <= cfg.fd.free_flow_speed_mph);
        CHECK(occ >= 0.0);
        CHECK(occ <= 100.0);
        ++rows;
    }
    CHECK(rows == static_cast<std::size_t>(4320 * 8));  // 8 lanes per location
}

TEST_CASE("truth table agrees with the aggregated ramp detectors") {
    auto cfg = synth::default_config("TR", 41);
    cfg.days = 2;
    cfg.locations = 2;
    cfg.on_fractions = {0.12, 0.15};
    cfg.off_fractions = {0.10, 0.09};
    const auto dir = temp_dir();
    const auto raw = dir + "/raw.csv.gz";
    const auto result = synth::generate_corridor(cfg, raw);
    const auto flows = interval_flows(raw, result.corridor);
    REQUIRE(result.truth.size() == flows.size());
    for (const auto& row : result.truth) {
        const auto& f = flows.at({row.location_id, row.interval_start});
        CHECK(row.on_flow == f[2]);
        CHECK(row.off_flow == f[3]);
    }
}

TEST_CASE("moderate noise still yields zero invalid intervals end to end") {
    auto cfg = synth::default_config("RT", 51);
    cfg.days = 2;
    cfg.locations = 2;
    cfg.on_fractions = {0.12, 0.15};
    cfg.off_fractions = {0.10, 0.09};
    cfg.noise_std = 1.0;
    const auto dir = temp_dir();
    const auto raw = dir + "/raw.csv.gz";
    const auto result = synth::generate_corridor(cfg, raw);
    const auto records = ingest::parse_raw_records(raw, result.corridor);
    const auto ds = ingest::build_dataset(records, result.corridor, cfg.utc_offset_seconds);
    CHECK(ds.validity.empty());
    CHECK(ds.rows.size() == static_cast<std::size_t>(2 * 96 * 2));
    for (const auto& row : ds.rows) {
        REQUIRE(row.on_flow.has_value());
        REQUIRE(row.off_flow.has_value());
    }
}

TEST_CASE("conservation residual stays within the noise budget") {
    auto cfg = synth::default_config("NB", 61);
    cfg.days = 4;
    cfg.locations = 1;
    cfg.on_fractions = {0.12};
    cfg.off_fractions = {0.10};
    cfg.noise_std = 1.0;
    const auto dir = temp_dir();
    const auto raw = dir + "/raw.csv.gz";
    const auto result = synth::generate_corridor(cfg, raw);
    const auto flows = interval_flows(raw, result.corridor);
    const double budget = 6.0 * cfg.noise_std * std::sqrt(45.0) * 4.0;
    std::size_t within = 0, total = 0;
    for (const auto& [key, f] : flows) {
        const double resid = std::abs(f[1] - (f[0] + f[2] - f[3]));
        if (resid <= budget) ++within;
        ++total;
    }
    CHECK(static_cast<double>(within) >= 0.99 * static_cast<double>(total));
}
