#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "rampflow/ingest.hpp"

using namespace rampflow;
using Catch::Approx;

namespace {

ingest::CorridorSpec tiny_spec(bool with_ramps = true) {
    ingest::LocationSpec loc;
    loc.location_id = "L1";
    loc.upstream = {"u1"};
    loc.downstream = {"d1"};
    if (with_ramps) {
        loc.on_ramp = {"o1"};
        loc.off_ramp = {"f1"};
    }
    ingest::CorridorSpec spec;
    spec.corridor_id = "C";
    spec.locations = {loc};
    return spec;
}

const char* kHeader = "timestamp,detector_id,lane_id,lane_type,volume,speed,occupancy\n";

}  // namespace

TEST_CASE("parse_raw_records keeps general lanes and drops HOV") {
    std::istringstream in(std::string(kHeader) +
                          "1564531200,u1,1,general,5,62.0,8.5\n"
                          "1564531200,u1,2,hov,9,70.0,3.0\n"
                          "1564531220,u1,1,general,6,61.0,9.0\n");
    const auto records = ingest::parse_raw_records(in, tiny_spec());
    REQUIRE(records.count("u1") == 1);
    const auto& recs = records.at("u1");
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].timestamp == 1564531200);
    CHECK(recs[0].lane_id == 1);
    CHECK(recs[0].volume == 5);
    CHECK(recs[0].speed == 62.0);
    CHECK(recs[0].occupancy == 8.5);
    CHECK(recs[1].timestamp == 1564531220);
}

TEST_CASE("parse_raw_records rejects malformed and out-of-range rows") {
    const auto spec = tiny_spec();
    {
        std::istringstream in(std::string(kHeader) + "1564531200,u1,1,general,5,62.0\n");
        try {
            ingest::parse_raw_records(in, spec);
            FAIL("expected parse error");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
    }
    {
        std::istringstream in(std::string(kHeader) + "1564531200,u1,1,general,-1,62.0,8.5\n");
        CHECK_THROWS_AS(ingest::parse_raw_records(in, spec), ingest::RangeError);
    }
    {
        std::istringstream in(std::string(kHeader) + "1564531200,u1,1,general,5,62.0,150.0\n");
        CHECK_THROWS_AS(ingest::parse_raw_records(in, spec), ingest::RangeError);
    }
    {
        std::istringstream in(std::string(kHeader) + "1564531207,u1,1,general,5,62.0,8.5\n");
        CHECK_THROWS_AS(ingest::parse_raw_records(in, spec), ingest::RangeError);
    }
}

TEST_CASE("combine_lanes_per_tick volume-weights speed and occupancy") {
    std::vector<ingest::RawRecord> lanes(2);
    lanes[0].timestamp = lanes[1].timestamp = 1000;
    lanes[0].volume = 10;
    lanes[0].speed = 60.0;
    lanes[1].volume = 5;
    lanes[1].speed = 30.0;
    const auto tick = ingest::combine_lanes_per_tick(lanes);
    CHECK(tick.volume == 15);
    CHECK(*tick.speed == Approx(50.0));

    std::vector<ingest::RawRecord> one(1);
    one[0].timestamp = 1000;
    one[0].volume = 7;
    one[0].speed = 55.0;
    one[0].occupancy = 10.0;
    const auto single = ingest::combine_lanes_per_tick(one);
    CHECK(single.volume == 7);
    CHECK(*single.speed == 55.0);
    CHECK(*single.occupancy == 10.0);

    std::vector<ingest::RawRecord> empty_lanes(2);
    empty_lanes[0].timestamp = empty_lanes[1].timestamp = 1000;
    const auto zero = ingest::combine_lanes_per_tick(empty_lanes);
    CHECK(zero.volume == 0);
    CHECK_FALSE(zero.speed.has_value());
    CHECK_FALSE(zero.occupancy.has_value());

    CHECK_THROWS_AS(ingest::combine_lanes_per_tick(std::vector<ingest::RawRecord>{}), Error);
}

TEST_CASE("combine_lanes conserves volume and bounds weighted speed") {
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> q(0, 30);
    std::uniform_real_distribution<double> sp(10.0, 80.0);
    for (int rep = 0; rep < 100; ++rep) {
        std::vector<ingest::RawRecord> lanes(3);
        long long sum = 0;
        double lo = 1e9, hi = -1e9;
        for (auto& l : lanes) {
            l.timestamp = 0;
            l.volume = q(rng);
            l.speed = sp(rng);
            sum += l.volume;
            if (l.volume > 0) {
                lo = std::min(lo, l.speed);
                hi = std::max(hi, l.speed);
            }
        }
        const auto tick = ingest::combine_lanes_per_tick(lanes);
        CHECK(tick.volume == sum);
        if (sum > 0) {
            CHECK(*tick.speed >= lo - 1e-12);
            CHECK(*tick.speed <= hi + 1e-12);
        }
    }
}

namespace {

std::vector<ingest::SegmentTick> make_ticks(std::int64_t start, int count, int volume,
                                            int missing_speed_from = -1) {
    std::vector<ingest::SegmentTick> ticks(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        ticks[static_cast<std::size_t>(i)].timestamp = start + 20LL * i;
        ticks[static_cast<std::size_t>(i)].volume = volume;
        if (missing_speed_from < 0 || i < missing_speed_from) {
            ticks[static_cast<std::size_t>(i)].speed = 60.0;
            ticks[static_cast<std::size_t>(i)].occupancy = 8.0;
        }
    }
    return ticks;
}

}  // namespace

TEST_CASE("aggregate_to_intervals applies the completeness and speed rules") {
    const auto full = ingest::aggregate_to_intervals(make_ticks(0, 45, 10), ingest::SegmentRole::upstream);
    REQUIRE(full.valid.size() == 1);
    CHECK(full.invalid.empty());
    CHECK(full.valid[0].flow_rate_veh_h() == Approx(1800.0));

    const auto short_one =
        ingest::aggregate_to_intervals(make_ticks(0, 44, 10), ingest::SegmentRole::upstream);
    CHECK(short_one.valid.empty());
    REQUIRE(short_one.invalid.size() == 1);
    CHECK(short_one.invalid[0].reason == "upstream_incomplete");

    // 10 missing-speed ticks: invalid on the mainline.
    const auto sparse =
        ingest::aggregate_to_intervals(make_ticks(0, 45, 10, 35), ingest::SegmentRole::upstream);
    CHECK(sparse.valid.empty());
    REQUIRE(sparse.invalid.size() == 1);
    CHECK(sparse.invalid[0].reason == "upstream_speed_coverage");

    // 9 missing is still acceptable.
    const auto edge =
        ingest::aggregate_to_intervals(make_ticks(0, 45, 10, 36), ingest::SegmentRole::upstream);
    CHECK(edge.valid.size() == 1);

    // Ramp segments only contribute volume, so the speed rule does not apply.
    const auto ramp =
        ingest::aggregate_to_intervals(make_ticks(0, 45, 1, 0), ingest::SegmentRole::on_ramp);
    CHECK(ramp.valid.size() == 1);
}

namespace {

std::string corridor_csv(bool drop_one_upstream_interval, bool with_ramps = true) {
    std::string csv = kHeader;
    // Two full intervals for every role; optionally remove one upstream tick
    // so the first interval misaligns.
    for (int i = 0; i < 90; ++i) {
        const std::int64_t ts = 1564902000 + 20LL * i;
        if (!(drop_one_upstream_interval && i == 3))
            csv += std::to_string(ts) + ",u1,1,general,10,60.0,8.0\n";
        csv += std::to_string(ts) + ",d1,1,general,12,58.0,9.0\n";
        if (with_ramps) {
            csv += std::to_string(ts) + ",o1,1,general,2,30.0,4.0\n";
            csv += std::to_string(ts) + ",f1,1,general,1,32.0,3.0\n";
        }
    }
    return csv;
}

}  // namespace

TEST_CASE("build_dataset intersects valid intervals and attaches labels") {
    const auto spec = tiny_spec();
    std::istringstream in(corridor_csv(false));
    const auto records = ingest::parse_raw_records(in, spec);
    const auto ds = ingest::build_dataset(records, spec, -25200);
    REQUIRE(ds.rows.size() == 2);
    CHECK(ds.rows[0].location_id == "L1");
    CHECK(ds.rows[0].interval_start == 1564902000);
    CHECK(*ds.rows[0].on_flow == Approx(4.0 * 45 * 2));
    CHECK(*ds.rows[0].off_flow == Approx(4.0 * 45 * 1));
    CHECK(ds.rows[0].features[0] == Approx(4.0 * 45 * 10));
    CHECK(ds.rows[0].features[15] == Approx(4.0 * 45 * 12));
}

TEST_CASE("build_dataset drops misaligned intervals and reports them") {
    const auto spec = tiny_spec();
    std::istringstream in(corridor_csv(true));
    const auto records = ingest::parse_raw_records(in, spec);
    const auto ds = ingest::build_dataset(records, spec, -25200);
    REQUIRE(ds.rows.size() == 1);
    CHECK(ds.rows[0].interval_start == 1564902900);
    bool reported = false;
    for (const auto& v : ds.validity)
        if (v.reason == "upstream_incomplete" && v.interval_start == 1564902000) reported = true;
    CHECK(reported);
}

TEST_CASE("build_dataset leaves labels absent without ramp detectors") {
    const auto spec = tiny_spec(false);
    std::istringstream in(corridor_csv(false, false));
    const auto records = ingest::parse_raw_records(in, spec);
    const auto ds = ingest::build_dataset(records, spec, -25200);
    REQUIRE(ds.rows.size() == 2);
    CHECK_FALSE(ds.rows[0].on_flow.has_value());
    CHECK_FALSE(ds.rows[0].off_flow.has_value());
}

TEST_CASE("build_dataset errors when a location never aligns") {
    const auto spec = tiny_spec();
    std::string csv = kHeader;
    for (int i = 0; i < 45; ++i)
        csv += std::to_string(1564902000 + 20LL * i) + ",u1,1,general,10,60.0,8.0\n";
    for (int i = 0; i < 45; ++i)
        csv += std::to_string(1564902900 + 20LL * i) + ",d1,1,general,10,60.0,8.0\n";
    std::istringstream in(csv);
    const auto records = ingest::parse_raw_records(in, spec);
    try {
        ingest::build_dataset(records, spec, -25200);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("L1") != std::string::npos);
    }
}

TEST_CASE("ingestion is deterministic over reruns") {
    const auto spec = tiny_spec();
    std::istringstream in1(corridor_csv(false)), in2(corridor_csv(false));
    const auto ds1 = ingest::build_dataset(ingest::parse_raw_records(in1, spec), spec, -25200);
    const auto ds2 = ingest::build_dataset(ingest::parse_raw_records(in2, spec), spec, -25200);
    REQUIRE(ds1.rows.size() == ds2.rows.size());
    for (std::size_t i = 0; i < ds1.rows.size(); ++i)
        CHECK(ds1.rows[i].features == ds2.rows[i].features);
}
