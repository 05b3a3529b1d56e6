#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "errors.hpp"
#include "helpers.hpp"
#include "protocol.hpp"

using namespace ioncalib;

TEST_CASE("steps document loads with summed duration") {
    const VoltageProtocol p = parse_protocol_csv("duration_ms,voltage_mV\n1000,-80\n500,40\n", "test");
    CHECK(p.kind() == VoltageProtocol::Kind::Steps);
    CHECK(p.total_duration_ms() == doctest::Approx(1500.0));
}

TEST_CASE("sampled document with 10001 samples at dt=0.1 spans 1000 ms") {
    std::string text = "time_ms,voltage_mV\n";
    char buf[64];
    for (int i = 0; i <= 10000; ++i) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", 0.1 * i, -80.0 + 0.01 * i);
        text += buf;
    }
    const VoltageProtocol p = parse_protocol_csv(text, "test");
    CHECK(p.kind() == VoltageProtocol::Kind::Sampled);
    CHECK(p.total_duration_ms() == doctest::Approx(1000.0));
}

TEST_CASE("zero-duration steps are rejected") {
    CHECK_THROWS_AS(parse_protocol_csv("duration_ms,voltage_mV\n0,-80\n", "test"), ValidationError);
}

TEST_CASE("malformed rows report the line number") {
    try {
        parse_protocol_csv("duration_ms,voltage_mV\n100,-80\nnope,40\n", "proto.csv");
        FAIL("expected parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("proto.csv:3") != std::string::npos);
    }
}

TEST_CASE("non-monotone sampled time column is rejected") {
    CHECK_THROWS_AS(parse_protocol_csv("time_ms,voltage_mV\n0,-80\n2,-80\n1,-80\n", "test"), ValidationError);
}

TEST_CASE("step boundaries are left-closed") {
    const VoltageProtocol p = VoltageProtocol::from_steps({{1000.0, -80.0}, {500.0, 40.0}});
    CHECK(p.voltage_at(999.999) == doctest::Approx(-80.0));
    CHECK(p.voltage_at(1000.0) == doctest::Approx(40.0));
    CHECK(p.voltage_at(0.0) == doctest::Approx(-80.0));
    CHECK(p.voltage_at(1500.0) == doctest::Approx(40.0));
    CHECK_THROWS_AS(p.voltage_at(1500.1), ContractError);
    CHECK_THROWS_AS(p.voltage_at(-0.1), ContractError);
}

TEST_CASE("sampled protocols hold the previous sample") {
    const VoltageProtocol p = VoltageProtocol::from_samples(1.0, {0.0, 10.0, 20.0});
    CHECK(p.voltage_at(1.5) == doctest::Approx(10.0));
    CHECK(p.voltage_at(0.0) == doctest::Approx(0.0));
    CHECK(p.voltage_at(2.0) == doctest::Approx(20.0));
}

TEST_CASE("segment boundaries include 0 and the end") {
    const VoltageProtocol steps = VoltageProtocol::from_steps({{1000.0, -80.0}, {500.0, 40.0}});
    CHECK(steps.segment_boundaries() == std::vector<double>{0.0, 1000.0, 1500.0});

    const VoltageProtocol sampled = VoltageProtocol::from_samples(1.0, {0.0, 10.0, 20.0});
    CHECK(sampled.segment_boundaries() == std::vector<double>{0.0, 1.0, 2.0});

    const VoltageProtocol single = VoltageProtocol::from_steps({{250.0, -80.0}});
    CHECK(single.segment_boundaries() == std::vector<double>{0.0, 250.0});
}

TEST_CASE("voltage is constant between consecutive boundaries") {
    const VoltageProtocol p = VoltageProtocol::from_steps({{100.0, -80.0}, {50.0, 40.0}, {25.0, -120.0}});
    const auto bounds = p.segment_boundaries();
    for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
        const double left = p.voltage_at(bounds[i]);
        for (double frac : {0.1, 0.5, 0.9})
            CHECK(p.voltage_at(bounds[i] + frac * (bounds[i + 1] - bounds[i])) == doctest::Approx(left));
    }
}

TEST_CASE("write then load reproduces voltages exactly") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ioncalib_protocol_roundtrip";
    fs::create_directories(dir);

    const VoltageProtocol steps = VoltageProtocol::from_steps({{123.25, -81.5}, {456.5, 39.875}});
    const std::string steps_path = (dir / "steps.csv").string();
    save_protocol(steps, steps_path);
    const VoltageProtocol steps2 = load_protocol(steps_path);
    for (double t : {0.0, 100.0, 123.25, 400.0, 579.75})
        CHECK(steps2.voltage_at(t) == steps.voltage_at(t));

    const VoltageProtocol sampled = VoltageProtocol::from_samples(0.25, {-80.0, -40.125, 0.0625, 40.0});
    const std::string sampled_path = (dir / "sampled.csv").string();
    save_protocol(sampled, sampled_path);
    const VoltageProtocol sampled2 = load_protocol(sampled_path);
    for (double t : {0.0, 0.25, 0.5, 0.75, 0.3, 0.6})
        CHECK(sampled2.voltage_at(t) == sampled.voltage_at(t));
}

TEST_CASE("missing protocol file is an io error") {
    CHECK_THROWS_AS(load_protocol("/nonexistent/protocol.csv"), IoError);
}
