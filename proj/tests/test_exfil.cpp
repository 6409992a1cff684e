#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covertphys/exfil.hpp"

using namespace covertphys;
using namespace covertphys::exfil;

TEST_CASE("scheme 1 deflect-and-return schedule layout") {
    const double amp = deg2rad(5.0);
    auto s = encode_scheme1("10110110", amp, 1.0, "yaw");
    REQUIRE(s.entries.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
        const auto& e = s.entries[i];
        CHECK(e.t_start == doctest::Approx(static_cast<double>(i)));
        CHECK(e.t_end == doctest::Approx(static_cast<double>(i) + 0.5));
        CHECK(e.channel == "yaw");
        double sign = s.bits[i] == '1' ? 1.0 : -1.0;
        CHECK(e.offset == doctest::Approx(sign * amp));
    }
    // deflect half active, return half at reference
    CHECK(s.offset_at(0.25, "yaw") == doctest::Approx(amp));
    CHECK(s.offset_at(0.75, "yaw") == 0.0);
    CHECK(s.offset_at(1.25, "yaw") == doctest::Approx(-amp));
    CHECK(s.offset_at(0.25, "pitch") == 0.0);
    CHECK(s.active_at(0.25));
    CHECK_FALSE(s.active_at(0.75));
    CHECK(s.symbol_at(3.1) == 3);
    CHECK(s.symbol_at(100.0) == -1);
}

TEST_CASE("scheme 1 equal deflect/return time split") {
    auto s = encode_scheme1("1010111100", 0.1, 2.0, "yaw");
    double active = 0.0;
    for (const auto& e : s.entries) active += e.t_end - e.t_start;
    double span = static_cast<double>(s.bits.size()) / 2.0;
    CHECK(active == doctest::Approx(0.5 * span));
}

TEST_CASE("scheme 1 rejects periods shorter than two control steps") {
    CHECK_THROWS_AS(encode_scheme1("10", 0.1, 30.0, "yaw", 0.0, 0.02), InfeasibleError);
    CHECK_THROWS_AS(encode_scheme1("10", 0.0, 1.0, "yaw"), ConfigError);
    CHECK_THROWS_AS(encode_scheme1("10", 0.1, 0.0, "yaw"), ConfigError);
    CHECK_THROWS_AS(encode_scheme1("1x", 0.1, 1.0, "yaw"), ConfigError);
}

TEST_CASE("scheme 2 run-length segments for 10110110") {
    const double amp = deg2rad(5.0);
    auto s = encode_scheme2("10110110", amp, 0.75);
    // runs: 1, 0, 11, 0, 11, 0 -> six alternating segments
    REQUIRE(s.entries.size() == 6);
    const double durations[6] = {0.75, 0.75, 1.5, 0.75, 1.5, 0.75};
    double t = 0.0;
    for (int i = 0; i < 6; ++i) {
        const auto& e = s.entries[i];
        CHECK(e.t_start == doctest::Approx(t));
        CHECK(e.t_end - e.t_start == doctest::Approx(durations[i]));
        double sign = (i % 2 == 0) ? 1.0 : -1.0;
        CHECK(e.offset == doctest::Approx(sign * amp));
        t += durations[i];
    }
    CHECK(s.t_finish() == doctest::Approx(8 * 0.75));
}

TEST_CASE("schedule json round trip") {
    auto s = encode_scheme2("110010", 0.0873, 0.75, 2.0);
    auto j = s.to_json();
    auto back = PerturbationSchedule::from_json(j);
    CHECK(back.bits == s.bits);
    CHECK(back.scheme == s.scheme);
    REQUIRE(back.entries.size() == s.entries.size());
    for (std::size_t i = 0; i < s.entries.size(); ++i) {
        CHECK(back.entries[i].t_start == s.entries[i].t_start);
        CHECK(back.entries[i].t_end == s.entries[i].t_end);
        CHECK(back.entries[i].offset == s.entries[i].offset);
        CHECK(back.entries[i].channel == s.entries[i].channel);
    }
}

TEST_CASE("overlapping schedule entries are rejected") {
    PerturbationSchedule s;
    s.entries.push_back({0.0, 1.0, "yaw", 0.1});
    s.entries.push_back({0.5, 1.5, "yaw", -0.1});
    CHECK_THROWS_AS(s.check_invariants(), ConfigError);
    PerturbationSchedule rev;
    rev.entries.push_back({1.0, 0.5, "yaw", 0.1});
    CHECK_THROWS_AS(rev.check_invariants(), ConfigError);
}

TEST_CASE("trajectory encoding geometry") {
    Eigen::Vector2d start(0.0, 0.0), end(1.0, 0.0);
    const double quantum = 0.05;
    auto path = encode_trajectory("1010", start, end, quantum, 0.05);
    REQUIRE(path.waypoints.size() == 2 * 4 + 2);
    CHECK((path.waypoints.front() - start).norm() == 0.0);
    CHECK((path.waypoints.back() - end).norm() == 0.0);
    // deviated points sit one amplitude off the line in the bit's direction,
    // return points are back on the line
    double signed_sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        double dev = path.waypoints[1 + 2 * i].y();
        double sign = path.bits[i] == '1' ? 1.0 : -1.0;
        CHECK(dev == doctest::Approx(sign * quantum));
        CHECK(path.waypoints[2 + 2 * i].y() == doctest::Approx(0.0));
        signed_sum += dev;
    }
    CHECK(signed_sum == doctest::Approx(0.0));  // balanced bits -> zero mean
    // along-track positions strictly increase
    for (std::size_t i = 1; i < path.waypoints.size(); ++i)
        CHECK(path.waypoints[i].x() > path.waypoints[i - 1].x());
}

TEST_CASE("trajectory amplitude snaps to the deviation quantum") {
    Eigen::Vector2d start(0.0, 0.0), end(2.0, 0.0);
    auto path = encode_trajectory("1", start, end, 0.05, 0.12);
    CHECK(std::abs(path.waypoints[1].y()) == doctest::Approx(0.10));
    auto tiny = encode_trajectory("1", start, end, 0.05, 0.001);
    CHECK(std::abs(tiny.waypoints[1].y()) == doctest::Approx(0.05));  // floor at one quantum
}

TEST_CASE("trajectory capacity limit") {
    Eigen::Vector2d start(0.0, 0.0), end(1.0, 0.0);
    // floor(1 / (2*0.05)) - 1 = 9 bits fit on a 1 m segment
    CHECK_NOTHROW(encode_trajectory(BitString(9, '1'), start, end, 0.05, 0.05));
    CHECK_THROWS_AS(encode_trajectory(BitString(10, '1'), start, end, 0.05, 0.05),
                    InfeasibleError);
    CHECK_THROWS_AS(encode_trajectory("1", start, start, 0.05, 0.05), ConfigError);
    CHECK_THROWS_AS(encode_trajectory("1", start, end, 0.0, 0.05), ConfigError);
}

TEST_CASE("trajectory geometry is rotation-covariant") {
    BitString bits = "1101";
    auto flat = encode_trajectory(bits, {0.0, 0.0}, {1.0, 0.0}, 0.05, 0.05);
    double ang = 0.7;
    Eigen::Rotation2Dd R(ang);
    auto rot = encode_trajectory(bits, {0.0, 0.0}, R * Eigen::Vector2d(1.0, 0.0), 0.05, 0.05);
    REQUIRE(rot.waypoints.size() == flat.waypoints.size());
    for (std::size_t i = 0; i < flat.waypoints.size(); ++i)
        CHECK((rot.waypoints[i] - R * flat.waypoints[i]).norm() < 1e-12);
}

TEST_CASE("max stealthy rate bisection against a synthetic channel") {
    StealthBudget budget;
    budget.max_detection_prob = 0.05;
    budget.max_ber = 0.05;
    // deterministic toy channel: invisible below 4 bit/s, always caught above
    auto run = [](double rate, std::uint64_t) {
        TrialOutcome out;
        out.detected = rate > 4.0;
        out.ber = rate > 6.0 ? 0.5 : 0.0;
        return out;
    };
    auto res = max_stealthy_rate(budget, 0.5, 12.0, 32, 7, run);
    CHECK(res.rate_bps >= 3.5);
    CHECK(res.rate_bps <= 4.0);
    CHECK(res.detection_prob <= budget.max_detection_prob);
    CHECK(res.ber <= budget.max_ber);
}

TEST_CASE("max stealthy rate reports infeasibility at the floor") {
    StealthBudget budget;
    budget.max_detection_prob = 0.05;
    auto caught = [](double, std::uint64_t) { return TrialOutcome{true, 0.0}; };
    auto res = max_stealthy_rate(budget, 1.0, 10.0, 32, 7, caught);
    CHECK(res.rate_bps == 0.0);
    CHECK_FALSE(res.diagnostics.empty());
    CHECK_THROWS_AS(max_stealthy_rate(budget, 1.0, 10.0, 5, 7, caught), ConfigError);
    budget.max_detection_prob = 0.0;
    CHECK_THROWS_AS(max_stealthy_rate(budget, 1.0, 10.0, 32, 7, caught), ConfigError);
}

TEST_CASE("minimum amplitude search converges on a step channel") {
    auto trial = [](double amp, std::uint64_t) { return amp >= 0.5 ? 0.0 : 0.3; };
    double amp = min_snr_amplitude(0.05, 0.01, 2.0, 30, 3, trial);
    CHECK(amp == doctest::Approx(0.5).epsilon(1e-3));
    CHECK_THROWS_AS(min_snr_amplitude(0.05, 0.01, 0.4, 30, 3, trial), InfeasibleError);
    CHECK_THROWS_AS(min_snr_amplitude(0.7, 0.01, 2.0, 30, 3, trial), ConfigError);
}
