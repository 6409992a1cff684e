#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "covertphys/observer.hpp"

using namespace covertphys;
using namespace covertphys::observer;

namespace {

// 50 Hz trace of the schedule's commanded offset, long enough to include a
// quiet tail after the transmission
std::pair<std::vector<double>, std::vector<double>> schedule_trace(
    const exfil::PerturbationSchedule& s, double extra = 2.0, double dt = 0.02) {
    std::vector<double> times, values;
    auto n = static_cast<std::size_t>((s.t_finish() + extra) / dt) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) * dt;
        times.push_back(t);
        values.push_back(s.offset_at(t, "yaw"));
    }
    return {times, values};
}

// same, but through a first-order lag -- the shape the decoder's template
// actually models
std::pair<std::vector<double>, std::vector<double>> lagged_trace(
    const exfil::PerturbationSchedule& s, double tau, double extra = 2.0,
    double dt = 0.02) {
    std::vector<double> times, values;
    double v = 0.0;
    auto n = static_cast<std::size_t>((s.t_finish() + extra) / dt) + 1;
    for (std::size_t i = 0; i < n; ++i) {
        double t = static_cast<double>(i) * dt;
        v += (s.offset_at(t, "yaw") - v) * dt / tau;
        times.push_back(t);
        values.push_back(v);
    }
    return {times, values};
}

}  // namespace

TEST_CASE("observe at the trace rate with no impairments is lossless") {
    std::vector<double> times, values;
    for (int i = 0; i < 100; ++i) {
        times.push_back(0.02 * i);
        values.push_back(std::sin(0.3 * i));
    }
    ObserverParams p;
    p.fps = 50.0;
    Rng rng(1);
    auto obs = observe(times, values, p, rng);
    REQUIRE(obs.frames.size() == times.size());
    for (std::size_t i = 0; i < obs.frames.size(); ++i) {
        CHECK(obs.frames[i].valid);
        CHECK(obs.frames[i].value == values[i]);
    }
    CHECK(obs.frame_dt() == doctest::Approx(0.02));
}

TEST_CASE("observe validates parameters") {
    std::vector<double> times{0.0, 0.02}, values{0.0, 1.0};
    ObserverParams p;
    Rng rng(1);
    p.fps = 120.0;  // above the 50 Hz trace rate
    CHECK_THROWS_AS(observe(times, values, p, rng), ConfigError);
    p.fps = 30.0;
    p.dropout_prob = 1.0;
    CHECK_THROWS_AS(observe(times, values, p, rng), ConfigError);
    CHECK_THROWS_AS(observe({0.0}, {0.0}, ObserverParams{}, rng), ConfigError);
}

TEST_CASE("quantization rounds to the resolution grid") {
    std::vector<double> times, values;
    for (int i = 0; i < 200; ++i) {
        times.push_back(0.02 * i);
        values.push_back(0.001 * i);
    }
    ObserverParams p;
    p.fps = 25.0;
    p.quantization = 0.01;
    Rng rng(1);
    auto obs = observe(times, values, p, rng);
    for (const auto& f : obs.frames) {
        double q = f.value / p.quantization;
        CHECK(q == doctest::Approx(std::round(q)).epsilon(1e-9));
    }
}

TEST_CASE("dropout and noise statistics match the parameters") {
    std::vector<double> times, values;
    for (int i = 0; i < 20000; ++i) {
        times.push_back(0.02 * i);
        values.push_back(0.0);
    }
    ObserverParams p;
    p.fps = 50.0;
    p.dropout_prob = 0.3;
    p.noise_sigma = 0.02;
    Rng rng(555);
    auto obs = observe(times, values, p, rng);
    std::size_t dropped = 0;
    double acc = 0.0;
    std::size_t n_valid = 0;
    for (const auto& f : obs.frames) {
        if (!f.valid) {
            ++dropped;
            continue;
        }
        acc += f.value * f.value;
        ++n_valid;
    }
    double drop_rate = static_cast<double>(dropped) / static_cast<double>(obs.frames.size());
    CHECK(drop_rate == doctest::Approx(0.3).epsilon(0.05));
    CHECK(acc / static_cast<double>(n_valid) ==
          doctest::Approx(p.noise_sigma * p.noise_sigma).epsilon(0.05));
}

TEST_CASE("observation csv round trip") {
    ObservationSequence obs;
    obs.frames.push_back({0.0, 0.123456789, true});
    obs.frames.push_back({1.0 / 30.0, -0.0873, true});
    obs.frames.push_back({2.0 / 30.0, 0.0, false});
    std::stringstream ss;
    obs.write_csv(ss);
    auto back = ObservationSequence::read_csv(ss);
    REQUIRE(back.frames.size() == obs.frames.size());
    for (std::size_t i = 0; i < obs.frames.size(); ++i) {
        CHECK(back.frames[i].t == doctest::Approx(obs.frames[i].t).epsilon(1e-8));
        CHECK(back.frames[i].valid == obs.frames[i].valid);
        if (obs.frames[i].valid)
            CHECK(back.frames[i].value == doctest::Approx(obs.frames[i].value).epsilon(1e-8));
    }
    std::stringstream empty;
    CHECK_THROWS_AS(ObservationSequence::read_csv(empty), ConfigError);
}

TEST_CASE("scheme 1 decodes a clean commanded waveform exactly") {
    Rng rng(2023);
    const double amp = deg2rad(5.0);
    for (double rate : {1.0, 2.0, 5.0}) {
        BitString bits = random_bits(16, rng);
        auto sched = exfil::encode_scheme1(bits, amp, rate, "yaw", 1.0);
        auto [times, values] = lagged_trace(sched, 0.25 / rate, 2.0);
        ObserverParams p;
        p.fps = 30.0;
        Rng orng(7);
        auto obs = observe(times, values, p, orng);
        auto dec = decode_scheme1(obs, rate, amp, 1.0, bits.size());
        CHECK(dec.bits == bits);
        REQUIRE(dec.confidence.size() == bits.size());
        for (double c : dec.confidence) CHECK(c > 0.0);
    }
}

TEST_CASE("scheme 1 marks starved windows as erasures") {
    const double amp = deg2rad(5.0);
    auto sched = exfil::encode_scheme1("1011", amp, 1.0, "yaw", 0.0);
    auto [times, values] = lagged_trace(sched, 0.25, 1.0);
    ObserverParams p;
    p.fps = 30.0;
    Rng rng(3);
    auto obs = observe(times, values, p, rng);
    // knock out every frame inside the third bit window [2, 3)
    for (auto& f : obs.frames)
        if (f.t >= 2.0 && f.t < 3.0) f.valid = false;
    auto dec = decode_scheme1(obs, 1.0, amp, 0.0, 4);
    CHECK(dec.bits == "10E1");
    CHECK(dec.confidence[2] == 0.0);
    CHECK_THROWS_AS(decode_scheme1(obs, 0.0, amp, 0.0, 4), ConfigError);
}

TEST_CASE("scheme 2 duration decoding recovers 10110110") {
    const double amp = deg2rad(5.0);
    auto sched = exfil::encode_scheme2("10110110", amp, 0.75);
    auto [times, values] = schedule_trace(sched, 1.0);
    ObserverParams p;
    p.fps = 30.0;
    Rng rng(4);
    auto obs = observe(times, values, p, rng);
    CHECK(decode_scheme2(obs, amp, 0.75) == "10110110");
    CHECK_THROWS_AS(decode_scheme2(obs, amp, 0.0), ConfigError);
}

TEST_CASE("scheme 2 flags sub-hold blips as erasures") {
    ObservationSequence obs;
    const double amp = 0.0873;
    for (int i = 0; i < 120; ++i) {
        double t = i / 30.0;
        double v = 0.0;
        if (t >= 1.0 && t < 1.15) v = amp;  // 0.2 hold-widths: too short
        if (t >= 2.0 && t < 2.75) v = -amp;
        obs.frames.push_back({t, v, true});
    }
    CHECK(decode_scheme2(obs, amp, 0.75) == "E0");
}

TEST_CASE("snr reflects amplitude against the noise floor") {
    const double amp = deg2rad(5.0);
    auto sched = exfil::encode_scheme1("10110110", amp, 1.0, "yaw", 1.0);
    auto [times, values] = schedule_trace(sched, 3.0);
    ObserverParams p;
    p.fps = 30.0;
    p.noise_sigma = 0.002;
    Rng rng(9);
    auto obs = observe(times, values, p, rng);
    double snr = snr_db(obs, sched);
    CHECK(snr > 20.0);
    CHECK(snr <= 99.0);

    ObserverParams clean;
    clean.fps = 30.0;
    Rng rng2(9);
    auto noiseless = observe(times, values, clean, rng2);
    CHECK(snr_db(noiseless, sched) == 99.0);

    exfil::PerturbationSchedule never;
    never.entries.push_back({1000.0, 1001.0, "yaw", amp});
    CHECK_THROWS_AS(snr_db(obs, never), ConfigError);
}

TEST_CASE("yaw projection is monotone from every canned viewpoint") {
    for (auto view : {Viewpoint::front, Viewpoint::side, Viewpoint::oblique, Viewpoint::top}) {
        std::vector<double> yaw;
        for (int i = 0; i <= 400; ++i) yaw.push_back(-kPi + kTwoPi * i / 401.0);
        auto proj = viewpoint_project(yaw, view);
        for (std::size_t i = 1; i < proj.size(); ++i) {
            double d = ang_diff(proj[i], proj[i - 1]);
            CHECK(d > 0.0);  // strictly increasing modulo wrap
        }
    }
}

TEST_CASE("projected deflections keep their sign and order") {
    // a +/- yaw deflection pair about any operating point must stay ordered
    // after projection, so band/extrema decoding survives the viewpoint
    const double amp = deg2rad(5.0);
    for (auto view : {Viewpoint::front, Viewpoint::side, Viewpoint::oblique, Viewpoint::top}) {
        for (double base : {0.0, 0.5, 1.5, 3.0, -2.0}) {
            double up = ang_diff(project_yaw(base + amp, view), project_yaw(base, view));
            double dn = ang_diff(project_yaw(base - amp, view), project_yaw(base, view));
            CHECK(up > 0.0);
            CHECK(dn < 0.0);
        }
    }
}

TEST_CASE("viewpoint names parse") {
    CHECK(viewpoint_from_string("front") == Viewpoint::front);
    CHECK(viewpoint_from_string("side") == Viewpoint::side);
    CHECK(viewpoint_from_string("oblique") == Viewpoint::oblique);
    CHECK(viewpoint_from_string("top") == Viewpoint::top);
    CHECK_THROWS_AS(viewpoint_from_string("rear"), ConfigError);
}
