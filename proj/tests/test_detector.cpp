#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "covertphys/detector.hpp"

using namespace covertphys;
using namespace covertphys::detector;

namespace {

std::vector<Innovation> synthetic_innovations(int n, double offset, double sigma, Rng& rng) {
    std::vector<Innovation> out;
    MatrixXd S = (MatrixXd(1, 1) << sigma * sigma).finished();
    for (int i = 0; i < n; ++i) {
        Innovation in;
        in.r = (VectorXd(1) << offset + rng.gaussian(0.0, sigma)).finished();
        in.S = S;
        in.t = 0.02 * i;
        out.push_back(in);
    }
    return out;
}

std::vector<double> ramp_times(std::size_t n, double dt = 0.02, double t0 = 0.0) {
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = t0 + dt * static_cast<double>(i);
    return t;
}

}  // namespace

TEST_CASE("chi2: zero residuals never flag") {
    Rng rng(1);
    auto innov = synthetic_innovations(200, 0.0, 1.0, rng);
    for (auto& in : innov) in.r.setZero();
    for (const auto& v : chi2_detect(innov, 0.01, 5)) CHECK_FALSE(v.attacked);
}

TEST_CASE("chi2 false-positive rate matches alpha (calibration oracle)") {
    Rng rng(20240501);
    std::size_t flags = 0, total = 0;
    for (int run = 0; run < 500; ++run) {
        auto innov = synthetic_innovations(200, 0.0, 1.0, rng);
        for (const auto& v : chi2_detect(innov, 0.01, 1)) {
            ++total;
            if (v.attacked) ++flags;
        }
    }
    double rate = static_cast<double>(flags) / static_cast<double>(total);
    CHECK(rate >= 0.005);
    CHECK(rate <= 0.02);
}

TEST_CASE("chi2 flags a 3-sigma offset within two windows (power check)") {
    Rng rng(88);
    const int window = 10;
    int detected = 0;
    const int runs = 200;
    for (int run = 0; run < runs; ++run) {
        auto innov = synthetic_innovations(3 * window, 3.0, 1.0, rng);
        auto verdicts = chi2_detect(innov, 0.01, window);
        bool hit = false;
        for (const auto& v : verdicts)
            if (v.attacked && v.t_end <= 0.02 * (2 * window)) hit = true;
        if (hit) ++detected;
    }
    CHECK(static_cast<double>(detected) / runs >= 0.99);
}

TEST_CASE("chi2 parameter validation") {
    Rng rng(1);
    auto innov = synthetic_innovations(10, 0.0, 1.0, rng);
    CHECK_THROWS_AS(chi2_detect(innov, 0.0, 5), ConfigError);
    CHECK_THROWS_AS(chi2_detect(innov, 1.0, 5), ConfigError);
    CHECK_THROWS_AS(chi2_detect(innov, 0.05, 0), ConfigError);
}

TEST_CASE("threshold detection decodes excursions and merges contiguous ones") {
    ThresholdBand band{-0.025, 0.025};
    std::vector<double> dev(300, 0.0);
    // one positive excursion (two contiguous plateaus) then one negative
    for (int i = 50; i < 70; ++i) dev[i] = 0.08;
    for (int i = 70; i < 80; ++i) dev[i] = 0.05;
    for (int i = 150; i < 170; ++i) dev[i] = -0.07;
    auto verdicts = threshold_detect(dev, ramp_times(dev.size()), band);
    REQUIRE(verdicts.size() == 2);
    CHECK(decoded_bits(verdicts) == "10");
    CHECK(verdicts[0].attacked);
    CHECK(verdicts[0].score == doctest::Approx(0.08));
}

TEST_CASE("threshold excursion touching both bands takes the larger side") {
    ThresholdBand band{-0.025, 0.025};
    std::vector<double> dev(100, 0.0);
    for (int i = 40; i < 45; ++i) dev[i] = 0.03;   // small overshoot high
    for (int i = 45; i < 55; ++i) dev[i] = -0.09;  // dominant low excursion
    auto verdicts = threshold_detect(dev, ramp_times(dev.size()), band);
    REQUIRE(verdicts.size() == 1);
    CHECK(decoded_bits(verdicts) == "0");
}

TEST_CASE("threshold excursion survives a brief dip back into the band") {
    ThresholdBand band{-0.025, 0.025};
    std::vector<double> dev(200, 0.0);
    for (int i = 50; i < 90; ++i) dev[i] = 0.06;
    dev[70] = 0.0;  // one noisy sample at a band crossing must not split the bit
    dev[71] = 0.0;
    auto verdicts = threshold_detect(dev, ramp_times(dev.size()), band);
    REQUIRE(verdicts.size() == 1);
    CHECK(decoded_bits(verdicts) == "1");

    // a longer return to the band is a real gap and yields two excursions
    std::vector<double> dev2(200, 0.0);
    for (int i = 50; i < 70; ++i) dev2[i] = 0.06;
    for (int i = 90; i < 110; ++i) dev2[i] = 0.06;
    auto split = threshold_detect(dev2, ramp_times(dev2.size()), band);
    CHECK(split.size() == 2);
}

TEST_CASE("threshold detection rejects empty traces and bad bands") {
    CHECK_THROWS_AS(threshold_detect({}, {}, ThresholdBand{-0.1, 0.1}), ConfigError);
    CHECK_THROWS_AS(threshold_detect({0.0}, {0.0}, ThresholdBand{0.1, -0.1}), ConfigError);
}

TEST_CASE("decoded bits are invariant under uniform time shift") {
    ThresholdBand band{-0.025, 0.025};
    std::vector<double> dev(400, 0.0);
    Rng rng(17);
    for (int k = 0; k < 5; ++k) {
        int start = 30 + 70 * k;
        double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
        for (int i = start; i < start + 20; ++i) dev[i] = sign * 0.06;
    }
    auto a = threshold_detect(dev, ramp_times(dev.size(), 0.02, 0.0), band);
    auto b = threshold_detect(dev, ramp_times(dev.size(), 0.02, 123.456), band);
    CHECK(decoded_bits(a) == decoded_bits(b));

    auto ea = extrema_detect(dev, ramp_times(dev.size(), 0.02, 0.0), 0.03, 0.2);
    auto eb = extrema_detect(dev, ramp_times(dev.size(), 0.02, 987.6), 0.03, 0.2);
    CHECK(decoded_bits(ea) == decoded_bits(eb));
}

TEST_CASE("extrema search reads alternating plateaus as 101010") {
    // hold-duration waveform for byte 10110110: plateaus +,-,+,-,+,- with
    // multiplicities 1,1,2,1,2,1 -- a naive extrema pass sees only direction
    std::vector<double> dev;
    const double amp = deg2rad(5.0);
    const int hold_samples = 37;  // 0.75 s at 50 Hz
    const int mults[6] = {1, 1, 2, 1, 2, 1};
    dev.insert(dev.end(), 25, 0.0);
    for (int s = 0; s < 6; ++s) {
        double v = (s % 2 == 0) ? amp : -amp;
        dev.insert(dev.end(), hold_samples * mults[s], v);
    }
    dev.insert(dev.end(), 25, 0.0);
    auto verdicts = extrema_detect(dev, ramp_times(dev.size()), deg2rad(2.5), 0.3);
    CHECK(decoded_bits(verdicts) == "101010");
}

TEST_CASE("extrema search ignores return-to-baseline valleys between same-sign bits") {
    // two consecutive positive deflections with a return to rest between
    // them: the valley at rest is topographically prominent but sits at the
    // series baseline and must not decode as a 0
    std::vector<double> dev;
    const double amp = deg2rad(5.0);
    dev.insert(dev.end(), 50, 0.0);
    dev.insert(dev.end(), 25, amp);
    dev.insert(dev.end(), 25, 0.0);
    dev.insert(dev.end(), 25, amp);
    dev.insert(dev.end(), 50, 0.0);
    auto verdicts = extrema_detect(dev, ramp_times(dev.size()), deg2rad(2.5), 0.3);
    CHECK(decoded_bits(verdicts) == "11");
}

TEST_CASE("extrema search stays quiet on a flat noisy baseline") {
    Rng rng(5);
    std::vector<double> dev(2000);
    for (auto& v : dev) v = rng.gaussian(0.0, 0.004);
    auto verdicts = extrema_detect(dev, ramp_times(dev.size()), deg2rad(2.5), 0.3);
    CHECK(verdicts.empty());
}

TEST_CASE("extrema validation") {
    CHECK_THROWS_AS(extrema_detect({0.0, 1.0}, ramp_times(2), 0.0, 0.1), ConfigError);
}

TEST_CASE("euclidean gate") {
    Eigen::Vector2d j(0.1, 0.2), e(0.25, 0.1);
    CHECK(euclidean_gate(j, e, j, e, 1e-9));  // exact match passes any epsilon

    double eps = 0.01;
    Eigen::Vector2d dj = j + Eigen::Vector2d(eps / 2, eps / 2);
    Eigen::Vector2d de = e + Eigen::Vector2d(eps / 2, eps / 2);
    CHECK_FALSE(euclidean_gate(j, e, dj, de, eps));  // distance == eps, strict <

    CHECK_THROWS_AS(euclidean_gate(j, e, j, e, 0.0), ConfigError);
}

TEST_CASE("euclidean gate is monotone in epsilon") {
    Rng rng(31);
    for (int rep = 0; rep < 200; ++rep) {
        Eigen::Vector2d j(rng.gaussian(), rng.gaussian());
        Eigen::Vector2d e(rng.gaussian(), rng.gaussian());
        Eigen::Vector2d dj = j + 0.01 * Eigen::Vector2d(rng.gaussian(), rng.gaussian());
        Eigen::Vector2d de = e + 0.01 * Eigen::Vector2d(rng.gaussian(), rng.gaussian());
        double eps = 0.001 + 0.05 * rng.uniform();
        bool small = euclidean_gate(j, e, dj, de, eps);
        bool large = euclidean_gate(j, e, dj, de, 2.0 * eps);
        if (small) CHECK(large);
    }
}

TEST_CASE("variance comparison: identical traces give ratio 1 and no flag") {
    Rng rng(8);
    std::vector<double> base(3000);
    for (auto& v : base) v = rng.gaussian(0.0, 0.03);
    auto c = variance_compare_channel(base, base, 0.05, "x");
    CHECK(c.ratio == doctest::Approx(1.0));
    CHECK_FALSE(c.flagged);
}

TEST_CASE("variance comparison flags tripled noise") {
    Rng rng(8);
    std::vector<double> base(3000), test(3000);
    for (auto& v : base) v = rng.gaussian(0.0, 0.03);
    for (auto& v : test) v = rng.gaussian(0.0, 0.03 * std::sqrt(3.0));
    auto c = variance_compare_channel(base, test, 0.05, "x");
    CHECK(c.flagged);
    CHECK(c.ratio > 2.0);
    CHECK_THROWS_AS(variance_compare_channel(base, {0.0, 1.0}, 0.05, "x"), ConfigError);
}

TEST_CASE("whiteness test calibration on white residuals") {
    Rng rng(4096);
    int passes = 0;
    const int runs = 200;
    for (int run = 0; run < runs; ++run) {
        std::vector<double> r(400);
        for (auto& v : r) v = rng.gaussian(0.0, 1.0);
        if (whiteness_test(r, 20, 0.05).pass) ++passes;
    }
    CHECK(static_cast<double>(passes) / runs >= 0.90);  // nominal 95%
}

TEST_CASE("whiteness test catches periodic residuals") {
    Rng rng(11);
    int fails = 0;
    const int runs = 200;
    for (int run = 0; run < runs; ++run) {
        std::vector<double> r(400);
        for (std::size_t i = 0; i < r.size(); ++i)
            r[i] = 0.8 * std::sin(kTwoPi * static_cast<double>(i) / 25.0) +
                   rng.gaussian(0.0, 1.0);
        if (!whiteness_test(r, 20, 0.05).pass) ++fails;
    }
    CHECK(static_cast<double>(fails) / runs >= 0.90);
}

TEST_CASE("whiteness test degenerate and error cases") {
    std::vector<double> zeros(500, 0.0);
    auto res = whiteness_test(zeros, 20, 0.05);
    CHECK(res.pass);
    CHECK(res.statistic == 0.0);

    std::vector<double> tiny(50, 0.0);
    CHECK_THROWS_AS(whiteness_test(tiny, 20, 0.05), ConfigError);
}
