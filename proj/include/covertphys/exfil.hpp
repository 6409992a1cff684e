#ifndef COVERTPHYS_EXFIL_HPP
#define COVERTPHYS_EXFIL_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "covertphys/bits.hpp"
#include "covertphys/common.hpp"
#include "json.hpp"

namespace covertphys::exfil {

enum class Scheme { deflect_return, hold_duration, trajectory };

inline std::string to_string(Scheme s) {
    switch (s) {
        case Scheme::deflect_return: return "deflect_return";
        case Scheme::hold_duration: return "hold_duration";
        case Scheme::trajectory: return "trajectory";
    }
    return "?";
}

inline Scheme scheme_from_string(const std::string& s) {
    if (s == "deflect_return") return Scheme::deflect_return;
    if (s == "hold_duration") return Scheme::hold_duration;
    if (s == "trajectory") return Scheme::trajectory;
    throw ConfigError("unknown encoding scheme: " + s);
}

/// One reference-offset segment: during [t_start, t_end) the named channel's
/// setpoint is biased by `offset`.
struct ScheduleEntry {
    double t_start = 0.0;
    double t_end = 0.0;
    std::string channel = "yaw";
    double offset = 0.0;
};

struct PerturbationSchedule {
    std::vector<ScheduleEntry> entries;
    BitString bits;
    Scheme scheme = Scheme::deflect_return;

    double t_begin() const { return entries.empty() ? 0.0 : entries.front().t_start; }
    double t_finish() const { return entries.empty() ? 0.0 : entries.back().t_end; }

    /// Setpoint bias on `channel` at time t (entries are non-overlapping).
    double offset_at(double t, const std::string& channel) const {
        for (const auto& e : entries)
            if (e.channel == channel && t >= e.t_start && t < e.t_end) return e.offset;
        return 0.0;
    }

    bool active_at(double t) const {
        for (const auto& e : entries)
            if (t >= e.t_start && t < e.t_end) return true;
        return false;
    }

    /// Index of the symbol covering time t, or -1 outside the transmission.
    int symbol_at(double t) const {
        for (std::size_t i = 0; i < entries.size(); ++i)
            if (t >= entries[i].t_start && t < entries[i].t_end) return static_cast<int>(i);
        return -1;
    }

    void check_invariants() const {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].t_end < entries[i].t_start)
                throw ConfigError("schedule entry " + std::to_string(i) + " has t_end < t_start");
            if (i > 0 && entries[i].channel == entries[i - 1].channel &&
                entries[i].t_start < entries[i - 1].t_end)
                throw ConfigError("schedule entries overlap at index " + std::to_string(i));
        }
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["scheme"] = to_string(scheme);
        j["bits"] = bits;
        j["entries"] = nlohmann::json::array();
        for (const auto& e : entries)
            j["entries"].push_back({{"t_start_s", e.t_start},
                                    {"t_end_s", e.t_end},
                                    {"channel", e.channel},
                                    {"offset", e.offset}});
        return j;
    }

    static PerturbationSchedule from_json(const nlohmann::json& j) {
        PerturbationSchedule s;
        s.scheme = scheme_from_string(j.at("scheme").get<std::string>());
        s.bits = j.at("bits").get<std::string>();
        for (const auto& e : j.at("entries"))
            s.entries.push_back({e.at("t_start_s").get<double>(), e.at("t_end_s").get<double>(),
                                 e.at("channel").get<std::string>(),
                                 e.at("offset").get<double>()});
        s.check_invariants();
        return s;
    }
};

/// Detector assumptions and tolerances the attacker budgets against.
struct StealthBudget {
    std::string detector = "chi2";
    double detector_alpha = 0.01;
    double max_detection_prob = 0.05;
    double utility_epsilon = 0.005;  // m
    double max_ber = 0.05;

    void validate() const {
        if (max_detection_prob <= 0.0 || max_detection_prob >= 1.0)
            throw ConfigError("stealth budget: max_detection_prob must be in (0,1)");
        if (utility_epsilon <= 0.0)
            throw ConfigError("stealth budget: utility_epsilon must be > 0");
    }
};

// ---------------------------------------------------------------------------
// Scheme 1: deflect-and-return. Per bit, the channel setpoint is biased
// +amplitude (bit 1) or -amplitude (bit 0) for the first half of the bit
// period, then returns to reference for the second half.

inline PerturbationSchedule encode_scheme1(const BitString& bits, double amplitude,
                                           double bit_rate, const std::string& channel,
                                           double t_start = 0.0, double dt = 0.02) {
    require_bits(bits);
    if (bit_rate <= 0.0) throw ConfigError("encode_scheme1: bit_rate must be > 0");
    if (amplitude <= 0.0) throw ConfigError("encode_scheme1: amplitude must be > 0");
    const double period = 1.0 / bit_rate;
    if (period < 2.0 * dt)
        throw InfeasibleError("encode_scheme1: bit period " + std::to_string(period) +
                              " s is shorter than 2 control steps");
    PerturbationSchedule s;
    s.scheme = Scheme::deflect_return;
    s.bits = bits;
    for (std::size_t i = 0; i < bits.size(); ++i) {
        double t0 = t_start + static_cast<double>(i) * period;
        double sign = bits[i] == '1' ? 1.0 : -1.0;
        // the zero-offset return half is implicit: no entry means reference
        s.entries.push_back({t0, t0 + 0.5 * period, channel, sign * amplitude});
    }
    s.check_invariants();
    return s;
}

// ---------------------------------------------------------------------------
// Scheme 2: hold-duration run-length encoding. Each run of identical bits is
// one deflection in that bit's direction, held one `hold` interval per bit in
// the run; runs alternate direction by construction.

inline PerturbationSchedule encode_scheme2(const BitString& bits, double amplitude,
                                           double hold = 0.75, double t_start = 0.0,
                                           const std::string& channel = "yaw") {
    require_bits(bits);
    if (hold <= 0.0) throw ConfigError("encode_scheme2: hold must be > 0");
    if (amplitude <= 0.0) throw ConfigError("encode_scheme2: amplitude must be > 0");
    PerturbationSchedule s;
    s.scheme = Scheme::hold_duration;
    s.bits = bits;
    double t = t_start;
    std::size_t i = 0;
    while (i < bits.size()) {
        std::size_t j = i;
        while (j < bits.size() && bits[j] == bits[i]) ++j;
        auto run = static_cast<double>(j - i);
        double sign = bits[i] == '1' ? 1.0 : -1.0;
        s.entries.push_back({t, t + run * hold, channel, sign * amplitude});
        t += run * hold;
        i = j;
    }
    s.check_invariants();
    return s;
}

// ---------------------------------------------------------------------------
// Case-1 trajectory encoding: waypoints between start and end deviating
// perpendicular to the straight line (+ for 1, - for 0), returning to the
// line after each bit so the deviation is zero-mean, terminal point exact.

struct TrajectoryPath {
    std::vector<Eigen::Vector2d> waypoints;  // includes start and end
    BitString bits;
};

inline TrajectoryPath encode_trajectory(const BitString& bits, const Eigen::Vector2d& start,
                                        const Eigen::Vector2d& end, double deviation_quantum,
                                        double amplitude) {
    require_bits(bits);
    if ((end - start).norm() == 0.0)
        throw ConfigError("encode_trajectory: start and end coincide");
    if (deviation_quantum <= 0.0)
        throw ConfigError("encode_trajectory: deviation quantum must be > 0");
    const double len = (end - start).norm();
    const Eigen::Vector2d along = (end - start) / len;
    const Eigen::Vector2d perp(-along.y(), along.x());
    // one deviated point plus one on-line return point per bit
    const std::size_t max_bits = static_cast<std::size_t>(
        std::max(0.0, std::floor(len / (2.0 * deviation_quantum)) - 1.0));
    if (bits.size() > max_bits)
        throw InfeasibleError("encode_trajectory: capacity exceeded, max " +
                              std::to_string(max_bits) + " bits for this segment");
    double amp = std::max(deviation_quantum,
                          deviation_quantum * std::round(amplitude / deviation_quantum));
    TrajectoryPath path;
    path.bits = bits;
    path.waypoints.push_back(start);
    const auto n = static_cast<double>(2 * bits.size() + 1);
    for (std::size_t i = 0; i < bits.size(); ++i) {
        double sign = bits[i] == '1' ? 1.0 : -1.0;
        double a1 = (2.0 * static_cast<double>(i) + 1.0) / n;
        double a2 = (2.0 * static_cast<double>(i) + 2.0) / n;
        path.waypoints.push_back(start + a1 * len * along + sign * amp * perp);
        path.waypoints.push_back(start + a2 * len * along);
    }
    path.waypoints.push_back(end);
    return path;
}

// ---------------------------------------------------------------------------
// Stealth-constrained searches. Scenario execution is supplied as a callback
// so these stay decoupled from the harness.

struct TrialOutcome {
    bool detected = false;
    double ber = 0.0;
};

struct RateSearchResult {
    double rate_bps = 0.0;  // 0 when no feasible rate exists
    double detection_prob = 1.0;
    double ber = 1.0;
    std::string diagnostics;
};

/// Largest bit rate (0.25 Hz resolution) whose Monte Carlo detection
/// probability and BER both fit the budget. `run_trial(rate, seed)` executes
/// one seeded attack run under the budgeted detector.
inline RateSearchResult max_stealthy_rate(
    const StealthBudget& budget, double min_rate, double max_rate, int n_trials,
    std::uint64_t master_seed,
    const std::function<TrialOutcome(double rate_bps, std::uint64_t seed)>& run_trial) {
    budget.validate();
    if (n_trials < 30) throw ConfigError("max_stealthy_rate: need n_trials >= 30");
    const double resolution = 0.25;
    auto evaluate = [&](double rate) {
        int detected = 0;
        double ber_sum = 0.0;
        for (int t = 0; t < n_trials; ++t) {
            auto out = run_trial(rate, derive_seed(master_seed, static_cast<std::uint64_t>(
                                                                   rate * 1000) * 4096 + t));
            if (out.detected) ++detected;
            ber_sum += out.ber;
        }
        return std::pair<double, double>{static_cast<double>(detected) / n_trials,
                                         ber_sum / n_trials};
    };
    RateSearchResult best;
    double lo = min_rate, hi = max_rate;
    // feasibility is monotone in rate in this channel model; bisect on it
    auto feasible = [&](double rate, RateSearchResult& r) {
        auto [p, b] = evaluate(rate);
        r.rate_bps = rate;
        r.detection_prob = p;
        r.ber = b;
        return p <= budget.max_detection_prob && b <= budget.max_ber;
    };
    RateSearchResult probe;
    if (!feasible(lo, probe)) {
        probe.rate_bps = 0.0;
        probe.diagnostics = "no feasible rate: detection prob " +
                            std::to_string(probe.detection_prob) + ", ber " +
                            std::to_string(probe.ber) + " at minimum rate";
        return probe;
    }
    best = probe;
    if (feasible(hi, probe)) return probe;
    while (hi - lo > resolution) {
        double mid = 0.5 * (lo + hi);
        mid = resolution * std::round(mid / resolution);
        if (mid <= lo || mid >= hi) break;
        if (feasible(mid, probe)) {
            best = probe;
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return best;
}

/// Smallest amplitude whose Monte Carlo BER meets target_ber (bisection).
inline double min_snr_amplitude(
    double target_ber, double min_amplitude, double max_amplitude, int n_trials,
    std::uint64_t master_seed,
    const std::function<double(double amplitude, std::uint64_t seed)>& trial_ber) {
    if (target_ber < 0.0 || target_ber >= 0.5)
        throw ConfigError("min_snr_amplitude: target_ber must be in [0, 0.5)");
    auto mc_ber = [&](double amp) {
        double sum = 0.0;
        for (int t = 0; t < n_trials; ++t)
            sum += trial_ber(amp, derive_seed(master_seed, static_cast<std::uint64_t>(t)));
        return sum / n_trials;
    };
    if (mc_ber(max_amplitude) > target_ber)
        throw InfeasibleError("min_snr_amplitude: target BER unreachable at max amplitude");
    double lo = min_amplitude, hi = max_amplitude;
    for (int it = 0; it < 24 && (hi - lo) > 1e-4 * max_amplitude; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mc_ber(mid) <= target_ber)
            hi = mid;
        else
            lo = mid;
    }
    return hi;
}

}  // namespace covertphys::exfil

#endif
