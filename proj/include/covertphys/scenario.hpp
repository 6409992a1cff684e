#ifndef COVERTPHYS_SCENARIO_HPP
#define COVERTPHYS_SCENARIO_HPP

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "covertphys/common.hpp"
#include "covertphys/detector.hpp"
#include "covertphys/exfil.hpp"
#include "covertphys/observer.hpp"
#include "covertphys/plant.hpp"
#include "json.hpp"

namespace covertphys {

using nlohmann::json;

namespace config_detail {

inline void reject_unknown_keys(const json& obj, const std::string& path,
                                const std::set<std::string>& allowed) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown field '" + path + it.key() + "'");
}

template <typename T>
T require(const json& obj, const std::string& path, const std::string& key) {
    if (!obj.contains(key))
        throw ConfigError("config: missing required field '" + path + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field '" + path + key + "' has the wrong type");
    }
}

template <typename T>
T get_or(const json& obj, const std::string& path, const std::string& key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: field '" + path + key + "' has the wrong type");
    }
}

}  // namespace config_detail

enum class ScenarioKind { arm_waypoint, drone_hover, drone_circle };

inline std::string to_string(ScenarioKind k) {
    switch (k) {
        case ScenarioKind::arm_waypoint: return "arm_waypoint";
        case ScenarioKind::drone_hover: return "drone_hover";
        case ScenarioKind::drone_circle: return "drone_circle";
    }
    return "?";
}

inline ScenarioKind scenario_from_string(const std::string& s) {
    if (s == "arm_waypoint") return ScenarioKind::arm_waypoint;
    if (s == "drone_hover") return ScenarioKind::drone_hover;
    if (s == "drone_circle") return ScenarioKind::drone_circle;
    throw ConfigError("config: unknown scenario '" + s + "'");
}

struct AttackerConfig {
    bool enabled = true;
    exfil::Scheme scheme = exfil::Scheme::deflect_return;
    double amplitude_deg = 5.0;
    double rate_bps = 1.0;   // scheme 1
    double hold_s = 0.75;    // scheme 2
    double t_start_s = 2.0;
    std::string channel = "yaw";
    BitString bits;          // explicit message; empty = draw random_bits
    int random_bits = 16;

    double amplitude_rad() const { return deg2rad(amplitude_deg); }
};

struct ObserverConfig {
    observer::ObserverParams params;
    observer::Viewpoint viewpoint = observer::Viewpoint::side;
    bool phase_jitter = false;  // per-trial random frame-grid phase
};

struct DetectorConfig {
    std::string type;  // chi2 | threshold | extrema | variance | whiteness | euclidean
    double alpha = 0.01;
    int window = 10;
    std::string channel = "yaw";
    double band_rad = 0.025;
    double min_prominence_deg = 2.5;
    double min_separation_s = 0.3;
    double epsilon_m = 0.005;
    int max_lag = 20;
};

struct DronePlantConfig {
    DroneParams params;
    double q_x = 2e-5;       // per-step process noise variance, velocity channels
    double q_y = 2e-5;
    double q_z = 2e-6;
    double q_yaw = 5e-6;
    double r_pos_m = 0.002;  // measurement noise std
    double r_yaw_rad = 0.002;
};

struct ArmPlantConfig {
    ArmGeometry geometry;
    double tau_s = 0.025;         // servo first-order time constant
    double joint1_ref_deg = 40.0;
    double joint2_ref_deg = -60.0;
    double vibration_rad = 0.0005;  // per-step structural vibration std
    double r_joint_rad = 0.002;     // encoder noise std
    bool step_quantize = true;
};

struct ScenarioConfig {
    ScenarioKind scenario = ScenarioKind::drone_hover;
    std::uint64_t seed = 0;
    bool seed_set = false;
    double duration_s = 30.0;
    double dt_s = 0.02;
    int n_trials = 1;
    DronePlantConfig drone;
    ArmPlantConfig arm;
    AttackerConfig attacker;
    ObserverConfig observer_cfg;
    std::vector<DetectorConfig> detectors;

    bool is_drone() const { return scenario != ScenarioKind::arm_waypoint; }

    void validate() const {
        if (!seed_set) throw ConfigError("config: 'seed' is mandatory (no wall-clock default)");
        if (duration_s <= 0.0) throw ConfigError("config: 'duration_s' must be > 0");
        if (dt_s <= 0.0) throw ConfigError("config: 'dt_s' must be > 0");
        if (n_trials < 1) throw ConfigError("config: 'n_trials' must be >= 1");
        if (attacker.enabled) {
            if (attacker.amplitude_deg <= 0.0)
                throw ConfigError("config: 'attacker.amplitude_deg' must be > 0");
            if (attacker.rate_bps <= 0.0)
                throw ConfigError("config: 'attacker.rate_bps' must be > 0");
            if (attacker.hold_s <= 0.0)
                throw ConfigError("config: 'attacker.hold_s' must be > 0");
            if (attacker.t_start_s < 0.0)
                throw ConfigError("config: 'attacker.t_start_s' must be >= 0");
            if (!attacker.bits.empty() && !is_bitstring(attacker.bits))
                throw ConfigError("config: 'attacker.bits' must contain only 0/1");
            if (attacker.bits.empty() && attacker.random_bits < 1)
                throw ConfigError("config: 'attacker.random_bits' must be >= 1");
        }
        if (is_drone()) {
            if (drone.q_x < 0.0 || drone.q_y < 0.0 || drone.q_z < 0.0 || drone.q_yaw < 0.0)
                throw ConfigError("config: 'plant.q_*' entries must be >= 0");
            if (drone.r_pos_m <= 0.0 || drone.r_yaw_rad <= 0.0)
                throw ConfigError("config: 'plant.r_pos_m'/'plant.r_yaw_rad' must be > 0");
            drone.params.validate(dt_s);
        } else {
            if (arm.tau_s <= 0.0) throw ConfigError("config: 'plant.tau_s' must be > 0");
            if (arm.r_joint_rad <= 0.0)
                throw ConfigError("config: 'plant.r_joint_rad' must be > 0");
            if (arm.vibration_rad < 0.0)
                throw ConfigError("config: 'plant.vibration_rad' must be >= 0");
        }
        observer_cfg.params.validate();
        for (std::size_t i = 0; i < detectors.size(); ++i) {
            const auto& d = detectors[i];
            const std::string where = "detectors[" + std::to_string(i) + "]";
            static const std::set<std::string> kinds{"chi2",     "threshold", "extrema",
                                                     "variance", "whiteness", "euclidean"};
            if (!kinds.count(d.type))
                throw ConfigError("config: " + where + ".type '" + d.type + "' unknown");
            if (d.alpha <= 0.0 || d.alpha >= 1.0)
                throw ConfigError("config: " + where + ".alpha must be in (0,1)");
            if (d.window < 1) throw ConfigError("config: " + where + ".window must be >= 1");
        }
    }

    json to_json() const {
        json j;
        j["scenario"] = to_string(scenario);
        j["seed"] = seed;
        j["duration_s"] = duration_s;
        j["dt_s"] = dt_s;
        j["n_trials"] = n_trials;
        if (is_drone()) {
            j["plant"] = {{"kp", drone.params.kp},
                          {"kd", drone.params.kd},
                          {"kp_yaw", drone.params.kp_yaw},
                          {"kd_yaw", drone.params.kd_yaw},
                          {"hover_alt_m", drone.params.hover_alt},
                          {"circle_radius_m", drone.params.circle_radius},
                          {"circle_period_s", drone.params.circle_period},
                          {"q_x", drone.q_x},
                          {"q_y", drone.q_y},
                          {"q_z", drone.q_z},
                          {"q_yaw", drone.q_yaw},
                          {"r_pos_m", drone.r_pos_m},
                          {"r_yaw_rad", drone.r_yaw_rad}};
        } else {
            j["plant"] = {{"l1_m", arm.geometry.l1},
                          {"l2_m", arm.geometry.l2},
                          {"step_deg", rad2deg(arm.geometry.step_quantum)},
                          {"tau_s", arm.tau_s},
                          {"joint1_ref_deg", arm.joint1_ref_deg},
                          {"joint2_ref_deg", arm.joint2_ref_deg},
                          {"vibration_rad", arm.vibration_rad},
                          {"r_joint_rad", arm.r_joint_rad},
                          {"step_quantize", arm.step_quantize}};
        }
        j["attacker"] = {{"enabled", attacker.enabled},
                         {"scheme", exfil::to_string(attacker.scheme)},
                         {"amplitude_deg", attacker.amplitude_deg},
                         {"rate_bps", attacker.rate_bps},
                         {"hold_s", attacker.hold_s},
                         {"t_start_s", attacker.t_start_s},
                         {"channel", attacker.channel},
                         {"bits", attacker.bits},
                         {"random_bits", attacker.random_bits}};
        std::string view = observer_cfg.viewpoint == observer::Viewpoint::front ? "front"
                           : observer_cfg.viewpoint == observer::Viewpoint::side ? "side"
                           : observer_cfg.viewpoint == observer::Viewpoint::oblique
                               ? "oblique"
                               : "top";
        j["observer"] = {{"fps", observer_cfg.params.fps},
                         {"noise_sigma", observer_cfg.params.noise_sigma},
                         {"quantization", observer_cfg.params.quantization},
                         {"dropout_prob", observer_cfg.params.dropout_prob},
                         {"latency_s", observer_cfg.params.latency},
                         {"start_offset_s", observer_cfg.params.start_offset},
                         {"viewpoint", view},
                         {"phase_jitter", observer_cfg.phase_jitter}};
        j["detectors"] = json::array();
        for (const auto& d : detectors)
            j["detectors"].push_back({{"type", d.type},
                                      {"alpha", d.alpha},
                                      {"window", d.window},
                                      {"channel", d.channel},
                                      {"band_rad", d.band_rad},
                                      {"min_prominence_deg", d.min_prominence_deg},
                                      {"min_separation_s", d.min_separation_s},
                                      {"epsilon_m", d.epsilon_m},
                                      {"max_lag", d.max_lag}});
        return j;
    }

    static ScenarioConfig from_json(const json& j) {
        using namespace config_detail;
        ScenarioConfig c;
        reject_unknown_keys(j, "", {"scenario", "seed", "duration_s", "dt_s", "n_trials",
                                    "plant", "noise", "attacker", "observer", "detectors"});
        c.scenario = scenario_from_string(require<std::string>(j, "", "scenario"));
        c.seed = require<std::uint64_t>(j, "", "seed");
        c.seed_set = true;
        c.duration_s = get_or(j, "", "duration_s", c.duration_s);
        c.dt_s = get_or(j, "", "dt_s", c.is_drone() ? 0.02 : 1.0 / 150.0);
        c.n_trials = get_or(j, "", "n_trials", 1);
        json plant = j.value("plant", json::object());
        if (c.is_drone()) {
            reject_unknown_keys(plant, "plant.",
                                {"kp", "kd", "kp_yaw", "kd_yaw", "hover_alt_m",
                                 "circle_radius_m", "circle_period_s", "q_x", "q_y", "q_z",
                                 "q_yaw", "r_pos_m", "r_yaw_rad"});
            c.drone.params.kp = get_or(plant, "plant.", "kp", c.drone.params.kp);
            c.drone.params.kd = get_or(plant, "plant.", "kd", c.drone.params.kd);
            c.drone.params.kp_yaw = get_or(plant, "plant.", "kp_yaw", c.drone.params.kp_yaw);
            c.drone.params.kd_yaw = get_or(plant, "plant.", "kd_yaw", c.drone.params.kd_yaw);
            c.drone.params.hover_alt =
                get_or(plant, "plant.", "hover_alt_m", c.drone.params.hover_alt);
            c.drone.params.circle_radius =
                get_or(plant, "plant.", "circle_radius_m", c.drone.params.circle_radius);
            c.drone.params.circle_period =
                get_or(plant, "plant.", "circle_period_s", c.drone.params.circle_period);
            c.drone.q_x = get_or(plant, "plant.", "q_x", c.drone.q_x);
            c.drone.q_y = get_or(plant, "plant.", "q_y", c.drone.q_y);
            c.drone.q_z = get_or(plant, "plant.", "q_z", c.drone.q_z);
            c.drone.q_yaw = get_or(plant, "plant.", "q_yaw", c.drone.q_yaw);
            c.drone.r_pos_m = get_or(plant, "plant.", "r_pos_m", c.drone.r_pos_m);
            c.drone.r_yaw_rad = get_or(plant, "plant.", "r_yaw_rad", c.drone.r_yaw_rad);
        } else {
            reject_unknown_keys(plant, "plant.",
                                {"l1_m", "l2_m", "step_deg", "tau_s", "joint1_ref_deg",
                                 "joint2_ref_deg", "vibration_rad", "r_joint_rad",
                                 "step_quantize"});
            c.arm.geometry.l1 = get_or(plant, "plant.", "l1_m", c.arm.geometry.l1);
            c.arm.geometry.l2 = get_or(plant, "plant.", "l2_m", c.arm.geometry.l2);
            c.arm.geometry.step_quantum =
                deg2rad(get_or(plant, "plant.", "step_deg", 1.8));
            c.arm.tau_s = get_or(plant, "plant.", "tau_s", c.arm.tau_s);
            c.arm.joint1_ref_deg =
                get_or(plant, "plant.", "joint1_ref_deg", c.arm.joint1_ref_deg);
            c.arm.joint2_ref_deg =
                get_or(plant, "plant.", "joint2_ref_deg", c.arm.joint2_ref_deg);
            c.arm.vibration_rad =
                get_or(plant, "plant.", "vibration_rad", c.arm.vibration_rad);
            c.arm.r_joint_rad = get_or(plant, "plant.", "r_joint_rad", c.arm.r_joint_rad);
            c.arm.step_quantize = get_or(plant, "plant.", "step_quantize", true);
        }
        if (j.contains("attacker")) {
            const json& a = j.at("attacker");
            reject_unknown_keys(a, "attacker.",
                                {"enabled", "scheme", "amplitude_deg", "rate_bps", "hold_s",
                                 "t_start_s", "channel", "bits", "random_bits"});
            c.attacker.enabled = get_or(a, "attacker.", "enabled", true);
            c.attacker.scheme = exfil::scheme_from_string(
                get_or<std::string>(a, "attacker.", "scheme", "deflect_return"));
            c.attacker.amplitude_deg =
                get_or(a, "attacker.", "amplitude_deg", c.attacker.amplitude_deg);
            c.attacker.rate_bps = get_or(a, "attacker.", "rate_bps", c.attacker.rate_bps);
            c.attacker.hold_s = get_or(a, "attacker.", "hold_s", c.attacker.hold_s);
            c.attacker.t_start_s = get_or(a, "attacker.", "t_start_s", c.attacker.t_start_s);
            c.attacker.channel =
                get_or<std::string>(a, "attacker.", "channel", c.attacker.channel);
            c.attacker.bits = get_or<std::string>(a, "attacker.", "bits", "");
            c.attacker.random_bits = get_or(a, "attacker.", "random_bits", 16);
        }
        if (j.contains("observer")) {
            const json& o = j.at("observer");
            reject_unknown_keys(o, "observer.",
                                {"fps", "noise_sigma", "quantization", "dropout_prob",
                                 "latency_s", "start_offset_s", "viewpoint", "phase_jitter"});
            c.observer_cfg.params.fps = get_or(o, "observer.", "fps", 30.0);
            c.observer_cfg.params.noise_sigma = get_or(o, "observer.", "noise_sigma", 0.0);
            c.observer_cfg.params.quantization = get_or(o, "observer.", "quantization", 0.0);
            c.observer_cfg.params.dropout_prob = get_or(o, "observer.", "dropout_prob", 0.0);
            c.observer_cfg.params.latency = get_or(o, "observer.", "latency_s", 0.0);
            c.observer_cfg.params.start_offset =
                get_or(o, "observer.", "start_offset_s", 0.0);
            c.observer_cfg.viewpoint = observer::viewpoint_from_string(
                get_or<std::string>(o, "observer.", "viewpoint", "side"));
            c.observer_cfg.phase_jitter = get_or(o, "observer.", "phase_jitter", false);
        }
        if (j.contains("detectors")) {
            if (!j.at("detectors").is_array())
                throw ConfigError("config: 'detectors' must be an array");
            for (std::size_t i = 0; i < j.at("detectors").size(); ++i) {
                const json& d = j.at("detectors")[i];
                const std::string where = "detectors[" + std::to_string(i) + "].";
                reject_unknown_keys(d, where,
                                    {"type", "alpha", "window", "channel", "band_rad",
                                     "min_prominence_deg", "min_separation_s", "epsilon_m",
                                     "max_lag"});
                DetectorConfig dc;
                dc.type = require<std::string>(d, where, "type");
                dc.alpha = get_or(d, where, "alpha", dc.alpha);
                dc.window = get_or(d, where, "window", dc.window);
                dc.channel = get_or<std::string>(d, where, "channel", dc.channel);
                dc.band_rad = get_or(d, where, "band_rad", dc.band_rad);
                dc.min_prominence_deg =
                    get_or(d, where, "min_prominence_deg", dc.min_prominence_deg);
                dc.min_separation_s =
                    get_or(d, where, "min_separation_s", dc.min_separation_s);
                dc.epsilon_m = get_or(d, where, "epsilon_m", dc.epsilon_m);
                dc.max_lag = get_or(d, where, "max_lag", dc.max_lag);
                c.detectors.push_back(dc);
            }
        }
        c.validate();
        return c;
    }
};

// ---------------------------------------------------------------------------
// Canned example configurations

inline ScenarioConfig drone_hover_config(std::uint64_t seed) {
    ScenarioConfig c;
    c.scenario = ScenarioKind::drone_hover;
    c.seed = seed;
    c.seed_set = true;
    c.duration_s = 22.0;
    c.attacker.scheme = exfil::Scheme::deflect_return;
    c.attacker.amplitude_deg = 5.0;
    c.attacker.rate_bps = 1.0;
    c.attacker.t_start_s = 2.0;
    c.attacker.random_bits = 16;
    c.observer_cfg.params.fps = 30.0;
    c.observer_cfg.params.noise_sigma = 0.002;
    c.observer_cfg.viewpoint = observer::Viewpoint::side;
    c.detectors.push_back({.type = "chi2", .alpha = 0.01, .window = 10, .channel = "yaw"});
    c.detectors.push_back({.type = "threshold", .band_rad = 0.025});
    c.detectors.push_back(
        {.type = "extrema", .min_prominence_deg = 2.5, .min_separation_s = 0.3});
    return c;
}

inline ScenarioConfig drone_circle_config(std::uint64_t seed) {
    ScenarioConfig c = drone_hover_config(seed);
    c.scenario = ScenarioKind::drone_circle;
    c.duration_s = 100.0;  // ten 10 s circles
    c.attacker.t_start_s = 5.0;
    // process noise calibrated so baseline estimation error variance lands on
    // the reference operating point (~1.2e-3, 1.0e-3, 1.0e-4 m^2 in x, y, z)
    c.drone.q_x = 1.05e-3;
    c.drone.q_y = 8.4e-4;
    c.drone.q_z = 9.4e-5;
    return c;
}

inline ScenarioConfig arm_table1_config(std::uint64_t seed) {
    ScenarioConfig c;
    c.scenario = ScenarioKind::arm_waypoint;
    c.seed = seed;
    c.seed_set = true;
    c.dt_s = 1.0 / 150.0;
    c.duration_s = 10.0;
    c.attacker.scheme = exfil::Scheme::deflect_return;
    c.attacker.amplitude_deg = 5.4;  // three 1.8-degree motor steps
    c.attacker.rate_bps = 5.0;
    c.attacker.t_start_s = 1.0;
    c.attacker.channel = "joint2";
    c.attacker.random_bits = 32;
    c.observer_cfg.params.fps = 30.0;
    c.observer_cfg.params.noise_sigma = 0.004;
    c.observer_cfg.phase_jitter = true;
    c.detectors.push_back({.type = "euclidean", .epsilon_m = 0.02});
    return c;
}

}  // namespace covertphys

#endif
