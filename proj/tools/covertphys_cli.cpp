// Command-line front end: scenario simulation, schedule planning, decoding,
// detection, parameter sweeps, noise calibration, and report rendering.
//
// Exit codes: 0 success, 2 configuration error, 3 infeasible attack,
// 4 integrity failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "covertphys/harness.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace covertphys;

namespace {

struct GlobalOpts {
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    std::optional<int> trials;
    bool no_crc = false;
    std::string format = "json";  // csv | json
};

json load_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open '" + path + "'");
    try {
        return json::parse(f);
    } catch (const json::exception& e) {
        throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
    }
}

ScenarioConfig load_config(const std::string& path, const GlobalOpts& g) {
    json j = load_json_file(path);
    if (g.seed) j["seed"] = *g.seed;
    if (g.trials) j["n_trials"] = *g.trials;
    return ScenarioConfig::from_json(j);
}

void write_text_file(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    f << text;
}

/// Deviation-from-reference series for detector subcommands: arm traces carry
/// it directly, drone traces derive it from measured vs reference yaw.
std::vector<double> deviation_series(const Trace& trace) {
    for (const auto& c : trace.columns)
        if (c == "dev_rad") return trace.column("dev_rad");
    auto yaw = trace.column("yaw_rad");
    auto ref = trace.column("ref_yaw_rad");
    std::vector<double> dev(yaw.size());
    for (std::size_t i = 0; i < yaw.size(); ++i) dev[i] = ang_diff(yaw[i], ref[i]);
    return dev;
}

void print_verdicts(const std::vector<detector::DetectorVerdict>& verdicts,
                    const std::string& format, std::ostream& os) {
    if (format == "json") {
        json arr = json::array();
        for (const auto& v : verdicts)
            arr.push_back({{"t_start_s", v.t_start},
                           {"t_end_s", v.t_end},
                           {"attacked", v.attacked},
                           {"score", v.score},
                           {"threshold", v.threshold},
                           {"bit", std::string(1, v.decoded_bit.value_or('-'))}});
        os << json({{"verdicts", arr},
                    {"bits", detector::decoded_bits(verdicts)}})
                  .dump(2)
           << "\n";
    } else {
        os << "t_start_s,t_end_s,attacked,score,threshold,bit\n";
        for (const auto& v : verdicts)
            os << v.t_start << "," << v.t_end << "," << (v.attacked ? 1 : 0) << ","
               << v.score << "," << v.threshold << "," << v.decoded_bit.value_or('-')
               << "\n";
    }
}

int cmd_simulate(const std::string& config_path, bool parallel, const GlobalOpts& g) {
    auto cfg = load_config(config_path, g);
    auto run = harness::run_scenario(cfg, parallel);
    fs::path out(g.out_dir);
    write_text_file(out / "result.json", run.result.dump(2) + "\n");
    run.first_trial.trace.write_csv_file((out / "trace.csv").string());
    {
        std::ofstream f(out / "observation.csv");
        run.first_trial.obs.write_csv(f);
    }
    if (cfg.attacker.enabled)
        write_text_file(out / "schedule.json",
                        run.first_trial.schedule.to_json().dump(2) + "\n");
    if (g.format == "csv") {
        std::ostringstream csv;
        csv << "metric,mean,ci_lo,ci_hi,n\n";
        const auto& agg = run.result["aggregate"];
        for (auto it = agg.begin(); it != agg.end(); ++it)
            csv << it.key() << "," << it.value()["mean"].get<double>() << ","
                << it.value()["ci_lo"].get<double>() << ","
                << it.value()["ci_hi"].get<double>() << ","
                << it.value()["n"].get<int>() << "\n";
        write_text_file(out / "aggregate.csv", csv.str());
    }
    std::cout << "wrote " << (out / "result.json").string() << " ("
              << run.result["provenance"]["n_trials"].get<int>() << " trials, seed "
              << cfg.seed << ")\n";
    return 0;
}

int cmd_exfil_plan(const std::string& config_path, const GlobalOpts& g) {
    auto cfg = load_config(config_path, g);
    // match what trial 0 of `simulate` would send
    Rng rng_bits(derive_seed(derive_seed(cfg.seed, 0), 101));
    BitString bits = harness::trial_bits(cfg.attacker, rng_bits);
    json plan;
    plan["bits"] = bits;
    if (cfg.attacker.scheme == exfil::Scheme::trajectory) {
        // encode along the straight segment from the arm base to the
        // reference end-effector position
        auto [j, eff] = arm_forward_kinematics(cfg.arm.geometry,
                                               deg2rad(cfg.arm.joint1_ref_deg),
                                               deg2rad(cfg.arm.joint2_ref_deg));
        const double quantum = cfg.arm.geometry.step_quantum * cfg.arm.geometry.l2;
        auto path = exfil::encode_trajectory(bits, Eigen::Vector2d::Zero(), eff,
                                             cfg.attacker.amplitude_rad() *
                                                 cfg.arm.geometry.l2,
                                             quantum);
        json wps = json::array();
        for (const auto& w : path.waypoints) wps.push_back({{"x_m", w.x()}, {"y_m", w.y()}});
        plan["trajectory"] = {{"waypoints", wps}};
    } else {
        plan["schedule"] =
            harness::build_schedule(cfg.attacker, bits, cfg.dt_s).to_json();
    }
    write_text_file(fs::path(g.out_dir) / "plan.json", plan.dump(2) + "\n");
    std::cout << plan.dump(2) << "\n";
    return 0;
}

int cmd_decode(const std::string& obs_path, int scheme, double rate_bps,
               double amplitude_deg, double hold_s, double t_start_s, int n_bits,
               bool deframe, const GlobalOpts& g) {
    std::ifstream f(obs_path);
    if (!f) throw ConfigError("cannot open '" + obs_path + "'");
    auto obs = observer::ObservationSequence::read_csv(f);
    BitString bits;
    json out;
    if (scheme == 1) {
        auto dec = observer::decode_scheme1(obs, rate_bps, deg2rad(amplitude_deg),
                                            t_start_s, static_cast<std::size_t>(n_bits));
        bits = dec.bits;
        out["confidence"] = dec.confidence;
    } else if (scheme == 2) {
        bits = observer::decode_scheme2(obs, deg2rad(amplitude_deg), hold_s);
    } else {
        throw ConfigError("decode: --scheme must be 1 or 2");
    }
    out["bits"] = bits;
    if (deframe) {
        auto res = protocol::deframe(bits, !g.no_crc);
        if (!res.ok) throw IntegrityError("deframe failed: " + res.failure);
        json payload = json::array();
        for (auto b : res.payload) payload.push_back(b);
        out["payload_bytes"] = payload;
    }
    if (g.format == "json")
        std::cout << out.dump(2) << "\n";
    else
        std::cout << bits << "\n";
    return 0;
}

int cmd_detect(const std::string& trace_path, const std::string& detector_name,
               double alpha, int window, double band_rad, double prominence_deg,
               double separation_s, double epsilon_m, int max_lag,
               const std::string& baseline_path, const GlobalOpts& g) {
    auto trace = Trace::read_csv_file(trace_path);
    auto times = trace.column("t_s");
    if (detector_name == "threshold") {
        auto verdicts = detector::threshold_detect(deviation_series(trace), times,
                                                   detector::ThresholdBand{-band_rad,
                                                                           band_rad});
        print_verdicts(verdicts, g.format, std::cout);
    } else if (detector_name == "extrema") {
        auto verdicts = detector::extrema_detect(deviation_series(trace), times,
                                                 deg2rad(prominence_deg), separation_s);
        print_verdicts(verdicts, g.format, std::cout);
    } else if (detector_name == "chi2") {
        // scalar residual channel; the innovation variance is estimated from
        // the trace itself since a stored trace carries no filter covariance
        std::vector<double> res;
        bool have_res = false;
        for (const auto& c : trace.columns)
            if (c == "res_yaw_rad") have_res = true;
        res = have_res ? trace.column("res_yaw_rad") : deviation_series(trace);
        double s2 = detector::sample_variance(res);
        if (s2 <= 0.0) throw ConfigError("detect chi2: residual channel is constant");
        std::vector<Innovation> innovs(res.size());
        for (std::size_t i = 0; i < res.size(); ++i) {
            innovs[i].r = (Eigen::VectorXd(1) << res[i]).finished();
            innovs[i].S = (Eigen::MatrixXd(1, 1) << s2).finished();
            innovs[i].t = times[i];
        }
        auto verdicts = detector::chi2_detect(innovs, alpha, window);
        print_verdicts(verdicts, g.format, std::cout);
    } else if (detector_name == "whiteness") {
        auto res = deviation_series(trace);
        auto w = detector::whiteness_test(res, max_lag, alpha);
        json out = {{"statistic", w.statistic},
                    {"threshold", w.threshold},
                    {"p_value", w.p_value},
                    {"pass", w.pass}};
        std::cout << out.dump(2) << "\n";
    } else if (detector_name == "euclidean") {
        ArmGeometry geom;
        auto z1 = trace.column("z1_rad"), z2 = trace.column("z2_rad");
        auto r1 = trace.column("ref1_rad"), r2 = trace.column("ref2_rad");
        std::size_t fails = 0;
        for (std::size_t i = 0; i < z1.size(); ++i) {
            auto [mj, me] = arm_forward_kinematics(geom, z1[i], z2[i]);
            auto [rj, re] = arm_forward_kinematics(geom, r1[i], r2[i]);
            if (!detector::euclidean_gate(rj, re, mj, me, epsilon_m)) ++fails;
        }
        json out = {{"n_checks", z1.size()},
                    {"n_fails", fails},
                    {"fail_rate", z1.empty() ? 0.0
                                             : static_cast<double>(fails) /
                                                   static_cast<double>(z1.size())}};
        std::cout << out.dump(2) << "\n";
    } else if (detector_name == "variance") {
        if (baseline_path.empty())
            throw ConfigError("detect variance: requires --baseline <trace.csv>");
        auto base = Trace::read_csv_file(baseline_path);
        auto cmp = detector::variance_compare_channel(deviation_series(base),
                                                      deviation_series(trace), alpha,
                                                      "deviation");
        json out = {{"baseline_var", cmp.baseline_var},
                    {"observed_var", cmp.test_var},
                    {"ratio", cmp.ratio},
                    {"p_value", cmp.p_value},
                    {"flagged", cmp.flagged}};
        std::cout << out.dump(2) << "\n";
    } else {
        throw ConfigError("detect: unknown --detector '" + detector_name + "'");
    }
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis,
              const std::vector<std::string>& values, bool parallel,
              const GlobalOpts& g) {
    json base = load_json_file(config_path);
    if (g.seed) base["seed"] = *g.seed;
    if (g.trials) base["n_trials"] = *g.trials;
    std::vector<json> parsed;
    for (const auto& v : values) {
        try {
            parsed.push_back(json::parse(v));
        } catch (const json::exception&) {
            parsed.push_back(v);  // bare string value
        }
    }
    auto table = harness::sweep(base, axis, parsed, parallel);
    write_text_file(fs::path(g.out_dir) / "sweep.json", table.dump(2) + "\n");
    std::cout << table.dump(2) << "\n";
    return 0;
}

int cmd_calibrate(const std::string& config_path, const std::vector<double>& targets,
                  const GlobalOpts& g) {
    if (targets.size() != 3)
        throw ConfigError("calibrate: --targets needs exactly 3 values (x y z, m^2)");
    auto cfg = load_config(config_path, g);
    auto fitted = harness::calibrate_noise(cfg, targets[0], targets[1], targets[2],
                                           g.trials.value_or(5));
    write_text_file(fs::path(g.out_dir) / "calibration.json", fitted.dump(2) + "\n");
    std::cout << fitted.dump(2) << "\n";
    return 0;
}

int cmd_report(const std::vector<std::string>& result_paths, const GlobalOpts& g) {
    std::vector<json> results;
    for (const auto& p : result_paths) results.push_back(load_json_file(p));
    auto combined = harness::report(results);
    write_text_file(fs::path(g.out_dir) / "report.json", combined.dump(2) + "\n");
    if (g.format == "json")
        std::cout << combined.dump(2) << "\n";
    else
        std::cout << harness::render_report_text(combined);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"covertphys: covert data exfiltration through physical actuation"};
    app.require_subcommand(1);
    app.fallthrough();  // global flags may follow the subcommand

    GlobalOpts g;
    std::uint64_t seed_val = 0;
    int trials_val = 0;
    auto* seed_opt = app.add_option("--seed", seed_val, "override the config seed");
    auto* trials_opt = app.add_option("--trials", trials_val, "override n_trials");
    app.add_option("--out-dir", g.out_dir, "output directory (default: out)");
    app.add_flag("--no-crc", g.no_crc, "frame/deframe without the CRC-8 trailer");
    app.add_option("--format", g.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));

    // simulate
    std::string sim_config;
    bool parallel = false;
    auto* sim = app.add_subcommand("simulate", "run a scenario and write artifacts");
    sim->add_option("config", sim_config, "scenario config JSON")->required();
    sim->add_flag("--parallel", parallel, "run trials concurrently");

    // exfil plan
    std::string plan_config;
    auto* exfil_cmd = app.add_subcommand("exfil", "attacker-side planning");
    auto* plan = exfil_cmd->add_subcommand("plan", "emit the perturbation schedule");
    plan->add_option("config", plan_config, "scenario config JSON")->required();
    exfil_cmd->require_subcommand(1);

    // decode
    std::string obs_path;
    int scheme = 1, n_bits = 16;
    double rate_bps = 1.0, amplitude_deg = 5.0, hold_s = 0.75, t_start_s = 2.0;
    bool do_deframe = false;
    auto* dec = app.add_subcommand("decode", "decode bits from an observation CSV");
    dec->add_option("obs", obs_path, "observation CSV (t,value,valid)")->required();
    dec->add_option("--scheme", scheme, "encoding scheme (1 or 2)")->required();
    dec->add_option("--rate", rate_bps, "bit rate, bit/s (scheme 1)");
    dec->add_option("--amplitude-deg", amplitude_deg, "deflection amplitude hint");
    dec->add_option("--hold", hold_s, "hold duration, s (scheme 2)");
    dec->add_option("--t-start", t_start_s, "transmission start time, s");
    dec->add_option("--bits", n_bits, "message length, bits (scheme 1)");
    dec->add_flag("--deframe", do_deframe, "locate preamble and check CRC");

    // detect
    std::string trace_path, detector_name, baseline_path;
    double alpha = 0.01, band_rad = 0.025, prominence_deg = 2.5, separation_s = 0.3,
           epsilon_m = 0.02;
    int window = 10, max_lag = 20;
    auto* det = app.add_subcommand("detect", "run a defender detector on a trace CSV");
    det->add_option("trace", trace_path, "trace CSV")->required();
    det->add_option("--detector", detector_name, "detector type")
        ->required()
        ->check(CLI::IsMember(
            {"chi2", "threshold", "extrema", "euclidean", "whiteness", "variance"}));
    det->add_option("--alpha", alpha, "significance level");
    det->add_option("--window", window, "chi2 averaging window");
    det->add_option("--band-rad", band_rad, "threshold band half-width, rad");
    det->add_option("--prominence-deg", prominence_deg, "extrema prominence, deg");
    det->add_option("--separation-s", separation_s, "extrema minimum separation, s");
    det->add_option("--epsilon-m", epsilon_m, "Euclidean gate radius, m");
    det->add_option("--max-lag", max_lag, "whiteness test maximum lag");
    det->add_option("--baseline", baseline_path, "baseline trace (variance detector)");

    // sweep
    std::string sweep_config, axis;
    std::vector<std::string> sweep_values;
    auto* swp = app.add_subcommand("sweep", "aggregate runs along one config axis");
    swp->add_option("config", sweep_config, "scenario config JSON")->required();
    swp->add_option("--axis", axis, "dotted config path, e.g. attacker.rate_bps")
        ->required();
    swp->add_option("--values", sweep_values, "axis values")->required()->delimiter(',');
    swp->add_flag("--parallel", parallel, "run trials concurrently");

    // calibrate
    std::string cal_config;
    std::vector<double> targets;
    auto* cal = app.add_subcommand("calibrate", "fit process noise to error variances");
    cal->add_option("config", cal_config, "scenario config JSON")->required();
    cal->add_option("--targets", targets, "target x,y,z error variances (m^2)")
        ->required()
        ->delimiter(',');

    // report
    std::vector<std::string> result_paths;
    auto* rep = app.add_subcommand("report", "combine and render result JSONs");
    rep->add_option("results", result_paths, "result JSON files")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;  // bad usage is a configuration error
    }
    if (*seed_opt) g.seed = seed_val;
    if (*trials_opt) g.trials = trials_val;

    try {
        if (*sim) return cmd_simulate(sim_config, parallel, g);
        if (*plan) return cmd_exfil_plan(plan_config, g);
        if (*dec)
            return cmd_decode(obs_path, scheme, rate_bps, amplitude_deg, hold_s,
                              t_start_s, n_bits, do_deframe, g);
        if (*det)
            return cmd_detect(trace_path, detector_name, alpha, window, band_rad,
                              prominence_deg, separation_s, epsilon_m, max_lag,
                              baseline_path, g);
        if (*swp) return cmd_sweep(sweep_config, axis, sweep_values, parallel, g);
        if (*cal) return cmd_calibrate(cal_config, targets, g);
        if (*rep) return cmd_report(result_paths, g);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const IntegrityError& e) {
        std::cerr << "integrity failure: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
