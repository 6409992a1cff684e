#ifndef COVERTPHYS_OBSERVER_HPP
#define COVERTPHYS_OBSERVER_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "covertphys/bits.hpp"
#include "covertphys/common.hpp"
#include "covertphys/exfil.hpp"

namespace covertphys::observer {

/// Parametric stand-in for the camera + marker-tracking pipeline.
struct ObserverParams {
    double fps = 30.0;
    double quantization = 0.0;   // smallest resolvable change (rad or m), 0 = off
    double noise_sigma = 0.0;    // additive gaussian std
    double dropout_prob = 0.0;   // per-frame missing probability
    double latency = 0.0;        // s, shifts frame timestamps
    double start_offset = 0.0;   // s, frame-grid phase relative to the trace

    void validate() const {
        if (fps <= 0.0) throw ConfigError("observer.fps must be > 0");
        if (quantization < 0.0) throw ConfigError("observer.quantization must be >= 0");
        if (dropout_prob < 0.0 || dropout_prob >= 1.0)
            throw ConfigError("observer.dropout_prob must be in [0,1)");
    }
};

struct Frame {
    double t = 0.0;
    double value = 0.0;  // meaningless when !valid
    bool valid = true;
};

struct ObservationSequence {
    std::vector<Frame> frames;

    double frame_dt() const {
        if (frames.size() < 2) return 0.0;
        return (frames.back().t - frames.front().t) /
               static_cast<double>(frames.size() - 1);
    }

    void write_csv(std::ostream& os) const {
        os << "t,value,valid\n";
        char buf[96];
        for (const auto& f : frames) {
            std::snprintf(buf, sizeof(buf), "%.9g,%.9g,%d\n", f.t, f.valid ? f.value : 0.0,
                          f.valid ? 1 : 0);
            os << buf;
        }
    }

    static ObservationSequence read_csv(std::istream& is) {
        ObservationSequence obs;
        std::string line;
        if (!std::getline(is, line)) throw ConfigError("observation csv: empty file");
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            Frame f;
            int valid = 1;
            if (std::sscanf(line.c_str(), "%lf,%lf,%d", &f.t, &f.value, &valid) != 3)
                throw ConfigError("observation csv: bad row: " + line);
            f.valid = valid != 0;
            obs.frames.push_back(f);
        }
        return obs;
    }
};

/// Sample a uniformly-spaced channel trace at the observer frame rate
/// (nearest sample), add noise, quantize, drop frames.
inline ObservationSequence observe(const std::vector<double>& times,
                                   const std::vector<double>& values,
                                   const ObserverParams& params, Rng& rng) {
    params.validate();
    if (times.size() != values.size() || times.size() < 2)
        throw ConfigError("observe: need a trace with >= 2 samples");
    const double trace_dt = (times.back() - times.front()) /
                            static_cast<double>(times.size() - 1);
    if (1.0 / params.fps < trace_dt - 1e-12)
        throw ConfigError("observe: fps exceeds trace sample rate");
    ObservationSequence obs;
    const double frame_dt = 1.0 / params.fps;
    // frame timestamps by index, not accumulation: repeated += drifts enough
    // to land frames on the wrong side of schedule boundaries
    for (std::size_t n = 0;; ++n) {
        double t = times.front() + params.start_offset + static_cast<double>(n) * frame_dt;
        if (t > times.back() + 1e-9) break;
        auto idx = static_cast<std::size_t>(std::llround((t - times.front()) / trace_dt));
        idx = std::min(idx, values.size() - 1);
        Frame f;
        f.t = t + params.latency;
        if (rng.bernoulli(params.dropout_prob)) {
            f.valid = false;
        } else {
            double v = values[idx];
            if (params.noise_sigma > 0.0) v += rng.gaussian(0.0, params.noise_sigma);
            if (params.quantization > 0.0)
                v = params.quantization * std::round(v / params.quantization);
            f.value = v;
        }
        obs.frames.push_back(f);
    }
    return obs;
}

// ---------------------------------------------------------------------------
// Scheme-1 decoding: per-bit template correlation

struct DecodedBits {
    BitString bits;
    std::vector<double> confidence;  // one entry per bit, 0 for erasures
};

namespace detail {

/// Expected deflect-return response shape over one bit period, first-order
/// lag with an assumed time constant of a quarter period.
inline double scheme1_template(double phase, double tau_frac = 0.25) {
    const double k = 1.0 / tau_frac;
    if (phase < 0.5) return 1.0 - std::exp(-phase * k);
    double peak = 1.0 - std::exp(-0.5 * k);
    return peak * std::exp(-(phase - 0.5) * k);
}

}  // namespace detail

/// Correlate each bit window of the (timestamp-aligned) observation against
/// the +/- deflect-return template; the correlation sign gives the bit. A
/// window with too few valid frames yields an erasure, never a guess.
inline DecodedBits decode_scheme1(const ObservationSequence& obs, double bit_rate,
                                  double amplitude_hint, double t_start,
                                  std::size_t n_bits) {
    if (bit_rate <= 0.0) throw ConfigError("decode_scheme1: bit_rate must be > 0");
    const double period = 1.0 / bit_rate;
    DecodedBits out;
    for (std::size_t k = 0; k < n_bits; ++k) {
        const double w0 = t_start + static_cast<double>(k) * period;
        const double w1 = w0 + period;
        std::vector<double> vals, tmpl;
        std::size_t slots = 0;
        for (const auto& f : obs.frames) {
            if (f.t < w0 || f.t >= w1) continue;
            ++slots;
            if (!f.valid) continue;
            vals.push_back(f.value);
            tmpl.push_back(detail::scheme1_template((f.t - w0) / period));
        }
        const std::size_t need = std::min<std::size_t>(3, slots);
        if (vals.size() < std::max<std::size_t>(need, 2)) {
            out.bits.push_back('E');
            out.confidence.push_back(0.0);
            continue;
        }
        double vmean = 0.0, tmean = 0.0;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            vmean += vals[i];
            tmean += tmpl[i];
        }
        vmean /= static_cast<double>(vals.size());
        tmean /= static_cast<double>(vals.size());
        double corr = 0.0, energy = 0.0;
        for (std::size_t i = 0; i < vals.size(); ++i) {
            corr += (vals[i] - vmean) * (tmpl[i] - tmean);
            energy += (tmpl[i] - tmean) * (tmpl[i] - tmean);
        }
        if (energy <= 1e-12) {
            out.bits.push_back('E');
            out.confidence.push_back(0.0);
            continue;
        }
        out.bits.push_back(corr >= 0.0 ? '1' : '0');
        out.confidence.push_back(std::abs(corr) / (energy * std::max(amplitude_hint, 1e-12)));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scheme-2 decoding: plateau segmentation, duration carries the repeat count

inline BitString decode_scheme2(const ObservationSequence& obs, double amplitude_hint,
                                double hold) {
    if (hold <= 0.0) throw ConfigError("decode_scheme2: hold must be > 0");
    const double gate = 0.5 * amplitude_hint;
    BitString bits;
    // quantize each valid frame to a direction: +1 / -1 / 0 (at reference)
    struct Seg {
        int dir;
        double t_first, t_last;
    };
    std::vector<Seg> segs;
    for (const auto& f : obs.frames) {
        if (!f.valid) continue;
        int dir = f.value > gate ? 1 : (f.value < -gate ? -1 : 0);
        if (dir == 0) continue;
        if (!segs.empty() && segs.back().dir == dir) {
            segs.back().t_last = f.t;
        } else {
            segs.push_back({dir, f.t, f.t});
        }
    }
    const double fdt = obs.frame_dt();
    for (const auto& s : segs) {
        double duration = s.t_last - s.t_first + fdt;
        if (duration < 0.5 * hold) {
            bits.push_back('E');
            continue;
        }
        auto count = static_cast<std::size_t>(std::llround(duration / hold));
        count = std::max<std::size_t>(count, 1);
        bits.append(count, s.dir > 0 ? '1' : '0');
    }
    return bits;
}

// ---------------------------------------------------------------------------
// Signal-to-noise ratio against a known schedule

inline double snr_db(const ObservationSequence& obs,
                     const exfil::PerturbationSchedule& schedule) {
    std::vector<double> sig, noi;
    for (const auto& f : obs.frames) {
        if (!f.valid) continue;
        (schedule.active_at(f.t) ? sig : noi).push_back(f.value);
    }
    if (noi.size() < 2)
        throw ConfigError("snr: no non-encoding frames to estimate the noise floor");
    if (sig.size() < 2) throw ConfigError("snr: schedule does not cover the observation");
    auto power = [](const std::vector<double>& v) {
        double mean = 0.0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double acc = 0.0;
        for (double x : v) acc += (x - mean) * (x - mean);
        return acc / static_cast<double>(v.size());
    };
    double ps = power(sig), pn = power(noi);
    if (pn <= 0.0) return 99.0;  // noiseless floor sentinel
    return std::min(99.0, 10.0 * std::log10(ps / pn));
}

// ---------------------------------------------------------------------------
// Canned camera viewpoints

enum class Viewpoint { front, side, oblique, top };

inline Viewpoint viewpoint_from_string(const std::string& s) {
    if (s == "front") return Viewpoint::front;
    if (s == "side") return Viewpoint::side;
    if (s == "oblique") return Viewpoint::oblique;
    if (s == "top") return Viewpoint::top;
    throw ConfigError("unknown viewpoint: " + s);
}

struct CameraPose {
    double azimuth;    // rad
    double elevation;  // rad above horizontal
};

inline CameraPose camera_pose(Viewpoint v) {
    switch (v) {
        case Viewpoint::front: return {0.0, deg2rad(25.0)};
        case Viewpoint::side: return {deg2rad(90.0), deg2rad(25.0)};
        case Viewpoint::oblique: return {deg2rad(45.0), deg2rad(45.0)};
        case Viewpoint::top: return {0.0, deg2rad(80.0)};
    }
    return {0.0, 0.0};
}

/// Apparent angle of the drone's marker pair under orthographic projection
/// from the given viewpoint. Monotone in yaw, so decoding survives any view;
/// sensitivity scales with elevation and never vanishes.
inline double project_yaw(double yaw, Viewpoint view) {
    CameraPose cam = camera_pose(view);
    double phi = yaw - cam.azimuth;
    return std::atan2(-std::sin(cam.elevation) * std::cos(phi), std::sin(phi));
}

inline std::vector<double> viewpoint_project(const std::vector<double>& yaw_series,
                                             Viewpoint view) {
    std::vector<double> out;
    out.reserve(yaw_series.size());
    for (double y : yaw_series) out.push_back(project_yaw(y, view));
    return out;
}

}  // namespace covertphys::observer

#endif
