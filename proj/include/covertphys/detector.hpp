#ifndef COVERTPHYS_DETECTOR_HPP
#define COVERTPHYS_DETECTOR_HPP

#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "covertphys/bits.hpp"
#include "covertphys/common.hpp"
#include "covertphys/estimator.hpp"

namespace covertphys::detector {

struct DetectorVerdict {
    bool attacked = false;
    double score = 0.0;
    double threshold = 0.0;
    double t_start = 0.0;
    double t_end = 0.0;
    std::optional<char> decoded_bit;  // for bit-recovering detectors
};

inline BitString decoded_bits(const std::vector<DetectorVerdict>& verdicts) {
    BitString bits;
    for (const auto& v : verdicts)
        if (v.decoded_bit) bits.push_back(*v.decoded_bit);
    return bits;
}

// ---------------------------------------------------------------------------
// Chi-squared residual gate

/// Windowed mean of r^T S^-1 r against the chi-squared quantile with
/// q*window degrees of freedom (scaled back to per-step units). One verdict
/// per step once the window has filled.
inline std::vector<DetectorVerdict> chi2_detect(const std::vector<Innovation>& innovations,
                                                double alpha, int window) {
    if (alpha <= 0.0 || alpha >= 1.0) throw ConfigError("chi2_detect: alpha must be in (0,1)");
    if (window < 1) throw ConfigError("chi2_detect: window must be >= 1");
    std::vector<DetectorVerdict> out;
    if (innovations.empty()) return out;
    const int q = static_cast<int>(innovations.front().r.size());
    boost::math::chi_squared dist(static_cast<double>(q) * window);
    const double threshold = boost::math::quantile(dist, 1.0 - alpha) / window;

    std::vector<double> nis;
    nis.reserve(innovations.size());
    for (const auto& in : innovations) nis.push_back(in.nis());

    double acc = 0.0;
    for (std::size_t i = 0; i < nis.size(); ++i) {
        acc += nis[i];
        if (i >= static_cast<std::size_t>(window)) acc -= nis[i - window];
        if (i + 1 < static_cast<std::size_t>(window)) continue;
        DetectorVerdict v;
        v.score = acc / window;
        v.threshold = threshold;
        v.attacked = v.score > threshold;
        v.t_start = innovations[i + 1 - window].t;
        v.t_end = innovations[i].t;
        out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fixed threshold bands on a deviation series

struct ThresholdBand {
    double low = -0.025;
    double high = 0.025;

    void validate() const {
        if (!(low < high)) throw ConfigError("threshold band: low must be < high");
    }
};

/// Excursions above the high band decode bit 1 (CCW = + = 1), below the low
/// band bit 0; out-of-band runs separated by at most `max_gap` in-band
/// samples merge into one bit, so a single noisy sample at a band crossing
/// cannot split an excursion. An excursion touching both bands is classified
/// by the larger |deviation|.
inline std::vector<DetectorVerdict> threshold_detect(const std::vector<double>& deviation,
                                                     const std::vector<double>& times,
                                                     const ThresholdBand& band,
                                                     std::size_t max_gap = 2) {
    band.validate();
    if (deviation.empty()) throw ConfigError("threshold_detect: empty trace");
    if (times.size() != deviation.size())
        throw ConfigError("threshold_detect: time/value length mismatch");
    auto out_of_band = [&](std::size_t i) {
        return deviation[i] > band.high || deviation[i] < band.low;
    };
    // collect out-of-band runs, then merge across short in-band gaps
    std::vector<std::pair<std::size_t, std::size_t>> runs;  // [first, last]
    std::size_t i = 0;
    while (i < deviation.size()) {
        if (!out_of_band(i)) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < deviation.size() && out_of_band(j + 1)) ++j;
        if (!runs.empty() && i - runs.back().second - 1 <= max_gap)
            runs.back().second = j;
        else
            runs.emplace_back(i, j);
        i = j + 1;
    }
    std::vector<DetectorVerdict> out;
    for (const auto& [first, last] : runs) {
        double max_pos = 0.0, min_neg = 0.0;
        for (std::size_t k = first; k <= last; ++k) {
            max_pos = std::max(max_pos, deviation[k]);
            min_neg = std::min(min_neg, deviation[k]);
        }
        DetectorVerdict v;
        v.attacked = true;
        bool positive = max_pos >= -min_neg;
        v.score = positive ? max_pos : -min_neg;
        v.threshold = positive ? band.high : -band.low;
        v.t_start = times[first];
        v.t_end = times[last];
        v.decoded_bit = positive ? '1' : '0';
        out.push_back(v);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Local extrema search

namespace detail {

struct Extremum {
    std::size_t index;
    double prominence;
    bool is_max;
};

/// Peaks of `x` with their topographic prominence. Plateaus count once (at
/// the plateau midpoint).
inline std::vector<Extremum> find_peaks(const std::vector<double>& x, bool as_max) {
    std::vector<Extremum> peaks;
    const std::size_t n = x.size();
    auto val = [&](std::size_t i) { return as_max ? x[i] : -x[i]; };
    std::size_t i = 1;
    while (i + 1 < n) {
        if (val(i) > val(i - 1)) {
            std::size_t j = i;
            while (j + 1 < n && val(j + 1) == val(i)) ++j;
            if (j + 1 < n && val(j + 1) < val(i)) {
                std::size_t peak = (i + j) / 2;
                // prominence: descend on both sides until a higher value
                double left_min = val(peak), right_min = val(peak);
                for (std::size_t k = peak; k-- > 0;) {
                    if (val(k) > val(peak)) break;
                    left_min = std::min(left_min, val(k));
                }
                for (std::size_t k = j + 1; k < n; ++k) {
                    if (val(k) > val(peak)) break;
                    right_min = std::min(right_min, val(k));
                }
                peaks.push_back({peak, val(peak) - std::max(left_min, right_min), as_max});
                i = j + 1;
                continue;
            }
            i = j + 1;
        } else {
            ++i;
        }
    }
    return peaks;
}

}  // namespace detail

/// Local maxima decode bit 1, minima bit 0, ordered by time. An extremum
/// counts only if it clears the prominence floor both topographically and
/// relative to the resting baseline (median of the leading/trailing edge
/// samples, where the channel is quiet): symbols depart from the baseline,
/// while the return valley between two same-sign symbols sits at it.
inline std::vector<DetectorVerdict> extrema_detect(const std::vector<double>& deviation,
                                                   const std::vector<double>& times,
                                                   double min_prominence,
                                                   double min_separation) {
    if (min_prominence <= 0.0) throw ConfigError("extrema_detect: min_prominence must be > 0");
    if (times.size() != deviation.size())
        throw ConfigError("extrema_detect: time/value length mismatch");
    const std::size_t edge = std::min(deviation.size(),
                                      std::max<std::size_t>(deviation.size() / 20, 5));
    std::vector<double> rest(deviation.begin(),
                             deviation.begin() + static_cast<std::ptrdiff_t>(edge));
    rest.insert(rest.end(), deviation.end() - static_cast<std::ptrdiff_t>(
                                                  std::min(edge, deviation.size() - edge)),
                deviation.end());
    std::nth_element(rest.begin(), rest.begin() + rest.size() / 2, rest.end());
    const double baseline = rest[rest.size() / 2];
    auto maxima = detail::find_peaks(deviation, true);
    auto minima = detail::find_peaks(deviation, false);
    std::vector<detail::Extremum> all;
    for (const auto& e : maxima)
        if (e.prominence >= min_prominence &&
            std::abs(deviation[e.index] - baseline) >= min_prominence)
            all.push_back(e);
    for (const auto& e : minima)
        if (e.prominence >= min_prominence &&
            std::abs(deviation[e.index] - baseline) >= min_prominence)
            all.push_back(e);
    std::sort(all.begin(), all.end(),
              [](const auto& a, const auto& b) { return a.index < b.index; });

    std::vector<DetectorVerdict> out;
    double last_t = -1e300;
    for (const auto& e : all) {
        double t = times[e.index];
        if (t - last_t < min_separation) {
            // keep the more prominent of the colliding pair
            if (!out.empty() && e.prominence > out.back().score) {
                DetectorVerdict replacement = out.back();
                replacement.score = e.prominence;
                replacement.decoded_bit = e.is_max ? '1' : '0';
                replacement.t_start = replacement.t_end = t;
                out.pop_back();
                out.push_back(replacement);
                last_t = t;
            }
            continue;
        }
        DetectorVerdict v;
        v.attacked = true;
        v.score = e.prominence;
        v.threshold = min_prominence;
        v.t_start = v.t_end = t;
        v.decoded_bit = e.is_max ? '1' : '0';
        out.push_back(v);
        last_t = t;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Euclidean waypoint gate (two tracked points, strict inequality)

inline bool euclidean_gate(const Eigen::Vector2d& est_joint, const Eigen::Vector2d& est_eff,
                           const Eigen::Vector2d& act_joint, const Eigen::Vector2d& act_eff,
                           double epsilon) {
    if (epsilon <= 0.0) throw ConfigError("euclidean_gate: epsilon must be > 0");
    double d2 = (est_joint - act_joint).squaredNorm() + (est_eff - act_eff).squaredNorm();
    return std::sqrt(d2) < epsilon;
}

// ---------------------------------------------------------------------------
// Variance comparison (two-sided F-test per channel)

struct VarianceComparison {
    std::string channel;
    double baseline_var = 0.0;
    double test_var = 0.0;
    double ratio = 0.0;
    double p_value = 1.0;
    bool flagged = false;
};

inline double sample_variance(const std::vector<double>& x) {
    if (x.size() < 2) throw ConfigError("variance: need at least 2 samples");
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    double acc = 0.0;
    for (double v : x) acc += (v - mean) * (v - mean);
    return acc / static_cast<double>(x.size() - 1);
}

inline VarianceComparison variance_compare_channel(const std::vector<double>& baseline,
                                                   const std::vector<double>& test,
                                                   double alpha, const std::string& name) {
    if (baseline.size() != test.size())
        throw ConfigError("variance_compare: trace length mismatch on channel " + name);
    VarianceComparison c;
    c.channel = name;
    c.baseline_var = sample_variance(baseline);
    c.test_var = sample_variance(test);
    c.ratio = c.test_var / c.baseline_var;
    boost::math::fisher_f dist(static_cast<double>(test.size() - 1),
                               static_cast<double>(baseline.size() - 1));
    double cdf = boost::math::cdf(dist, c.ratio);
    c.p_value = 2.0 * std::min(cdf, 1.0 - cdf);
    c.flagged = c.p_value < alpha;
    return c;
}

// ---------------------------------------------------------------------------
// Residual whiteness (Ljung-Box portmanteau)

struct WhitenessResult {
    double statistic = 0.0;
    double threshold = 0.0;
    double p_value = 1.0;
    bool pass = true;
};

inline WhitenessResult whiteness_test(const std::vector<double>& residuals, int max_lag,
                                      double alpha = 0.05) {
    if (max_lag < 1) throw ConfigError("whiteness_test: max_lag must be >= 1");
    const std::size_t n = residuals.size();
    if (n < static_cast<std::size_t>(10 * max_lag))
        throw ConfigError("whiteness_test: trace too short (need >= 10*max_lag samples)");
    double mean = 0.0;
    for (double v : residuals) mean += v;
    mean /= static_cast<double>(n);
    double c0 = 0.0;
    for (double v : residuals) c0 += (v - mean) * (v - mean);

    WhitenessResult res;
    boost::math::chi_squared dist(static_cast<double>(max_lag));
    res.threshold = boost::math::quantile(dist, 1.0 - alpha);
    if (c0 == 0.0) {
        // degenerate constant series: zero statistic, reported as pass
        res.statistic = 0.0;
        res.pass = true;
        return res;
    }
    double q = 0.0;
    for (int k = 1; k <= max_lag; ++k) {
        double ck = 0.0;
        for (std::size_t t = k; t < n; ++t)
            ck += (residuals[t] - mean) * (residuals[t - k] - mean);
        double rho = ck / c0;
        q += rho * rho / static_cast<double>(n - k);
    }
    res.statistic = static_cast<double>(n) * (static_cast<double>(n) + 2.0) * q;
    res.p_value = 1.0 - boost::math::cdf(dist, res.statistic);
    res.pass = res.statistic < res.threshold;
    return res;
}

}  // namespace covertphys::detector

#endif
