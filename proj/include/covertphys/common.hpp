#ifndef COVERTPHYS_COMMON_HPP
#define COVERTPHYS_COMMON_HPP

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace covertphys {

// Error taxonomy mirrored by the CLI exit codes.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;  // exit code 2
};
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;  // exit code 3
};
struct IntegrityError : std::runtime_error {
    using std::runtime_error::runtime_error;  // exit code 4
};
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    double r = std::remainder(a, kTwoPi);
    if (r <= -kPi) r += kTwoPi;
    return r;
}

/// Signed angular difference a - b, wrapped to (-pi, pi].
inline double ang_diff(double a, double b) { return wrap_angle(a - b); }

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t& s) {
    std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

/// Trial seed derived from (master seed, trial index); independent of the
/// order trials execute in.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master ^ (0xd1b54a32d192ed03ULL * (index + 1));
    std::uint64_t a = detail::splitmix64(s);
    std::uint64_t b = detail::splitmix64(s);
    return a ^ (b << 1);
}

/// Deterministic PRNG: splitmix64 stream with Box-Muller gaussians.
/// std::normal_distribution is implementation-defined, so the gaussian is
/// generated here explicitly.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return detail::splitmix64(state_); }

    /// Uniform in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller, one spare cached.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double th = kTwoPi * u2;
        spare_ = r * std::sin(th);
        have_spare_ = true;
        return r * std::cos(th);
    }

    double gaussian(double mean, double sigma) { return mean + sigma * gaussian(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Child generator with an independent stream.
    Rng fork(std::uint64_t stream) { return Rng(derive_seed(next_u64(), stream)); }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace covertphys

#endif
