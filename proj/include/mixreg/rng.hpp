#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mixreg {

// The one pseudorandom generator used across the library. Every experiment
// record stores the seed its stream was created from. Normal deviates come
// from an explicit Box-Muller transform rather than std::normal_distribution,
// so streams do not depend on the standard library implementation.
class Rng {
public:
    static constexpr const char* kVersion = "mixreg.rng/1 mt19937_64+box-muller";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u = 1.0 - uniform();  // (0, 1], keeps the log finite
        const double v = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u));
        const double angle = 2.0 * kPi * v;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace mixreg
