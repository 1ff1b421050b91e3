#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include <Eigen/Dense>

namespace obscrl {

// Seedable generator with portable output.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the standard;
// the uniform and normal transforms are implemented here because the standard
// distributions are implementation-defined. Independent streams are derived
// from (seed, tag, index) with splitmix64, e.g. one stream per noise column.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    static Rng stream(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal by Box-Muller (two uniforms per draw, no caching).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    Eigen::VectorXd normal_vector(Eigen::Index n);
    Eigen::MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols);
    Eigen::VectorXd unit_vector(Eigen::Index n);

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace obscrl
