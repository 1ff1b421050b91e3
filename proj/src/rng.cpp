#include "obscrl/rng.hpp"

#include <cmath>
#include <numbers>

namespace obscrl {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

Rng Rng::stream(std::uint64_t seed, std::string_view tag, std::uint64_t index) {
    // FNV-1a over the tag.
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    std::uint64_t s = splitmix64(seed);
    s = splitmix64(s ^ h);
    s = splitmix64(s ^ index);
    return Rng(s);
}

double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Eigen::VectorXd Rng::normal_vector(Eigen::Index n) {
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal();
    return v;
}

Eigen::MatrixXd Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
    // Row-major fill so the draw order matches reading order.
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = normal();
    return m;
}

Eigen::VectorXd Rng::unit_vector(Eigen::Index n) {
    Eigen::VectorXd v = normal_vector(n);
    double norm = v.norm();
    while (norm == 0.0) {
        v = normal_vector(n);
        norm = v.norm();
    }
    return v / norm;
}

}  // namespace obscrl
