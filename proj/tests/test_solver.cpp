#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "json.hpp"
#include "obscrl/errors.hpp"
#include "obscrl/sphere_solver.hpp"
#include "support.hpp"

using namespace obscrl;

namespace {

SolverConfig config(std::uint64_t seed = 0) {
    SolverConfig cfg;
    cfg.seed = seed;
    return cfg;
}

}  // namespace

TEST_CASE("common null direction is found") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed + 1000);
        const Eigen::VectorXd e = rng.unit_vector(4);
        const auto r = find_null_direction(testing::common_null_batch(e, 60, seed), {}, config(seed));
        REQUIRE(r.h);
        CHECK(r.feasible);
        CHECK(r.residual <= 1e-10);
        CHECK(std::abs(r.h->dot(e)) >= 1.0 - 1e-8);
    }
}

TEST_CASE("diagonal batch in two dimensions") {
    std::vector<Eigen::MatrixXd> raw;
    for (int m = 0; m < 20; ++m) raw.push_back(Eigen::Vector2d(0.0, 0.3 * m - 2.0).asDiagonal());
    const auto r = find_null_direction(center(JacobianBatch(raw, SpaceTag::observed)), {}, config());
    REQUIRE(r.h);
    CHECK(r.feasible);
    CHECK(std::abs((*r.h)(0)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("generic random batches are infeasible") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto batch = testing::random_symmetric_batch(4, 50, seed);
        const auto r = find_null_direction(batch, {}, config(seed));
        CHECK_FALSE(r.feasible);
        CHECK(r.residual > 1e-3);
        const double bound = testing::certified_min_max(batch, 48);
        MESSAGE("certified lower bound " << bound << ", solver residual " << r.residual);
        CHECK(bound > 1e-3);
        CHECK(r.residual >= bound);
    }
}

TEST_CASE("feasibility level of a plus/minus pair") {
    const Eigen::Matrix2d a = Eigen::Vector2d(1.0, 2.0).asDiagonal();
    const auto batch = center(JacobianBatch({a, Eigen::Matrix2d(-a)}, SpaceTag::observed));
    CHECK(min_feasibility_level(batch, {}, config()) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(auto_tolerance(batch, {}, config()) == doctest::Approx(1.001).epsilon(1e-6));
}

TEST_CASE("feasibility level bounds") {
    Rng rng(5);
    const auto common = testing::common_null_batch(rng.unit_vector(3), 40, 5);
    CHECK(min_feasibility_level(common, {}, config()) <= 1e-8);
    const auto batch = testing::random_symmetric_batch(3, 30, 6);
    const double t = min_feasibility_level(batch, {}, config());
    for (int k = 0; k < 20; ++k) {
        const Eigen::VectorXd v = rng.unit_vector(3);
        double worst = 0.0;
        for (const auto& j : batch.centered()) worst = std::max(worst, std::abs(v.dot(j * v)));
        CHECK(t <= worst);
    }
}

TEST_CASE("constraints hold regardless of feasibility") {
    Rng rng(7);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto batch = testing::random_symmetric_batch(5, 25, seed);
        std::vector<Eigen::VectorXd> ortho{rng.normal_vector(5), rng.normal_vector(5)};
        const auto r = find_null_direction(batch, ortho, config(seed));
        REQUIRE(r.h);
        CHECK(std::abs(r.h->norm() - 1.0) <= 1e-10);
        for (const auto& q : ortho) CHECK(std::abs(r.h->dot(q)) <= 1e-8);
    }
}

TEST_CASE("orthogonality constraints exclude a found direction") {
    const Eigen::Vector3d e(0, 0, 1);
    std::vector<Eigen::MatrixXd> raw;
    Rng rng(8);
    // e and e1 are both null directions here.
    for (int m = 0; m < 30; ++m) raw.push_back(Eigen::Vector3d(0.0, rng.normal(), 0.0).asDiagonal());
    const auto batch = center(JacobianBatch(raw, SpaceTag::observed));
    const auto r = find_null_direction(batch, {e}, config());
    REQUIRE(r.h);
    CHECK(r.feasible);
    CHECK(std::abs((*r.h)(0)) == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("objective is sign invariant") {
    const auto batch = testing::random_symmetric_batch(4, 20, 9);
    Rng rng(9);
    for (int k = 0; k < 10; ++k) {
        const Eigen::VectorXd v = rng.unit_vector(4);
        CHECK(centered_quartic_mean(batch, v) == centered_quartic_mean(batch, Eigen::VectorXd(-v)));
    }
}

TEST_CASE("quartic mean equals the sample variance of the quadratic form") {
    Rng rng(10);
    for (int t = 0; t < 100; ++t) {
        const auto d = static_cast<Eigen::Index>(2 + t % 5);
        const auto batch = testing::random_symmetric_batch(d, 10 + t, static_cast<std::uint64_t>(t));
        const Eigen::VectorXd v = rng.unit_vector(d);
        Eigen::VectorXd q(static_cast<Eigen::Index>(batch.size()));
        for (std::size_t m = 0; m < batch.size(); ++m) q(static_cast<Eigen::Index>(m)) = v.dot(batch.raw(m) * v);
        const double var = q.array().square().mean() - q.mean() * q.mean();
        CHECK(std::abs(centered_quartic_mean(batch, v) - var) <= 1e-10);
    }
}

TEST_CASE("more restarts never worsen the best objective") {
    const auto batch = testing::random_symmetric_batch(5, 40, 11);
    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t r : {1, 2, 4, 8, 16}) {
        SolverConfig cfg = config(3);
        cfg.restarts = r;
        const double obj = find_null_direction(batch, {}, cfg).objective;
        CHECK(obj <= prev);
        prev = obj;
    }
}

TEST_CASE("solver is deterministic in its seed") {
    const auto batch = testing::random_symmetric_batch(4, 30, 12);
    const auto a = find_null_direction(batch, {}, config(4));
    const auto b = find_null_direction(batch, {}, config(4));
    CHECK(*a.h == *b.h);
    CHECK(a.restart == b.restart);
}

TEST_CASE("trace reports every restart") {
    const auto batch = testing::random_symmetric_batch(3, 10, 13);
    SolverConfig cfg = config();
    cfg.restarts = 5;
    std::vector<SolverTraceEntry> seen;
    cfg.trace = [&](const SolverTraceEntry& e) { seen.push_back(e); };
    find_null_direction(batch, {}, cfg);
    CHECK(seen.size() == 5);
    const auto j = nlohmann::json::parse(to_json_line(seen.front()));
    CHECK(j.contains("restart"));
    CHECK(j.contains("residual"));
}

TEST_CASE("prune examples") {
    std::vector<Eigen::MatrixXd> raw;
    for (int m = 0; m < 4; ++m) raw.push_back(Eigen::Matrix2d::Identity() * (m % 2 ? 1.0 : -1.0));
    raw[2] = Eigen::Matrix2d::Identity() * 100.0;
    const auto batch = center(JacobianBatch(raw, SpaceTag::observed));
    const auto same = prune_outliers(batch, 0.0);
    CHECK(same.size() == 4);
    const auto pruned = prune_outliers(batch, 0.25);
    REQUIRE(pruned.size() == 3);
    for (const auto& j : pruned.raw()) CHECK(j.cwiseAbs().maxCoeff() == 1.0);
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, 2);
    for (const auto& c : pruned.centered()) sum += c;
    CHECK(sum.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK_THROWS_AS(prune_outliers(batch, 0.9), DegenerateError);
    CHECK_THROWS_AS(prune_outliers(batch, 1.0), StructuralError);
}

TEST_CASE("error cases") {
    const auto batch = testing::random_symmetric_batch(2, 10, 14);
    CHECK_THROWS_AS(find_null_direction(batch, {Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 1)}, config()),
                    NoFreeDirectionError);
    const auto big = testing::random_symmetric_batch(3, 10, 14);
    CHECK_THROWS_AS(find_null_direction(big, {Eigen::Vector3d(1, 0, 0), Eigen::Vector3d(2, 0, 0)}, config()),
                    StructuralError);
    CHECK_THROWS_AS(find_null_direction(JacobianBatch({Eigen::Matrix2d::Identity(), Eigen::Matrix2d::Zero()},
                                                      SpaceTag::observed),
                                        {}, config()),
                    StructuralError);
    SolverConfig bad = config();
    bad.tol = 0.0;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
    bad = config();
    bad.restarts = 0;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
    bad = config();
    bad.prune_fraction = 1.0;
    CHECK_THROWS_AS(bad.validate(), StructuralError);
}
