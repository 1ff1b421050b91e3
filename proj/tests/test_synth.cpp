#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "obscrl/csv.hpp"
#include "obscrl/errors.hpp"
#include "obscrl/synth.hpp"
#include "support.hpp"

using namespace obscrl;

TEST_CASE("rng streams are reproducible and distinct") {
    Rng a = Rng::stream(7, "noise", 0);
    Rng b = Rng::stream(7, "noise", 0);
    Rng c = Rng::stream(7, "noise", 1);
    const double x = a.normal();
    CHECK(x == b.normal());
    CHECK(x != c.normal());
    Rng u(3);
    for (int i = 0; i < 1000; ++i) {
        const double v = u.uniform();
        CHECK((v >= 0.0 && v < 1.0));
    }
    CHECK(Rng(1).unit_vector(5).norm() == doctest::Approx(1.0));
}

TEST_CASE("edgeless model has Z equal to E") {
    const Scm s = Scm::squared_norm(Dag(3, {{}, {}, {}}), Eigen::Vector3d(0.2, 0.5, 0.9));
    const auto b = sample_scm(s, 200, 1);
    CHECK(b.Z == b.E);
}

TEST_CASE("two node chain follows the mechanism") {
    const Scm s = Scm::squared_norm(line_graph(2), Eigen::Vector2d(0.4, 0.3));
    const auto b = sample_scm(s, 100, 2);
    for (Eigen::Index m = 0; m < 100; ++m) {
        CHECK(b.Z(m, 0) == b.E(m, 0));
        CHECK(b.Z(m, 1) == doctest::Approx(b.E(m, 0) * b.E(m, 0) + b.E(m, 1)));
    }
}

TEST_CASE("noise variances are reproduced within five percent") {
    const Eigen::Vector3d v(0.1, 0.5, 1.0);
    const auto b = sample_scm(Scm::squared_norm(Dag(3, {{}, {}, {}}), v), 100000, 9);
    for (Eigen::Index i = 0; i < 3; ++i) {
        const double var = (b.E.col(i).array() - b.E.col(i).mean()).square().mean();
        CHECK(std::abs(var / v(i) - 1.0) <= 0.05);
    }
}

TEST_CASE("sampled noise variances lie in range with the right mean") {
    const Eigen::VectorXd v = sample_noise_variances(20000, 3);
    CHECK(v.minCoeff() >= 0.1);
    CHECK(v.maxCoeff() <= 1.0);
    CHECK(std::abs(v.mean() / 0.55 - 1.0) <= 0.03);
}

TEST_CASE("sampling is deterministic in the seed") {
    const Scm s = testing::random_scm(5, 1);
    CHECK(sample_scm(s, 50, 4).Z == sample_scm(s, 50, 4).Z);
    CHECK(sample_scm(s, 50, 4).Z != sample_scm(s, 50, 5).Z);
}

TEST_CASE("min max scaling examples") {
    SampleBatch b;
    b.Z.resize(3, 2);
    b.Z << 1, -2, 2, 0, 3, 2;
    b.E = b.Z;
    const auto s = min_max_scale(b);
    Eigen::MatrixXd want(3, 2);
    want << 0, 0, 0.5, 0.5, 1, 1;
    CHECK(s.Z.isApprox(want));
    CHECK(s.E == b.E);
    CHECK(s.scale_info->scale(0) == doctest::Approx(0.5));
    CHECK(s.scale_info->offset(1) == doctest::Approx(0.5));
    b.Z.col(1).setConstant(4.0);
    CHECK_THROWS_AS(min_max_scale(b), DegenerateError);
}

TEST_CASE("sequential scaling yields unit columns and an exact model") {
    const Scm s = Scm::squared_norm(line_graph(4), Eigen::Vector4d(0.3, 0.6, 0.9, 0.2));
    const auto out = sample_scm_sequential(s, 500, 11);
    const auto& z = out.batch.Z;
    for (Eigen::Index i = 0; i < 4; ++i) {
        CHECK(z.col(i).minCoeff() == doctest::Approx(0.0));
        CHECK(z.col(i).maxCoeff() == doctest::Approx(1.0));
    }
    const auto& info = *out.batch.scale_info;
    for (Eigen::Index m = 0; m < z.rows(); ++m) {
        for (std::size_t i = 0; i < 4; ++i) {
            const auto ii = static_cast<Eigen::Index>(i);
            const double f = out.model.mechanism(i).evaluate(out.model.parent_values(i, z.row(m).transpose()));
            CHECK(z(m, ii) == doctest::Approx(f + info.scale(ii) * out.batch.E(m, ii)).epsilon(1e-10));
        }
    }
    for (Eigen::Index i = 0; i < 4; ++i)
        CHECK(out.model.noise_vars()(i) == doctest::Approx(info.scale(i) * info.scale(i) * s.noise_vars()(i)));
}

TEST_CASE("mixing matrices have full column rank") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const MixingMatrix h = sample_mixing(6, 4, seed);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(h.matrix());
        CHECK(lu.rank() == 4);
        CHECK((h.pinv() * h.matrix()).isApprox(Eigen::MatrixXd::Identity(4, 4), 1e-10));
    }
    CHECK_THROWS_AS(sample_mixing(2, 3, 1), DimensionError);
    CHECK_THROWS_AS(MixingMatrix(Eigen::MatrixXd::Zero(3, 2)), NumericError);
}

TEST_CASE("mixing then pseudo-inverting recovers the latents") {
    const Scm s = testing::random_scm(4, 2);
    const MixingMatrix h = sample_mixing(7, 4, 2);
    const auto b = mix(sample_scm(s, 300, 2), h);
    CHECK(b.X.cols() == 7);
    CHECK((b.X * h.pinv().transpose()).isApprox(b.Z, 1e-9));
    CHECK_THROWS_AS(mix(b, sample_mixing(7, 3, 1)), DimensionError);
}

TEST_CASE("permutation mixing permutes the latents") {
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(3, 3);
    p(0, 2) = p(1, 0) = p(2, 1) = 1.0;
    const auto b = mix(sample_scm(testing::random_scm(3, 8), 40, 8), MixingMatrix(p));
    CHECK(b.X.col(0) == b.Z.col(2));
    CHECK(b.X.col(1) == b.Z.col(0));
    CHECK(beta_matrix(MixingMatrix(p), p).isApprox(Eigen::MatrixXd::Identity(3, 3)));
}

TEST_CASE("csv round trip") {
    Eigen::MatrixXd m(2, 3);
    m << 1.5, -2, 3e-12, 4, 5, 6.25;
    const auto path = std::filesystem::temp_directory_path() / "obscrl_synth_roundtrip.csv";
    write_csv(path, m, {"a", "b", "c"});
    const auto back = read_csv(path);
    CHECK(back.header == std::vector<std::string>{"a", "b", "c"});
    CHECK(back.values == m);
    std::filesystem::remove(path);
}
