#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "obscrl/errors.hpp"
#include "obscrl/metrics.hpp"
#include "obscrl/oracle.hpp"
#include "obscrl/recovery.hpp"
#include "support.hpp"

using namespace obscrl;

namespace {

struct Setup {
    ScaledSample data;
    MixingMatrix h;
    Eigen::MatrixXd X;
};

Setup make(const Dag& g, std::uint64_t seed, Eigen::Index samples = 2000, bool identity = false) {
    const Scm scm = Scm::squared_norm(g, sample_noise_variances(g.size(), seed));
    auto data = sample_scm_sequential(scm, samples, seed);
    const auto n = static_cast<Eigen::Index>(g.size());
    MixingMatrix h = identity ? MixingMatrix::identity(n) : sample_mixing(n, n, seed);
    Eigen::MatrixXd X = mix(data.batch, h).X;
    return {std::move(data), std::move(h), std::move(X)};
}

RecoveryResult run(const Setup& s, std::uint64_t seed = 0, bool whiten = true) {
    OracleProvider oracle(s.data.model, s.h, s.data.batch.Z);
    RecoveryOptions opts;
    opts.seed = seed;
    opts.whiten = whiten;
    return recover_latents(s.X, oracle, opts);
}

std::vector<std::size_t> layer_sizes(const RecoveryResult& r) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < r.layer_count(); ++k) out.push_back(r.coordinates_in(k).size());
    return out;
}

Eigen::MatrixXd cols(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) {
    Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(idx[k]));
    return out;
}

// Returns random symmetric Jacobians, so no coordinate ever has zero variance.
class NoiseProvider : public JacobianProvider {
public:
    JacobianBatch jacobians(const RoundInput& in) override {
        Rng rng(in.round + 1);
        std::vector<Eigen::MatrixXd> raw;
        for (Eigen::Index m = 0; m < in.X_hat.rows(); ++m) {
            const Eigen::MatrixXd a = rng.normal_matrix(in.W.rows(), in.W.rows());
            raw.push_back(a + a.transpose());
        }
        return center(JacobianBatch(raw, SpaceTag::estimated_latent));
    }
    bool exact() const override { return true; }
    std::string name() const override { return "noise"; }
};

}  // namespace

TEST_CASE("line graph peels one coordinate per round") {
    const Setup s = make(line_graph(4), 1);
    const RecoveryResult r = run(s);
    CHECK_FALSE(r.stalled);
    CHECK(r.round_log.size() == 4);
    CHECK(layer_sizes(r) == std::vector<std::size_t>{1, 1, 1, 1});
    const auto root = r.coordinates_in(3);
    REQUIRE(root.size() == 1);
    const Eigen::MatrixXd c = abs_correlation(s.data.batch.Z.col(0), r.Z_hat.col(static_cast<Eigen::Index>(root[0])));
    CHECK(c(0, 0) >= 0.99);
}

TEST_CASE("Y structure layer sizes and upstream loadings") {
    const Setup s = make(y_structure(), 2);
    const RecoveryResult r = run(s);
    CHECK(layer_sizes(r) == std::vector<std::size_t>{2, 1, 1});
    const auto rep = check_upstream_structure(r, s.h, layers(y_structure()).layer);
    CHECK(rep.ok);
    const auto mid = r.coordinates_in(1);
    REQUIRE(mid.size() == 1);
    const Eigen::Index j = static_cast<Eigen::Index>(mid[0]);
    CHECK(rep.loadings(j, 2) <= 0.05);
    CHECK(rep.loadings(j, 3) <= 0.05);
}

TEST_CASE("line graph coordinates load only upstream") {
    const Setup s = make(line_graph(4), 3);
    const RecoveryResult r = run(s);
    const auto rep = check_upstream_structure(r, s.h, layers(line_graph(4)).layer);
    CHECK(rep.ok);
    const Eigen::Index root = static_cast<Eigen::Index>(r.coordinates_in(3).at(0));
    for (Eigen::Index i = 1; i < 4; ++i) CHECK(std::abs(rep.loadings(root, i)) <= 0.05);
    CHECK(rep.to_json().contains("max_violation"));
}

TEST_CASE("emitted coordinates are fixed linear functionals") {
    const Setup s = make(line_graph(4), 4);
    const RecoveryResult r = run(s);
    CHECK((s.X * r.functionals.transpose() - r.Z_hat).cwiseAbs().maxCoeff() <= 1e-8);
    const auto rep = check_upstream_structure(r, s.h, layers(line_graph(4)).layer);
    Eigen::MatrixXd beta = r.functionals * s.h.matrix();
    for (Eigen::Index i = 0; i < beta.rows(); ++i) beta.row(i) /= beta.row(i).cwiseAbs().maxCoeff();
    CHECK((beta.cwiseAbs() - rep.loadings.cwiseAbs()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("round zero finds as many zero-variance coordinates as leaves") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dag g = random_dag(4, 0.5, seed + 30);
        const Setup s = make(g, seed + 30);
        const RecoveryResult r = run(s, seed);
        CHECK(r.round_log.front().emitted.size() == g.leaves().size());
    }
}

TEST_CASE("edgeless graph with identity mixing") {
    // Constant Jacobians carry no rotation information, so start from the raw coordinates.
    const Setup s = make(Dag(2, {{}, {}}), 5, 2000, true);
    const RecoveryResult r = run(s, 0, false);
    CHECK(r.round_log.size() == 1);
    CHECK(layer_sizes(r) == std::vector<std::size_t>{2});
    CHECK(mac(s.data.batch.Z, r.Z_hat).mac >= 0.999);
    const NoiseResult e = recover_noise(r);
    CHECK(e.E_hat == r.Z_hat);
}

TEST_CASE("line graph noise is recovered") {
    const Setup s = make(line_graph(4), 6);
    const NoiseResult e = recover_noise(run(s));
    const double score = mac(s.data.batch.E, e.E_hat).mac;
    MESSAGE("noise MAC " << score);
    CHECK(score >= 0.99);
    REQUIRE(e.regression_models.size() == 4);
    for (const auto& m : e.regression_models) CHECK(m.inputs == 3 - m.layer);
}

TEST_CASE("Y structure noise is recovered up to the leaf block") {
    const Setup s = make(y_structure(), 7);
    const RecoveryResult r = run(s);
    const NoiseResult e = recover_noise(r);
    const Eigen::MatrixXd c = abs_correlation(s.data.batch.E, e.E_hat);
    const auto top = r.coordinates_in(2);
    const auto mid = r.coordinates_in(1);
    const auto leaf = r.coordinates_in(0);
    REQUIRE(top.size() == 1);
    REQUIRE(mid.size() == 1);
    REQUIRE(leaf.size() == 2);
    CHECK(c(0, static_cast<Eigen::Index>(top[0])) >= 0.95);
    CHECK(c(1, static_cast<Eigen::Index>(mid[0])) >= 0.95);
    for (std::size_t j : leaf) {
        const auto jj = static_cast<Eigen::Index>(j);
        CHECK(c(0, jj) <= 0.1);
        CHECK(c(1, jj) <= 0.1);
        CHECK(std::max(c(2, jj), c(3, jj)) >= 0.3);
    }
    CHECK(c(2, static_cast<Eigen::Index>(top[0])) <= 0.1);
    CHECK(c(3, static_cast<Eigen::Index>(mid[0])) <= 0.1);
}

TEST_CASE("noise residuals are uncorrelated with upstream estimates") {
    for (const Dag& g : {line_graph(4), y_structure()}) {
        const Setup s = make(g, 8);
        const RecoveryResult r = run(s);
        const NoiseResult e = recover_noise(r);
        for (std::size_t k = 0; k + 1 < r.layer_count(); ++k) {
            std::vector<std::size_t> upstream;
            for (std::size_t j = k + 1; j < r.layer_count(); ++j)
                for (std::size_t c : r.coordinates_in(j)) upstream.push_back(c);
            const Eigen::MatrixXd c = abs_correlation(cols(e.E_hat, r.coordinates_in(k)), cols(e.E_hat, upstream));
            CHECK(c.maxCoeff() <= 0.05);
        }
    }
}

TEST_CASE("within-layer mixtures with cancelling covariance look disentangled") {
    const Scm scm = Scm::squared_norm(y_structure(), sample_noise_variances(4, 9));
    const Eigen::MatrixXd E = sample_scm(scm, 10000, 9).E;
    const double v1 = scm.noise_vars()(2);
    const double v2 = scm.noise_vars()(3);
    const Eigen::Vector2d a(1.0, 1.0);
    const Eigen::Vector2d b(v2, -v1);
    CHECK(a(0) * b(0) * v1 + a(1) * b(1) * v2 == doctest::Approx(0.0));
    const Eigen::VectorXd u = E.middleCols(2, 2) * a;
    const Eigen::VectorXd w = E.middleCols(2, 2) * b;
    const double cov = ((u.array() - u.mean()) * (w.array() - w.mean())).mean();
    CHECK(std::abs(cov) <= 3.0 / std::sqrt(10000.0));
}

TEST_CASE("heaviest closed subset") {
    const Dag y = y_structure();
    CHECK(heaviest_closed_subset(y, Eigen::Vector4d(1, 1, 5, 1), 3) == NodeSet{0, 1, 2});
    CHECK(heaviest_closed_subset(y, Eigen::Vector4d(1, 1, 1, 5), 3) == NodeSet{0, 1, 3});
    CHECK(heaviest_closed_subset(y, Eigen::Vector4d(0, 0, 9, 9), 1) == NodeSet{0});
    CHECK_THROWS_AS(heaviest_closed_subset(y, Eigen::Vector4d::Ones(), 5), DimensionError);
}

TEST_CASE("a round without zero-variance coordinates stalls") {
    const Setup s = make(line_graph(3), 10, 200);
    NoiseProvider noise;
    RecoveryOptions opts;
    opts.solver.restarts = 4;
    const RecoveryResult r = recover_latents(s.X, noise, opts);
    CHECK(r.stalled);
    CHECK(r.status() == "partial");
    CHECK(r.round_log.back().stalled);
    CHECK(r.Z_hat.cols() == 3);
    try {
        recover_latents_strict(s.X, noise, opts);
        FAIL("expected a stalled recovery error");
    } catch (const StalledRecoveryError& e) {
        CHECK(e.partial().stalled);
    }
}

TEST_CASE("recovery is deterministic and logs every round") {
    const Setup s = make(line_graph(3), 11, 500);
    const RecoveryResult a = run(s, 3);
    const RecoveryResult b = run(s, 3);
    CHECK(a.Z_hat == b.Z_hat);
    const auto log = a.log_json();
    CHECK(log.at("rounds").size() == a.round_log.size());
    CHECK(a.h_history.size() == a.round_log.size());
}

TEST_CASE("an observed oracle batch drives round zero") {
    const Setup s = make(line_graph(3), 12, 800);
    const JacobianBatch jx = center(latent_to_observed(latent_jacobians(s.data.model, s.data.batch.Z), s.h));
    SolverConfig cfg;
    const RecoveryResult r = recover_latents(jx, s.X, cfg, 1e-8);
    CHECK(r.round_log.front().emitted.size() == 1);
    CHECK(r.provider == "external");
}

TEST_CASE("invalid dimensions are rejected") {
    const Setup s = make(line_graph(3), 13, 100);
    OracleProvider oracle(s.data.model, s.h, s.data.batch.Z);
    RecoveryOptions opts;
    opts.latent_dim = 4;
    CHECK_THROWS_AS(recover_latents(s.X, oracle, opts), DimensionError);
    CHECK_THROWS_AS(OracleProvider(s.data.model, sample_mixing(3, 2, 1), s.data.batch.Z), DimensionError);
}
