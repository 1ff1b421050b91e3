#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "obscrl/errors.hpp"
#include "obscrl/mechanism.hpp"
#include "obscrl/scm.hpp"
#include "support.hpp"

using namespace obscrl;

namespace {

class Linear : public MechanismImpl {
public:
    explicit Linear(Eigen::VectorXd w) : w_(std::move(w)) {}
    std::string kind() const override { return "linear"; }
    std::size_t arity() const override { return static_cast<std::size_t>(w_.size()); }
    double evaluate(const Eigen::VectorXd& x) const override { return w_.dot(x); }
    Eigen::VectorXd gradient(const Eigen::VectorXd&) const override { return w_; }
    Eigen::MatrixXd hessian(const Eigen::VectorXd&) const override {
        return Eigen::MatrixXd::Zero(w_.size(), w_.size());
    }
    nlohmann::json to_json() const override { return {{"kind", "linear"}}; }

private:
    Eigen::VectorXd w_;
};

void check_derivatives(const Mechanism& m, std::uint64_t seed) {
    Rng rng(seed);
    for (int t = 0; t < 20; ++t) {
        const Eigen::VectorXd x = testing::random_point(static_cast<Eigen::Index>(m.arity()), rng, 2.0);
        const Eigen::VectorXd g = testing::fd_gradient([&](const Eigen::VectorXd& y) { return m.evaluate(y); }, x);
        CHECK(testing::rel_err(m.gradient(x), g) <= 1e-5);
        const Eigen::MatrixXd h = testing::fd_jacobian([&](const Eigen::VectorXd& y) { return m.gradient(y); }, x);
        CHECK(testing::rel_err(m.hessian(x), h) <= 1e-5);
    }
}

}  // namespace

TEST_CASE("squared norm values") {
    const Mechanism m = Mechanism::squared_norm(2);
    CHECK(m.evaluate(Eigen::Vector2d(1.0, 2.0)) == doctest::Approx(5.0));
    CHECK(m.gradient(Eigen::Vector2d(1.0, 2.0)).isApprox(Eigen::Vector2d(2.0, 4.0)));
    CHECK(m.hessian(Eigen::Vector2d(0.3, -1.0)).isApprox(2.0 * Eigen::Matrix2d::Identity()));
}

TEST_CASE("analytic derivatives match finite differences") {
    check_derivatives(Mechanism::squared_norm(3), 1);
    check_derivatives(Mechanism::tanh_sum(2), 2);
    check_derivatives(Mechanism::affine(Mechanism::squared_norm(2), 0.7, -0.2, Eigen::Vector2d(1.5, 0.5),
                                        Eigen::Vector2d(0.1, -0.3)),
                      3);
}

TEST_CASE("arity mismatch is rejected") {
    const Mechanism m = Mechanism::squared_norm(2);
    CHECK_THROWS_AS(m.evaluate(Eigen::VectorXd::Zero(3)), DimensionError);
}

TEST_CASE("constant and zero mechanisms") {
    CHECK(Mechanism().evaluate(Eigen::VectorXd(0)) == 0.0);
    CHECK(Mechanism::constant(1.5).evaluate(Eigen::VectorXd(0)) == 1.5);
    CHECK(Mechanism::constant(1.5).arity() == 0);
}

TEST_CASE("nonlinearity check separates squared norm from linear maps") {
    CHECK(is_directionally_nonlinear(Mechanism::squared_norm(3), 5));
    CHECK(is_directionally_nonlinear(Mechanism::tanh_sum(2), 5));
    CHECK(is_directionally_nonlinear(Mechanism::tanh_sum(1), 5));
    CHECK_FALSE(is_directionally_nonlinear(Mechanism(std::make_shared<Linear>(Eigen::Vector2d(1.0, -2.0))), 5));
}

TEST_CASE("registry round trip through json") {
    const Mechanism a = Mechanism::affine(Mechanism::tanh_sum(2), 2.0, 0.5, Eigen::Vector2d(1.0, 3.0),
                                          Eigen::Vector2d(0.0, 1.0));
    const Mechanism b = Mechanism::from_json(a.to_json(), 2);
    const Eigen::Vector2d x(0.4, -0.9);
    CHECK(b.kind() == a.kind());
    CHECK(b.evaluate(x) == doctest::Approx(a.evaluate(x)));
    CHECK(Mechanism::from_json("squared_norm", 2).evaluate(x) == doctest::Approx(x.squaredNorm()));
    CHECK_THROWS(Mechanism::from_json("no_such_kind", 1));
}

TEST_CASE("registry accepts new kinds") {
    MechanismRegistry::instance().add("double_sum", [](std::size_t arity, const nlohmann::json&) {
        return Mechanism::affine(Mechanism::tanh_sum(arity), 2.0, 0.0, Eigen::VectorXd::Ones(arity),
                                 Eigen::VectorXd::Zero(arity));
    });
    CHECK(MechanismRegistry::instance().contains("double_sum"));
    const Mechanism m = MechanismRegistry::instance().make("double_sum", 1, nlohmann::json::object());
    CHECK(m.evaluate(Eigen::VectorXd::Constant(1, 0.5)) == doctest::Approx(2.0 * std::tanh(0.5)));
}

TEST_CASE("scm validates its parts") {
    const Dag g = line_graph(2);
    CHECK_THROWS_AS(Scm(g, {Mechanism(), Mechanism()}, Eigen::Vector2d(1, 1)), StructuralError);
    CHECK_THROWS_AS(Scm(g, {Mechanism(), Mechanism::squared_norm(1)}, Eigen::Vector2d(1, 0)), StructuralError);
    CHECK_NOTHROW(Scm(g, {Mechanism(), Mechanism::squared_norm(1)}, Eigen::Vector2d(1, 0.5)));
}

TEST_CASE("scm json round trip") {
    const Scm s = testing::random_scm(5, 4);
    const Scm t = Scm::from_json(s.to_json());
    CHECK(t.dag().edges() == s.dag().edges());
    CHECK(t.noise_vars().isApprox(s.noise_vars()));
    const auto path = std::filesystem::temp_directory_path() / "obscrl_scm_roundtrip.json";
    s.save(path);
    CHECK(Scm::load(path).to_json() == s.to_json());
    std::filesystem::remove(path);
    CHECK_THROWS_AS(Scm::load("/nonexistent/dir/model.json"), IoError);
}

TEST_CASE("marginal requires ancestral closure") {
    const Scm s = Scm::squared_norm(y_structure(), Eigen::Vector4d(0.5, 0.5, 0.5, 0.5));
    CHECK_NOTHROW(s.marginal({0, 1, 3}));
    CHECK_THROWS_AS(s.marginal({1, 2}), StructuralError);
    CHECK(s.marginal({0, 1, 3}).dag().parents(2) == NodeSet{1});
}
