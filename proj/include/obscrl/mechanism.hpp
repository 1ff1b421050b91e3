#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>

#include <Eigen/Dense>

#include "json.hpp"

namespace obscrl {

// Interface implemented by every analytic mechanism f_i(z_pa).
class MechanismImpl {
public:
    virtual ~MechanismImpl() = default;
    virtual std::string kind() const = 0;
    virtual std::size_t arity() const = 0;
    virtual double evaluate(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::VectorXd gradient(const Eigen::VectorXd& x) const = 0;
    virtual Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const = 0;
    virtual nlohmann::json to_json() const = 0;
};

// Immutable, cheaply copyable handle to a mechanism carrying its own first and
// second derivatives.
class Mechanism {
public:
    Mechanism();  // constant zero, arity 0
    explicit Mechanism(std::shared_ptr<const MechanismImpl> impl);

    static Mechanism constant(double value);
    static Mechanism squared_norm(std::size_t arity);
    // f(x) = sum_j tanh(x_j)
    static Mechanism tanh_sum(std::size_t arity);
    // g(y) = out_scale * inner((y - in_offset) ./ in_scale) + out_offset
    static Mechanism affine(Mechanism inner, double out_scale, double out_offset, Eigen::VectorXd in_scale,
                            Eigen::VectorXd in_offset);

    // Looks up `kind` in the registry. A bare string is accepted as {"kind": s}.
    static Mechanism from_json(const nlohmann::json& j, std::size_t arity);
    nlohmann::json to_json() const { return impl_->to_json(); }

    std::string kind() const { return impl_->kind(); }
    std::size_t arity() const { return impl_->arity(); }
    double evaluate(const Eigen::VectorXd& x) const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const;
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const;

private:
    std::shared_ptr<const MechanismImpl> impl_;
};

using MechanismFactory = std::function<Mechanism(std::size_t arity, const nlohmann::json& params)>;

// Name -> factory table. Built-ins: "zero", "constant", "squared_norm",
// "tanh_sum", "affine".
class MechanismRegistry {
public:
    static MechanismRegistry& instance();

    void add(const std::string& kind, MechanismFactory factory);
    bool contains(const std::string& kind) const;
    Mechanism make(const std::string& kind, std::size_t arity, const nlohmann::json& params) const;

private:
    MechanismRegistry();
    std::map<std::string, MechanismFactory> factories_;
};

struct NonlinearityCheck {
    std::size_t directions = 20;
    std::size_t probes = 100;
    double threshold = 1e-8;
    double box = 2.0;
};

// Statistical check that no fixed unit direction beta has a vanishing second
// directional derivative at every probe point in [-box, box]^arity.
bool is_directionally_nonlinear(const Mechanism& m, std::uint64_t seed, const NonlinearityCheck& cfg = {});

}  // namespace obscrl
