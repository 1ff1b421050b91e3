#include "obscrl/mechanism.hpp"

#include <cmath>
#include <utility>

#include "obscrl/errors.hpp"
#include "obscrl/rng.hpp"

namespace obscrl {

namespace {

void check_arg(const Eigen::VectorXd& x, std::size_t arity) {
    if (static_cast<std::size_t>(x.size()) != arity) {
        throw DimensionError("mechanism expects " + std::to_string(arity) + " arguments, got " +
                             std::to_string(x.size()));
    }
}

class ConstantMechanism final : public MechanismImpl {
public:
    explicit ConstantMechanism(double value) : value_(value) {}
    std::string kind() const override { return value_ == 0.0 ? "zero" : "constant"; }
    std::size_t arity() const override { return 0; }
    double evaluate(const Eigen::VectorXd&) const override { return value_; }
    Eigen::VectorXd gradient(const Eigen::VectorXd&) const override { return Eigen::VectorXd(0); }
    Eigen::MatrixXd hessian(const Eigen::VectorXd&) const override { return Eigen::MatrixXd(0, 0); }
    nlohmann::json to_json() const override {
        if (value_ == 0.0) return "zero";
        return {{"kind", "constant"}, {"value", value_}};
    }

private:
    double value_;
};

class SquaredNorm final : public MechanismImpl {
public:
    explicit SquaredNorm(std::size_t arity) : arity_(arity) {}
    std::string kind() const override { return "squared_norm"; }
    std::size_t arity() const override { return arity_; }
    double evaluate(const Eigen::VectorXd& x) const override { return x.squaredNorm(); }
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override { return 2.0 * x; }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override {
        return 2.0 * Eigen::MatrixXd::Identity(x.size(), x.size());
    }
    nlohmann::json to_json() const override { return "squared_norm"; }

private:
    std::size_t arity_;
};

class TanhSum final : public MechanismImpl {
public:
    explicit TanhSum(std::size_t arity) : arity_(arity) {}
    std::string kind() const override { return "tanh_sum"; }
    std::size_t arity() const override { return arity_; }
    double evaluate(const Eigen::VectorXd& x) const override { return x.array().tanh().sum(); }
    Eigen::VectorXd gradient(const Eigen::VectorXd& x) const override {
        return (1.0 - x.array().tanh().square()).matrix();
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& x) const override {
        const Eigen::ArrayXd t = x.array().tanh();
        return (-2.0 * t * (1.0 - t.square())).matrix().asDiagonal();
    }
    nlohmann::json to_json() const override { return "tanh_sum"; }

private:
    std::size_t arity_;
};

class AffineMechanism final : public MechanismImpl {
public:
    AffineMechanism(Mechanism inner, double out_scale, double out_offset, Eigen::VectorXd in_scale,
                    Eigen::VectorXd in_offset)
        : inner_(std::move(inner)),
          out_scale_(out_scale),
          out_offset_(out_offset),
          in_scale_(std::move(in_scale)),
          in_offset_(std::move(in_offset)) {
        const auto a = static_cast<Eigen::Index>(inner_.arity());
        if (in_scale_.size() != a || in_offset_.size() != a) {
            throw DimensionError("affine mechanism: input scale/offset size differs from inner arity");
        }
        if ((in_scale_.array() == 0.0).any()) throw DegenerateError("affine mechanism: zero input scale");
    }
    std::string kind() const override { return "affine"; }
    std::size_t arity() const override { return inner_.arity(); }
    double evaluate(const Eigen::VectorXd& y) const override {
        return out_scale_ * inner_.evaluate(to_inner(y)) + out_offset_;
    }
    Eigen::VectorXd gradient(const Eigen::VectorXd& y) const override {
        return out_scale_ * inner_.gradient(to_inner(y)).cwiseQuotient(in_scale_);
    }
    Eigen::MatrixXd hessian(const Eigen::VectorXd& y) const override {
        const Eigen::VectorXd inv = in_scale_.cwiseInverse();
        return out_scale_ * inv.asDiagonal() * inner_.hessian(to_inner(y)) * inv.asDiagonal();
    }
    nlohmann::json to_json() const override {
        return {{"kind", "affine"},
                {"inner", inner_.to_json()},
                {"out_scale", out_scale_},
                {"out_offset", out_offset_},
                {"in_scale", std::vector<double>(in_scale_.data(), in_scale_.data() + in_scale_.size())},
                {"in_offset", std::vector<double>(in_offset_.data(), in_offset_.data() + in_offset_.size())}};
    }

private:
    Eigen::VectorXd to_inner(const Eigen::VectorXd& y) const { return (y - in_offset_).cwiseQuotient(in_scale_); }

    Mechanism inner_;
    double out_scale_;
    double out_offset_;
    Eigen::VectorXd in_scale_;
    Eigen::VectorXd in_offset_;
};

Eigen::VectorXd json_vector(const nlohmann::json& j) {
    std::vector<double> v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Mechanism::Mechanism() : impl_(std::make_shared<ConstantMechanism>(0.0)) {}

Mechanism::Mechanism(std::shared_ptr<const MechanismImpl> impl) : impl_(std::move(impl)) {
    if (!impl_) throw StructuralError("null mechanism");
}

Mechanism Mechanism::constant(double value) { return Mechanism(std::make_shared<ConstantMechanism>(value)); }

Mechanism Mechanism::squared_norm(std::size_t arity) { return Mechanism(std::make_shared<SquaredNorm>(arity)); }

Mechanism Mechanism::tanh_sum(std::size_t arity) { return Mechanism(std::make_shared<TanhSum>(arity)); }

Mechanism Mechanism::affine(Mechanism inner, double out_scale, double out_offset, Eigen::VectorXd in_scale,
                            Eigen::VectorXd in_offset) {
    return Mechanism(std::make_shared<AffineMechanism>(std::move(inner), out_scale, out_offset, std::move(in_scale),
                                                       std::move(in_offset)));
}

Mechanism Mechanism::from_json(const nlohmann::json& j, std::size_t arity) {
    if (j.is_string()) return MechanismRegistry::instance().make(j.get<std::string>(), arity, nlohmann::json::object());
    if (!j.is_object() || !j.contains("kind")) throw StructuralError("mechanism JSON needs a \"kind\"");
    return MechanismRegistry::instance().make(j.at("kind").get<std::string>(), arity, j);
}

double Mechanism::evaluate(const Eigen::VectorXd& x) const {
    check_arg(x, arity());
    return impl_->evaluate(x);
}

Eigen::VectorXd Mechanism::gradient(const Eigen::VectorXd& x) const {
    check_arg(x, arity());
    return impl_->gradient(x);
}

Eigen::MatrixXd Mechanism::hessian(const Eigen::VectorXd& x) const {
    check_arg(x, arity());
    return impl_->hessian(x);
}

MechanismRegistry& MechanismRegistry::instance() {
    static MechanismRegistry registry;
    return registry;
}

MechanismRegistry::MechanismRegistry() {
    factories_["zero"] = [](std::size_t arity, const nlohmann::json&) {
        if (arity != 0) throw StructuralError("\"zero\" mechanism is only valid for root nodes");
        return Mechanism();
    };
    factories_["constant"] = [](std::size_t arity, const nlohmann::json& p) {
        if (arity != 0) throw StructuralError("\"constant\" mechanism is only valid for root nodes");
        return Mechanism::constant(p.value("value", 0.0));
    };
    factories_["squared_norm"] = [](std::size_t arity, const nlohmann::json&) {
        return Mechanism::squared_norm(arity);
    };
    factories_["tanh_sum"] = [](std::size_t arity, const nlohmann::json&) { return Mechanism::tanh_sum(arity); };
    factories_["affine"] = [](std::size_t arity, const nlohmann::json& p) {
        Mechanism inner = Mechanism::from_json(p.at("inner"), arity);
        return Mechanism::affine(std::move(inner), p.at("out_scale").get<double>(), p.at("out_offset").get<double>(),
                                 json_vector(p.at("in_scale")), json_vector(p.at("in_offset")));
    };
}

void MechanismRegistry::add(const std::string& kind, MechanismFactory factory) {
    factories_[kind] = std::move(factory);
}

bool MechanismRegistry::contains(const std::string& kind) const { return factories_.count(kind) != 0; }

Mechanism MechanismRegistry::make(const std::string& kind, std::size_t arity, const nlohmann::json& params) const {
    auto it = factories_.find(kind);
    if (it == factories_.end()) throw StructuralError("unknown mechanism kind \"" + kind + "\"");
    Mechanism m = it->second(arity, params);
    if (m.arity() != arity) throw StructuralError("mechanism \"" + kind + "\" built with wrong arity");
    return m;
}

bool is_directionally_nonlinear(const Mechanism& m, std::uint64_t seed, const NonlinearityCheck& cfg) {
    const auto a = static_cast<Eigen::Index>(m.arity());
    if (a == 0) return false;
    Rng rng = Rng::stream(seed, "nonlinearity");
    std::vector<Eigen::VectorXd> probes;
    probes.reserve(cfg.probes);
    for (std::size_t p = 0; p < cfg.probes; ++p) {
        Eigen::VectorXd z(a);
        for (Eigen::Index j = 0; j < a; ++j) z(j) = rng.uniform(-cfg.box, cfg.box);
        probes.push_back(std::move(z));
    }
    std::vector<Eigen::MatrixXd> hessians;
    hessians.reserve(probes.size());
    for (const auto& z : probes) hessians.push_back(m.hessian(z));

    for (std::size_t b = 0; b < cfg.directions; ++b) {
        const Eigen::VectorXd beta = rng.unit_vector(a);
        bool curved = false;
        for (const auto& h : hessians) {
            if (std::abs(beta.dot(h * beta)) >= cfg.threshold) {
                curved = true;
                break;
            }
        }
        if (!curved) return false;
    }
    return true;
}

}  // namespace obscrl
