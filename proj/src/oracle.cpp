#include "obscrl/oracle.hpp"

#include <cmath>
#include <numbers>

#include "obscrl/errors.hpp"

namespace obscrl {

namespace {

void check_point(const Scm& scm, const Eigen::VectorXd& z) {
    if (static_cast<std::size_t>(z.size()) != scm.size()) {
        throw DimensionError("latent point has " + std::to_string(z.size()) + " coordinates, model has " +
                             std::to_string(scm.size()));
    }
}

}  // namespace

double log_density(const Scm& scm, const Eigen::VectorXd& z) {
    check_point(scm, z);
    double acc = 0.0;
    for (std::size_t i = 0; i < scm.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double var = scm.noise_vars()(ii);
        const double r = z(ii) - scm.mechanism(i).evaluate(scm.parent_values(i, z));
        acc += -r * r / (2.0 * var) - 0.5 * std::log(2.0 * std::numbers::pi * var);
    }
    return acc;
}

Eigen::VectorXd score_latent(const Scm& scm, const Eigen::VectorXd& z) {
    check_point(scm, z);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(z.size());
    for (std::size_t i = 0; i < scm.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const Eigen::VectorXd zpa = scm.parent_values(i, z);
        const double w = (z(ii) - scm.mechanism(i).evaluate(zpa)) / scm.noise_vars()(ii);
        s(ii) -= w;
        const NodeSet& pa = scm.dag().parents(i);
        if (pa.empty()) continue;
        const Eigen::VectorXd g = scm.mechanism(i).gradient(zpa);
        for (std::size_t a = 0; a < pa.size(); ++a) s(static_cast<Eigen::Index>(pa[a])) += g(static_cast<Eigen::Index>(a)) * w;
    }
    return s;
}

Eigen::MatrixXd jacobian_latent(const Scm& scm, const Eigen::VectorXd& z) {
    check_point(scm, z);
    const Eigen::Index n = z.size();
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < scm.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const double inv_var = 1.0 / scm.noise_vars()(ii);
        j(ii, ii) -= inv_var;
        const NodeSet& pa = scm.dag().parents(i);
        if (pa.empty()) continue;
        const Eigen::VectorXd zpa = scm.parent_values(i, z);
        const double r = z(ii) - scm.mechanism(i).evaluate(zpa);
        const Eigen::VectorXd g = scm.mechanism(i).gradient(zpa);
        const Eigen::MatrixXd h = scm.mechanism(i).hessian(zpa);
        // -(e_i - g)(e_i - g)^T expands to -e_i e_i^T + e_i g^T + g e_i^T - g g^T.
        for (std::size_t a = 0; a < pa.size(); ++a) {
            const auto pa_a = static_cast<Eigen::Index>(pa[a]);
            const auto ia = static_cast<Eigen::Index>(a);
            j(ii, pa_a) += inv_var * g(ia);
            j(pa_a, ii) += inv_var * g(ia);
            for (std::size_t b = 0; b < pa.size(); ++b) {
                const auto pa_b = static_cast<Eigen::Index>(pa[b]);
                const auto ib = static_cast<Eigen::Index>(b);
                j(pa_a, pa_b) += inv_var * (r * h(ia, ib) - g(ia) * g(ib));
            }
        }
    }
    return 0.5 * (j + j.transpose());
}

JacobianBatch latent_jacobians(const Scm& scm, const Eigen::MatrixXd& Z) {
    if (static_cast<std::size_t>(Z.cols()) != scm.size()) throw DimensionError("latent_jacobians: Z column count");
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(Z.rows()));
    for (Eigen::Index m = 0; m < Z.rows(); ++m) out.push_back(jacobian_latent(scm, Z.row(m).transpose()));
    JacobianBatch batch(std::move(out), SpaceTag::latent);
    return batch.size() >= 2 ? center(std::move(batch)) : batch;
}

JacobianBatch latent_to_observed(const JacobianBatch& latent, const MixingMatrix& h) {
    if (latent.tag() != SpaceTag::latent) throw StructuralError("latent_to_observed expects a latent-space batch");
    if (latent.dim() != h.cols()) throw DimensionError("latent_to_observed: batch dimension differs from n");
    const Eigen::MatrixXd& p = h.pinv();
    std::vector<Eigen::MatrixXd> out;
    out.reserve(latent.size());
    for (const auto& j : latent.raw()) out.push_back(p.transpose() * j * p);
    JacobianBatch batch(std::move(out), SpaceTag::observed);
    return latent.is_centered() ? center(std::move(batch)) : batch;
}

Eigen::VectorXd score_to_observed(const Eigen::VectorXd& latent_score, const MixingMatrix& h) {
    if (latent_score.size() != h.cols()) throw DimensionError("score_to_observed: score length differs from n");
    return h.pinv().transpose() * latent_score;
}

Scm affine_reparameterize(const Scm& scm, const ScaleInfo& info) {
    const auto n = static_cast<Eigen::Index>(scm.size());
    if (info.scale.size() != n || info.offset.size() != n) throw DimensionError("affine_reparameterize: scale size");
    std::vector<Mechanism> mech;
    mech.reserve(scm.size());
    Eigen::VectorXd vars(n);
    for (std::size_t i = 0; i < scm.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        const NodeSet& pa = scm.dag().parents(i);
        Eigen::VectorXd in_scale(static_cast<Eigen::Index>(pa.size()));
        Eigen::VectorXd in_offset(static_cast<Eigen::Index>(pa.size()));
        for (std::size_t a = 0; a < pa.size(); ++a) {
            in_scale(static_cast<Eigen::Index>(a)) = info.scale(static_cast<Eigen::Index>(pa[a]));
            in_offset(static_cast<Eigen::Index>(a)) = info.offset(static_cast<Eigen::Index>(pa[a]));
        }
        if (pa.empty()) {
            mech.push_back(Mechanism::constant(info.scale(ii) * scm.mechanism(i).evaluate(Eigen::VectorXd(0)) +
                                               info.offset(ii)));
        } else {
            mech.push_back(Mechanism::affine(scm.mechanism(i), info.scale(ii), info.offset(ii), std::move(in_scale),
                                             std::move(in_offset)));
        }
        vars(ii) = info.scale(ii) * info.scale(ii) * scm.noise_vars()(ii);
    }
    return Scm(scm.dag(), std::move(mech), std::move(vars));
}

}  // namespace obscrl
