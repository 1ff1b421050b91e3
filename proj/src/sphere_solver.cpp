#include "obscrl/sphere_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "obscrl/errors.hpp"
#include "obscrl/rng.hpp"

namespace obscrl {

std::string to_json_line(const SolverTraceEntry& e) {
    nlohmann::json j = {{"restart", e.restart}, {"iterations", e.iterations}, {"objective", e.objective},
                        {"residual", e.residual}};
    return j.dump();
}

void SolverConfig::validate() const {
    if (!(tol > 0.0)) throw StructuralError("solver tol must be positive");
    if (restarts < 1) throw StructuralError("solver needs at least one restart");
    if (!(prune_fraction >= 0.0 && prune_fraction < 1.0)) throw StructuralError("prune_fraction must be in [0, 1)");
    if (!(backtrack > 0.0 && backtrack < 1.0)) throw StructuralError("backtrack factor must be in (0, 1)");
}

namespace {

// The centered batch restricted to the free subspace: A_m = B^T J~_m B.
class ReducedProblem {
public:
    ReducedProblem(const JacobianBatch& batch, const Eigen::MatrixXd& basis) : p_(basis.cols()) {
        const auto& c = batch.centered();
        n_ = c.size();
        stacked_.resize(p_ * static_cast<Eigen::Index>(n_), p_);
        for (std::size_t m = 0; m < n_; ++m) {
            stacked_.middleRows(static_cast<Eigen::Index>(m) * p_, p_) = basis.transpose() * c[m] * basis;
        }
        // Second-moment tensor M = (1/N) sum_m vec(A_m) vec(A_m)^T makes the
        // surrogate and its gradient O(p^4) instead of O(N p^2).
        const Eigen::Index pp = p_ * p_;
        Eigen::MatrixXd vecs(pp, static_cast<Eigen::Index>(n_));
        for (std::size_t m = 0; m < n_; ++m) {
            const Eigen::MatrixXd a = block(m);
            vecs.col(static_cast<Eigen::Index>(m)) = Eigen::Map<const Eigen::VectorXd>(a.data(), pp);
        }
        moment_ = vecs * vecs.transpose() / static_cast<double>(n_);
        scale_ = std::max(moment_.trace(), std::numeric_limits<double>::min());
    }

    Eigen::Index dim() const { return p_; }
    double scale() const { return scale_; }
    Eigen::MatrixXd block(std::size_t m) const { return stacked_.middleRows(static_cast<Eigen::Index>(m) * p_, p_); }

    // Surrogate value and Euclidean gradient through the moment tensor.
    double fast_objective(const Eigen::VectorXd& u, Eigen::VectorXd* grad) const {
        const Eigen::MatrixXd uu = u * u.transpose();
        const Eigen::Map<const Eigen::VectorXd> phi(uu.data(), p_ * p_);
        const Eigen::VectorXd mphi = moment_ * phi;
        if (grad) {
            const Eigen::Map<const Eigen::MatrixXd> s(mphi.data(), p_, p_);
            *grad = 4.0 * s * u;
        }
        return phi.dot(mphi);
    }

    // Per-sample residuals r_m = u^T A_m u, computed directly.
    Eigen::VectorXd residuals(const Eigen::VectorXd& u) const {
        const Eigen::VectorXd au = stacked_ * u;
        Eigen::VectorXd r(static_cast<Eigen::Index>(n_));
        for (std::size_t m = 0; m < n_; ++m) r(static_cast<Eigen::Index>(m)) = au.segment(static_cast<Eigen::Index>(m) * p_, p_).dot(u);
        return r;
    }

    double exact_objective(const Eigen::VectorXd& u) const { return residuals(u).squaredNorm() / static_cast<double>(n_); }

    std::size_t samples() const { return n_; }
    const Eigen::MatrixXd& stacked() const { return stacked_; }

private:
    Eigen::Index p_;
    std::size_t n_ = 0;
    Eigen::MatrixXd stacked_;
    Eigen::MatrixXd moment_;
    double scale_ = 1.0;
};

struct Candidate {
    Eigen::VectorXd u;
    double objective = std::numeric_limits<double>::infinity();
    double residual = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
};

Eigen::VectorXd tangent_project(const Eigen::VectorXd& u, const Eigen::VectorXd& g) { return g - u.dot(g) * u; }

std::size_t projected_gradient(const ReducedProblem& prob, Eigen::VectorXd& u, const SolverConfig& cfg) {
    Eigen::VectorXd grad;
    double f = prob.fast_objective(u, &grad);
    double step = 1.0 / prob.scale();
    const double grad_floor = 1e-13 * prob.scale();
    std::size_t it = 0;
    for (; it < cfg.max_iters; ++it) {
        const Eigen::VectorXd g = tangent_project(u, grad);
        const double gg = g.squaredNorm();
        if (std::sqrt(gg) <= grad_floor) break;
        bool accepted = false;
        for (std::size_t b = 0; b < cfg.max_backtracks; ++b) {
            Eigen::VectorXd trial = u - step * g;
            trial.normalize();
            Eigen::VectorXd trial_grad;
            const double ft = prob.fast_objective(trial, &trial_grad);
            if (ft <= f - cfg.armijo * step * gg) {
                const double drop = f - ft;
                u = std::move(trial);
                grad = std::move(trial_grad);
                f = ft;
                accepted = true;
                step /= cfg.backtrack;
                if (drop <= 1e-15 * prob.scale()) it = cfg.max_iters;  // stalled on the floor
                break;
            }
            step *= cfg.backtrack;
        }
        if (!accepted) break;
    }
    return it;
}

// Damped Gauss-Newton on the residual vector in the tangent space of u.
std::size_t gauss_newton(const ReducedProblem& prob, Eigen::VectorXd& u, const SolverConfig& cfg) {
    const Eigen::Index p = prob.dim();
    const auto n = static_cast<Eigen::Index>(prob.samples());
    Eigen::VectorXd r = prob.residuals(u);
    double f = r.squaredNorm();
    double damping = 1e-8;
    std::size_t it = 0;
    for (; it < cfg.polish_iters && f > 0.0; ++it) {
        // Orthonormal tangent basis from the Householder reflection of u.
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(u);
        const Eigen::MatrixXd q = qr.householderQ();
        const Eigen::MatrixXd tangent = q.rightCols(p - 1);
        const Eigen::VectorXd au = prob.stacked() * u;
        Eigen::MatrixXd jac(n, p);
        for (Eigen::Index m = 0; m < n; ++m) jac.row(m) = 2.0 * au.segment(m * p, p).transpose();
        const Eigen::MatrixXd jt = jac * tangent;
        const Eigen::MatrixXd normal = jt.transpose() * jt;
        const Eigen::VectorXd rhs = -jt.transpose() * r;
        const double diag_scale = std::max(normal.diagonal().maxCoeff(), std::numeric_limits<double>::min());
        bool improved = false;
        for (int tries = 0; tries < 12; ++tries) {
            Eigen::MatrixXd damped = normal;
            damped.diagonal().array() += damping * diag_scale;
            const Eigen::VectorXd xi = damped.ldlt().solve(rhs);
            Eigen::VectorXd trial = u + tangent * xi;
            trial.normalize();
            const Eigen::VectorXd rt = prob.residuals(trial);
            const double ft = rt.squaredNorm();
            if (ft < f) {
                u = std::move(trial);
                r = rt;
                const double old = f;
                f = ft;
                damping = std::max(damping * 0.1, 1e-15);
                improved = true;
                if (old - ft <= 1e-14 * old) it = cfg.polish_iters;
                break;
            }
            damping *= 100.0;
        }
        if (!improved) break;
    }
    return it;
}

Eigen::MatrixXd complement_basis(const std::vector<Eigen::VectorXd>& ortho, Eigen::Index d) {
    const auto q = static_cast<Eigen::Index>(ortho.size());
    if (q >= d) throw NoFreeDirectionError("orthogonality constraints leave no free direction");
    if (q == 0) return Eigen::MatrixXd::Identity(d, d);
    Eigen::MatrixXd o(d, q);
    for (Eigen::Index j = 0; j < q; ++j) {
        if (ortho[static_cast<std::size_t>(j)].size() != d) throw DimensionError("orthogonality vector has wrong length");
        o.col(j) = ortho[static_cast<std::size_t>(j)];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(o);
    qr.setThreshold(1e-10);
    if (qr.rank() < q) throw StructuralError("orthogonality vectors are linearly dependent");
    const Eigen::MatrixXd full = qr.householderQ();
    return full.rightCols(d - q);
}

std::vector<Candidate> search(const JacobianBatch& batch, const std::vector<Eigen::VectorXd>& ortho,
                              const SolverConfig& cfg, Eigen::MatrixXd& basis) {
    cfg.validate();
    if (!batch.is_centered()) throw StructuralError("solver needs a centered Jacobian batch");
    basis = complement_basis(ortho, batch.dim());
    const ReducedProblem prob(batch, basis);
    const Eigen::Index p = prob.dim();

    std::vector<Candidate> out;
    const std::size_t restarts = p == 1 ? 1 : cfg.restarts;
    for (std::size_t r = 0; r < restarts; ++r) {
        Candidate c;
        if (p == 1) {
            c.u = Eigen::VectorXd::Ones(1);
        } else {
            Rng rng = Rng::stream(cfg.seed, "restart", r);
            c.u = rng.unit_vector(p);
            c.iterations = projected_gradient(prob, c.u, cfg);
            c.iterations += gauss_newton(prob, c.u, cfg);
        }
        const Eigen::VectorXd res = prob.residuals(c.u);
        c.objective = res.squaredNorm() / static_cast<double>(prob.samples());
        c.residual = res.cwiseAbs().maxCoeff();
        if (cfg.trace) cfg.trace({r, c.iterations, c.objective, c.residual});
        const bool exact = c.residual <= 1e-12 * std::sqrt(prob.scale());
        out.push_back(std::move(c));
        // An exact common null direction cannot be improved upon.
        if (exact) break;
    }
    return out;
}

}  // namespace

NullDirectionResult find_null_direction(const JacobianBatch& batch, const std::vector<Eigen::VectorXd>& ortho,
                                        const SolverConfig& cfg) {
    Eigen::MatrixXd basis;
    const std::vector<Candidate> cands = search(batch, ortho, cfg, basis);
    std::size_t best = cands.size();
    for (std::size_t r = 0; r < cands.size(); ++r) {
        if (cands[r].residual > cfg.tol) continue;
        if (best == cands.size() || cands[r].objective < cands[best].objective) best = r;
    }
    const bool feasible = best != cands.size();
    if (!feasible) {
        best = 0;
        for (std::size_t r = 1; r < cands.size(); ++r)
            if (cands[r].objective < cands[best].objective) best = r;
    }
    NullDirectionResult out;
    Eigen::VectorXd h = basis * cands[best].u;
    h.normalize();
    out.h = std::move(h);
    out.residual = cands[best].residual;
    out.objective = cands[best].objective;
    out.feasible = feasible;
    out.restart = best;
    return out;
}

double min_feasibility_level(const JacobianBatch& batch, const std::vector<Eigen::VectorXd>& ortho,
                             const SolverConfig& cfg) {
    Eigen::MatrixXd basis;
    const std::vector<Candidate> cands = search(batch, ortho, cfg, basis);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : cands) best = std::min(best, c.residual);
    return best;
}

JacobianBatch prune_outliers(const JacobianBatch& batch, double fraction) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw StructuralError("prune fraction must be in [0, 1)");
    const std::size_t n = batch.size();
    const auto drop = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-12));
    if (drop == 0) return batch;
    if (n - std::min(drop, n) < 2) throw DegenerateError("prune_outliers would leave fewer than two matrices");
    const auto& c = batch.centered();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<double> norms(n);
    for (std::size_t m = 0; m < n; ++m) norms[m] = c[m].squaredNorm();
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return norms[a] > norms[b]; });
    std::vector<std::size_t> keep(idx.begin() + static_cast<std::ptrdiff_t>(drop), idx.end());
    std::sort(keep.begin(), keep.end());
    return batch.select(keep);
}

double auto_tolerance(const JacobianBatch& batch, const std::vector<Eigen::VectorXd>& ortho, const SolverConfig& cfg) {
    return min_feasibility_level(batch, ortho, cfg) + 0.001;
}

double centered_quartic_mean(const JacobianBatch& batch, const Eigen::VectorXd& v) {
    double acc = 0.0;
    for (const auto& j : batch.centered()) {
        const double q = v.dot(j * v);
        acc += q * q;
    }
    return acc / static_cast<double>(batch.size());
}

}  // namespace obscrl
