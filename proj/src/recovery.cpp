#include "obscrl/recovery.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "obscrl/oracle.hpp"
#include "obscrl/rng.hpp"

namespace obscrl {

NodeSet heaviest_closed_subset(const Dag& dag, const Eigen::VectorXd& energy, std::size_t k) {
    if (k > dag.size()) throw DimensionError("heaviest_closed_subset: k exceeds node count");
    NodeSet best;
    double best_energy = -1.0;
    std::vector<char> in(dag.size(), 0);
    NodeSet cur;
    // Enumerate k-subsets and keep the heaviest ancestrally closed one.
    std::function<void(std::size_t, double)> rec = [&](std::size_t start, double e) {
        if (cur.size() == k) {
            for (std::size_t v : cur)
                for (std::size_t p : dag.parents(v))
                    if (!in[p]) return;
            if (e > best_energy) {
                best_energy = e;
                best = cur;
            }
            return;
        }
        for (std::size_t v = start; v + (k - cur.size()) <= dag.size(); ++v) {
            in[v] = 1;
            cur.push_back(v);
            rec(v + 1, e + energy(static_cast<Eigen::Index>(v)));
            cur.pop_back();
            in[v] = 0;
        }
    };
    rec(0, 0.0);
    return best;
}

OracleProvider::OracleProvider(Scm scm, MixingMatrix h, Eigen::MatrixXd Z)
    : scm_(std::move(scm)), h_(std::move(h)), z_(std::move(Z)) {
    if (static_cast<std::size_t>(h_.cols()) != scm_.size() || static_cast<std::size_t>(z_.cols()) != scm_.size()) {
        throw DimensionError("OracleProvider: model, mixing and latent sizes disagree");
    }
}

JacobianBatch OracleProvider::jacobians(const RoundInput& in) {
    if (in.W.cols() != h_.rows()) throw DimensionError("OracleProvider: functionals do not match observed dimension");
    // Current coordinates are X_hat = G Z with G = W H; only the alive columns of G matter.
    const Eigen::MatrixXd g = in.W * h_.matrix();
    // The ancestrally closed k-subset carrying the most loading energy. With exact
    // directions the leftover columns hold only solver round-off.
    const Eigen::VectorXd energy = g.colwise().squaredNorm();
    const NodeSet alive = heaviest_closed_subset(scm_.dag(), energy, static_cast<std::size_t>(g.rows()));
    const Scm sub = scm_.marginal(alive);
    Eigen::MatrixXd g_s(g.rows(), g.rows());
    Eigen::MatrixXd z_s(z_.rows(), g.rows());
    for (std::size_t k = 0; k < alive.size(); ++k) {
        g_s.col(static_cast<Eigen::Index>(k)) = g.col(static_cast<Eigen::Index>(alive[k]));
        z_s.col(static_cast<Eigen::Index>(k)) = z_.col(static_cast<Eigen::Index>(alive[k]));
    }
    const Eigen::MatrixXd g_inv = g_s.fullPivLu().inverse();
    std::vector<Eigen::MatrixXd> out;
    out.reserve(static_cast<std::size_t>(z_s.rows()));
    for (Eigen::Index m = 0; m < z_s.rows(); ++m)
        out.push_back(g_inv.transpose() * jacobian_latent(sub, z_s.row(m).transpose()) * g_inv);
    return center(JacobianBatch(std::move(out), SpaceTag::observed));
}

JacobianBatch SteinProvider::jacobians(const RoundInput& in) { return stein_jacobian(in.X_hat, cfg_); }

FixedBatchProvider::FixedBatchProvider(JacobianBatch observed, SteinConfig fallback, bool exact)
    : observed_(observed.is_centered() ? std::move(observed) : center(std::move(observed))),
      fallback_(std::move(fallback)),
      exact_(exact) {}

JacobianBatch FixedBatchProvider::jacobians(const RoundInput& in) {
    if (in.round > 0) return fallback_.jacobians(in);
    if (observed_.dim() != in.W.cols()) throw DimensionError("FixedBatchProvider: batch dimension differs from X");
    if (observed_.size() != static_cast<std::size_t>(in.X_hat.rows())) {
        throw DimensionError("FixedBatchProvider: batch size differs from sample count");
    }
    // W has full row rank and X lies in its row space, so J_{X_hat} = W^{+T} J_X W^+.
    const Eigen::MatrixXd w_pinv = in.W.completeOrthogonalDecomposition().pseudoInverse();
    return pull_back(observed_, w_pinv).with_tag(SpaceTag::observed);
}

std::size_t RecoveryResult::layer_count() const {
    std::size_t k = 0;
    for (std::size_t l : layer_of) k = std::max(k, l + 1);
    return k;
}

std::vector<std::size_t> RecoveryResult::coordinates_in(std::size_t layer) const {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < layer_of.size(); ++j)
        if (layer_of[j] == layer) out.push_back(j);
    return out;
}

nlohmann::json RecoveryResult::log_json() const {
    nlohmann::json rounds = nlohmann::json::array();
    for (const auto& r : round_log) {
        rounds.push_back({{"round", r.round},
                          {"dim", r.dim},
                          {"tol", r.tol},
                          {"scale", r.scale},
                          {"residuals", r.residuals},
                          {"variances", r.variances},
                          {"emitted", r.emitted},
                          {"stalled", r.stalled}});
    }
    return {{"provider", provider}, {"status", status()}, {"layer_of", layer_of}, {"rounds", rounds}};
}

namespace {

// Top k principal directions of X as rows (k x d). With `whiten` the rows are
// scaled so that X W^T has identity sample covariance; without it and d == k
// the identity is used.
Eigen::MatrixXd initial_functionals(const Eigen::MatrixXd& X, Eigen::Index k, bool whiten) {
    if (!whiten && k == X.cols()) return Eigen::MatrixXd::Identity(k, k);
    const Eigen::MatrixXd centered = X.rowwise() - X.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(X.rows() - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    const Eigen::Index d = X.cols();
    // Eigenvalues ascend; keep the last k, largest first.
    Eigen::MatrixXd w(k, d);
    for (Eigen::Index j = 0; j < k; ++j) {
        const double lambda = eig.eigenvalues()(d - 1 - j);
        if (!(lambda > 1e-12 * eig.eigenvalues()(d - 1))) {
            throw DegenerateError("recover_latents: X has fewer than k non-degenerate directions");
        }
        w.row(j) = eig.eigenvectors().col(d - 1 - j).transpose() / (whiten ? std::sqrt(lambda) : 1.0);
    }
    return w;
}

// Completes the found columns to an orthonormal k x k basis with seeded random directions.
Eigen::MatrixXd complete_basis(const std::vector<Eigen::VectorXd>& found, Eigen::Index k, Rng& rng) {
    Eigen::MatrixXd h(k, k);
    const auto f = static_cast<Eigen::Index>(found.size());
    for (Eigen::Index j = 0; j < f; ++j) h.col(j) = found[static_cast<std::size_t>(j)];
    for (Eigen::Index j = f; j < k; ++j) {
        for (int attempt = 0;; ++attempt) {
            Eigen::VectorXd v = rng.normal_vector(k);
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index q = 0; q < j; ++q) v -= h.col(q).dot(v) * h.col(q);
            const double nv = v.norm();
            if (nv > 1e-8) {
                h.col(j) = v / nv;
                break;
            }
            if (attempt > 100) throw NumericError("could not complete the recovered basis");
        }
    }
    return h;
}

}  // namespace

RecoveryResult recover_latents(const Eigen::MatrixXd& X, JacobianProvider& provider, const RecoveryOptions& opts) {
    opts.solver.validate();
    const Eigen::Index d = X.cols();
    const Eigen::Index n = opts.latent_dim == 0 ? d : static_cast<Eigen::Index>(opts.latent_dim);
    if (n < 1 || n > d) throw DimensionError("recover_latents: latent dimension must be in [1, d]");
    if (X.rows() < 2) throw DegenerateError("recover_latents needs at least two samples");

    RecoveryResult result;
    result.provider = provider.name();
    result.Z_hat.resize(X.rows(), n);
    result.functionals.resize(n, d);
    Eigen::Index emitted_total = 0;

    Eigen::MatrixXd w = initial_functionals(X, n, opts.whiten);
    Eigen::MatrixXd x_hat = X * w.transpose();

    for (std::size_t round = 0; w.rows() > 0; ++round) {
        const Eigen::Index k = w.rows();
        RoundRecord rec;
        rec.round = round;
        rec.dim = static_cast<std::size_t>(k);

        JacobianBatch batch = provider.jacobians(RoundInput{round, w, x_hat});
        if (batch.dim() != k) throw DimensionError("provider returned Jacobians of the wrong dimension");
        if (!batch.is_centered()) batch = center(std::move(batch));
        rec.scale = rms_centered_norm(batch);

        // No variance at all: every current coordinate is emitted as is.
        const bool flat = rec.scale == 0.0 || (provider.exact() && rec.scale * rec.scale <= opts.var_tol);
        std::vector<Eigen::VectorXd> found;
        if (!flat && round < opts.max_rounds) {
            SolverConfig cfg = opts.solver;
            JacobianBatch solve_batch = batch;
            rec.tol = cfg.tol;
            if (!provider.exact() && cfg.auto_tol) {
                solve_batch = prune_outliers(batch, cfg.prune_fraction);
                cfg.seed = Rng::stream(opts.seed, "auto-tol", round).next_u64();
                rec.tol = auto_tolerance(solve_batch, {}, cfg);
            }
            cfg.tol = rec.tol;
            while (static_cast<Eigen::Index>(found.size()) < k) {
                cfg.seed = Rng::stream(opts.seed, "solver", round * 1024 + found.size()).next_u64();
                const NullDirectionResult res = find_null_direction(solve_batch, found, cfg);
                if (!res.feasible) break;
                rec.residuals.push_back(res.residual);
                found.push_back(*res.h);
            }
        }

        Rng fill_rng = Rng::stream(opts.seed, "fill", round);
        const Eigen::MatrixXd h_hat =
            flat ? Eigen::MatrixXd::Identity(k, k) : complete_basis(found, k, fill_rng);
        const Eigen::MatrixXd z_tilde = x_hat * h_hat;
        const JacobianBatch pulled = pull_back(batch, h_hat);
        const Eigen::VectorXd var = diag_variance(pulled);
        rec.variances.assign(var.data(), var.data() + var.size());

        HistoryEntry hist{h_hat, std::vector<bool>(static_cast<std::size_t>(k), false)};
        for (std::size_t j = 0; j < found.size(); ++j) hist.found[j] = true;
        result.h_history.push_back(std::move(hist));

        std::vector<Eigen::Index> keep;
        for (Eigen::Index i = 0; i < k; ++i) {
            const bool zero = flat ||
                              (provider.exact() ? var(i) <= opts.var_tol : i < static_cast<Eigen::Index>(found.size()));
            if (zero) {
                rec.emitted.push_back(static_cast<std::size_t>(i));
            } else {
                keep.push_back(i);
            }
        }
        if (rec.emitted.empty()) {
            rec.stalled = true;
            result.stalled = true;
            for (Eigen::Index i = 0; i < k; ++i) rec.emitted.push_back(static_cast<std::size_t>(i));
            keep.clear();
        }

        for (std::size_t i : rec.emitted) {
            const auto ii = static_cast<Eigen::Index>(i);
            result.Z_hat.col(emitted_total) = z_tilde.col(ii);
            result.functionals.row(emitted_total) = h_hat.col(ii).transpose() * w;
            result.layer_of.push_back(round);
            ++emitted_total;
        }
        result.round_log.push_back(std::move(rec));

        Eigen::MatrixXd next_w(static_cast<Eigen::Index>(keep.size()), d);
        Eigen::MatrixXd next_x(X.rows(), static_cast<Eigen::Index>(keep.size()));
        for (std::size_t q = 0; q < keep.size(); ++q) {
            const auto qq = static_cast<Eigen::Index>(q);
            next_w.row(qq) = h_hat.col(keep[q]).transpose() * w;
            next_x.col(qq) = z_tilde.col(keep[q]);
        }
        w = std::move(next_w);
        x_hat = std::move(next_x);
    }
    return result;
}

RecoveryResult recover_latents(const JacobianBatch& observed, const Eigen::MatrixXd& X, const SolverConfig& cfg,
                               double var_tol) {
    FixedBatchProvider provider(observed);
    RecoveryOptions opts;
    opts.solver = cfg;
    opts.var_tol = var_tol;
    opts.seed = cfg.seed;
    return recover_latents(X, provider, opts);
}

RecoveryResult recover_latents_strict(const Eigen::MatrixXd& X, JacobianProvider& provider,
                                      const RecoveryOptions& opts) {
    RecoveryResult r = recover_latents(X, provider, opts);
    if (r.stalled) {
        const std::size_t round = r.round_log.back().round;
        throw StalledRecoveryError("recovery stalled in round " + std::to_string(round), std::move(r));
    }
    return r;
}

nlohmann::json UpstreamReport::to_json() const {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < loadings.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(loadings.cols()));
        for (Eigen::Index j = 0; j < loadings.cols(); ++j) row[static_cast<std::size_t>(j)] = loadings(i, j);
        rows.push_back(row);
    }
    return {{"loadings", rows}, {"max_violation", max_violation}, {"threshold", threshold}, {"ok", ok}};
}

UpstreamReport check_upstream_structure(const RecoveryResult& result, const MixingMatrix& h,
                                        const std::vector<std::size_t>& true_layers, double threshold) {
    if (true_layers.size() != static_cast<std::size_t>(h.cols())) {
        throw StructuralError("check_upstream_structure: true layer map does not match the mixing matrix");
    }
    if (result.functionals.cols() != h.rows()) {
        throw DimensionError("check_upstream_structure: functionals do not match the observed dimension");
    }
    UpstreamReport rep;
    rep.threshold = threshold;
    rep.loadings = result.functionals * h.matrix();
    rep.ok = true;
    for (Eigen::Index j = 0; j < rep.loadings.rows(); ++j) {
        const double scale = rep.loadings.row(j).cwiseAbs().maxCoeff();
        if (scale > 0.0) rep.loadings.row(j) /= scale;
        const std::size_t layer = result.layer_of.at(static_cast<std::size_t>(j));
        double worst = 0.0;
        for (Eigen::Index i = 0; i < rep.loadings.cols(); ++i)
            if (true_layers[static_cast<std::size_t>(i)] < layer) worst = std::max(worst, std::abs(rep.loadings(j, i)));
        rep.max_violation.push_back(worst);
        if (worst > threshold) rep.ok = false;
    }
    return rep;
}

NoiseResult recover_noise(const RecoveryResult& result, const RegressionConfig& cfg) {
    if (result.layer_of.empty()) throw StructuralError("recover_noise: recovery result has no layers");
    NoiseResult out;
    out.layer_of = result.layer_of;
    out.E_hat = Eigen::MatrixXd::Zero(result.Z_hat.rows(), result.Z_hat.cols());
    const std::size_t top = result.layer_count() - 1;
    std::vector<Eigen::Index> upstream;
    for (std::size_t layer = top + 1; layer-- > 0;) {
        const std::vector<std::size_t> cols = result.coordinates_in(layer);
        if (cols.empty()) continue;
        Eigen::MatrixXd targets(result.Z_hat.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t c = 0; c < cols.size(); ++c)
            targets.col(static_cast<Eigen::Index>(c)) = result.Z_hat.col(static_cast<Eigen::Index>(cols[c]));
        RegressionRecord rec{layer, upstream.size(), 0.0, 0.0};
        if (upstream.empty()) {
            for (std::size_t c = 0; c < cols.size(); ++c)
                out.E_hat.col(static_cast<Eigen::Index>(cols[c])) = targets.col(static_cast<Eigen::Index>(c));
        } else {
            Eigen::MatrixXd inputs(result.Z_hat.rows(), static_cast<Eigen::Index>(upstream.size()));
            for (std::size_t u = 0; u < upstream.size(); ++u)
                inputs.col(static_cast<Eigen::Index>(u)) = out.E_hat.col(upstream[u]);
            const KernelRidgeFit fit = kernel_ridge(inputs, targets, cfg);
            rec.bandwidth = fit.bandwidth;
            rec.ridge = fit.ridge;
            for (std::size_t c = 0; c < cols.size(); ++c)
                out.E_hat.col(static_cast<Eigen::Index>(cols[c])) = fit.residuals.col(static_cast<Eigen::Index>(c));
        }
        out.regression_models.push_back(rec);
        for (std::size_t c : cols) upstream.push_back(static_cast<Eigen::Index>(c));
    }
    return out;
}

}  // namespace obscrl
