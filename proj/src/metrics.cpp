#include "obscrl/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "obscrl/rng.hpp"
#include "obscrl/stein.hpp"

namespace obscrl {

namespace {

Eigen::MatrixXd standardized(const Eigen::MatrixXd& m) {
    Eigen::MatrixXd c = m.rowwise() - m.colwise().mean();
    for (Eigen::Index j = 0; j < c.cols(); ++j) {
        const double norm = c.col(j).norm();
        if (!(norm > 1e-300) || norm <= 1e-12 * std::max(1.0, m.col(j).cwiseAbs().maxCoeff()) * std::sqrt(c.rows())) {
            throw DegenerateError("correlation of a constant column");
        }
        c.col(j) /= norm;
    }
    return c;
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t q = i; q <= j; ++q) r[idx[q]] = avg;
        i = j + 1;
    }
    return r;
}

}  // namespace

Eigen::MatrixXd abs_correlation(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    if (a.rows() != b.rows()) throw DimensionError("abs_correlation: sample counts differ");
    if (a.rows() < 2) throw DegenerateError("abs_correlation needs at least two samples");
    Eigen::MatrixXd c = (standardized(a).transpose() * standardized(b)).cwiseAbs();
    return c.cwiseMin(1.0);
}

std::vector<std::size_t> max_weight_assignment(const Eigen::MatrixXd& weight) {
    if (weight.rows() != weight.cols()) throw DimensionError("max_weight_assignment needs a square matrix");
    const auto n = static_cast<std::size_t>(weight.rows());
    // Shortest augmenting path (Hungarian) on cost = -weight, 1-based potentials.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = -weight(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> out(n);
    for (std::size_t j = 1; j <= n; ++j) out[p[j] - 1] = j - 1;
    return out;
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json corr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < corr_matrix.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(corr_matrix.cols()));
        for (Eigen::Index j = 0; j < corr_matrix.cols(); ++j) row[static_cast<std::size_t>(j)] = corr_matrix(i, j);
        corr.push_back(row);
    }
    nlohmann::json j = {{"mac", mac}, {"matching", matching}, {"corr_matrix", corr}};
    if (ser) j["ser"] = std::isfinite(*ser) ? nlohmann::json(*ser) : nlohmann::json("inf");
    if (beta_report) j["beta_report"] = beta_report->to_json();
    return j;
}

EvalReport mac(const Eigen::MatrixXd& truth, const Eigen::MatrixXd& estimate) {
    if (truth.rows() != estimate.rows() || truth.cols() != estimate.cols()) {
        throw DimensionError("mac: truth and estimate shapes differ");
    }
    EvalReport r;
    r.corr_matrix = abs_correlation(truth, estimate);
    r.matching = max_weight_assignment(r.corr_matrix);
    double acc = 0.0;
    for (std::size_t i = 0; i < r.matching.size(); ++i)
        acc += r.corr_matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r.matching[i]));
    r.mac = r.matching.empty() ? 0.0 : acc / static_cast<double>(r.matching.size());
    return r;
}

JacobianBatch perturb_jacobians(const JacobianBatch& batch, double target_ser, std::uint64_t seed) {
    if (!(target_ser > 0.0)) throw StructuralError("perturb_jacobians: target SER must be positive");
    Rng rng = Rng::stream(seed, "perturb");
    const Eigen::Index d = batch.dim();
    std::vector<Eigen::MatrixXd> noise;
    noise.reserve(batch.size());
    double signal = 0.0;
    double power = 0.0;
    for (std::size_t m = 0; m < batch.size(); ++m) {
        const Eigen::MatrixXd a = rng.normal_matrix(d, d);
        noise.push_back(0.5 * (a + a.transpose()));
        power += noise.back().squaredNorm();
        signal += batch.raw(m).squaredNorm();
    }
    const double c = power > 0.0 ? std::sqrt(signal / (target_ser * power)) : 0.0;
    std::vector<Eigen::MatrixXd> out;
    out.reserve(batch.size());
    for (std::size_t m = 0; m < batch.size(); ++m) out.push_back(batch.raw(m) + c * noise[m]);
    JacobianBatch result(std::move(out), batch.tag());
    return result.size() >= 2 ? center(std::move(result)) : result;
}

PerturbedProvider::PerturbedProvider(OracleProvider oracle, double target_ser, std::uint64_t seed)
    : oracle_(std::move(oracle)), target_(target_ser), seed_(seed) {}

JacobianBatch PerturbedProvider::jacobians(const RoundInput& in) {
    const JacobianBatch exact = oracle_.jacobians(in);
    JacobianBatch noisy = perturb_jacobians(exact, target_, Rng::stream(seed_, "perturb-round", in.round).next_u64());
    measured_.push_back(jacobian_ser(noisy, exact));
    return noisy;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) throw DimensionError("spearman needs two equal-length series");
    const std::vector<double> ra = ranks(a);
    const std::vector<double> rb = ranks(b);
    const Eigen::Map<const Eigen::VectorXd> x(ra.data(), static_cast<Eigen::Index>(ra.size()));
    const Eigen::Map<const Eigen::VectorXd> y(rb.data(), static_cast<Eigen::Index>(rb.size()));
    const Eigen::VectorXd xc = x.array() - x.mean();
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double denom = xc.norm() * yc.norm();
    if (denom == 0.0) throw DegenerateError("spearman: constant series");
    return xc.dot(yc) / denom;
}

}  // namespace obscrl
