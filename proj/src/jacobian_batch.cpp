#include "obscrl/jacobian_batch.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "obscrl/csv.hpp"
#include "obscrl/errors.hpp"

namespace obscrl {

static_assert(std::endian::native == std::endian::little, "binary Jacobian format assumes a little-endian host");

std::string to_string(SpaceTag tag) {
    switch (tag) {
        case SpaceTag::latent: return "latent";
        case SpaceTag::observed: return "observed";
        case SpaceTag::estimated_latent: return "estimated-latent";
    }
    return "unknown";
}

SpaceTag space_tag_from_string(const std::string& s) {
    if (s == "latent") return SpaceTag::latent;
    if (s == "observed") return SpaceTag::observed;
    if (s == "estimated-latent") return SpaceTag::estimated_latent;
    throw StructuralError("unknown space tag \"" + s + "\"");
}

JacobianBatch::JacobianBatch(std::vector<Eigen::MatrixXd> raw, SpaceTag tag) : raw_(std::move(raw)), tag_(tag) {
    if (raw_.empty()) return;
    const Eigen::Index d = raw_.front().rows();
    for (auto& j : raw_) {
        if (j.rows() != d || j.cols() != d) throw DimensionError("JacobianBatch: matrices must all be d x d");
        j = (0.5 * (j + j.transpose())).eval();
    }
}

const Eigen::MatrixXd& JacobianBatch::mean() const {
    if (!is_centered()) throw std::logic_error("JacobianBatch::mean() before center()");
    return mean_;
}

const std::vector<Eigen::MatrixXd>& JacobianBatch::centered() const {
    if (!is_centered()) throw std::logic_error("JacobianBatch::centered() before center()");
    return centered_;
}

const Eigen::MatrixXd& JacobianBatch::centered(std::size_t m) const { return centered().at(m); }

JacobianBatch JacobianBatch::select(const std::vector<std::size_t>& samples) const {
    std::vector<Eigen::MatrixXd> kept;
    kept.reserve(samples.size());
    for (std::size_t m : samples) kept.push_back(raw_.at(m));
    JacobianBatch out(std::move(kept), tag_);
    return is_centered() ? center(std::move(out)) : out;
}

JacobianBatch JacobianBatch::scaled(double factor) const {
    JacobianBatch out = *this;
    for (auto& j : out.raw_) j *= factor;
    if (is_centered()) {
        out.mean_ *= factor;
        for (auto& j : out.centered_) j *= factor;
    }
    return out;
}

JacobianBatch JacobianBatch::with_tag(SpaceTag tag) const {
    JacobianBatch out = *this;
    out.tag_ = tag;
    return out;
}

JacobianBatch center(JacobianBatch batch) {
    if (batch.size() < 2) throw DegenerateError("center: need at least two Jacobians");
    const Eigen::Index d = batch.dim();
    Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(d, d);
    for (const auto& j : batch.raw_) mean += j;
    mean /= static_cast<double>(batch.size());
    batch.centered_.clear();
    batch.centered_.reserve(batch.size());
    for (const auto& j : batch.raw_) batch.centered_.push_back(j - mean);
    batch.mean_ = std::move(mean);
    return batch;
}

JacobianBatch pull_back(const JacobianBatch& batch, const Eigen::MatrixXd& h_hat) {
    if (h_hat.rows() != batch.dim()) {
        throw DimensionError("pull_back: H_hat has " + std::to_string(h_hat.rows()) + " rows, batch dimension is " +
                             std::to_string(batch.dim()));
    }
    std::vector<Eigen::MatrixXd> out;
    out.reserve(batch.size());
    for (const auto& j : batch.raw()) out.push_back(h_hat.transpose() * j * h_hat);
    JacobianBatch result(std::move(out), SpaceTag::estimated_latent);
    return batch.is_centered() ? center(std::move(result)) : result;
}

Eigen::VectorXd diag_variance(const JacobianBatch& batch) {
    const auto& c = batch.centered();
    Eigen::VectorXd v = Eigen::VectorXd::Zero(batch.dim());
    for (const auto& j : c) v += j.diagonal().cwiseAbs2();
    return v / static_cast<double>(c.size());
}

double rms_centered_norm(const JacobianBatch& batch) {
    double acc = 0.0;
    for (const auto& j : batch.centered()) acc += j.squaredNorm();
    return std::sqrt(acc / static_cast<double>(batch.size()));
}

namespace {

template <class T>
void put(std::ofstream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw IoError("truncated Jacobian file");
    return v;
}

}  // namespace

void write_jacobians(const std::filesystem::path& path, const JacobianBatch& batch) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out.write("OCJB", 4);
    put<std::uint32_t>(out, 1);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.tag()));
    put<std::uint64_t>(out, batch.size());
    put<std::uint64_t>(out, static_cast<std::uint64_t>(batch.dim()));
    for (const auto& j : batch.raw()) {
        const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = j;
        out.write(reinterpret_cast<const char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

JacobianBatch read_jacobians(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "OCJB", 4) != 0) throw IoError(path.string() + " is not a Jacobian batch file");
    const auto version = get<std::uint32_t>(in);
    if (version != 1) throw IoError("unsupported Jacobian file version " + std::to_string(version));
    const auto tag = get<std::uint32_t>(in);
    if (tag > 2) throw IoError("bad space tag in " + path.string());
    const auto n = get<std::uint64_t>(in);
    const auto d = static_cast<Eigen::Index>(get<std::uint64_t>(in));
    std::vector<Eigen::MatrixXd> raw;
    raw.reserve(n);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(d, d);
    for (std::uint64_t m = 0; m < n; ++m) {
        in.read(reinterpret_cast<char*>(rm.data()), static_cast<std::streamsize>(rm.size() * sizeof(double)));
        if (!in) throw IoError("truncated Jacobian file " + path.string());
        raw.emplace_back(rm);
    }
    JacobianBatch batch(std::move(raw), static_cast<SpaceTag>(tag));
    return batch.size() >= 2 ? center(std::move(batch)) : batch;
}

void write_diag_variance_csv(const std::filesystem::path& path, const Eigen::VectorXd& variances) {
    Eigen::MatrixXd m(variances.size(), 2);
    for (Eigen::Index i = 0; i < variances.size(); ++i) {
        m(i, 0) = static_cast<double>(i);
        m(i, 1) = variances(i);
    }
    write_csv(path, m, std::vector<std::string>{"coordinate", "variance"});
}

}  // namespace obscrl
