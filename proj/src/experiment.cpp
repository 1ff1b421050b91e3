#include "obscrl/experiment.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <set>

#include "obscrl/csv.hpp"
#include "obscrl/graph.hpp"
#include "obscrl/oracle.hpp"
#include "obscrl/svg.hpp"

namespace obscrl {

std::string to_string(ScoreMode m) {
    switch (m) {
        case ScoreMode::oracle: return "oracle";
        case ScoreMode::stein: return "stein";
        case ScoreMode::external: return "external";
        case ScoreMode::perturbed: return "perturbed";
    }
    return "oracle";
}

ScoreMode score_mode_from_string(const std::string& s) {
    if (s == "oracle") return ScoreMode::oracle;
    if (s == "stein") return ScoreMode::stein;
    if (s == "external" || s == "external-file") return ScoreMode::external;
    if (s == "perturbed") return ScoreMode::perturbed;
    throw StructuralError("unknown score mode \"" + s + "\"");
}

std::string to_string(Scaling s) {
    switch (s) {
        case Scaling::sequential: return "sequential";
        case Scaling::post_hoc: return "post_hoc";
        case Scaling::none: return "none";
    }
    return "sequential";
}

Scaling scaling_from_string(const std::string& s) {
    if (s == "sequential") return Scaling::sequential;
    if (s == "post_hoc") return Scaling::post_hoc;
    if (s == "none") return Scaling::none;
    throw StructuralError("unknown scaling \"" + s + "\"");
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known, const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!known.count(it.key())) throw StructuralError("unknown key \"" + it.key() + "\" in " + where);
}

nlohmann::json optional_number(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> read_optional(const nlohmann::json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<double>();
}

std::vector<std::string> labels(const std::string& prefix, Eigen::Index count) {
    std::vector<std::string> out;
    for (Eigen::Index i = 0; i < count; ++i) out.push_back(prefix + std::to_string(i + 1));
    return out;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw StructuralError("experiment config must be a JSON object");
    reject_unknown(j,
                   {"graph", "N", "seed", "score_mode", "solver", "regression", "stein", "target_ser", "jacobian_file",
                    "d", "scaling", "whiten", "var_tol", "out_dir"},
                   "experiment config");
    ExperimentConfig c;
    try {
        if (j.contains("graph")) c.graph = j.at("graph");
        if (j.contains("N")) c.samples = j.at("N").get<Eigen::Index>();
        if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("score_mode")) c.score_mode = score_mode_from_string(j.at("score_mode").get<std::string>());
        if (j.contains("solver")) {
            const auto& s = j.at("solver");
            reject_unknown(s, {"tol", "restarts", "prune", "auto_tol", "max_iters", "polish_iters"}, "solver");
            if (s.contains("tol")) c.solver.tol = s.at("tol").get<double>();
            if (s.contains("restarts")) c.solver.restarts = s.at("restarts").get<std::size_t>();
            if (s.contains("prune")) c.solver.prune_fraction = s.at("prune").get<double>();
            if (s.contains("auto_tol") && !s.at("auto_tol").is_null()) c.auto_tol = s.at("auto_tol").get<bool>();
            if (s.contains("max_iters")) c.solver.max_iters = s.at("max_iters").get<std::size_t>();
            if (s.contains("polish_iters")) c.solver.polish_iters = s.at("polish_iters").get<std::size_t>();
        }
        if (j.contains("regression")) {
            const auto& r = j.at("regression");
            reject_unknown(r, {"ridge", "bandwidth"}, "regression");
            if (r.contains("ridge")) c.regression.ridge = r.at("ridge").get<double>();
            c.regression.bandwidth = read_optional(r, "bandwidth");
        }
        if (j.contains("stein")) {
            const auto& s = j.at("stein");
            reject_unknown(s, {"ridge", "bandwidth"}, "stein");
            c.stein.ridge = read_optional(s, "ridge");
            c.stein.bandwidth = read_optional(s, "bandwidth");
        }
        if (j.contains("target_ser")) c.target_ser = j.at("target_ser").get<double>();
        if (j.contains("jacobian_file")) c.jacobian_file = j.at("jacobian_file").get<std::string>();
        if (j.contains("d")) c.observed_dim = j.at("d").get<Eigen::Index>();
        if (j.contains("scaling")) c.scaling = scaling_from_string(j.at("scaling").get<std::string>());
        if (j.contains("whiten")) c.whiten = j.at("whiten").get<bool>();
        if (j.contains("var_tol")) c.var_tol = j.at("var_tol").get<double>();
        if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(std::string("malformed experiment config: ") + e.what());
    }
    if (c.samples < 2) throw StructuralError("N must be at least 2");
    c.solver.validate();
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    return {{"graph", graph},
            {"N", samples},
            {"seed", seed},
            {"score_mode", to_string(score_mode)},
            {"solver",
             {{"tol", solver.tol},
              {"restarts", solver.restarts},
              {"prune", solver.prune_fraction},
              {"auto_tol", effective_auto_tol()},
              {"max_iters", solver.max_iters},
              {"polish_iters", solver.polish_iters}}},
            {"regression", {{"ridge", regression.ridge}, {"bandwidth", optional_number(regression.bandwidth)}}},
            {"stein", {{"ridge", optional_number(stein.ridge)}, {"bandwidth", optional_number(stein.bandwidth)}}},
            {"target_ser", target_ser},
            {"jacobian_file", jacobian_file.string()},
            {"d", observed_dim},
            {"scaling", to_string(scaling)},
            {"whiten", whiten},
            {"var_tol", var_tol},
            {"out_dir", out_dir.string()}};
}

Scm resolve_graph(const nlohmann::json& graph, std::uint64_t seed) {
    if (graph.is_string()) {
        const std::string name = graph.get<std::string>();
        if (name == "line4") return Scm::squared_norm(line_graph(4), sample_noise_variances(4, seed));
        if (name == "y4") return Scm::squared_norm(y_structure(), sample_noise_variances(4, seed));
        throw StructuralError("unknown graph preset \"" + name + "\"");
    }
    if (!graph.is_object()) throw StructuralError("graph must be a preset name or a model object");
    nlohmann::json j = graph;
    if (!j.contains("noise_vars")) {
        const auto n = j.value("n", std::size_t{0});
        if (n == 0) throw StructuralError("graph object needs \"n\" >= 1");
        const Eigen::VectorXd v = sample_noise_variances(n, seed);
        j["noise_vars"] = std::vector<double>(v.data(), v.data() + v.size());
    }
    return Scm::from_json(j);
}

SyntheticData generate_data(const ExperimentConfig& cfg) {
    Scm source = resolve_graph(cfg.graph, cfg.seed);
    const auto n = static_cast<Eigen::Index>(source.size());
    const Eigen::Index d = cfg.observed_dim == 0 ? n : cfg.observed_dim;
    SampleBatch batch;
    std::optional<Scm> model;
    switch (cfg.scaling) {
        case Scaling::sequential: {
            ScaledSample s = sample_scm_sequential(source, cfg.samples, cfg.seed);
            batch = std::move(s.batch);
            model = std::move(s.model);
            break;
        }
        case Scaling::post_hoc:
            batch = min_max_scale(sample_scm(source, cfg.samples, cfg.seed));
            model = affine_reparameterize(source, *batch.scale_info);
            break;
        case Scaling::none:
            batch = sample_scm(source, cfg.samples, cfg.seed);
            model = source;
            break;
    }
    MixingMatrix h = sample_mixing(d, n, cfg.seed);
    batch = mix(std::move(batch), h);
    return {std::move(source), std::move(*model), std::move(batch), std::move(h)};
}

nlohmann::json ExperimentOutcome::report_json(const ExperimentConfig& cfg) const {
    // out_dir is recorded in the manifest only.
    nlohmann::json config = cfg.to_json();
    config.erase("out_dir");
    nlohmann::json j = {{"config", config},
                        {"status", status()},
                        {"noise", report.to_json()},
                        {"latent", latent_report.to_json()},
                        {"recovery", recovery.log_json()}};
    if (measured_ser) j["measured_ser"] = *measured_ser;
    nlohmann::json models = nlohmann::json::array();
    for (const auto& r : noise.regression_models)
        models.push_back({{"layer", r.layer}, {"inputs", r.inputs}, {"bandwidth", r.bandwidth}, {"ridge", r.ridge}});
    j["regression_models"] = models;
    return j;
}

ExperimentOutcome run_pipeline(const ExperimentConfig& cfg) {
    ExperimentOutcome out{generate_data(cfg), {}, {}, {}, {}, std::nullopt};
    const SyntheticData& data = out.data;

    RecoveryOptions opts;
    opts.solver = cfg.solver;
    opts.solver.auto_tol = cfg.effective_auto_tol();
    opts.var_tol = cfg.var_tol;
    opts.latent_dim = data.source.size();
    opts.seed = cfg.seed;
    opts.whiten = cfg.whiten;

    switch (cfg.score_mode) {
        case ScoreMode::oracle: {
            OracleProvider p(data.model, data.mixing, data.batch.Z);
            out.recovery = recover_latents(data.batch.X, p, opts);
            break;
        }
        case ScoreMode::stein: {
            SteinProvider p(cfg.stein);
            out.recovery = recover_latents(data.batch.X, p, opts);
            break;
        }
        case ScoreMode::external: {
            if (cfg.jacobian_file.empty()) throw StructuralError("external score mode needs jacobian_file");
            FixedBatchProvider p(read_jacobians(cfg.jacobian_file), cfg.stein);
            out.recovery = recover_latents(data.batch.X, p, opts);
            break;
        }
        case ScoreMode::perturbed: {
            PerturbedProvider p(OracleProvider(data.model, data.mixing, data.batch.Z), cfg.target_ser, cfg.seed);
            out.recovery = recover_latents(data.batch.X, p, opts);
            if (!p.measured_ser().empty()) out.measured_ser = p.measured_ser().front();
            break;
        }
    }
    out.noise = recover_noise(out.recovery, cfg.regression);
    out.report = mac(data.batch.E, out.noise.E_hat);
    out.latent_report = mac(data.batch.Z, out.recovery.Z_hat);
    out.report.ser = out.measured_ser;
    out.report.beta_report = check_upstream_structure(out.recovery, data.mixing, layers(data.source.dag()).layer);
    return out;
}

void write_artifacts(const ExperimentConfig& cfg, const ExperimentOutcome& out) {
    const auto& dir = cfg.out_dir;
    std::filesystem::create_directories(dir);
    const SyntheticData& data = out.data;
    const Eigen::Index n = data.batch.Z.cols();

    write_csv(dir / "E.csv", data.batch.E, "E");
    write_csv(dir / "Z.csv", data.batch.Z, "Z");
    write_csv(dir / "X.csv", data.batch.X, "X");
    write_csv(dir / "H.csv", data.mixing.matrix(), "h");
    write_csv(dir / "Z_hat.csv", out.recovery.Z_hat, "Zhat");
    write_csv(dir / "E_hat.csv", out.noise.E_hat, "Ehat");
    write_csv(dir / "functionals.csv", out.recovery.functionals, "x");
    Eigen::MatrixXd layer_map(static_cast<Eigen::Index>(out.recovery.layer_of.size()), 2);
    for (std::size_t j = 0; j < out.recovery.layer_of.size(); ++j) {
        layer_map(static_cast<Eigen::Index>(j), 0) = static_cast<double>(j);
        layer_map(static_cast<Eigen::Index>(j), 1) = static_cast<double>(out.recovery.layer_of[j]);
    }
    write_csv(dir / "layers.csv", layer_map, std::vector<std::string>{"coordinate", "layer"});
    for (std::size_t r = 0; r < out.recovery.h_history.size(); ++r) {
        const auto& h = out.recovery.h_history[r];
        std::vector<std::string> header;
        for (std::size_t c = 0; c < h.found.size(); ++c) header.push_back((h.found[c] ? "found_" : "fill_") + std::to_string(c));
        write_csv(dir / ("h_hat_round" + std::to_string(r) + ".csv"), h.h_hat, header);
        const auto& v = out.recovery.round_log[r].variances;
        write_diag_variance_csv(dir / ("diag_variance_round" + std::to_string(r) + ".csv"),
                                Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
    }

    write_text(dir / "report.json", out.report_json(cfg).dump(2) + "\n");
    write_text(dir / "scatter_Z.svg", scatter_grid_svg(data.batch.Z, out.recovery.Z_hat, data.batch.Z.col(0),
                                                       labels("Z", n), labels("Zhat", out.recovery.Z_hat.cols())));
    write_text(dir / "heatmap_E.svg",
               heatmap_svg(out.report.corr_matrix, labels("E", n), labels("Ehat", n), "|corr(E, Ehat)|"));
    write_text(dir / "heatmap_Z.svg",
               heatmap_svg(out.latent_report.corr_matrix, labels("Z", n), labels("Zhat", n), "|corr(Z, Zhat)|"));

    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    const nlohmann::json manifest = {{"tool", "obscrl"},
                                     {"version", OBSCRL_VERSION},
                                     {"created", stamp},
                                     {"status", out.status()},
                                     {"config", cfg.to_json()},
                                     {"model", data.source.to_json()},
                                     {"mac", out.report.mac}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

ExperimentOutcome run_experiment(const ExperimentConfig& cfg) {
    ExperimentOutcome out = run_pipeline(cfg);
    if (!cfg.out_dir.empty()) write_artifacts(cfg, out);
    return out;
}

std::vector<SerSweepRow> ser_sweep(const ExperimentConfig& base, const std::vector<double>& grid, std::size_t seeds) {
    if (seeds < 1) throw StructuralError("ser_sweep needs at least one seed");
    std::vector<SerSweepRow> rows;
    for (double ser : grid) {
        SerSweepRow row;
        row.ser = ser;
        for (std::size_t s = 0; s < seeds; ++s) {
            ExperimentConfig cfg = base;
            cfg.score_mode = ScoreMode::perturbed;
            cfg.target_ser = ser;
            cfg.seed = base.seed + s;
            cfg.out_dir.clear();
            row.macs.push_back(run_pipeline(cfg).report.mac);
        }
        const Eigen::Map<const Eigen::VectorXd> m(row.macs.data(), static_cast<Eigen::Index>(row.macs.size()));
        row.mac_mean = m.mean();
        row.mac_sd = m.size() > 1 ? std::sqrt((m.array() - row.mac_mean).square().sum() / static_cast<double>(m.size() - 1))
                                  : 0.0;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_ser_sweep_csv(const std::filesystem::path& path, const std::vector<SerSweepRow>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), 4);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        m(ii, 0) = rows[i].ser;
        m(ii, 1) = rows[i].mac_mean;
        m(ii, 2) = rows[i].mac_sd;
        m(ii, 3) = static_cast<double>(rows[i].macs.size());
    }
    write_csv(path, m, std::vector<std::string>{"ser", "mac_mean", "mac_sd", "n_seeds"});
}

}  // namespace obscrl
