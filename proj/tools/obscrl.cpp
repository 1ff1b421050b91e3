// Command-line front end: generate, score, recover, evaluate, experiment, ser-sweep.
// Exit codes: 0 success, 2 partial recovery, 1 error.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "obscrl/csv.hpp"
#include "obscrl/experiment.hpp"
#include "obscrl/oracle.hpp"

namespace fs = std::filesystem;
using namespace obscrl;

namespace {

struct Overrides {
    std::string config;
    std::string graph;
    std::optional<Eigen::Index> samples;
    std::optional<std::uint64_t> seed;
    std::optional<Eigen::Index> d;
    std::string scaling;
    std::string mode;
    std::optional<double> tol;
    std::optional<std::size_t> restarts;
    std::optional<double> prune;
    std::optional<bool> auto_tol;
    std::optional<double> bandwidth;
    std::optional<double> ridge;
    std::optional<double> stein_bandwidth;
    std::optional<double> stein_ridge;
    std::optional<double> target_ser;
    std::string jacobian_file;
    std::string out;
};

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw StructuralError(path.string() + ": " + e.what());
    }
}

void add_data_options(CLI::App* app, Overrides& o) {
    app->add_option("-c,--config", o.config, "experiment config JSON");
    app->add_option("--graph", o.graph, "preset (line4, y4) or path to a model JSON");
    app->add_option("-N,--samples", o.samples, "number of samples");
    app->add_option("--seed", o.seed, "random seed");
    app->add_option("-d,--observed-dim", o.d, "observed dimension (default: number of latents)");
    app->add_option("--scaling", o.scaling, "sequential, post_hoc or none");
}

void add_solver_options(CLI::App* app, Overrides& o) {
    app->add_option("--tol", o.tol, "solver feasibility tolerance");
    app->add_option("--restarts", o.restarts, "solver restarts per direction");
    app->add_option("--prune", o.prune, "fraction of largest Jacobians dropped before auto-tolerance");
    app->add_option("--auto-tol", o.auto_tol, "estimate the tolerance from the data (true/false)");
    app->add_option("--bandwidth", o.bandwidth, "regression kernel bandwidth (default: median heuristic)");
    app->add_option("--ridge", o.ridge, "regression ridge lambda");
    app->add_option("--stein-bandwidth", o.stein_bandwidth, "Stein kernel bandwidth (default: median heuristic)");
    app->add_option("--stein-ridge", o.stein_ridge, "Stein ridge (default: 1e-3 N)");
}

ExperimentConfig build_config(const Overrides& o) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_json(read_json(o.config));
    if (!o.graph.empty()) c.graph = fs::exists(o.graph) ? read_json(o.graph) : nlohmann::json(o.graph);
    if (o.samples) c.samples = *o.samples;
    if (o.seed) c.seed = *o.seed;
    if (o.d) c.observed_dim = *o.d;
    if (!o.scaling.empty()) c.scaling = scaling_from_string(o.scaling);
    if (!o.mode.empty()) c.score_mode = score_mode_from_string(o.mode);
    if (o.tol) c.solver.tol = *o.tol;
    if (o.restarts) c.solver.restarts = *o.restarts;
    if (o.prune) c.solver.prune_fraction = *o.prune;
    if (o.auto_tol) c.auto_tol = *o.auto_tol;
    if (o.bandwidth) c.regression.bandwidth = *o.bandwidth;
    if (o.ridge) c.regression.ridge = *o.ridge;
    if (o.stein_bandwidth) c.stein.bandwidth = *o.stein_bandwidth;
    if (o.stein_ridge) c.stein.ridge = *o.stein_ridge;
    if (o.target_ser) c.target_ser = *o.target_ser;
    if (!o.jacobian_file.empty()) c.jacobian_file = o.jacobian_file;
    if (!o.out.empty()) c.out_dir = o.out;
    c.solver.validate();
    return c;
}

std::vector<double> parse_grid(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw StructuralError("bad grid value \"" + item + "\"");
        }
    }
    if (out.empty()) throw StructuralError("empty SER grid");
    return out;
}

int cmd_generate(const Overrides& o) {
    ExperimentConfig c = build_config(o);
    if (c.out_dir.empty()) throw StructuralError("generate needs --out");
    SyntheticData data = generate_data(c);
    fs::create_directories(c.out_dir);
    data.source.save(c.out_dir / "model.json");
    data.model.save(c.out_dir / "model_scaled.json");
    write_csv(c.out_dir / "E.csv", data.batch.E, "E");
    write_csv(c.out_dir / "Z.csv", data.batch.Z, "Z");
    write_csv(c.out_dir / "X.csv", data.batch.X, "X");
    write_csv(c.out_dir / "H.csv", data.mixing.matrix(), "h");
    std::cout << "wrote " << data.batch.samples() << " samples to " << c.out_dir.string() << "\n";
    return 0;
}

struct ScoreArgs {
    std::string x;
    std::string mode = "stein";
    std::string model;
    std::string h;
    std::string z;
    std::string out;
    std::optional<double> bandwidth;
    std::optional<double> ridge;
};

int cmd_score(const ScoreArgs& a) {
    JacobianBatch batch;
    if (a.mode == "stein") {
        if (a.x.empty()) throw StructuralError("score --mode stein needs --x");
        SteinConfig cfg;
        cfg.bandwidth = a.bandwidth;
        cfg.ridge = a.ridge;
        batch = stein_jacobian(read_csv(a.x).values, cfg);
    } else if (a.mode == "oracle") {
        if (a.model.empty() || a.h.empty() || a.z.empty()) {
            throw StructuralError("score --mode oracle needs --model, --mixing and --z");
        }
        const Scm scm = Scm::load(a.model);
        const MixingMatrix h(read_csv(a.h).values);
        batch = latent_to_observed(latent_jacobians(scm, read_csv(a.z).values), h);
    } else {
        throw StructuralError("score mode must be stein or oracle");
    }
    write_jacobians(a.out, batch);
    fs::path var_path = a.out;
    var_path.replace_extension(".diag_variance.csv");
    write_diag_variance_csv(var_path, diag_variance(batch));
    std::cout << "wrote " << batch.size() << " Jacobians (" << batch.dim() << " x " << batch.dim() << ") to " << a.out
              << "\n";
    return 0;
}

struct RecoverArgs {
    std::string x;
    std::string jacobians;
    std::size_t latent_dim = 0;
    std::string out;
    double var_tol = 1e-8;
    std::uint64_t seed = 0;
    bool whiten = true;
};

int cmd_recover(const RecoverArgs& a, const Overrides& o) {
    const Eigen::MatrixXd x = read_csv(a.x).values;
    ExperimentConfig c = build_config(o);
    RecoveryOptions opts;
    opts.solver = c.solver;
    opts.solver.auto_tol = c.auto_tol.value_or(true);
    opts.var_tol = a.var_tol;
    opts.latent_dim = a.latent_dim;
    opts.seed = a.seed;
    opts.whiten = a.whiten;
    SteinConfig stein = c.stein;
    RecoveryResult r;
    if (a.jacobians.empty()) {
        SteinProvider p(stein);
        r = recover_latents(x, p, opts);
    } else {
        FixedBatchProvider p(read_jacobians(a.jacobians), stein);
        r = recover_latents(x, p, opts);
    }
    const NoiseResult nr = recover_noise(r, c.regression);
    const fs::path dir = a.out;
    fs::create_directories(dir);
    write_csv(dir / "Z_hat.csv", r.Z_hat, "Zhat");
    write_csv(dir / "E_hat.csv", nr.E_hat, "Ehat");
    write_csv(dir / "functionals.csv", r.functionals, "x");
    std::ofstream(dir / "recovery.json") << r.log_json().dump(2) << "\n";
    std::cout << "status " << r.status() << ", " << r.layer_count() << " layers\n";
    return r.stalled ? 2 : 0;
}

int cmd_evaluate(const std::string& truth, const std::string& estimate, const std::string& out) {
    const EvalReport rep = mac(read_csv(truth).values, read_csv(estimate).values);
    if (!out.empty()) std::ofstream(out) << rep.to_json().dump(2) << "\n";
    std::cout << "mac " << format_double(rep.mac) << "\n";
    return 0;
}

int cmd_experiment(const Overrides& o) {
    const ExperimentConfig c = build_config(o);
    const ExperimentOutcome out = run_experiment(c);
    std::cout << "mac " << format_double(out.report.mac) << " status " << out.status() << "\n";
    return out.recovery.stalled ? 2 : 0;
}

int cmd_ser_sweep(const Overrides& o, const std::string& grid, std::size_t seeds) {
    ExperimentConfig c = build_config(o);
    const auto rows = ser_sweep(c, parse_grid(grid), seeds);
    if (!c.out_dir.empty()) {
        fs::create_directories(c.out_dir);
        write_ser_sweep_csv(c.out_dir / "ser_sweep.csv", rows);
    }
    for (const auto& r : rows)
        std::cout << "ser " << format_double(r.ser) << " mac " << format_double(r.mac_mean) << " sd "
                  << format_double(r.mac_sd) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Latent causal representation recovery from linearly mixed observations"};
    app.require_subcommand(1);
    Overrides o;

    auto* gen = app.add_subcommand("generate", "sample a model, latents and mixed observations");
    add_data_options(gen, o);
    gen->add_option("-o,--out", o.out, "output directory")->required();

    ScoreArgs sa;
    auto* score = app.add_subcommand("score", "compute score Jacobians of observed data");
    score->add_option("--mode", sa.mode, "stein or oracle");
    score->add_option("--x", sa.x, "observations CSV (stein)");
    score->add_option("--model", sa.model, "model JSON of the mixed latents (oracle)");
    score->add_option("--mixing", sa.h, "mixing matrix CSV (oracle)");
    score->add_option("--z", sa.z, "latents CSV (oracle)");
    score->add_option("--bandwidth", sa.bandwidth, "Stein kernel bandwidth");
    score->add_option("--ridge", sa.ridge, "Stein ridge");
    score->add_option("-o,--out", sa.out, "output Jacobian file")->required();

    RecoverArgs ra;
    auto* rec = app.add_subcommand("recover", "recover latents and noises from observations");
    rec->add_option("--x", ra.x, "observations CSV")->required();
    rec->add_option("--jacobians", ra.jacobians, "observed Jacobian file for the first round (default: Stein)");
    rec->add_option("-n,--latent-dim", ra.latent_dim, "number of latents (default: columns of X)");
    rec->add_option("--var-tol", ra.var_tol, "zero-variance threshold for exact Jacobians");
    rec->add_option("--seed", ra.seed, "random seed");
    rec->add_option("--whiten", ra.whiten, "start from whitened coordinates (true/false)");
    rec->add_option("-o,--out", ra.out, "output directory")->required();
    add_solver_options(rec, o);

    std::string truth, estimate, eval_out;
    auto* ev = app.add_subcommand("evaluate", "mean absolute correlation between two sample matrices");
    ev->add_option("--truth", truth, "ground-truth CSV")->required();
    ev->add_option("--estimate", estimate, "estimate CSV")->required();
    ev->add_option("-o,--out", eval_out, "report JSON");

    auto* exp = app.add_subcommand("experiment", "run the full pipeline and write artifacts");
    add_data_options(exp, o);
    add_solver_options(exp, o);
    exp->add_option("--mode", o.mode, "oracle, stein, external or perturbed");
    exp->add_option("--target-ser", o.target_ser, "SER for perturbed mode");
    exp->add_option("--jacobian-file", o.jacobian_file, "Jacobian file for external mode");
    exp->add_option("-o,--out", o.out, "output directory");

    std::string grid = "1,2,4,8,16,1000000";
    std::size_t seeds = 5;
    auto* sweep = app.add_subcommand("ser-sweep", "MAC against SER of perturbed oracle Jacobians");
    add_data_options(sweep, o);
    add_solver_options(sweep, o);
    sweep->add_option("--grid", grid, "comma-separated SER values");
    sweep->add_option("--seeds", seeds, "seeds per grid point");
    sweep->add_option("-o,--out", o.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (*gen) return cmd_generate(o);
        if (*score) return cmd_score(sa);
        if (*rec) return cmd_recover(ra, o);
        if (*ev) return cmd_evaluate(truth, estimate, eval_out);
        if (*exp) return cmd_experiment(o);
        if (*sweep) return cmd_ser_sweep(o, grid, seeds);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
