#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "obscrl/metrics.hpp"
#include "obscrl/recovery.hpp"
#include "obscrl/regression.hpp"
#include "obscrl/scm.hpp"
#include "obscrl/sphere_solver.hpp"
#include "obscrl/stein.hpp"
#include "obscrl/synth.hpp"

namespace obscrl {

enum class ScoreMode { oracle, stein, external, perturbed };
std::string to_string(ScoreMode m);
ScoreMode score_mode_from_string(const std::string& s);

// How latents are brought onto [0, 1] before mixing.
enum class Scaling { sequential, post_hoc, none };
std::string to_string(Scaling s);
Scaling scaling_from_string(const std::string& s);

struct ExperimentConfig {
    nlohmann::json graph = "line4";  // preset name or model JSON (noise_vars optional)
    Eigen::Index samples = 2000;
    std::uint64_t seed = 0;
    ScoreMode score_mode = ScoreMode::oracle;
    SolverConfig solver;
    std::optional<bool> auto_tol;  // empty: on for every mode except oracle
    RegressionConfig regression;
    SteinConfig stein;
    double target_ser = 1e6;          // perturbed mode
    std::filesystem::path jacobian_file;  // external mode
    Eigen::Index observed_dim = 0;    // 0: same as the number of latents
    Scaling scaling = Scaling::sequential;
    bool whiten = true;
    double var_tol = 1e-8;
    std::filesystem::path out_dir;

    // Unknown keys are rejected with StructuralError.
    static ExperimentConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    bool effective_auto_tol() const { return auto_tol.value_or(score_mode != ScoreMode::oracle); }
};

// Presets "line4" (Z1 -> Z2 -> Z3 -> Z4) and "y4" (Z1 -> Z2 -> Z3, Z2 -> Z4) with
// squared-norm mechanisms; a JSON object is read as a model, drawing noise
// variances from U[0.1, 1] when "noise_vars" is absent.
Scm resolve_graph(const nlohmann::json& graph, std::uint64_t seed);

struct SyntheticData {
    Scm source;          // model as specified
    Scm model;           // model of the scaled latents actually mixed
    SampleBatch batch;   // E, Z (scaled), X
    MixingMatrix mixing;
};

SyntheticData generate_data(const ExperimentConfig& cfg);

struct ExperimentOutcome {
    SyntheticData data;
    RecoveryResult recovery;
    NoiseResult noise;
    EvalReport report;
    EvalReport latent_report;  // Z against Z_hat, for reference
    std::optional<double> measured_ser;

    std::string status() const { return recovery.status(); }
    nlohmann::json report_json(const ExperimentConfig& cfg) const;
};

// synth -> scores -> recover_latents -> recover_noise -> mac; no files written.
ExperimentOutcome run_pipeline(const ExperimentConfig& cfg);

// run_pipeline plus artifacts in cfg.out_dir: manifest.json (the only file with a
// timestamp), report.json, CSV matrices and SVG figures.
ExperimentOutcome run_experiment(const ExperimentConfig& cfg);

void write_artifacts(const ExperimentConfig& cfg, const ExperimentOutcome& out);

struct SerSweepRow {
    double ser = 0.0;
    double mac_mean = 0.0;
    double mac_sd = 0.0;
    std::vector<double> macs;
};

// Perturbed-oracle runs at every grid point for seeds base.seed .. base.seed + seeds - 1.
std::vector<SerSweepRow> ser_sweep(const ExperimentConfig& base, const std::vector<double>& grid, std::size_t seeds);

void write_ser_sweep_csv(const std::filesystem::path& path, const std::vector<SerSweepRow>& rows);

}  // namespace obscrl
