// config.hpp — Run configuration: JSON schema, parsing, validation.
//
// A run is described by one JSON document with lower_snake_case keys. Every
// field is either present or defaulted; the fully resolved configuration is
// echoed into the output metadata so any artifact can be reproduced exactly.

#pragma once

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "qme/bath.hpp"
#include "qme/models.hpp"

namespace qme::cli {

enum class QmeFamily { Redfield, Secular, Ule, Tle };
enum class Task { Steady, Perturbative, Mfg, Compare, SweepEpsilon, SweepBeta, Evolve };
enum class OutputFormat { Csv, Json };

const char* family_name(QmeFamily f);
const char* task_name(Task t);

struct QmeChoice {
    QmeFamily family = QmeFamily::Ule;
    bool include_lamb = true;
    double epsilon = 0.1;
};

struct ModelConfig {
    std::string kind;  // spin_boson | spin_chain | generic
    models::SpinBosonSpec spin_boson;
    models::SpinChainSpec spin_chain;
    models::GenericSpec generic;
    // > 0 ties the Debye cutoff to the temperature (omega_d = product / beta)
    // when beta sweeps rebuild the bath.
    double omega_d_beta_product = 0.0;
};

struct SweepConfig {
    std::vector<double> epsilon_sq_grid;
    std::vector<double> beta_grid;
};

struct EvolveConfig {
    std::string initial = "gibbs";  // gibbs|maximally_mixed|all_down|level:<k>|plus_x|random_pure
    double t_end = 10.0;
    double dt = 0.0;  // <= 0: automatic from the step guard
    int snap_every = 10;
    bool include_state = true;
};

struct CompareSide {
    std::string state = "gibbs";  // gibbs | mfg | steady | perturbative
    QmeChoice qme;
    std::string mfg_route = "contour";
};

struct RunConfig {
    ModelConfig model;
    QmeChoice qme;
    std::vector<QmeFamily> families;  // perturbative task may emit several
    Task task = Task::Perturbative;
    bath::QuadSettings quad;
    OutputFormat format = OutputFormat::Csv;
    std::string out_dir = "out";
    std::uint64_t seed = 1;
    SweepConfig sweep;
    EvolveConfig evolve;
    CompareSide compare_a, compare_b;
    nlohmann::ordered_json resolved;  // echo of the full configuration
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config_file(const std::string& path);

struct Diagnostic {
    bool is_error = true;
    std::string message;
};

// Schema and physics checks: missing/invalid fields, degeneracy pre-scan for
// perturbative tasks, channel-count constraints. Never throws; returns the
// full list of findings.
std::vector<Diagnostic> validate(const RunConfig& config);

// Builds the model named by the configuration; beta_override > 0 replaces the
// configured temperature (beta sweeps), honoring omega_d_beta_product.
models::Model build_model(const RunConfig& config, double beta_override = 0.0);

}  // namespace qme::cli
