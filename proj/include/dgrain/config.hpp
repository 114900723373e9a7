#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "dgrain/fgm.hpp"
#include "dgrain/inference.hpp"
#include "dgrain/microgen.hpp"
#include "dgrain/serialize.hpp"

namespace dgrain {

enum class FgmKind { darcy, stokes };

struct PredictOptions {
    int n_samples = 100;
    double coverage_k = 2.0;
    double qoi_x = 1.0, qoi_y = 1.0;
    int param_draws = 100;
    int bins = 50;
};

struct RefineOptions {
    std::string start = "2x2";
    int max_splits = 4;
    int round_iterations = 0;
};

/// Full run configuration: defaults, overlaid by a JSON file, overlaid by
/// DGRAIN_<SECTION>_<KEY> environment variables.
struct RunConfig {
    std::uint64_t seed = 0;
    int parallelism = 1;
    int resolution = 256;
    MicrostructureParams micro;
    FgmKind fgm = FgmKind::darcy;
    DarcyOptions darcy{64, 1e-8, 65, LinearSolver::pcg, 1e-10, 0};
    StokesOptions stokes{64, 65, 1.0, 1e-10, 2000};
    BoundaryFlux bc{1.0, 1.0, 0.0};
    int n_el = 16;
    std::string partition = "4x4";
    TrainConfig train;
    PredictOptions predict;
    RefineOptions refine;

    void validate() const;
};

json to_json(const RunConfig& c);
/// Parses a complete or partial document over the defaults. Unknown keys and
/// type mismatches are reported with the dotted field name.
RunConfig run_config_from_json(const json& j);

/// Environment overrides; keys are the flattened upper-case field paths,
/// e.g. DGRAIN_TRAIN_MC_SAMPLES or DGRAIN_SEED.
json apply_env_overrides(json doc, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> dgrain_environment();

/// Defaults, then the optional file, then the process environment.
RunConfig load_run_config(const std::filesystem::path& file = {});

}  // namespace dgrain
