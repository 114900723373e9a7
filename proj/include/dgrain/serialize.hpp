#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "dgrain/fgm.hpp"
#include "dgrain/model.hpp"

namespace dgrain {

using json = nlohmann::json;
namespace fs = std::filesystem;

json to_json(const BoundaryFlux& bc);
BoundaryFlux bc_from_json(const json& j);
/// "ax,ay,axy"
BoundaryFlux parse_bc(const std::string& s);

json to_json(const MicrostructureParams& p);
MicrostructureParams micro_params_from_json(const json& j);

json to_json(const Partition& p);
Partition partition_from_json(const json& j);
/// "KxK" uniform partition string or a JSON file path.
Partition parse_partition(const std::string& spec, int n_el);

json to_json(const FeatureSpec& s);
FeatureSpec feature_spec_from_json(const json& j);
json to_json(const FeatureRegistry& r);
FeatureRegistry registry_from_json(const json& j);

json to_json(const HyperPriors& h);
HyperPriors hyper_from_json(const json& j);
json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const json& j, const TrainConfig& defaults = {});

json to_json(const VariationalState& s);
VariationalState state_from_json(const json& j);

json to_json(const SurrogateModel& m);
SurrogateModel surrogate_from_json(const json& j);

json read_json(const fs::path& path);
void write_json(const fs::path& path, const json& j);

void write_f64(const fs::path& path, const double* data, std::size_t n);
std::vector<double> read_f64(const fs::path& path);

/// Bit-packed (MSB first, row-major) pixels plus `<path>.json` sidecar.
void write_micro(const fs::path& path, const Microstructure& m);
Microstructure read_micro(const fs::path& path);

/// Binary f64 row-major field plus `<path>.json` sidecar {grid, bc}.
void write_field(const fs::path& path, const FineField& f);
FineField read_field(const fs::path& path);

}  // namespace dgrain
