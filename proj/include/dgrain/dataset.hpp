#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "dgrain/features.hpp"
#include "dgrain/fgm.hpp"
#include "dgrain/inference.hpp"

namespace dgrain {

/// Dataset directory layout: sample_<n>.micro (+ .json), sample_<n>.uf (+ .json).
struct Dataset {
    std::vector<int> ids;
    std::vector<Microstructure> micro;
    std::vector<FineField> fields;  ///< empty when only microstructures are present

    int size() const { return int(ids.size()); }
};

std::filesystem::path micro_path(const std::filesystem::path& dir, int id);
std::filesystem::path field_path(const std::filesystem::path& dir, int id);

void write_dataset(const std::filesystem::path& dir, const Dataset& d);
/// Reads all samples in a directory; with require_fields, every sample needs a
/// fine field and all fields must share one grid.
Dataset ingest_dataset(const std::filesystem::path& dir, bool require_fields = true);

/// Features, fine fields, BCs and log-Maxwell initial latent means.
TrainingData make_training_data(const Dataset& d, const Partition& p, const FeatureRegistry& reg,
                                int parallelism = 1);

/// Per-cell initial log-permeability from the Maxwell estimate of each cell.
VectorXd initial_log_permeability(const Microstructure& m, const Partition& p);

}  // namespace dgrain
