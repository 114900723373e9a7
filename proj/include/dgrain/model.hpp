#pragma once

#include <string>
#include <vector>

#include "dgrain/cgm.hpp"
#include "dgrain/features.hpp"
#include "dgrain/inference.hpp"

namespace dgrain {

/// Everything needed to predict with a trained surrogate.
struct SurrogateModel {
    int n_el = 16;
    int fine_grid = 65;
    Partition partition;
    FeatureRegistry registry;
    VariationalState state;
    TrainConfig config;

    CoarseModel coarse_model(const BoundaryFlux& bc) const { return CoarseModel(n_el, partition, bc, fine_grid); }
    std::vector<std::string> feature_ids() const {
        std::vector<std::string> ids;
        for (const auto& f : registry) ids.push_back(f.id);
        return ids;
    }
};

}  // namespace dgrain
