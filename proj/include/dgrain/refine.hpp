#pragma once

#include <functional>
#include <vector>

#include "dgrain/model.hpp"

namespace dgrain {

struct SplitRecord {
    int round = 0;
    int cell_id = 0;
    int cell_index = 0;
    double elbo_before = 0;
    double elbo_after = 0;  ///< ELBO after the first post-split outer iteration
};

struct RefinementPlan {
    int max_splits = 4;
    std::vector<VectorXd> scores;          ///< F_m per round, before the split
    std::vector<Partition> partitions;     ///< partition trained in each round
    std::vector<SplitRecord> splits;
    std::vector<double> elbo_trace;        ///< concatenated over rounds
    std::vector<int> round_start;          ///< trace index where each round begins
};

struct RefineConfig {
    int max_splits = 4;
    TrainConfig train;
    int round_iterations = 0;  ///< > 0: fixed iteration budget per round instead of convergence
};

VectorXd score_cells(const VariationalState& s);

/// Pick the lowest-scoring splittable cell; ties go to the lowest cell id. -1 if none.
int select_split(const VectorXd& scores, const Partition& p);

/// State for the refined partition: children inherit the parent's encoder and
/// latent parameters; ADAM moments are reset and caches marked stale.
VariationalState split_state(const VariationalState& s, const Partition& before, int cell_index);

/// Feature matrices recomputed for a new partition.
using FeatureProvider = std::function<std::vector<MatrixXd>(const Partition&)>;

struct RefineResult {
    VariationalState state;
    Partition partition;
    RefinementPlan plan;
};

RefineResult refine_loop(const TrainingData& base_data, const FeatureProvider& features, int n_el, int fine_grid,
                         const Partition& initial, const RefineConfig& cfg);

}  // namespace dgrain
