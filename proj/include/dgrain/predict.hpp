#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dgrain/model.hpp"
#include "dgrain/random.hpp"

namespace dgrain {

struct PosteriorDraw {
    MatrixXd theta;   ///< features x cells
    VectorXd tau_c;   ///< per cell
    VectorXd tau_cf;  ///< per fine node
};

PosteriorDraw draw_posterior(const VariationalState& s, Rng& rng);

/// Ancestral samples of uf (n_fine x n) for one microstructure's features.
MatrixXd predict_samples(const SurrogateModel& model, const MatrixXd& phi, const BoundaryFlux& bc, int n,
                         std::uint64_t seed);
MatrixXd predict_samples(const SurrogateModel& model, const Microstructure& micro, const BoundaryFlux& bc, int n,
                         std::uint64_t seed);

struct PredictiveMoments {
    VectorXd mu, var;
    int n_samples = 0;
};

/// Mean inverse decoder precision f~ / (e~ - 1).
VectorXd mean_inverse_tau_cf(const DecoderPosterior& dec);

PredictiveMoments predict_moments(const SurrogateModel& model, const MatrixXd& phi, const BoundaryFlux& bc,
                                  int n = 100, std::uint64_t seed = 0);
PredictiveMoments predict_moments(const SurrogateModel& model, const Microstructure& micro, const BoundaryFlux& bc,
                                  int n = 100, std::uint64_t seed = 0);

double r_squared(const std::vector<VectorXd>& truth, const std::vector<VectorXd>& mean);
double mean_log_likelihood(const std::vector<VectorXd>& truth, const std::vector<PredictiveMoments>& pred);
/// Fraction of coordinates inside mu +/- k sigma.
double coverage(const std::vector<VectorXd>& truth, const std::vector<PredictiveMoments>& pred, double k = 2.0);

/// Index of the g x g grid node nearest to (x, y).
int nearest_node(int g, double x, double y);

struct UncertaintyBands {
    VectorXd edges;             ///< bins + 1 edges
    VectorXd mean, lo, hi;      ///< per-bin density: mean and 5% / 95% quantiles across draws
    VectorXd kde_x, kde;        ///< Gaussian KDE (Silverman bandwidth) of pooled values
    std::vector<VectorXd> per_draw;  ///< per-draw QoI values
};

/// Density histogram of values on fixed edges.
VectorXd histogram_density(const VectorXd& values, const VectorXd& edges);
double silverman_bandwidth(const VectorXd& values);

UncertaintyBands propagate_uncertainty(const SurrogateModel& model, const std::vector<MatrixXd>& micro_features,
                                       const BoundaryFlux& bc, int qoi_node, int n_param_draws, std::uint64_t seed,
                                       int bins = 50, int parallelism = 1);

/// Cumulative explained-variance fraction of the sample covariance spectrum.
VectorXd pca_explained_variance(const std::vector<VectorXd>& fields);

}  // namespace dgrain
