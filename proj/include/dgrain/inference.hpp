#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "dgrain/cgm.hpp"
#include "dgrain/random.hpp"
#include "dgrain/types.hpp"

namespace dgrain {

struct HyperPriors {
    double a = 1e-10, b = 1e-10, c = 1e-10, d = 1e-10, e = 1e-10, f = 1e-10;
    void validate() const;
};

struct AdamConfig {
    double alpha = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

struct TrainConfig {
    HyperPriors hyper;
    AdamConfig adam;
    int mc_samples = 10;        ///< per gradient step
    int adam_steps = 100;       ///< per outer iteration
    int cache_samples = 100;    ///< moment-cache refresh
    double tolerance = 1e-5;    ///< relative ELBO change
    int patience = 5;           ///< consecutive iterations below tolerance
    int max_iterations = 500;
    int min_iterations = 0;
    int closed_form_sweeps = 1; ///< ordered theta/gamma/tau_c sweeps per outer iteration
    double init_sigma_lambda = 0.5;
    bool tied_conjugate_shape = true;  ///< a~ = a + N_cells/2 (true) or a + 1/2
    bool monotone_bbvi = true;  ///< keep a sample's previous factor if its objective did not improve
    int parallelism = 1;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Per-sample training input.
struct TrainingData {
    std::vector<MatrixXd> phi;           ///< cells x features per sample
    std::vector<VectorXd> uf;            ///< fine pressure per sample
    std::vector<BoundaryFlux> bc;        ///< boundary data per sample
    std::vector<std::uint64_t> keys;     ///< stable per-sample seed keys
    std::vector<std::string> columns;    ///< feature ids
    std::vector<VectorXd> init_lambda;   ///< optional initial mu_lambda per sample

    int size() const { return int(uf.size()); }
    void validate(int n_cells, int n_fine) const;
};

/// Stable seed key for a sample derived from its fine-field content.
std::uint64_t sample_key(const VectorXd& uf);

struct EncoderPosterior {
    MatrixXd mu_theta;   ///< features x cells
    MatrixXd var_theta;  ///< features x cells
    double a_tilde = 0;
    VectorXd b_tilde;    ///< per feature (tied over cells)
    double c_tilde = 0;
    VectorXd d_tilde;    ///< per cell

    VectorXd gamma_mean() const { return a_tilde * b_tilde.cwiseInverse(); }
    VectorXd tau_c_mean() const { return c_tilde * d_tilde.cwiseInverse(); }
    MatrixXd theta_sq() const { return mu_theta.cwiseAbs2() + var_theta; }
};

struct DecoderPosterior {
    double e_tilde = 0;
    VectorXd f_tilde;  ///< per fine node

    VectorXd tau_cf_mean() const { return e_tilde * f_tilde.cwiseInverse(); }
};

struct AdamState {
    VectorXd m, v;
    int t = 0;
    void reset(Eigen::Index n) {
        m = VectorXd::Zero(n);
        v = VectorXd::Zero(n);
        t = 0;
    }
};

struct LatentPosterior {
    VectorXd mu;         ///< per cell
    VectorXd log_sigma;  ///< per cell
    // Moment caches, valid when cache_version == version.
    VectorXd lambda_mean, lambda_sq;
    VectorXd uc_mean, uc_sq;  ///< coarse nodes
    VectorXd residual_sq;     ///< <(uf - W uc)_i^2>, fine nodes
    std::uint64_t version = 0, cache_version = ~std::uint64_t{0};
    AdamState adam;

    VectorXd sigma() const { return log_sigma.array().exp(); }
    bool cache_fresh() const { return cache_version == version; }
};

struct VariationalState {
    HyperPriors hyper;
    EncoderPosterior enc;
    DecoderPosterior dec;
    std::vector<LatentPosterior> lat;
    bool tied_conjugate_shape = true;
    int iteration = 0;
    std::vector<double> elbo_trace;

    int n_samples() const { return int(lat.size()); }
    int n_cells() const { return int(enc.mu_theta.cols()); }
    int n_features() const { return int(enc.mu_theta.rows()); }
    int n_fine() const { return int(dec.f_tilde.size()); }
};

// --------------------------------------------------------------------------
// Densities
// --------------------------------------------------------------------------

/// sum_m log N(lambda_m | theta_m^T phi_m, 1/tau_m); theta is features x cells.
double encoder_logpdf(const VectorXd& lambda, const MatrixXd& phi, const MatrixXd& theta, const VectorXd& tau);
/// log N(uf | W uc, diag(1/tau_cf)).
double decoder_logpdf(const VectorXd& uf, const VectorXd& uc, const VectorXd& tau_cf, const RowSparseMatrixXd& w);

// --------------------------------------------------------------------------
// Closed-form updates
// --------------------------------------------------------------------------

VariationalState init_state(const TrainingData& data, const CoarseModel& model, const TrainConfig& cfg);

void update_q_theta(VariationalState& s, const TrainingData& data);
void update_q_gamma(VariationalState& s);
void update_q_tau_c(VariationalState& s, const TrainingData& data);
void update_q_tau_cf(VariationalState& s);

/// <(lambda_nm - theta_m^T phi_nm)^2> under Q(lambda) Q(theta).
double encoder_residual_sq(const VariationalState& s, const MatrixXd& phi, int n, int m);

// --------------------------------------------------------------------------
// ELBO
// --------------------------------------------------------------------------

/// Compact form valid when the Gamma factors are at their conditional optima.
double elbo(const VariationalState& s);
VectorXd elbo_per_cell(const VariationalState& s);
/// Every term of E[log p] - E[log Q], constants included.
double elbo_full(const VariationalState& s, const TrainingData& data);

// --------------------------------------------------------------------------
// Black-box VI for the per-sample latent factors
// --------------------------------------------------------------------------

/// Forward models (coarse solver or test surrogates) used by the BBVI core.
struct ForwardModel {
    virtual ~ForwardModel() = default;
    virtual int n_cells() const = 0;
    virtual const RowSparseMatrixXd& W() const = 0;
    /// Coarse output for lambda; may cache a factorization for adjoint().
    virtual VectorXd solve(const VectorXd& lambda) const = 0;
    /// d(weight^T u)/d lambda at the lambda of the preceding solve(), u its result.
    virtual VectorXd adjoint(const VectorXd& lambda, const VectorXd& u, const VectorXd& weight) const = 0;
    /// du/d lambda at the lambda of the preceding solve().
    virtual MatrixXd jacobian(const VectorXd& lambda, const VectorXd& u) const = 0;
};

/// ForwardModel adaptor around a CoarseModel with its own workspace. Not
/// thread-safe; create one per worker.
class CoarseForward final : public ForwardModel {
public:
    explicit CoarseForward(const CoarseModel& m) : m_(m) {}
    int n_cells() const override { return m_.n_cells(); }
    const RowSparseMatrixXd& W() const override { return m_.W(); }
    VectorXd solve(const VectorXd& lambda) const override { return m_.solve(lambda, ws_); }
    VectorXd adjoint(const VectorXd& lambda, const VectorXd& u, const VectorXd& weight) const override {
        return m_.adjoint(lambda, u, weight, ws_);
    }
    MatrixXd jacobian(const VectorXd& lambda, const VectorXd& u) const override { return m_.jacobian(lambda, u, ws_); }

private:
    const CoarseModel& m_;
    mutable CoarseWorkspace ws_;
};

/// Inputs of the per-sample objective
/// E[log p(uf | lambda)] + E[log p(lambda | theta, tau_c)] + sum_m log sigma_m.
struct SampleObjective {
    const VectorXd* uf = nullptr;
    VectorXd tau_cf;  ///< <tau_cf>
    VectorXd tau_c;   ///< <tau_c>
    VectorXd m_enc;   ///< <theta_m>^T phi_m
};

struct ObjectiveValue {
    double value = 0;
    VectorXd grad_mu, grad_log_sigma;
};

/// Monte Carlo objective for fixed standard-normal draws eps (cells x samples)
/// and its exact gradient. The decoder term uses the draws, the encoder term
/// and entropy are evaluated in closed form. Terms independent of (mu, sigma)
/// are dropped.
ObjectiveValue sample_objective(const ForwardModel& fwd, const SampleObjective& obj, const VectorXd& mu,
                                const VectorXd& log_sigma, const MatrixXd& eps, bool with_gradient = true);

/// Run ADAM on one sample's factor, then refresh its moment caches.
void bbvi_update_sample(LatentPosterior& lat, const ForwardModel& fwd, const SampleObjective& obj,
                        const TrainConfig& cfg, const SeedSeq& seeds, int iteration);

/// Recompute the moment caches of one sample from cfg.cache_samples fixed draws.
void refresh_cache(LatentPosterior& lat, const ForwardModel& fwd, const VectorXd& uf, const TrainConfig& cfg,
                   const SeedSeq& seeds);

/// Per-sample coarse models sharing discretization but carrying each sample's BC.
class ModelSet {
public:
    ModelSet(const CoarseModel& base, const std::vector<BoundaryFlux>& bcs);
    const CoarseModel& operator[](int n) const { return *models_[index_[n]]; }

private:
    std::vector<std::shared_ptr<const CoarseModel>> models_;
    std::vector<int> index_;
};

void bbvi_update_latents(VariationalState& s, const TrainingData& data, const ModelSet& models,
                         const TrainConfig& cfg);
void refresh_caches(VariationalState& s, const TrainingData& data, const ModelSet& models, const TrainConfig& cfg);

SampleObjective sample_objective_inputs(const VariationalState& s, const TrainingData& data, int n);

// --------------------------------------------------------------------------
// Training loop
// --------------------------------------------------------------------------

enum class Stage { bbvi, theta, gamma, tau_c, tau_cf, iteration_end };

/// Called after every stage; used by diagnostics and tests.
using TrainObserver = std::function<void(Stage, const VariationalState&)>;

struct TrainResult {
    VariationalState state;
    bool converged = false;
    int iterations = 0;
};

TrainResult train(const TrainingData& data, const CoarseModel& model, const TrainConfig& cfg,
                  const TrainObserver& observer = {});
/// Continue from an existing state (warm start).
TrainResult train_from(VariationalState state, const TrainingData& data, const CoarseModel& model,
                       const TrainConfig& cfg, const TrainObserver& observer = {});

}  // namespace dgrain
