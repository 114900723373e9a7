#include "dgrain/inference.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include <boost/math/special_functions/digamma.hpp>

#include "dgrain/log.hpp"
#include "dgrain/parallel.hpp"

namespace dgrain {
namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double digamma(double x) { return boost::math::digamma(x); }

void require_fresh(const VariationalState& s, const char* what) {
    for (const auto& l : s.lat)
        if (!l.cache_fresh()) throw NumericalError(std::string(what) + ": stale latent moment caches");
}

// Gamma(shape, rate) expectation of log x plus entropy, for the full ELBO.
double gamma_entropy(double shape, double rate) {
    return shape - std::log(rate) + std::lgamma(shape) + (1 - shape) * digamma(shape);
}

}  // namespace

void HyperPriors::validate() const {
    require(a > 0 && b > 0 && c > 0 && d > 0 && e > 0 && f > 0, "hyperpriors a..f must all be > 0");
}

void TrainConfig::validate() const {
    hyper.validate();
    require(mc_samples >= 1 && cache_samples >= 1, "sample counts must be >= 1");
    require(adam_steps >= 0, "adam_steps must be >= 0");
    require(adam.alpha > 0 && adam.beta1 >= 0 && adam.beta1 < 1 && adam.beta2 >= 0 && adam.beta2 < 1 && adam.eps > 0,
            "invalid ADAM parameters");
    require(tolerance >= 0 && patience >= 1 && max_iterations >= 1, "invalid convergence settings");
    require(closed_form_sweeps >= 1, "closed_form_sweeps must be >= 1");
    require(init_sigma_lambda > 0, "init_sigma_lambda must be > 0");
    require(parallelism >= 1, "parallelism must be >= 1");
}

void TrainingData::validate(int n_cells, int n_fine) const {
    require(!uf.empty(), "training data is empty");
    const std::size_t n = uf.size();
    require(phi.size() == n && bc.size() == n && keys.size() == n, "training data: inconsistent sample counts");
    require(init_lambda.empty() || init_lambda.size() == n, "training data: init_lambda size mismatch");
    const Eigen::Index j = phi[0].cols();
    for (std::size_t k = 0; k < n; ++k) {
        require(phi[k].rows() == n_cells && phi[k].cols() == j,
                "training data: feature matrix " + std::to_string(k) + " has inconsistent shape");
        require(uf[k].size() == n_fine, "training data: fine field " + std::to_string(k) + " has wrong size");
        require(phi[k].allFinite() && uf[k].allFinite(), "training data: non-finite values in sample " + std::to_string(k));
        if (!init_lambda.empty()) require(init_lambda[k].size() == n_cells, "training data: init_lambda shape");
    }
}

std::uint64_t sample_key(const VectorXd& uf) { return hash_bytes(uf.data(), sizeof(double) * std::size_t(uf.size())); }

// ==========================================================================
// Densities
// ==========================================================================

double encoder_logpdf(const VectorXd& lambda, const MatrixXd& phi, const MatrixXd& theta, const VectorXd& tau) {
    require(phi.rows() == lambda.size() && theta.cols() == lambda.size() && theta.rows() == phi.cols() &&
                tau.size() == lambda.size(),
            "encoder_logpdf: dimension mismatch");
    if ((tau.array() <= 0).any()) throw ConfigError("encoder_logpdf: precisions must be > 0");
    double lp = 0;
    for (Eigen::Index m = 0; m < lambda.size(); ++m) {
        double r = lambda[m] - phi.row(m).dot(theta.col(m));
        lp += 0.5 * (std::log(tau[m]) - kLog2Pi) - 0.5 * tau[m] * r * r;
    }
    return lp;
}

double decoder_logpdf(const VectorXd& uf, const VectorXd& uc, const VectorXd& tau_cf, const RowSparseMatrixXd& w) {
    require(w.rows() == uf.size() && w.cols() == uc.size() && tau_cf.size() == uf.size(),
            "decoder_logpdf: dimension mismatch");
    if ((tau_cf.array() <= 0).any()) throw ConfigError("decoder_logpdf: precisions must be > 0");
    VectorXd r = uf - w * uc;
    return 0.5 * (tau_cf.array().log() - kLog2Pi).sum() - 0.5 * (tau_cf.array() * r.array().square()).sum();
}

// ==========================================================================
// Initialization and closed-form updates
// ==========================================================================

VariationalState init_state(const TrainingData& data, const CoarseModel& model, const TrainConfig& cfg) {
    cfg.validate();
    const int m = model.n_cells();
    data.validate(m, model.n_fine());
    const int n = data.size();
    const int j = int(data.phi[0].cols());
    const auto& hp = cfg.hyper;

    VariationalState s;
    s.hyper = hp;
    s.tied_conjugate_shape = cfg.tied_conjugate_shape;
    s.enc.mu_theta = MatrixXd::Zero(j, m);
    s.enc.var_theta = MatrixXd::Ones(j, m);
    s.enc.a_tilde = hp.a + (cfg.tied_conjugate_shape ? 0.5 * m : 0.5);
    s.enc.b_tilde = VectorXd::Constant(j, hp.b + 0.5);
    s.enc.c_tilde = hp.c + 0.5 * n;
    s.enc.d_tilde = VectorXd::Constant(m, hp.d + 0.5);
    s.dec.e_tilde = hp.e + 0.5 * n;
    s.dec.f_tilde = VectorXd::Constant(model.n_fine(), hp.f + 0.5);
    s.lat.resize(n);
    for (int k = 0; k < n; ++k) {
        auto& l = s.lat[k];
        l.mu = data.init_lambda.empty() ? VectorXd::Zero(m) : data.init_lambda[k];
        l.log_sigma = VectorXd::Constant(m, std::log(cfg.init_sigma_lambda));
        l.adam.reset(2 * m);
    }
    return s;
}

double encoder_residual_sq(const VariationalState& s, const MatrixXd& phi, int n, int m) {
    const auto& l = s.lat[n];
    double r = l.lambda_mean[m] - phi.row(m).dot(s.enc.mu_theta.col(m));
    double var_l = std::max(0.0, l.lambda_sq[m] - l.lambda_mean[m] * l.lambda_mean[m]);
    double var_t = phi.row(m).cwiseAbs2().dot(s.enc.var_theta.col(m));
    return r * r + var_l + var_t;
}

void update_q_theta(VariationalState& s, const TrainingData& data) {
    require_fresh(s, "update_q_theta");
    const int n = s.n_samples(), mcount = s.n_cells(), j = s.n_features();
    const VectorXd gamma = s.enc.gamma_mean();
    const VectorXd tau = s.enc.tau_c_mean();
    MatrixXd phi(n, j);
    VectorXd r(n);
    for (int m = 0; m < mcount; ++m) {
        for (int k = 0; k < n; ++k) phi.row(k) = data.phi[k].row(m);
        for (int k = 0; k < n; ++k) r[k] = s.lat[k].lambda_mean[m];
        r -= phi * s.enc.mu_theta.col(m);
        for (int q = 0; q < j; ++q) {
            const double mu_old = s.enc.mu_theta(q, m);
            const double s2 = 1.0 / (tau[m] * phi.col(q).squaredNorm() + gamma[q]);
            const double mu_new = s2 * tau[m] * phi.col(q).dot(r + phi.col(q) * mu_old);
            r -= phi.col(q) * (mu_new - mu_old);
            s.enc.mu_theta(q, m) = mu_new;
            s.enc.var_theta(q, m) = s2;
        }
    }
}

void update_q_gamma(VariationalState& s) {
    const int m = s.n_cells();
    s.enc.a_tilde = s.hyper.a + (s.tied_conjugate_shape ? 0.5 * m : 0.5);
    s.enc.b_tilde = (s.hyper.b + 0.5 * s.enc.theta_sq().rowwise().sum().array()).matrix();
}

void update_q_tau_c(VariationalState& s, const TrainingData& data) {
    require_fresh(s, "update_q_tau_c");
    const int n = s.n_samples(), mcount = s.n_cells();
    s.enc.c_tilde = s.hyper.c + 0.5 * n;
    for (int m = 0; m < mcount; ++m) {
        double acc = 0;
        for (int k = 0; k < n; ++k) acc += encoder_residual_sq(s, data.phi[k], k, m);
        s.enc.d_tilde[m] = s.hyper.d + 0.5 * acc;
    }
}

void update_q_tau_cf(VariationalState& s) {
    require_fresh(s, "update_q_tau_cf");
    const int n = s.n_samples();
    s.dec.e_tilde = s.hyper.e + 0.5 * n;
    VectorXd acc = VectorXd::Zero(s.n_fine());
    for (int k = 0; k < n; ++k) acc += s.lat[k].residual_sq;
    s.dec.f_tilde = (s.hyper.f + 0.5 * acc.array()).matrix();
}

// ==========================================================================
// ELBO
// ==========================================================================

double elbo(const VariationalState& s) {
    require_fresh(s, "elbo");
    double f = -s.dec.e_tilde * s.dec.f_tilde.array().log().sum();
    for (const auto& l : s.lat) f += l.log_sigma.sum();
    f -= s.enc.c_tilde * s.enc.d_tilde.array().log().sum();
    f -= s.enc.a_tilde * s.enc.b_tilde.array().log().sum();
    f += 0.5 * s.enc.var_theta.array().log().sum();
    return f;
}

VectorXd elbo_per_cell(const VariationalState& s) {
    require_fresh(s, "elbo_per_cell");
    const int mcount = s.n_cells();
    VectorXd fm = VectorXd::Zero(mcount);
    for (const auto& l : s.lat) fm += l.log_sigma;
    fm -= s.enc.c_tilde * s.enc.d_tilde.array().log().matrix();
    fm += 0.5 * s.enc.var_theta.array().log().colwise().sum().transpose().matrix();
    return fm;
}

double elbo_full(const VariationalState& s, const TrainingData& data) {
    require_fresh(s, "elbo_full");
    const auto& hp = s.hyper;
    const int n = s.n_samples(), mcount = s.n_cells(), j = s.n_features(), nf = s.n_fine();
    const auto& enc = s.enc;
    const auto& dec = s.dec;

    const VectorXd log_tcf = (digamma(dec.e_tilde) - dec.f_tilde.array().log()).matrix();
    const VectorXd tcf = dec.tau_cf_mean();
    const VectorXd log_tc = (digamma(enc.c_tilde) - enc.d_tilde.array().log()).matrix();
    const VectorXd tc = enc.tau_c_mean();
    const VectorXd log_g = (digamma(enc.a_tilde) - enc.b_tilde.array().log()).matrix();
    const VectorXd g = enc.gamma_mean();
    const MatrixXd th2 = enc.theta_sq();

    double f = 0;
    // decoder
    for (int k = 0; k < n; ++k)
        f += 0.5 * (log_tcf.array() - kLog2Pi).sum() - 0.5 * tcf.dot(s.lat[k].residual_sq);
    // encoder
    for (int k = 0; k < n; ++k)
        for (int m = 0; m < mcount; ++m)
            f += 0.5 * (log_tc[m] - kLog2Pi) - 0.5 * tc[m] * encoder_residual_sq(s, data.phi[k], k, m);
    // theta prior
    for (int m = 0; m < mcount; ++m)
        for (int q = 0; q < j; ++q) f += 0.5 * (log_g[q] - kLog2Pi) - 0.5 * g[q] * th2(q, m);
    // Gamma hyperpriors
    f += j * (hp.a * std::log(hp.b) - std::lgamma(hp.a)) + (hp.a - 1) * log_g.sum() - hp.b * g.sum();
    f += mcount * (hp.c * std::log(hp.d) - std::lgamma(hp.c)) + (hp.c - 1) * log_tc.sum() - hp.d * tc.sum();
    f += nf * (hp.e * std::log(hp.f) - std::lgamma(hp.e)) + (hp.e - 1) * log_tcf.sum() - hp.f * tcf.sum();
    // entropies
    f += 0.5 * (enc.var_theta.array().log() + kLog2Pi + 1.0).sum();
    for (const auto& l : s.lat) f += (0.5 * (kLog2Pi + 1.0) + l.log_sigma.array()).sum();
    for (int q = 0; q < j; ++q) f += gamma_entropy(enc.a_tilde, enc.b_tilde[q]);
    for (int m = 0; m < mcount; ++m) f += gamma_entropy(enc.c_tilde, enc.d_tilde[m]);
    for (int i = 0; i < nf; ++i) f += gamma_entropy(dec.e_tilde, dec.f_tilde[i]);
    return f;
}

// ==========================================================================
// BBVI
// ==========================================================================

ObjectiveValue sample_objective(const ForwardModel& fwd, const SampleObjective& obj, const VectorXd& mu,
                                const VectorXd& log_sigma, const MatrixXd& eps, bool with_gradient) {
    const Eigen::Index m = mu.size();
    const int ns = int(eps.cols());
    require(eps.rows() == m && ns >= 1, "sample_objective: draw matrix has the wrong shape");
    const VectorXd sigma = log_sigma.array().exp();
    const auto& w = fwd.W();
    ObjectiveValue out;
    out.grad_mu = VectorXd::Zero(m);
    out.grad_log_sigma = VectorXd::Zero(m);
    double dec = 0;
    for (int k = 0; k < ns; ++k) {
        VectorXd lambda = mu + sigma.cwiseProduct(eps.col(k));
        VectorXd u = fwd.solve(lambda);
        VectorXd r = *obj.uf - w * u;
        VectorXd tr = obj.tau_cf.cwiseProduct(r);
        dec += -0.5 * r.dot(tr);
        if (with_gradient) {
            VectorXd weight = w.transpose() * tr;
            VectorXd g = fwd.adjoint(lambda, u, weight);
            out.grad_mu += g;
            out.grad_log_sigma += g.cwiseProduct(eps.col(k)).cwiseProduct(sigma);
        }
    }
    dec /= ns;
    const VectorXd dm = mu - obj.m_enc;
    const VectorXd s2 = sigma.cwiseAbs2();
    double enc = -0.5 * obj.tau_c.dot(dm.cwiseAbs2() + s2);
    out.value = dec + enc + log_sigma.sum();
    if (with_gradient) {
        out.grad_mu /= ns;
        out.grad_log_sigma /= ns;
        out.grad_mu -= obj.tau_c.cwiseProduct(dm);
        out.grad_log_sigma -= obj.tau_c.cwiseProduct(s2);
        out.grad_log_sigma.array() += 1.0;
    }
    return out;
}

namespace {

MatrixXd normal_draws(const SeedSeq& seed, Eigen::Index rows, int cols) {
    Rng rng = seed.rng();
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd e(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) e(r, c) = nd(rng);
    return e;
}

struct CacheMoments {
    VectorXd uc_mean, uc_sq, residual_sq;
};

// Monte Carlo moments under Q(lambda) with the linearization at mu as control
// variate: its moments are exact, only the nonlinear remainder is sampled.
CacheMoments compute_cache(const ForwardModel& fwd, const VectorXd& uf, const VectorXd& mu, const VectorXd& log_sigma,
                           const TrainConfig& cfg, const SeedSeq& seeds) {
    const int ns = cfg.cache_samples;
    const MatrixXd eps = normal_draws(seeds.child("cache"), mu.size(), ns);
    const VectorXd sigma = log_sigma.array().exp();
    const auto& w = fwd.W();
    const VectorXd u0 = fwd.solve(mu);
    const MatrixXd js = fwd.jacobian(mu, u0) * sigma.asDiagonal();
    const MatrixXd wjs = w * js;
    const VectorXd r0 = uf - w * u0;

    CacheMoments c;
    c.uc_mean = VectorXd::Zero(u0.size());
    c.uc_sq = VectorXd::Zero(u0.size());
    c.residual_sq = VectorXd::Zero(r0.size());
    for (int k = 0; k < ns; ++k) {
        VectorXd e = eps.col(k);
        VectorXd u;
        try {
            u = fwd.solve(mu + sigma.cwiseProduct(e));
        } catch (const NumericalError&) {
            e = normal_draws(seeds.child("cache-retry").child(std::uint64_t(k)), mu.size(), 1).col(0);
            u = fwd.solve(mu + sigma.cwiseProduct(e));
        }
        const VectorXd ul = u0 + js * e;
        const VectorXd rl = r0 - wjs * e;
        c.uc_mean += u - ul;
        c.uc_sq += u.cwiseAbs2() - ul.cwiseAbs2();
        c.residual_sq += (uf - w * u).cwiseAbs2() - rl.cwiseAbs2();
    }
    c.uc_mean /= ns;
    c.uc_sq /= ns;
    c.residual_sq /= ns;
    c.uc_mean += u0;
    c.uc_sq += u0.cwiseAbs2() + js.rowwise().squaredNorm();
    c.residual_sq += r0.cwiseAbs2() + wjs.rowwise().squaredNorm();
    c.residual_sq = c.residual_sq.cwiseMax(0.0);
    return c;
}

void install_cache(LatentPosterior& lat, CacheMoments&& c) {
    lat.lambda_mean = lat.mu;
    lat.lambda_sq = lat.mu.cwiseAbs2() + (2.0 * lat.log_sigma.array()).exp().matrix();
    lat.uc_mean = std::move(c.uc_mean);
    lat.uc_sq = std::move(c.uc_sq);
    lat.residual_sq = std::move(c.residual_sq);
    lat.cache_version = lat.version;
}

// Sample-average objective on the cache draws, up to (mu, sigma)-independent terms.
double cached_objective(const VectorXd& residual_sq, const VectorXd& mu, const VectorXd& log_sigma,
                        const SampleObjective& obj) {
    const VectorXd s2 = (2.0 * log_sigma.array()).exp();
    return -0.5 * obj.tau_cf.dot(residual_sq) - 0.5 * obj.tau_c.dot((mu - obj.m_enc).cwiseAbs2() + s2) +
           log_sigma.sum();
}

}  // namespace

void refresh_cache(LatentPosterior& lat, const ForwardModel& fwd, const VectorXd& uf, const TrainConfig& cfg,
                   const SeedSeq& seeds) {
    install_cache(lat, compute_cache(fwd, uf, lat.mu, lat.log_sigma, cfg, seeds));
}

void bbvi_update_sample(LatentPosterior& lat, const ForwardModel& fwd, const SampleObjective& obj,
                        const TrainConfig& cfg, const SeedSeq& seeds, int iteration) {
    const Eigen::Index m = lat.mu.size();
    if (lat.adam.m.size() != 2 * m) lat.adam.reset(2 * m);
    const bool check = cfg.monotone_bbvi && lat.cache_fresh();
    const double old_value = check ? cached_objective(lat.residual_sq, lat.mu, lat.log_sigma, obj) : 0.0;

    VectorXd mu = lat.mu, ls = lat.log_sigma;
    AdamState adam = lat.adam;
    const auto& a = cfg.adam;
    const SeedSeq it_seed = seeds.child("grad").child(std::uint64_t(iteration));
    for (int t = 0; t < cfg.adam_steps; ++t) {
        const SeedSeq step_seed = it_seed.child(std::uint64_t(t));
        ObjectiveValue v;
        try {
            v = sample_objective(fwd, obj, mu, ls, normal_draws(step_seed, m, cfg.mc_samples));
        } catch (const NumericalError&) {
            v = sample_objective(fwd, obj, mu, ls, normal_draws(step_seed.child("retry"), m, cfg.mc_samples));
        }
        VectorXd g(2 * m);
        g << v.grad_mu, v.grad_log_sigma;
        if (!g.allFinite()) throw NumericalError("BBVI: non-finite gradient");
        ++adam.t;
        adam.m = a.beta1 * adam.m + (1 - a.beta1) * g;
        adam.v = a.beta2 * adam.v + (1 - a.beta2) * g.cwiseAbs2();
        const double c1 = 1 - std::pow(a.beta1, adam.t), c2 = 1 - std::pow(a.beta2, adam.t);
        VectorXd step = a.alpha * (adam.m / c1).array() / ((adam.v / c2).array().sqrt() + a.eps);
        mu += step.head(m);
        ls += step.tail(m);
    }

    CacheMoments c = compute_cache(fwd, *obj.uf, mu, ls, cfg, seeds);
    if (check && cached_objective(c.residual_sq, mu, ls, obj) < old_value) {
        lat.adam.reset(2 * m);
        return;
    }
    lat.mu = std::move(mu);
    lat.log_sigma = std::move(ls);
    lat.adam = std::move(adam);
    ++lat.version;
    install_cache(lat, std::move(c));
}

ModelSet::ModelSet(const CoarseModel& base, const std::vector<BoundaryFlux>& bcs) {
    std::vector<BoundaryFlux> seen;
    for (const auto& bc : bcs) {
        auto it = std::find(seen.begin(), seen.end(), bc);
        if (it == seen.end()) {
            seen.push_back(bc);
            models_.push_back(std::make_shared<CoarseModel>(base.with_bc(bc)));
            index_.push_back(int(models_.size()) - 1);
        } else {
            index_.push_back(int(it - seen.begin()));
        }
    }
}

SampleObjective sample_objective_inputs(const VariationalState& s, const TrainingData& data, int n) {
    SampleObjective o;
    o.uf = &data.uf[n];
    o.tau_cf = s.dec.tau_cf_mean();
    o.tau_c = s.enc.tau_c_mean();
    const int mcount = s.n_cells();
    o.m_enc.resize(mcount);
    for (int m = 0; m < mcount; ++m) o.m_enc[m] = data.phi[n].row(m).dot(s.enc.mu_theta.col(m));
    return o;
}

void bbvi_update_latents(VariationalState& s, const TrainingData& data, const ModelSet& models,
                         const TrainConfig& cfg) {
    const SeedSeq root(cfg.seed);
    parallel_for(s.n_samples(), cfg.parallelism, [&](int n) {
        SampleObjective o = sample_objective_inputs(s, data, n);
        CoarseForward fwd(models[n]);
        bbvi_update_sample(s.lat[n], fwd, o, cfg, root.child(data.keys[n]), s.iteration);
    });
}

void refresh_caches(VariationalState& s, const TrainingData& data, const ModelSet& models, const TrainConfig& cfg) {
    const SeedSeq root(cfg.seed);
    parallel_for(s.n_samples(), cfg.parallelism, [&](int n) {
        CoarseForward fwd(models[n]);
        refresh_cache(s.lat[n], fwd, data.uf[n], cfg, root.child(data.keys[n]));
    });
}

// ==========================================================================
// Training loop
// ==========================================================================

TrainResult train(const TrainingData& data, const CoarseModel& model, const TrainConfig& cfg,
                  const TrainObserver& observer) {
    return train_from(init_state(data, model, cfg), data, model, cfg, observer);
}

TrainResult train_from(VariationalState state, const TrainingData& data, const CoarseModel& model,
                       const TrainConfig& cfg, const TrainObserver& observer) {
    cfg.validate();
    data.validate(model.n_cells(), model.n_fine());
    require(state.n_samples() == data.size() && state.n_cells() == model.n_cells(),
            "train: state does not match data/model dimensions");
    auto notify = [&](Stage st) {
        if (observer) observer(st, state);
    };
    ModelSet models(model, data.bc);
    refresh_caches(state, data, models, cfg);

    TrainResult res;
    int calm = 0;
    const int start = state.iteration;
    for (int it = 0; it < cfg.max_iterations; ++it) {
        bbvi_update_latents(state, data, models, cfg);
        notify(Stage::bbvi);
        for (int sweep = 0; sweep < cfg.closed_form_sweeps; ++sweep) {
            update_q_theta(state, data);
            notify(Stage::theta);
            update_q_gamma(state);
            notify(Stage::gamma);
            update_q_tau_c(state, data);
            notify(Stage::tau_c);
        }
        update_q_tau_cf(state);
        notify(Stage::tau_cf);
        const double f = elbo(state);
        ++state.iteration;
        if (!std::isfinite(f)) {
            std::ostringstream os;
            os << "train: ELBO became non-finite at iteration " << state.iteration << "; last values:";
            for (std::size_t k = state.elbo_trace.size() > 5 ? state.elbo_trace.size() - 5 : 0;
                 k < state.elbo_trace.size(); ++k)
                os << ' ' << state.elbo_trace[k];
            throw NumericalError(os.str());
        }
        const double prev = state.elbo_trace.empty() ? f : state.elbo_trace.back();
        state.elbo_trace.push_back(f);
        notify(Stage::iteration_end);
        log::debug("train: iteration " + std::to_string(state.iteration) + " elbo " + std::to_string(f));
        if (state.elbo_trace.size() >= 2) {
            double rel = std::abs(f - prev) / std::max(std::abs(prev), 1e-300);
            calm = rel < cfg.tolerance ? calm + 1 : 0;
        }
        if (calm >= cfg.patience && state.iteration - start >= cfg.min_iterations) {
            res.converged = true;
            break;
        }
    }
    res.iterations = state.iteration - start;
    res.state = std::move(state);
    return res;
}

}  // namespace dgrain
