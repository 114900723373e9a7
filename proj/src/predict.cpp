#include "dgrain/predict.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "dgrain/log.hpp"
#include "dgrain/parallel.hpp"

namespace dgrain {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr int kMaxConsecutiveFailures = 3;

VectorXd encoder_mean(const MatrixXd& theta, const MatrixXd& phi) {
    VectorXd m(phi.rows());
    for (Eigen::Index c = 0; c < phi.rows(); ++c) m[c] = phi.row(c).dot(theta.col(c));
    return m;
}

// Coarse solution for one ancestral draw; retries with fresh draws on solver
// failure and gives up after kMaxConsecutiveFailures in a row.
template <typename Body>
void with_retries(Rng& rng, Body&& body) {
    for (int fail = 0;; ++fail) {
        try {
            body(rng);
            return;
        } catch (const NumericalError& e) {
            if (fail + 1 >= kMaxConsecutiveFailures)
                throw NumericalError(std::string("predict: coarse solve failed ") +
                                     std::to_string(kMaxConsecutiveFailures) + " times in a row: " + e.what());
            log::warn(std::string("predict: coarse solve failed, redrawing: ") + e.what());
        }
    }
}

void check_phi(const SurrogateModel& model, const MatrixXd& phi) {
    require(phi.rows() == model.state.n_cells() && phi.cols() == model.state.n_features(),
            "predict: feature matrix does not match the model's cells x features");
}

MatrixXd micro_features(const SurrogateModel& model, const Microstructure& micro) {
    return assemble_feature_matrix(micro, model.partition, model.registry).values;
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace

PosteriorDraw draw_posterior(const VariationalState& s, Rng& rng) {
    PosteriorDraw d;
    const auto& enc = s.enc;
    d.theta.resize(enc.mu_theta.rows(), enc.mu_theta.cols());
    std::normal_distribution<double> nd(0.0, 1.0);
    for (Eigen::Index c = 0; c < d.theta.cols(); ++c)
        for (Eigen::Index r = 0; r < d.theta.rows(); ++r)
            d.theta(r, c) = enc.mu_theta(r, c) + std::sqrt(enc.var_theta(r, c)) * nd(rng);
    d.tau_c.resize(enc.d_tilde.size());
    for (Eigen::Index m = 0; m < d.tau_c.size(); ++m) d.tau_c[m] = gamma_rate(rng, enc.c_tilde, enc.d_tilde[m]);
    d.tau_cf.resize(s.dec.f_tilde.size());
    for (Eigen::Index i = 0; i < d.tau_cf.size(); ++i)
        d.tau_cf[i] = gamma_rate(rng, s.dec.e_tilde, s.dec.f_tilde[i]);
    return d;
}

MatrixXd predict_samples(const SurrogateModel& model, const MatrixXd& phi, const BoundaryFlux& bc, int n,
                         std::uint64_t seed) {
    require(n >= 1, "predict: n_samples must be >= 1");
    check_phi(model, phi);
    const CoarseModel cgm = model.coarse_model(bc);
    CoarseWorkspace ws;
    MatrixXd out(cgm.n_fine(), n);
    const SeedSeq root = SeedSeq(seed).child("predict");
    for (int k = 0; k < n; ++k) {
        Rng rng = root.child(std::uint64_t(k)).rng();
        with_retries(rng, [&](Rng& r) {
            PosteriorDraw d = draw_posterior(model.state, r);
            VectorXd lambda = encoder_mean(d.theta, phi);
            VectorXd z = standard_normal(r, lambda.size());
            lambda += (z.array() / d.tau_c.array().sqrt()).matrix();
            VectorXd uc = cgm.solve(lambda, ws);
            if (!uc.allFinite()) throw NumericalError("non-finite coarse solution");
            VectorXd noise = standard_normal(r, cgm.n_fine());
            out.col(k) = cgm.W() * uc + (noise.array() / d.tau_cf.array().sqrt()).matrix();
        });
    }
    return out;
}

MatrixXd predict_samples(const SurrogateModel& model, const Microstructure& micro, const BoundaryFlux& bc, int n,
                         std::uint64_t seed) {
    return predict_samples(model, micro_features(model, micro), bc, n, seed);
}

VectorXd mean_inverse_tau_cf(const DecoderPosterior& dec) {
    if (!(dec.e_tilde > 1.0))
        throw NumericalError("predict: mean inverse decoder precision undefined for e~ <= 1 (e~ = " +
                             std::to_string(dec.e_tilde) + ")");
    return dec.f_tilde / (dec.e_tilde - 1.0);
}

PredictiveMoments predict_moments(const SurrogateModel& model, const MatrixXd& phi, const BoundaryFlux& bc, int n,
                                  std::uint64_t seed) {
    require(n >= 2, "predict: predict_moments needs n_samples >= 2");
    check_phi(model, phi);
    const VectorXd inv_tau = mean_inverse_tau_cf(model.state.dec);
    const CoarseModel cgm = model.coarse_model(bc);
    CoarseWorkspace ws;
    MatrixXd wu(cgm.n_fine(), n);
    const SeedSeq root = SeedSeq(seed).child("moments");
    for (int k = 0; k < n; ++k) {
        Rng rng = root.child(std::uint64_t(k)).rng();
        with_retries(rng, [&](Rng& r) {
            PosteriorDraw d = draw_posterior(model.state, r);
            VectorXd lambda = encoder_mean(d.theta, phi);
            VectorXd z = standard_normal(r, lambda.size());
            lambda += (z.array() / d.tau_c.array().sqrt()).matrix();
            VectorXd uc = cgm.solve(lambda, ws);
            if (!uc.allFinite()) throw NumericalError("non-finite coarse solution");
            wu.col(k) = cgm.W() * uc;
        });
    }
    PredictiveMoments pm;
    pm.n_samples = n;
    pm.mu = wu.rowwise().mean();
    wu.colwise() -= pm.mu;
    pm.var = wu.rowwise().squaredNorm() / double(n - 1) + inv_tau;
    return pm;
}

PredictiveMoments predict_moments(const SurrogateModel& model, const Microstructure& micro, const BoundaryFlux& bc,
                                  int n, std::uint64_t seed) {
    return predict_moments(model, micro_features(model, micro), bc, n, seed);
}

double r_squared(const std::vector<VectorXd>& truth, const std::vector<VectorXd>& mean) {
    require(truth.size() >= 2, "r_squared: needs at least 2 test samples");
    require(truth.size() == mean.size(), "r_squared: truth/prediction count mismatch");
    VectorXd avg = VectorXd::Zero(truth[0].size());
    for (const auto& t : truth) avg += t;
    avg /= double(truth.size());
    double num = 0, den = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        require(truth[k].size() == avg.size() && mean[k].size() == avg.size(), "r_squared: field size mismatch");
        num += (truth[k] - mean[k]).squaredNorm();
        den += (truth[k] - avg).squaredNorm();
    }
    if (!(den > 0)) throw NumericalError("r_squared: test outputs are constant (zero denominator)");
    return 1.0 - num / den;
}

double mean_log_likelihood(const std::vector<VectorXd>& truth, const std::vector<PredictiveMoments>& pred) {
    require(!truth.empty() && truth.size() == pred.size(), "mean_log_likelihood: truth/prediction count mismatch");
    double acc = 0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        const auto& p = pred[k];
        require(p.mu.size() == truth[k].size() && p.var.size() == truth[k].size(),
                "mean_log_likelihood: field size mismatch");
        if (!(p.var.minCoeff() > 0)) throw NumericalError("mean_log_likelihood: non-positive predictive variance");
        acc += (-0.5 * (kLog2Pi + p.var.array().log()) - 0.5 * (truth[k] - p.mu).array().square() / p.var.array())
                   .sum();
        count += std::size_t(truth[k].size());
    }
    return acc / double(count);
}

double coverage(const std::vector<VectorXd>& truth, const std::vector<PredictiveMoments>& pred, double k) {
    require(!truth.empty() && truth.size() == pred.size(), "coverage: truth/prediction count mismatch");
    std::size_t inside = 0, count = 0;
    for (std::size_t s = 0; s < truth.size(); ++s) {
        const auto& p = pred[s];
        for (Eigen::Index i = 0; i < truth[s].size(); ++i)
            if (std::abs(truth[s][i] - p.mu[i]) <= k * std::sqrt(p.var[i])) ++inside;
        count += std::size_t(truth[s].size());
    }
    return double(inside) / double(count);
}

int nearest_node(int g, double x, double y) {
    require(g >= 2, "nearest_node: grid must have at least 2 nodes per side");
    auto idx = [g](double t) { return int(std::clamp(std::lround(t * (g - 1)), 0L, long(g - 1))); };
    return idx(y) * g + idx(x);
}

VectorXd histogram_density(const VectorXd& values, const VectorXd& edges) {
    const Eigen::Index bins = edges.size() - 1;
    require(bins >= 1, "histogram: needs at least two edges");
    VectorXd h = VectorXd::Zero(bins);
    if (values.size() == 0) return h;
    const double lo = edges[0], hi = edges[bins];
    for (double v : values) {
        if (v < lo || v > hi) continue;
        auto b = Eigen::Index(std::upper_bound(edges.data(), edges.data() + edges.size(), v) - edges.data()) - 1;
        h[std::min(b, bins - 1)] += 1;
    }
    for (Eigen::Index b = 0; b < bins; ++b) h[b] /= double(values.size()) * (edges[b + 1] - edges[b]);
    return h;
}

double silverman_bandwidth(const VectorXd& values) {
    const auto n = double(values.size());
    require(values.size() >= 2, "kde: needs at least 2 values");
    const double mean = values.mean();
    const double sd = std::sqrt((values.array() - mean).square().sum() / (n - 1));
    std::vector<double> v(values.data(), values.data() + values.size());
    const double iqr = quantile(v, 0.75) - quantile(v, 0.25);
    double spread = std::min(sd, iqr / 1.34);
    if (!(spread > 0)) spread = sd > 0 ? sd : 1e-12 * std::max(1.0, std::abs(mean));
    return 0.9 * spread * std::pow(n, -0.2);
}

UncertaintyBands propagate_uncertainty(const SurrogateModel& model, const std::vector<MatrixXd>& micro_features,
                                       const BoundaryFlux& bc, int qoi_node, int n_param_draws, std::uint64_t seed,
                                       int bins, int parallelism) {
    require(!micro_features.empty(), "up: needs at least one microstructure");
    require(n_param_draws >= 1, "up: n_param_draws must be >= 1");
    require(bins >= 1, "up: bins must be >= 1");
    for (const auto& phi : micro_features) check_phi(model, phi);
    const CoarseModel cgm = model.coarse_model(bc);
    require(qoi_node >= 0 && qoi_node < cgm.n_fine(), "up: QoI node outside the fine grid");
    const RowSparseMatrixXd w_row = cgm.W().row(qoi_node);
    const int n_micro = int(micro_features.size());

    UncertaintyBands ub;
    ub.per_draw.assign(std::size_t(n_param_draws), VectorXd(n_micro));
    const SeedSeq root = SeedSeq(seed).child("up");
    parallel_for(n_param_draws, parallelism, [&](int s) {
        const SeedSeq ss = root.child(std::uint64_t(s));
        Rng prng = ss.child("param").rng();
        const PosteriorDraw d = draw_posterior(model.state, prng);
        const double sd_cf = 1.0 / std::sqrt(d.tau_cf[qoi_node]);
        CoarseWorkspace ws;
        for (int k = 0; k < n_micro; ++k) {
            Rng rng = ss.child(std::uint64_t(k)).rng();
            with_retries(rng, [&](Rng& r) {
                VectorXd lambda = encoder_mean(d.theta, micro_features[std::size_t(k)]);
                VectorXd z = standard_normal(r, lambda.size());
                lambda += (z.array() / d.tau_c.array().sqrt()).matrix();
                VectorXd uc = cgm.solve(lambda, ws);
                if (!uc.allFinite()) throw NumericalError("non-finite coarse solution");
                std::normal_distribution<double> nd(0.0, 1.0);
                ub.per_draw[std::size_t(s)][k] = (w_row * uc)[0] + sd_cf * nd(r);
            });
        }
    });

    VectorXd pooled(Eigen::Index(n_param_draws) * n_micro);
    for (int s = 0; s < n_param_draws; ++s) pooled.segment(Eigen::Index(s) * n_micro, n_micro) = ub.per_draw[s];
    double lo = pooled.minCoeff(), hi = pooled.maxCoeff();
    if (!(hi > lo)) {
        const double pad = 1e-9 * std::max(1.0, std::abs(lo));
        lo -= pad;
        hi += pad;
    }
    ub.edges = VectorXd::LinSpaced(bins + 1, lo, hi);
    MatrixXd dens(bins, n_param_draws);
    for (int s = 0; s < n_param_draws; ++s) dens.col(s) = histogram_density(ub.per_draw[s], ub.edges);
    ub.mean = dens.rowwise().mean();
    ub.lo.resize(bins);
    ub.hi.resize(bins);
    for (int b = 0; b < bins; ++b) {
        std::vector<double> row(static_cast<std::size_t>(n_param_draws));
        for (int s = 0; s < n_param_draws; ++s) row[std::size_t(s)] = dens(b, s);
        ub.lo[b] = quantile(row, 0.05);
        ub.hi[b] = quantile(row, 0.95);
    }

    constexpr int kKdePoints = 200;
    ub.kde_x = VectorXd::LinSpaced(kKdePoints, lo, hi);
    ub.kde = VectorXd::Zero(kKdePoints);
    if (pooled.size() >= 2) {
        const double h = silverman_bandwidth(pooled);
        const double norm = 1.0 / (double(pooled.size()) * h * std::sqrt(2.0 * M_PI));
        for (int q = 0; q < kKdePoints; ++q)
            ub.kde[q] = norm * ((pooled.array() - ub.kde_x[q]) / h).square().unaryExpr([](double t) {
                return std::exp(-0.5 * t);
            }).sum();
    }
    return ub;
}

VectorXd pca_explained_variance(const std::vector<VectorXd>& fields) {
    require(fields.size() >= 2, "pca: needs at least 2 samples");
    const auto n = Eigen::Index(fields.size());
    const Eigen::Index d = fields[0].size();
    MatrixXd x(n, d);
    for (Eigen::Index k = 0; k < n; ++k) {
        require(fields[std::size_t(k)].size() == d, "pca: field size mismatch");
        x.row(k) = fields[std::size_t(k)].transpose();
    }
    x.rowwise() -= x.colwise().mean();
    // Nonzero spectrum of X^T X equals that of X X^T; use the smaller side.
    const MatrixXd g = n <= d ? MatrixXd(x * x.transpose()) : MatrixXd(x.transpose() * x);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(g, Eigen::EigenvaluesOnly);
    VectorXd ev = es.eigenvalues().reverse().cwiseMax(0.0);
    const Eigen::Index k = std::min(d, n);
    ev.conservativeResize(k);
    const double total = ev.sum();
    VectorXd cum(k);
    if (!(total > 0)) {
        cum.setOnes();
        return cum;
    }
    double acc = 0;
    for (Eigen::Index i = 0; i < k; ++i) cum[i] = std::min(1.0, (acc += ev[i]) / total);
    return cum;
}

}  // namespace dgrain
