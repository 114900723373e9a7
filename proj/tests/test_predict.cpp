#include "doctest.h"

#include <cmath>
#include <numeric>

#include <Eigen/SVD>

#include "dgrain/predict.hpp"

using namespace dgrain;

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Surrogate on a 4x4 coarse grid, 2x2 cells, 9x9 fine grid, two features.
SurrogateModel small_model(double var_theta, double tau_c, double tau_cf, double shape = 20) {
    SurrogateModel s;
    s.n_el = 4;
    s.fine_grid = 9;
    s.partition = Partition::uniform(4, 2);
    FeatureSpec c;
    c.id = "constant";
    FeatureSpec p;
    p.id = "pore_fraction";
    p.kind = FeatureKind::pore_fraction;
    s.registry = {c, p};
    auto& st = s.state;
    st.enc.mu_theta = MatrixXd(2, 4);
    st.enc.mu_theta << -0.5, -0.2, 0.1, -0.3, 0.4, 0.6, 0.2, 0.5;
    st.enc.var_theta = MatrixXd::Constant(2, 4, var_theta);
    st.enc.a_tilde = 2;
    st.enc.b_tilde = VectorXd::Ones(2);
    st.enc.c_tilde = shape;
    st.enc.d_tilde = VectorXd::Constant(4, shape / tau_c);
    st.dec.e_tilde = shape;
    st.dec.f_tilde = VectorXd::Constant(81, shape / tau_cf);
    return s;
}

MatrixXd features(double a, double b, double c, double d) {
    MatrixXd phi(4, 2);
    phi << 1, a, 1, b, 1, c, 1, d;
    return phi;
}

VectorXd mean_field(const SurrogateModel& s, const MatrixXd& phi, const BoundaryFlux& bc) {
    VectorXd lam(4);
    for (int m = 0; m < 4; ++m) lam[m] = phi.row(m).dot(s.state.enc.mu_theta.col(m));
    CoarseModel c = s.coarse_model(bc);
    return c.W() * c.solve(lam);
}

}  // namespace

TEST_CASE("degenerate chain") {
    SurrogateModel s = small_model(0.0, 1.0, 1.0, 1e10);
    s.state.enc.d_tilde.setConstant(1e-200);
    s.state.dec.f_tilde.setConstant(1e-200);
    const MatrixXd phi = features(0.8, 0.6, 0.9, 0.7);
    const BoundaryFlux bc{1, 1, 0};
    MatrixXd x = predict_samples(s, phi, bc, 20, 3);
    VectorXd want = mean_field(s, phi, bc);
    for (int k = 0; k < 20; ++k) CHECK((x.col(k) - want).cwiseAbs().maxCoeff() < 1e-12 * want.cwiseAbs().maxCoeff());

    SUBCASE("zero-variance chain leaves only the decoder noise") {
        SurrogateModel z = s;
        z.state.dec.f_tilde.setConstant(0.3);
        z.state.dec.e_tilde = 4;
        PredictiveMoments pm = predict_moments(z, phi, bc, 50, 1);
        CHECK(pm.n_samples == 50);
        CHECK((pm.mu - want).cwiseAbs().maxCoeff() < 1e-12 * want.cwiseAbs().maxCoeff());
        CHECK((pm.var.array() - 0.3 / 3.0).abs().maxCoeff() < 1e-15);
    }
}

TEST_CASE("mean inverse decoder precision") {
    DecoderPosterior d;
    d.e_tilde = 16 + 1e-10;
    d.f_tilde = VectorXd::Constant(3, 2.5);
    CHECK((mean_inverse_tau_cf(d).array() - 2.5 / (15 + 1e-10)).abs().maxCoeff() < 1e-15);
    d.e_tilde = 1.0;
    CHECK_THROWS_AS(mean_inverse_tau_cf(d), NumericalError);

    // 32 samples with default hyperpriors give e~ = 16 + 1e-10.
    VariationalState s;
    s.dec.f_tilde = VectorXd::Ones(2);
    s.lat.resize(32);
    for (auto& l : s.lat) {
        l.residual_sq = VectorXd::Ones(2);
        l.cache_version = l.version;
    }
    update_q_tau_cf(s);
    CHECK(s.dec.e_tilde == 16 + 1e-10);
    CHECK((mean_inverse_tau_cf(s.dec).array() - (1e-10 + 16) / (15 + 1e-10)).abs().maxCoeff() < 1e-14);
}

TEST_CASE("moments against empirical sample moments") {
    SurrogateModel s = small_model(0.01, 20.0, 400.0);
    const MatrixXd phi = features(0.8, 0.6, 0.9, 0.7);
    const BoundaryFlux bc{1, 1, 0};
    PredictiveMoments pm = predict_moments(s, phi, bc, 4000, 5);
    CHECK((pm.var.array() >= mean_inverse_tau_cf(s.state.dec).array()).all());
    const int n = 4000;
    MatrixXd x = predict_samples(s, phi, bc, n, 6);
    VectorXd mean = x.rowwise().mean();
    MatrixXd centered = x.colwise() - mean;
    VectorXd var = centered.cwiseAbs2().rowwise().sum() / (n - 1);
    VectorXd m4 = centered.array().pow(4).rowwise().sum() / n;
    int outside_mu = 0, outside_var = 0;
    for (int i = 1; i < 81; ++i) {
        // Standard errors of both estimates, the moments' own sample included.
        double se_mu = std::sqrt(var[i] / n + (pm.var[i] - mean_inverse_tau_cf(s.state.dec)[i]) / pm.n_samples);
        double se_var = std::sqrt((m4[i] - var[i] * var[i]) / n) * std::sqrt(2.0);
        outside_mu += std::abs(pm.mu[i] - mean[i]) > 3 * se_mu;
        outside_var += std::abs(pm.var[i] - var[i]) > 3 * se_var;
    }
    // 3 SE bands hold coordinatewise with probability about 0.997.
    CHECK(outside_mu <= 2);
    CHECK(outside_var <= 2);
}

TEST_CASE("predictive sampling is reproducible") {
    SurrogateModel s = small_model(0.05, 10.0, 100.0);
    const MatrixXd phi = features(0.5, 0.7, 0.6, 0.8);
    MatrixXd a = predict_samples(s, phi, {1, 0, 0}, 7, 42), b = predict_samples(s, phi, {1, 0, 0}, 7, 42);
    CHECK(a == b);
    CHECK(a != predict_samples(s, phi, {1, 0, 0}, 7, 43));
    // Prefixes agree: draws are keyed by sample index.
    CHECK(predict_samples(s, phi, {1, 0, 0}, 3, 42) == a.leftCols(3));
    CHECK_THROWS_AS(predict_samples(s, MatrixXd::Ones(4, 3), {1, 0, 0}, 2, 1), ConfigError);
}

TEST_CASE("posterior draws") {
    SurrogateModel s = small_model(0.04, 5.0, 50.0);
    Rng rng(8);
    const int n = 20000;
    double tc = 0, th = 0, th2 = 0;
    for (int k = 0; k < n; ++k) {
        PosteriorDraw d = draw_posterior(s.state, rng);
        tc += d.tau_c[1];
        th += d.theta(1, 2);
        th2 += d.theta(1, 2) * d.theta(1, 2);
    }
    CHECK(tc / n == doctest::Approx(5.0).epsilon(3 * std::sqrt(1.0 / 20) / std::sqrt(double(n))));
    CHECK(std::abs(th / n - 0.2) < 3 * 0.2 / std::sqrt(double(n)));
    CHECK(th2 / n - (th / n) * (th / n) == doctest::Approx(0.04).epsilon(0.03));
}

TEST_CASE("coefficient of determination") {
    std::vector<VectorXd> truth = {VectorXd::LinSpaced(5, 0, 1), VectorXd::LinSpaced(5, 1, -1),
                                   VectorXd::Constant(5, 0.3)};
    CHECK(r_squared(truth, truth) == 1.0);
    VectorXd bar = (truth[0] + truth[1] + truth[2]) / 3;
    CHECK(std::abs(r_squared(truth, {bar, bar, bar})) < 1e-15);
    std::vector<VectorXd> pred = {truth[0] * 0.9, truth[1] + VectorXd::Constant(5, 0.1), truth[2]};
    double r = r_squared(truth, pred);
    std::vector<VectorXd> ts = truth, ps = pred;
    for (auto& v : ts) v.array() += 7.5;
    for (auto& v : ps) v.array() += 7.5;
    CHECK(r_squared(ts, ps) == doctest::Approx(r).epsilon(1e-12));
    double num = 0, den = 0;
    for (int k = 0; k < 3; ++k) {
        num += (truth[std::size_t(k)] - pred[std::size_t(k)]).squaredNorm();
        den += (truth[std::size_t(k)] - bar).squaredNorm();
    }
    CHECK(r == doctest::Approx(1 - num / den).epsilon(1e-14));
    CHECK(r <= 1.0);
    std::vector<VectorXd> flat = {VectorXd::Ones(3), VectorXd::Ones(3)};
    CHECK_THROWS_AS(r_squared(flat, flat), NumericalError);
}

TEST_CASE("mean log likelihood and coverage") {
    PredictiveMoments unit;
    unit.mu = VectorXd::Zero(4);
    unit.var = VectorXd::Ones(4);
    CHECK(mean_log_likelihood({VectorXd::Zero(4)}, {unit}) == doctest::Approx(-0.5 * kLog2Pi));

    PredictiveMoments two;
    two.mu = VectorXd(2);
    two.mu << 1.0, -2.0;
    two.var = VectorXd(2);
    two.var << 0.25, 4.0;
    VectorXd y(2);
    y << 1.5, 1.0;
    double l0 = -0.5 * std::log(2 * M_PI * 0.25) - 0.5 * 0.25 / 0.25;
    double l1 = -0.5 * std::log(2 * M_PI * 4.0) - 0.5 * 9.0 / 4.0;
    CHECK(mean_log_likelihood({y}, {two}) == doctest::Approx((l0 + l1) / 2).epsilon(1e-14));
    CHECK(coverage({y}, {two}, 2.0) == 1.0);
    CHECK(coverage({y}, {two}, 1.0) == 0.5);
    two.var[1] = 0;
    CHECK_THROWS_AS(mean_log_likelihood({y}, {two}), NumericalError);
}

TEST_CASE("grid helpers") {
    CHECK(nearest_node(65, 1.0, 1.0) == 65 * 65 - 1);
    CHECK(nearest_node(65, 0.0, 0.0) == 0);
    CHECK(nearest_node(5, 0.26, 0.74) == 3 * 5 + 1);
    VectorXd v(6);
    v << 0.1, 0.2, 0.25, 0.7, 0.9, 1.0;
    VectorXd edges = VectorXd::LinSpaced(5, 0.0, 1.0);
    VectorXd h = histogram_density(v, edges);
    CHECK(h.sum() * 0.25 == doctest::Approx(1.0));
    CHECK(h[3] * 6 * 0.25 == doctest::Approx(2.0));
    VectorXd s(5);
    s << 1, 2, 3, 4, 5;
    // sd = 1.5811 exceeds IQR/1.34 = 1.4925, so the IQR term wins.
    CHECK(silverman_bandwidth(s) == doctest::Approx(0.9 * (2.0 / 1.34) * std::pow(5.0, -0.2)));
    VectorXd wide(4);
    wide << 0, 0, 10, 10;
    CHECK(silverman_bandwidth(wide) == doctest::Approx(0.9 * std::sqrt(100.0 / 3) * std::pow(4.0, -0.2)));
}

TEST_CASE("uncertainty propagation") {
    const std::vector<MatrixXd> micro = {features(0.8, 0.7, 0.9, 0.6), features(0.5, 0.9, 0.7, 0.7),
                                         features(0.95, 0.85, 0.6, 0.8), features(0.7, 0.7, 0.7, 0.7)};
    const int qoi = nearest_node(9, 1.0, 1.0);
    SUBCASE("point-mass posterior collapses the bands") {
        SurrogateModel s = small_model(0.0, 1.0, 1.0, 1e10);
        s.state.enc.d_tilde.setConstant(1e-200);
        s.state.dec.f_tilde.setConstant(1e-200);
        UncertaintyBands b = propagate_uncertainty(s, micro, {1, 1, 0}, qoi, 12, 3, 10);
        CHECK(b.edges.size() == 11);
        CHECK(b.lo == b.hi);
        CHECK(b.mean == b.lo);
        CHECK(b.kde.size() == 200);
        CHECK(b.per_draw.size() == 12);
    }
    SUBCASE("bands order and parallel determinism") {
        SurrogateModel s = small_model(0.02, 10.0, 200.0);
        UncertaintyBands a = propagate_uncertainty(s, micro, {1, 1, 0}, qoi, 30, 4, 20, 1);
        UncertaintyBands p = propagate_uncertainty(s, micro, {1, 1, 0}, qoi, 30, 4, 20, 4);
        CHECK(a.mean == p.mean);
        CHECK(a.kde == p.kde);
        CHECK((a.lo.array() <= a.hi.array()).all());
        CHECK((a.lo.array() >= 0).all());
        const double width = a.kde_x[1] - a.kde_x[0];
        CHECK(a.kde.sum() * width == doctest::Approx(1.0).epsilon(0.05));
    }
}

TEST_CASE("principal component spectrum") {
    std::vector<VectorXd> same(4, VectorXd::LinSpaced(6, 0, 1));
    VectorXd c = pca_explained_variance(same);
    CHECK((c.array() == 1.0).all());

    Rng rng(4);
    VectorXd b1 = standard_normal(rng, 8), b2 = standard_normal(rng, 8);
    std::vector<VectorXd> rank2;
    for (int k = 0; k < 10; ++k) rank2.push_back(standard_normal(rng, 1)[0] * b1 + standard_normal(rng, 1)[0] * b2);
    VectorXd r = pca_explained_variance(rank2);
    CHECK(r[0] < 1.0);
    CHECK(r[1] == doctest::Approx(1.0).epsilon(1e-12));

    for (int n : {5, 12}) {
        std::vector<VectorXd> x;
        for (int k = 0; k < n; ++k) x.push_back(standard_normal(rng, 7));
        MatrixXd d(n, 7);
        for (int k = 0; k < n; ++k) d.row(k) = x[std::size_t(k)].transpose();
        d.rowwise() -= d.colwise().mean();
        Eigen::JacobiSVD<MatrixXd> svd(d);
        VectorXd sv2 = svd.singularValues().cwiseAbs2();
        VectorXd cum(sv2.size());
        std::partial_sum(sv2.data(), sv2.data() + sv2.size(), cum.data());
        cum /= sv2.sum();
        VectorXd got = pca_explained_variance(x);
        for (Eigen::Index k = 0; k < std::min(got.size(), cum.size()); ++k)
            CHECK(got[k] == doctest::Approx(cum[k]).epsilon(1e-10));
    }
}
