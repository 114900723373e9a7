#include "doctest.h"

#include <cmath>
#include <random>
#include <set>

#include "dgrain/cgm.hpp"
#include "dgrain/fem.hpp"
#include "dgrain/random.hpp"

using namespace dgrain;

namespace {

double node_x(int n, int k) { return double(k % (n + 1)) / n; }
double node_y(int n, int k) { return double(k / (n + 1)) / n; }

VectorXd central_fd(const CoarseModel& m, const VectorXd& lambda, const VectorXd& w, double h) {
    VectorXd g(lambda.size());
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
        VectorXd lp = lambda, lm = lambda;
        lp[i] += h;
        lm[i] -= h;
        g[i] = (w.dot(m.solve(lp)) - w.dot(m.solve(lm))) / (2 * h);
    }
    return g;
}

void check_tiling(const Partition& p) {
    std::vector<int> cover(std::size_t(p.n_el()) * p.n_el(), 0);
    for (const Cell& c : p.cells())
        for (int y = c.y0; y < c.y1; ++y)
            for (int x = c.x0; x < c.x1; ++x) ++cover[std::size_t(y) * p.n_el() + x];
    for (int v : cover) CHECK(v == 1);
    for (int y = 0; y < p.n_el(); ++y)
        for (int x = 0; x < p.n_el(); ++x) CHECK(p[p.cell_of_element(x, y)].contains_element(x, y));
}

}  // namespace

TEST_CASE("unit element stiffness") {
    auto k = q1_unit_stiffness();
    CHECK((k - k.transpose()).norm() == 0.0);
    CHECK(k(0, 0) == doctest::Approx(2.0 / 3.0));
    CHECK(k(0, 1) == doctest::Approx(-1.0 / 6.0));
    CHECK(k(0, 3) == doctest::Approx(-1.0 / 3.0));
    CHECK((k * Eigen::Vector4d::Ones()).norm() < 1e-15);
}

TEST_CASE("flux load balances for divergence-free boundary data") {
    for (BoundaryFlux bc : {BoundaryFlux{1, 0, 0}, BoundaryFlux{0.3, -2, 0.7}}) {
        VectorXd f = flux_load(8, bc);
        CHECK(std::abs(f.sum()) < 1e-13);
    }
}

TEST_CASE("permeability field") {
    const Partition p = Partition::uniform(16, 4);
    VectorXd zero = VectorXd::Zero(16);
    CHECK((permeability_field(zero, p).array() == 1.0).all());
    VectorXd one = zero;
    one[5] = std::log(2.0);
    VectorXd k = permeability_field(one, p);
    for (int ey = 0; ey < 16; ++ey)
        for (int ex = 0; ex < 16; ++ex)
            CHECK(k[ey * 16 + ex] == doctest::Approx(p.cell_of_element(ex, ey) == 5 ? 2.0 : 1.0));
    Rng rng(3);
    VectorXd r = 20 * standard_normal(rng, 16);
    CHECK((permeability_field(r, p).array() > 0).all());
    CHECK_THROWS_AS(permeability_field(VectorXd::Zero(4), p), ConfigError);
}

TEST_CASE("coarse solve") {
    const CoarseModel m(16, Partition::uniform(16, 4), {1, 0, 0}, 65);
    CHECK(m.n_nodes() == 289);
    CHECK(m.n_free() == 288);
    VectorXd u = m.solve(VectorXd::Zero(16));
    CHECK(u[0] == 0.0);
    for (int k = 0; k < m.n_nodes(); ++k) CHECK(std::abs(u[k] + node_x(16, k)) < 1e-10);

    SUBCASE("bilinear manufactured solution") {
        BoundaryFlux bc{0.4, -1.2, 0.9};
        VectorXd v = m.with_bc(bc).solve(VectorXd::Zero(16));
        for (int k = 0; k < m.n_nodes(); ++k)
            CHECK(std::abs(v[k] - homogeneous_pressure(bc, node_x(16, k), node_y(16, k))) < 1e-10);
    }
    SUBCASE("uniform shift scales the pressure by exp(-c)") {
        Rng rng(1);
        VectorXd lam = standard_normal(rng, 16);
        VectorXd u0 = m.solve(lam);
        for (double c : {-1.5, 0.7, 3.0}) {
            VectorXd uc = m.solve(lam + VectorXd::Constant(16, c));
            CHECK((uc - std::exp(-c) * u0).norm() <= 1e-10 * u0.norm());
        }
    }
    SUBCASE("deterministic and Lipschitz in lambda") {
        Rng rng(2);
        VectorXd lam = standard_normal(rng, 16);
        VectorXd a = m.solve(lam);
        CHECK(a == m.solve(lam));
        CoarseWorkspace ws;
        CHECK(a == m.solve(lam, ws));
        CHECK(a == m.solve(lam, ws));
        double ratio = 0;
        for (double eps : {1e-2, 1e-3, 1e-4}) {
            VectorXd d = eps * standard_normal(rng, 16);
            ratio = std::max(ratio, (m.solve(lam + d) - a).norm() / d.norm());
        }
        CHECK(ratio < 10.0 * a.norm());
    }
}

TEST_CASE("forward sensitivities") {
    const CoarseModel m(16, Partition::uniform(16, 2).split_cell(1), {0.4, 1, -0.2}, 17);
    Rng rng(21);
    CoarseWorkspace ws;
    for (int trial = 0; trial < 5; ++trial) {
        VectorXd lam = standard_normal(rng, m.n_cells());
        VectorXd u = m.solve(lam, ws);
        MatrixXd j = m.jacobian(lam, u, ws);
        REQUIRE(j.rows() == m.n_nodes());
        CHECK(j.row(0).isZero(0));
        // Transposed against the adjoint.
        VectorXd w = standard_normal(rng, m.n_nodes());
        VectorXd a = m.adjoint(lam, u, w, ws);
        CHECK((j.transpose() * w - a).cwiseAbs().maxCoeff() <= 1e-10 * a.cwiseAbs().maxCoeff());
        // Central differences.
        const double h = 1e-5;
        for (int c = 0; c < m.n_cells(); ++c) {
            VectorXd lp = lam, lm = lam;
            lp[c] += h;
            lm[c] -= h;
            VectorXd fd = (m.solve(lp) - m.solve(lm)) / (2 * h);
            CHECK((j.col(c) - fd).cwiseAbs().maxCoeff() <= 1e-6 * std::max(1.0, fd.cwiseAbs().maxCoeff()));
        }
        // A uniform shift scales u by e^-c, so the columns sum to -u.
        CHECK((j.rowwise().sum() + u).cwiseAbs().maxCoeff() <= 1e-10 * u.cwiseAbs().maxCoeff());
    }
}

TEST_CASE("adjoint gradient") {
    SUBCASE("zero weight") {
        const CoarseModel m(16, Partition::uniform(16, 2), {1, 0, 0}, 17);
        CHECK(m.adjoint_gradient(VectorXd::Zero(4), VectorXd::Zero(m.n_nodes())).isZero(0));
    }
    SUBCASE("finite differences on random 2x2 and 4x4 problems") {
        for (int k : {2, 4}) {
            const CoarseModel m(16, Partition::uniform(16, k), {1, 0.5, -0.3}, 17);
            Rng rng(11 + k);
            for (int trial = 0; trial < 20; ++trial) {
                VectorXd lam = standard_normal(rng, k * k);
                VectorXd w = standard_normal(rng, m.n_nodes());
                VectorXd a = m.adjoint_gradient(lam, w);
                VectorXd fd = central_fd(m, lam, w, 1e-5);
                const double floor = 1e-6 * fd.cwiseAbs().maxCoeff();
                for (Eigen::Index i = 0; i < k * k; ++i) {
                    CAPTURE(a[i]);
                    CAPTURE(fd[i]);
                    CHECK(std::abs(a[i] - fd[i]) / std::max(std::abs(fd[i]), floor) < 1e-5);
                }
            }
        }
    }
    SUBCASE("uniform shift derivative") {
        const CoarseModel m(16, Partition::uniform(16, 4), {1, 0, 0}, 17);
        Rng rng(5);
        VectorXd lam = standard_normal(rng, 16);
        VectorXd w = standard_normal(rng, m.n_nodes());
        VectorXd u;
        CoarseWorkspace ws;
        VectorXd g = m.adjoint_gradient(lam, w, ws, &u);
        CHECK(g.sum() == doctest::Approx(-w.dot(u)).epsilon(1e-9));
        CHECK(m.adjoint(lam, u, w, ws) == g);
    }
}

TEST_CASE("interpolation matrix") {
    RowSparseMatrixXd w = interpolation_matrix(16, 33);
    CHECK(w.rows() == 33 * 33);
    CHECK(w.cols() == 17 * 17);
    for (int r = 0; r < w.rows(); ++r) {
        double sum = 0;
        int nnz = 0;
        for (RowSparseMatrixXd::InnerIterator it(w, r); it; ++it) {
            CHECK(it.value() >= 0);
            sum += it.value();
            nnz += it.value() != 0;
        }
        CHECK(nnz <= 4);
        CHECK(std::abs(sum - 1) < 1e-12);
    }
    MatrixXd d(w);
    // Fine node (2i, 2j) coincides with coarse node (i, j).
    for (int j = 0; j <= 16; j += 5)
        for (int i = 0; i <= 16; i += 3) {
            VectorXd e = VectorXd::Zero(289);
            e[grid_node(16, i, j)] = 1;
            CHECK(d.row(grid_node(32, 2 * i, 2 * j)).transpose() == e);
        }
    // Fine node (2i+1, 2j+1) sits at the center of element (i, j).
    auto nodes = element_nodes(16, 3, 7);
    for (int n : nodes) CHECK(d(grid_node(32, 7, 15), n) == 0.25);
    CHECK(d.row(grid_node(32, 7, 15)).sum() == 1.0);
    // Exact for bilinear nodal data.
    VectorXd coarse(289);
    for (int k = 0; k < 289; ++k) coarse[k] = 1 + 2 * node_x(16, k) - node_y(16, k) + 3 * node_x(16, k) * node_y(16, k);
    VectorXd fine = w * coarse;
    for (int k = 0; k < 33 * 33; ++k) {
        double x = node_x(32, k), y = node_y(32, k);
        CHECK(fine[k] == doctest::Approx(1 + 2 * x - y + 3 * x * y).epsilon(1e-12));
    }
    const CoarseModel m(16, Partition::uniform(16, 2), {1, 0, 0}, 65);
    CHECK(m.W().rows() == 65 * 65);
}

TEST_CASE("split cell") {
    Partition p = Partition::uniform(16, 2);
    Partition q = p.split_cell(0);
    CHECK(q.size() == 7);
    CHECK(q[0].parent == p[0].id);
    CHECK(q[0].id == 4);
    CHECK(q[3].id == 7);
    CHECK(q.next_id() == 8);
    CHECK(q[1].x0 == 4);
    CHECK(q[2].y0 == 4);
    check_tiling(q);
    std::set<int> ids;
    for (const Cell& c : q.cells()) ids.insert(c.id);
    CHECK(ids.size() == 7);

    SUBCASE("7, 10, 13, 16") {
        Partition r = p;
        for (int expect : {7, 10, 13, 16}) {
            int m = -1;
            for (int c = 0; c < r.size(); ++c)
                if (r[c].width() == 8) {
                    m = c;
                    break;
                }
            REQUIRE(m >= 0);
            r = r.split_cell(m);
            CHECK(r.size() == expect);
            check_tiling(r);
        }
        // Same footprint as the regular 4x4 grid.
        Partition u = Partition::uniform(16, 4);
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                const Cell& a = r[r.cell_of_element(x, y)];
                const Cell& b = u[u.cell_of_element(x, y)];
                CHECK((a.x0 == b.x0 && a.y0 == b.y0 && a.x1 == b.x1 && a.y1 == b.y1));
            }
    }
    SUBCASE("single-element cell") {
        Partition f = Partition::uniform(2, 2);
        CHECK_FALSE(f.can_split(0));
        CHECK_THROWS_WITH_AS(f.split_cell(0), doctest::Contains("cannot refine below FEM grid"), ConfigError);
    }
    SUBCASE("odd footprint") {
        Partition o = Partition::uniform(6, 2);
        CHECK_FALSE(o.can_split(1));
    }
    SUBCASE("invalid partitions are rejected") {
        std::vector<Cell> cells = p.cells();
        cells[1].x0 = 3;
        CHECK_THROWS_AS(Partition(16, cells, 4), ConfigError);
        cells = p.cells();
        cells[2].id = cells[1].id;
        CHECK_THROWS_AS(Partition(16, cells, 4), ConfigError);
    }
}
