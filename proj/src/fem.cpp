#include "dgrain/fem.hpp"

#include <cmath>
#include <vector>

namespace dgrain {

VectorXd flux_load(int n, const BoundaryFlux& bc) {
    VectorXd f = VectorXd::Zero((n + 1) * (n + 1));
    const double h = 1.0 / n;
    const double g = 1.0 / std::sqrt(3.0);
    const double s[2] = {(1 - g) / 2, (1 + g) / 2};
    // Edge from node a at t=0 to node b at t=1, outward flux q(t) = V.n.
    auto edge = [&](int a, int b, auto q) {
        for (double t : s) {
            double v = q(t) * h / 2;
            f[a] -= v * (1 - t);
            f[b] -= v * t;
        }
    };
    for (int e = 0; e < n; ++e) {
        double x0 = e * h;
        edge(grid_node(n, e, 0), grid_node(n, e + 1, 0), [&](double t) { return -bc.vy(x0 + t * h, 0.0); });
        edge(grid_node(n, e, n), grid_node(n, e + 1, n), [&](double t) { return bc.vy(x0 + t * h, 1.0); });
        edge(grid_node(n, 0, e), grid_node(n, 0, e + 1), [&](double t) { return -bc.vx(0.0, x0 + t * h); });
        edge(grid_node(n, n, e), grid_node(n, n, e + 1), [&](double t) { return bc.vx(1.0, x0 + t * h); });
    }
    return f;
}

SparseMatrixXd assemble_darcy(int n, const VectorXd& k_elem) {
    require(k_elem.size() == n * n, "assemble_darcy: permeability size mismatch");
    const auto ke = q1_unit_stiffness();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(n) * n * 16);
    for (int ey = 0; ey < n; ++ey)
        for (int ex = 0; ex < n; ++ex) {
            auto nodes = element_nodes(n, ex, ey);
            double k = k_elem[ey * n + ex];
            for (int a = 0; a < 4; ++a) {
                if (nodes[a] == 0) continue;
                for (int b = 0; b < 4; ++b) {
                    if (nodes[b] == 0) continue;
                    trip.emplace_back(nodes[a] - 1, nodes[b] - 1, k * ke(a, b));
                }
            }
        }
    int nf = (n + 1) * (n + 1) - 1;
    SparseMatrixXd a(nf, nf);
    a.setFromTriplets(trip.begin(), trip.end());
    return a;
}

}  // namespace dgrain
