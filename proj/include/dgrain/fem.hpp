#pragma once

#include <array>

#include "dgrain/types.hpp"

namespace dgrain {

/// Boundary flux data V_bc(x) = (a_x + a_xy * y, a_y + a_xy * x).
struct BoundaryFlux {
    double a_x = 0, a_y = 0, a_xy = 0;

    double vx(double /*x*/, double y) const { return a_x + a_xy * y; }
    double vy(double x, double /*y*/) const { return a_y + a_xy * x; }
    bool operator==(const BoundaryFlux& o) const { return a_x == o.a_x && a_y == o.a_y && a_xy == o.a_xy; }
};

/// Pressure of the uniform unit-permeability problem: -grad P = V_bc.
inline double homogeneous_pressure(const BoundaryFlux& bc, double x, double y) {
    return -bc.a_x * x - bc.a_y * y - bc.a_xy * x * y;
}

/// Stiffness of a square bilinear element with unit isotropic permeability,
/// integrated with 2x2 Gauss quadrature. Independent of the element size in 2-D.
/// Local node order: (0,0), (1,0), (0,1), (1,1).
template <typename Scalar = double>
Eigen::Matrix<Scalar, 4, 4> q1_unit_stiffness() {
    Eigen::Matrix<Scalar, 4, 4> k = Eigen::Matrix<Scalar, 4, 4>::Zero();
    const Scalar g = Scalar(1) / std::sqrt(Scalar(3));
    const Scalar pts[2] = {(1 - g) / 2, (1 + g) / 2};
    for (Scalar xi : pts)
        for (Scalar eta : pts) {
            // gradients on the reference unit square
            Eigen::Matrix<Scalar, 4, 2> d;
            d << -(1 - eta), -(1 - xi), (1 - eta), -xi, -eta, (1 - xi), eta, xi;
            k += d * d.transpose() / Scalar(4);
        }
    return k;
}

/// Global node index on an (n+1) x (n+1) grid, row-major in y.
inline int grid_node(int n, int i, int j) { return j * (n + 1) + i; }

/// Nodes of element (ex, ey) in local order.
inline std::array<int, 4> element_nodes(int n, int ex, int ey) {
    return {grid_node(n, ex, ey), grid_node(n, ex + 1, ey), grid_node(n, ex, ey + 1),
            grid_node(n, ex + 1, ey + 1)};
}

/// Consistent boundary load -int (V_bc . n) N_i ds on all nodes of an n x n grid.
VectorXd flux_load(int n, const BoundaryFlux& bc);

/// Free-DOF stiffness (origin node eliminated) for per-element permeability k_elem
/// (row-major in ey, size n*n).
SparseMatrixXd assemble_darcy(int n, const VectorXd& k_elem);

/// Drop the pinned origin entry / re-insert it with value zero.
inline VectorXd drop_anchor(const VectorXd& v) { return v.tail(v.size() - 1); }
inline VectorXd with_anchor(const VectorXd& free) {
    VectorXd v(free.size() + 1);
    v[0] = 0.0;
    v.tail(free.size()) = free;
    return v;
}

}  // namespace dgrain
