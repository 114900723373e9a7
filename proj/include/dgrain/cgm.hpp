#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include <Eigen/SparseCholesky>

#include "dgrain/fem.hpp"
#include "dgrain/types.hpp"

namespace dgrain {

/// Axis-aligned cell in coarse-element index units: [x0, x1) x [y0, y1).
struct Cell {
    int id = 0;
    int parent = -1;
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

    int width() const { return x1 - x0; }
    int height() const { return y1 - y0; }
    bool contains_element(int ex, int ey) const { return ex >= x0 && ex < x1 && ey >= y0 && ey < y1; }
    /// Bounds in domain units for a grid of n elements per side.
    double lo_x(int n) const { return double(x0) / n; }
    double lo_y(int n) const { return double(y0) / n; }
    double hi_x(int n) const { return double(x1) / n; }
    double hi_y(int n) const { return double(y1) / n; }
};

class Partition {
public:
    Partition() = default;
    Partition(int n_el, std::vector<Cell> cells, int next_id);

    /// Uniform k x k partition of an n_el x n_el element grid.
    static Partition uniform(int n_el, int k);

    int n_el() const { return n_el_; }
    int size() const { return int(cells_.size()); }
    const Cell& operator[](int m) const { return cells_[m]; }
    const std::vector<Cell>& cells() const { return cells_; }
    int next_id() const { return next_id_; }

    /// Index of the cell owning element (ex, ey).
    int cell_of_element(int ex, int ey) const { return element_cell_[std::size_t(ey) * n_el_ + ex]; }
    int index_of_id(int id) const;

    bool can_split(int m) const;
    /// Replace cell m by its four quadrants (lower-left, lower-right,
    /// upper-left, upper-right) at positions m..m+3. Children get fresh ids.
    Partition split_cell(int m) const;

    void validate() const;

private:
    void build_map();

    int n_el_ = 0;
    std::vector<Cell> cells_;
    int next_id_ = 0;
    std::vector<int> element_cell_;
};

/// Symbolic-factorization cache for repeated coarse solves. One workspace per
/// thread; the model itself is immutable.
struct CoarseWorkspace {
    SparseMatrixXd a;
    Eigen::SimplicialLDLT<SparseMatrixXd> solver;
    bool analyzed = false;
    VectorXd rhs, ufree, zfree;
};

/// Coarse Darcy model: bilinear elements on an n_el x n_el grid, with one
/// log-permeability per partition cell, flux boundary data and pressure pinned
/// at the origin node.
class CoarseModel {
public:
    CoarseModel(int n_el, Partition partition, const BoundaryFlux& bc, int fine_nodes_per_side);

    int n_el() const { return n_el_; }
    int n_nodes() const { return (n_el_ + 1) * (n_el_ + 1); }
    int n_free() const { return n_nodes() - 1; }
    int n_cells() const { return partition_.size(); }
    int fine_nodes_per_side() const { return fine_side_; }
    int n_fine() const { return fine_side_ * fine_side_; }
    const Partition& partition() const { return partition_; }
    const BoundaryFlux& bc() const { return bc_; }
    /// Fine-from-coarse interpolation W, n_fine x n_nodes.
    const RowSparseMatrixXd& W() const { return w_; }
    const VectorXd& load() const { return load_; }

    /// Nodal pressure (all nodes, anchor = 0) for log-permeabilities lambda.
    VectorXd solve(const VectorXd& lambda, CoarseWorkspace& ws) const;
    VectorXd solve(const VectorXd& lambda) const;

    /// Solves and, with u the solution, returns d(weight^T u)/d lambda via one
    /// adjoint solve reusing the factorization.
    VectorXd adjoint_gradient(const VectorXd& lambda, const VectorXd& weight, CoarseWorkspace& ws,
                              VectorXd* u_out = nullptr) const;
    VectorXd adjoint_gradient(const VectorXd& lambda, const VectorXd& weight) const;
    /// Adjoint step only; ws must hold the factorization from solve(lambda, ws)
    /// and u its solution.
    VectorXd adjoint(const VectorXd& lambda, const VectorXd& u, const VectorXd& weight, CoarseWorkspace& ws) const;
    /// du/d lambda (all nodes x cells), one forward-sensitivity solve per cell.
    /// Same workspace contract as adjoint().
    MatrixXd jacobian(const VectorXd& lambda, const VectorXd& u, CoarseWorkspace& ws) const;

    /// Assembled free-DOF stiffness for lambda (mainly for tests).
    SparseMatrixXd stiffness(const VectorXd& lambda) const;

    CoarseModel with_bc(const BoundaryFlux& bc) const;

private:
    void factorize(const VectorXd& lambda, CoarseWorkspace& ws) const;
    void fill_values(const VectorXd& lambda, double* val) const;
    VectorXd residual(const VectorXd& lambda, const VectorXd& ufree) const;

    int n_el_;
    Partition partition_;
    BoundaryFlux bc_;
    int fine_side_;
    RowSparseMatrixXd w_;
    VectorXd load_;                     ///< free-DOF load
    SparseMatrixXd pattern_;            ///< free-DOF pattern with zero values
    std::vector<int> elem_cell_;        ///< element -> cell index
    std::vector<std::array<int, 16>> elem_slots_;  ///< nonzero slot per local entry, -1 if pinned
    std::vector<std::array<int, 4>> elem_dofs_;    ///< free dof per local node, -1 if pinned
};

/// Per-element permeability exp(lambda_m) of the owning cell, row-major in y.
VectorXd permeability_field(const VectorXd& lambda, const Partition& p);

/// Bilinear interpolation matrix from an (n_el+1)^2 node grid to a g x g node grid.
RowSparseMatrixXd interpolation_matrix(int n_el, int g);

}  // namespace dgrain
