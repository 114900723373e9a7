#include "dgrain/cgm.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace dgrain {

// ==========================================================================
// Partition
// ==========================================================================

Partition::Partition(int n_el, std::vector<Cell> cells, int next_id)
    : n_el_(n_el), cells_(std::move(cells)), next_id_(next_id) {
    validate();
    build_map();
}

Partition Partition::uniform(int n_el, int k) {
    require(k > 0 && n_el > 0 && n_el % k == 0, "uniform partition: cells per side must divide the element count");
    const int s = n_el / k;
    std::vector<Cell> cells;
    for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) {
            Cell c;
            c.id = int(cells.size());
            c.x0 = i * s;
            c.y0 = j * s;
            c.x1 = (i + 1) * s;
            c.y1 = (j + 1) * s;
            cells.push_back(c);
        }
    int next = int(cells.size());
    return Partition(n_el, std::move(cells), next);
}

void Partition::validate() const {
    require(n_el_ > 0, "partition: element count must be positive");
    require(!cells_.empty(), "partition: no cells");
    std::vector<int> cover(std::size_t(n_el_) * n_el_, 0);
    std::set<int> ids;
    for (const Cell& c : cells_) {
        require(c.x0 >= 0 && c.y0 >= 0 && c.x1 <= n_el_ && c.y1 <= n_el_ && c.x1 > c.x0 && c.y1 > c.y0,
                "partition: cell " + std::to_string(c.id) + " has invalid bounds");
        require(ids.insert(c.id).second, "partition: duplicate cell id " + std::to_string(c.id));
        require(c.id < next_id_, "partition: cell id beyond next_id");
        for (int ey = c.y0; ey < c.y1; ++ey)
            for (int ex = c.x0; ex < c.x1; ++ex) ++cover[std::size_t(ey) * n_el_ + ex];
    }
    for (int v : cover) require(v == 1, "partition: cells must tile the domain exactly once");
}

void Partition::build_map() {
    element_cell_.assign(std::size_t(n_el_) * n_el_, -1);
    for (int m = 0; m < size(); ++m) {
        const Cell& c = cells_[m];
        for (int ey = c.y0; ey < c.y1; ++ey)
            for (int ex = c.x0; ex < c.x1; ++ex) element_cell_[std::size_t(ey) * n_el_ + ex] = m;
    }
}

int Partition::index_of_id(int id) const {
    for (int m = 0; m < size(); ++m)
        if (cells_[m].id == id) return m;
    return -1;
}

bool Partition::can_split(int m) const {
    const Cell& c = cells_[m];
    return c.width() >= 2 && c.height() >= 2 && c.width() % 2 == 0 && c.height() % 2 == 0;
}

Partition Partition::split_cell(int m) const {
    require(m >= 0 && m < size(), "split_cell: cell index out of range");
    require(can_split(m), "split_cell: cannot refine below FEM grid (cell " + std::to_string(m) + ")");
    const Cell& c = cells_[m];
    const int mx = (c.x0 + c.x1) / 2, my = (c.y0 + c.y1) / 2;
    int next = next_id_;
    auto child = [&](int x0, int y0, int x1, int y1) {
        Cell k;
        k.id = next++;
        k.parent = c.id;
        k.x0 = x0;
        k.y0 = y0;
        k.x1 = x1;
        k.y1 = y1;
        return k;
    };
    std::vector<Cell> cells(cells_.begin(), cells_.begin() + m);
    cells.push_back(child(c.x0, c.y0, mx, my));
    cells.push_back(child(mx, c.y0, c.x1, my));
    cells.push_back(child(c.x0, my, mx, c.y1));
    cells.push_back(child(mx, my, c.x1, c.y1));
    cells.insert(cells.end(), cells_.begin() + m + 1, cells_.end());
    return Partition(n_el_, std::move(cells), next);
}

VectorXd permeability_field(const VectorXd& lambda, const Partition& p) {
    require(lambda.size() == p.size(), "permeability_field: lambda size must equal the number of cells");
    const int n = p.n_el();
    VectorXd k(n * n);
    for (int ey = 0; ey < n; ++ey)
        for (int ex = 0; ex < n; ++ex) k[ey * n + ex] = std::exp(lambda[p.cell_of_element(ex, ey)]);
    return k;
}

// ==========================================================================
// Interpolation
// ==========================================================================

RowSparseMatrixXd interpolation_matrix(int n_el, int g) {
    require(n_el > 0 && g >= 2, "interpolation_matrix: invalid grid sizes");
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(g) * g * 4);
    auto locate = [&](int k, int& e, double& t) {
        double x = double(k) * n_el / double(g - 1);
        e = std::min(int(std::floor(x)), n_el - 1);
        t = x - e;
    };
    for (int j = 0; j < g; ++j) {
        int ey;
        double v;
        locate(j, ey, v);
        for (int i = 0; i < g; ++i) {
            int ex;
            double u;
            locate(i, ex, u);
            const int row = j * g + i;
            const double w[4] = {(1 - u) * (1 - v), u * (1 - v), (1 - u) * v, u * v};
            auto nodes = element_nodes(n_el, ex, ey);
            for (int a = 0; a < 4; ++a)
                if (w[a] != 0.0) trip.emplace_back(row, nodes[a], w[a]);
        }
    }
    RowSparseMatrixXd wm(g * g, (n_el + 1) * (n_el + 1));
    wm.setFromTriplets(trip.begin(), trip.end());
    return wm;
}

// ==========================================================================
// CoarseModel
// ==========================================================================

CoarseModel::CoarseModel(int n_el, Partition partition, const BoundaryFlux& bc, int fine_nodes_per_side)
    : n_el_(n_el), partition_(std::move(partition)), bc_(bc), fine_side_(fine_nodes_per_side) {
    require(n_el >= 1, "coarse model: element count must be positive");
    require(partition_.n_el() == n_el, "coarse model: partition element grid does not match the coarse grid");
    w_ = interpolation_matrix(n_el, fine_side_);
    load_ = drop_anchor(flux_load(n_el, bc));

    const int ne = n_el * n_el;
    elem_cell_.resize(ne);
    elem_dofs_.resize(ne);
    for (int ey = 0; ey < n_el; ++ey)
        for (int ex = 0; ex < n_el; ++ex) {
            const int e = ey * n_el + ex;
            elem_cell_[e] = partition_.cell_of_element(ex, ey);
            auto nodes = element_nodes(n_el, ex, ey);
            for (int a = 0; a < 4; ++a) elem_dofs_[e][a] = nodes[a] - 1;
        }
    pattern_ = assemble_darcy(n_el, VectorXd::Ones(ne));
    pattern_.makeCompressed();
    pattern_.coeffs().setZero();
    elem_slots_.resize(ne);
    for (int e = 0; e < ne; ++e)
        for (int a = 0; a < 4; ++a)
            for (int b = 0; b < 4; ++b) {
                int r = elem_dofs_[e][a], c = elem_dofs_[e][b];
                int slot = -1;
                if (r >= 0 && c >= 0) {
                    const int* begin = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[c];
                    const int* end = pattern_.innerIndexPtr() + pattern_.outerIndexPtr()[c + 1];
                    const int* it = std::lower_bound(begin, end, r);
                    slot = int(it - pattern_.innerIndexPtr());
                }
                elem_slots_[e][a * 4 + b] = slot;
            }
}

CoarseModel CoarseModel::with_bc(const BoundaryFlux& bc) const {
    CoarseModel m = *this;
    m.bc_ = bc;
    m.load_ = drop_anchor(flux_load(n_el_, bc));
    return m;
}

SparseMatrixXd CoarseModel::stiffness(const VectorXd& lambda) const {
    SparseMatrixXd a = pattern_;
    fill_values(lambda, a.valuePtr());
    return a;
}

void CoarseModel::fill_values(const VectorXd& lambda, double* val) const {
    require(lambda.size() == n_cells(), "coarse model: lambda size must equal the number of cells");
    if (!lambda.allFinite()) throw NumericalError("coarse model: non-finite log-permeability");
    static const Eigen::Matrix4d ke = q1_unit_stiffness();
    std::fill(val, val + pattern_.nonZeros(), 0.0);
    VectorXd k = lambda.array().exp();
    for (std::size_t e = 0; e < elem_slots_.size(); ++e) {
        const double ki = k[elem_cell_[e]];
        const auto& slots = elem_slots_[e];
        for (int q = 0; q < 16; ++q)
            if (slots[q] >= 0) val[slots[q]] += ki * ke(q / 4, q % 4);
    }
}

void CoarseModel::factorize(const VectorXd& lambda, CoarseWorkspace& ws) const {
    if (!ws.analyzed || ws.a.rows() != pattern_.rows()) {
        ws.a = pattern_;
        fill_values(lambda, ws.a.valuePtr());
        ws.solver.analyzePattern(ws.a);
        ws.analyzed = true;
    } else {
        fill_values(lambda, ws.a.valuePtr());
    }
    ws.solver.factorize(ws.a);
    if (ws.solver.info() != Eigen::Success) throw NumericalError("coarse model: factorization failed");
}

VectorXd CoarseModel::solve(const VectorXd& lambda, CoarseWorkspace& ws) const {
    factorize(lambda, ws);
    ws.ufree = ws.solver.solve(load_);
    if (!ws.ufree.allFinite()) throw NumericalError("coarse model: non-finite solution");
    // Refinement against an extended-precision residual keeps the solution
    // smooth in lambda to near machine precision (finite-difference checks rely on it).
    for (int it = 0; it < 2; ++it) ws.ufree += ws.solver.solve(residual(lambda, ws.ufree));
    return with_anchor(ws.ufree);
}

VectorXd CoarseModel::residual(const VectorXd& lambda, const VectorXd& ufree) const {
    static const Eigen::Matrix<long double, 4, 4> ke = q1_unit_stiffness<long double>();
    std::vector<long double> r(load_.data(), load_.data() + load_.size());
    for (std::size_t e = 0; e < elem_dofs_.size(); ++e) {
        const long double k = std::exp((long double)lambda[elem_cell_[e]]);
        const auto& d = elem_dofs_[e];
        for (int a = 0; a < 4; ++a) {
            if (d[a] < 0) continue;
            long double acc = 0;
            for (int b = 0; b < 4; ++b)
                if (d[b] >= 0) acc += ke(a, b) * ufree[d[b]];
            r[std::size_t(d[a])] -= k * acc;
        }
    }
    VectorXd out(load_.size());
    for (Eigen::Index i = 0; i < out.size(); ++i) out[i] = double(r[std::size_t(i)]);
    return out;
}

VectorXd CoarseModel::solve(const VectorXd& lambda) const {
    CoarseWorkspace ws;
    return solve(lambda, ws);
}

VectorXd CoarseModel::adjoint_gradient(const VectorXd& lambda, const VectorXd& weight, CoarseWorkspace& ws,
                                       VectorXd* u_out) const {
    VectorXd u = solve(lambda, ws);
    VectorXd grad = adjoint(lambda, u, weight, ws);
    if (u_out) *u_out = std::move(u);
    return grad;
}

VectorXd CoarseModel::adjoint(const VectorXd& lambda, const VectorXd& u, const VectorXd& weight,
                              CoarseWorkspace& ws) const {
    require(weight.size() == n_nodes(), "adjoint_gradient: weight must have one entry per coarse node");
    // A is symmetric: A z = weight, then d(w^T u)/d lambda_m = -z^T (dA/d lambda_m) u
    // with dA/d lambda_m = e^lambda_m * (sum of the cell's unit element stiffnesses).
    ws.zfree = ws.solver.solve(weight.tail(n_free()));
    static const Eigen::Matrix4d ke = q1_unit_stiffness();
    VectorXd grad = VectorXd::Zero(n_cells());
    Eigen::Vector4d ue, ze;
    for (std::size_t e = 0; e < elem_dofs_.size(); ++e) {
        for (int a = 0; a < 4; ++a) {
            int d = elem_dofs_[e][a];
            ue[a] = d >= 0 ? u[d + 1] : 0.0;
            ze[a] = d >= 0 ? ws.zfree[d] : 0.0;
        }
        grad[elem_cell_[e]] -= ze.dot(ke * ue);
    }
    for (int m = 0; m < n_cells(); ++m) grad[m] *= std::exp(lambda[m]);
    return grad;
}

MatrixXd CoarseModel::jacobian(const VectorXd& lambda, const VectorXd& u, CoarseWorkspace& ws) const {
    require(u.size() == n_nodes(), "jacobian: u must have one entry per coarse node");
    require(lambda.size() == n_cells(), "jacobian: lambda size does not match the partition");
    // A du/d lambda_m = -(dA/d lambda_m) u.
    static const Eigen::Matrix4d ke = q1_unit_stiffness();
    MatrixXd rhs = MatrixXd::Zero(n_free(), n_cells());
    Eigen::Vector4d ue;
    for (std::size_t e = 0; e < elem_dofs_.size(); ++e) {
        const auto& d = elem_dofs_[e];
        for (int a = 0; a < 4; ++a) ue[a] = d[a] >= 0 ? u[d[a] + 1] : 0.0;
        const Eigen::Vector4d f = ke * ue;
        for (int a = 0; a < 4; ++a)
            if (d[a] >= 0) rhs(d[a], elem_cell_[e]) -= f[a];
    }
    for (int m = 0; m < n_cells(); ++m) rhs.col(m) *= std::exp(lambda[m]);
    MatrixXd j = MatrixXd::Zero(n_nodes(), n_cells());
    j.bottomRows(n_free()) = ws.solver.solve(rhs);
    return j;
}

VectorXd CoarseModel::adjoint_gradient(const VectorXd& lambda, const VectorXd& weight) const {
    CoarseWorkspace ws;
    return adjoint_gradient(lambda, weight, ws);
}

}  // namespace dgrain
