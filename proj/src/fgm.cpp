#include "dgrain/fgm.hpp"

#include <cmath>
#include <string>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

namespace dgrain {

VectorXd element_permeability(const PixelGrid& pixels, int fine_res, double eps_solid) {
    const int r = pixels.resolution();
    require(r % fine_res == 0, "fine grid resolution must divide the microstructure resolution");
    const int b = r / fine_res;
    VectorXd k(fine_res * fine_res);
    for (int ey = 0; ey < fine_res; ++ey)
        for (int ex = 0; ex < fine_res; ++ex) {
            double s = 0;
            for (int j = ey * b; j < (ey + 1) * b; ++j)
                for (int i = ex * b; i < (ex + 1) * b; ++i) s += pixels(i, j) ? eps_solid : 1.0;
            k[ey * fine_res + ex] = s / double(b * b);
        }
    return k;
}

VectorXd solve_darcy_nodal(int n, const VectorXd& k_elem, const BoundaryFlux& bc, const DarcyOptions& opt,
                           DarcyDiagnostics* diag) {
    SparseMatrixXd a = assemble_darcy(n, k_elem);
    VectorXd f = drop_anchor(flux_load(n, bc));
    VectorXd u;
    DarcyDiagnostics d;
    if (opt.solver == LinearSolver::direct) {
        Eigen::SimplicialLDLT<SparseMatrixXd> ldlt(a);
        if (ldlt.info() != Eigen::Success) throw NumericalError("fine Darcy: factorization failed (singular system)");
        u = ldlt.solve(f);
    } else {
        Eigen::ConjugateGradient<SparseMatrixXd, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
        cg.setTolerance(opt.tolerance);
        cg.setMaxIterations(opt.max_iterations > 0 ? opt.max_iterations : 10 * int(a.rows()));
        cg.compute(a);
        if (cg.info() != Eigen::Success) throw NumericalError("fine Darcy: preconditioner setup failed");
        u = cg.solve(f);
        d.iterations = int(cg.iterations());
        if (cg.info() != Eigen::Success)
            throw NumericalError("fine Darcy: PCG did not converge, relative residual " + std::to_string(cg.error()) +
                                 " after " + std::to_string(cg.iterations()) + " iterations");
    }
    double fn = f.norm();
    d.relative_residual = fn > 0 ? (a * u - f).norm() / fn : (a * u).norm();
    if (!u.allFinite()) throw NumericalError("fine Darcy: non-finite solution");
    if (diag) *diag = d;
    return with_anchor(u);
}

VectorXd resample_nodal(const VectorXd& nodal, int n, int g) {
    if (g == n + 1) return nodal;
    VectorXd out(g * g);
    for (int j = 0; j < g; ++j)
        for (int i = 0; i < g; ++i) {
            double x = double(i) * n / (g - 1), y = double(j) * n / (g - 1);
            int ex = std::min(int(x), n - 1), ey = std::min(int(y), n - 1);
            double u = x - ex, v = y - ey;
            auto nd = element_nodes(n, ex, ey);
            out[j * g + i] = (1 - u) * (1 - v) * nodal[nd[0]] + u * (1 - v) * nodal[nd[1]] +
                             (1 - u) * v * nodal[nd[2]] + u * v * nodal[nd[3]];
        }
    return out;
}

FineField solve_fine_darcy(const Microstructure& micro, const BoundaryFlux& bc, const DarcyOptions& opt,
                           DarcyDiagnostics* diag) {
    require(opt.fine_res >= 16, "fine Darcy: fine_res must be >= 16");
    require(opt.eps_solid > 0 && opt.eps_solid < 1, "fine Darcy: eps_solid must lie in (0, 1)");
    VectorXd k = element_permeability(micro.pixels, opt.fine_res, opt.eps_solid);
    VectorXd p = solve_darcy_nodal(opt.fine_res, k, bc, opt, diag);
    FineField ff;
    ff.grid = opt.output_grid > 0 ? opt.output_grid : opt.fine_res + 1;
    ff.values = resample_nodal(p, opt.fine_res, ff.grid);
    ff.values[0] = 0.0;
    ff.bc = bc;
    return ff;
}

}  // namespace dgrain
