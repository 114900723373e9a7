#pragma once

#include "dgrain/fem.hpp"
#include "dgrain/microgen.hpp"
#include "dgrain/types.hpp"

namespace dgrain {

/// Pressure on a g x g node grid over [0,1]^2 (row-major in y), origin anchored.
struct FineField {
    int grid = 0;
    VectorXd values;
    BoundaryFlux bc;

    double at(int i, int j) const { return values[j * grid + i]; }
};

enum class LinearSolver { pcg, direct };

struct DarcyOptions {
    int fine_res = 64;
    double eps_solid = 1e-8;
    int output_grid = 0;       ///< 0: native nodes, fine_res + 1
    LinearSolver solver = LinearSolver::pcg;
    double tolerance = 1e-10;  ///< relative residual for PCG
    int max_iterations = 0;    ///< 0: 10 * unknowns
};

struct DarcyDiagnostics {
    int iterations = 0;
    double relative_residual = 0;
};

/// Per-element permeability: arithmetic mean of pixel permeabilities over each
/// element's pixel block (the pixel value itself when resolutions coincide).
VectorXd element_permeability(const PixelGrid& pixels, int fine_res, double eps_solid);

FineField solve_fine_darcy(const Microstructure& micro, const BoundaryFlux& bc, const DarcyOptions& opt,
                           DarcyDiagnostics* diag = nullptr);

/// Darcy solve for a given per-element permeability field (n*n, row-major).
VectorXd solve_darcy_nodal(int n, const VectorXd& k_elem, const BoundaryFlux& bc, const DarcyOptions& opt,
                           DarcyDiagnostics* diag = nullptr);

/// Bilinear resampling of an (n+1)^2 nodal field to a g x g grid.
VectorXd resample_nodal(const VectorXd& nodal, int n, int g);

struct StokesOptions {
    int fine_res = 64;
    int output_grid = 0;
    double viscosity = 1.0;
    double tolerance = 1e-10;
    int max_iterations = 2000;
};

struct StokesDiagnostics {
    int iterations = 0;
    double relative_residual = 0;
    double divergence = 0;
};

/// Stokes flow on a MAC grid of fine_res^2 cells; a cell is solid when the
/// majority of its pixels are solid. Velocity V_bc on the outer boundary,
/// no-slip on solid faces, pressure anchored at the origin node.
FineField solve_fine_stokes(const Microstructure& micro, const BoundaryFlux& bc, const StokesOptions& opt,
                            StokesDiagnostics* diag = nullptr);

}  // namespace dgrain
