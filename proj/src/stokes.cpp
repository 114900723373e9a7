#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

#include <Eigen/SparseCholesky>

#include "dgrain/fgm.hpp"

namespace dgrain {
namespace {

std::vector<std::uint8_t> solid_cells(const PixelGrid& px, int n) {
    const int r = px.resolution();
    require(r % n == 0, "Stokes: fine_res must divide the microstructure resolution");
    const int b = r / n;
    std::vector<std::uint8_t> s(std::size_t(n) * n);
    for (int cj = 0; cj < n; ++cj)
        for (int ci = 0; ci < n; ++ci) {
            int c = 0;
            for (int j = cj * b; j < (cj + 1) * b; ++j)
                for (int i = ci * b; i < (ci + 1) * b; ++i) c += px(i, j);
            s[std::size_t(cj) * n + ci] = 2 * c > b * b;
        }
    return s;
}

// Keep only the pore component that connects both pairs of opposite sides.
void keep_spanning_cluster(std::vector<std::uint8_t>& solid, int n) {
    std::vector<int> label(solid.size(), -1);
    int best = -1;
    long best_size = 0;
    int nlab = 0;
    for (int start = 0; start < n * n; ++start) {
        if (solid[start] || label[start] >= 0) continue;
        std::queue<int> q;
        q.push(start);
        label[start] = nlab;
        long size = 0;
        bool l = false, rgt = false, b = false, t = false;
        while (!q.empty()) {
            int c = q.front();
            q.pop();
            ++size;
            int i = c % n, j = c / n;
            l |= i == 0;
            rgt |= i == n - 1;
            b |= j == 0;
            t |= j == n - 1;
            const int ni[4] = {i - 1, i + 1, i, i};
            const int nj[4] = {j, j, j - 1, j + 1};
            for (int k = 0; k < 4; ++k) {
                if (ni[k] < 0 || nj[k] < 0 || ni[k] >= n || nj[k] >= n) continue;
                int d = nj[k] * n + ni[k];
                if (solid[d] || label[d] >= 0) continue;
                label[d] = nlab;
                q.push(d);
            }
        }
        if (l && rgt && b && t && size > best_size) {
            best = nlab;
            best_size = size;
        }
        ++nlab;
    }
    if (best < 0) throw ConfigError("Stokes: pore space is not connected between opposite boundaries");
    for (std::size_t c = 0; c < solid.size(); ++c)
        if (!solid[c] && label[c] != best) solid[c] = 1;
}

}  // namespace

FineField solve_fine_stokes(const Microstructure& micro, const BoundaryFlux& bc, const StokesOptions& opt,
                            StokesDiagnostics* diag) {
    const int n = opt.fine_res;
    require(n >= 4 && n <= 128, "Stokes: fine_res must lie in [4, 128]");
    const double h = 1.0 / n, mu = opt.viscosity;
    auto solid = solid_cells(micro.pixels, n);
    keep_spanning_cluster(solid, n);
    auto is_solid = [&](int i, int j) { return i < 0 || j < 0 || i >= n || j >= n || solid[std::size_t(j) * n + i]; };

    // Face numbering: u faces (i in 0..n, j in 0..n-1), then v faces (i in 0..n-1, j in 0..n).
    const int nu = (n + 1) * n, nv = n * (n + 1);
    auto uface = [&](int i, int j) { return j * (n + 1) + i; };
    auto vface = [&](int i, int j) { return nu + j * n + i; };
    std::vector<int> unk(nu + nv, -1);
    VectorXd known = VectorXd::Zero(nu + nv);
    int n_unknown = 0;
    // Boundary normal velocities, corrected below for compatibility.
    std::vector<int> boundary_faces;
    std::vector<double> outward;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i <= n; ++i) {
            int f = uface(i, j);
            bool lft = !is_solid(i - 1, j), rgt = !is_solid(i, j);
            if (i == 0 || i == n) {
                bool fluid = i == 0 ? rgt : lft;
                known[f] = fluid ? bc.vx(i * h, (j + 0.5) * h) : 0.0;
                if (fluid) {
                    boundary_faces.push_back(f);
                    outward.push_back(i == 0 ? -1.0 : 1.0);
                }
            } else if (lft && rgt) {
                unk[f] = n_unknown++;
            }
        }
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i < n; ++i) {
            int f = vface(i, j);
            bool bot = !is_solid(i, j - 1), top = !is_solid(i, j);
            if (j == 0 || j == n) {
                bool fluid = j == 0 ? top : bot;
                known[f] = fluid ? bc.vy((i + 0.5) * h, j * h) : 0.0;
                if (fluid) {
                    boundary_faces.push_back(f);
                    outward.push_back(j == 0 ? -1.0 : 1.0);
                }
            } else if (bot && top) {
                unk[f] = n_unknown++;
            }
        }
    {
        double net = 0;
        for (std::size_t k = 0; k < boundary_faces.size(); ++k) net += outward[k] * known[boundary_faces[k]];
        double corr = net / double(boundary_faces.size());
        for (std::size_t k = 0; k < boundary_faces.size(); ++k) known[boundary_faces[k]] -= outward[k] * corr;
    }

    std::vector<int> pidx(std::size_t(n) * n, -1);
    int n_p = 0;
    for (int c = 0; c < n * n; ++c)
        if (!solid[c]) pidx[c] = n_p++;

    // Momentum operator A (mu * negative Laplacian / h^2), gradient G, rhs.
    std::vector<Eigen::Triplet<double>> at, gt;
    VectorXd fu = VectorXd::Zero(n_unknown);
    const double c0 = mu / (h * h);
    // One momentum row for face f at position along its normal/tangent axes.
    auto momentum = [&](int f, int row, bool is_u, int i, int j) {
        double diag = 0;
        // neighbours along the normal direction are faces of the same family
        auto same = [&](int a, int b) { return is_u ? uface(a, b) : vface(a, b); };
        const int ai[2] = {is_u ? i - 1 : i, is_u ? i + 1 : i};
        const int aj[2] = {is_u ? j : j - 1, is_u ? j : j + 1};
        for (int k = 0; k < 2; ++k) {
            int g = same(ai[k], aj[k]);
            diag += c0;
            if (unk[g] >= 0) at.emplace_back(row, unk[g], -c0);
            else fu[row] += c0 * known[g];
        }
        // tangential neighbours
        const int ti[2] = {is_u ? i : i - 1, is_u ? i : i + 1};
        const int tj[2] = {is_u ? j - 1 : j, is_u ? j + 1 : j};
        for (int k = 0; k < 2; ++k) {
            int a = ti[k], b = tj[k];
            bool outside = is_u ? (b < 0 || b >= n) : (a < 0 || a >= n);
            if (outside) {
                // ghost reflection about the domain wall carrying V_bc
                double wall = is_u ? bc.vx(i * h, b < 0 ? 0.0 : 1.0) : bc.vy(a < 0 ? 0.0 : 1.0, j * h);
                diag += 2 * c0;
                fu[row] += 2 * c0 * wall;
                continue;
            }
            int g = same(a, b);
            if (unk[g] >= 0) {
                diag += c0;
                at.emplace_back(row, unk[g], -c0);
                continue;
            }
            // blocked neighbour: wall half a cell away when both cells beyond are solid
            bool both = is_u ? (is_solid(i - 1, b) && is_solid(i, b)) : (is_solid(a, j - 1) && is_solid(a, j));
            diag += both ? 2 * c0 : c0;
            (void)f;
        }
        at.emplace_back(row, row, diag);
        int lo = is_u ? (j * n + i - 1) : ((j - 1) * n + i);
        int hi = j * n + i;
        gt.emplace_back(row, pidx[hi], 1.0 / h);
        gt.emplace_back(row, pidx[lo], -1.0 / h);
    };
    for (int j = 0; j < n; ++j)
        for (int i = 1; i < n; ++i)
            if (unk[uface(i, j)] >= 0) momentum(uface(i, j), unk[uface(i, j)], true, i, j);
    for (int j = 1; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (unk[vface(i, j)] >= 0) momentum(vface(i, j), unk[vface(i, j)], false, i, j);

    SparseMatrixXd A(n_unknown, n_unknown), G(n_unknown, n_p);
    A.setFromTriplets(at.begin(), at.end());
    G.setFromTriplets(gt.begin(), gt.end());

    // Divergence is -G^T on unknown faces, so continuity reads G^T u = D_known u_known.
    VectorXd q = VectorXd::Zero(n_p);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            int c = pidx[j * n + i];
            if (c < 0) continue;
            double div = 0;
            int fe = uface(i + 1, j), fw = uface(i, j), fn = vface(i, j + 1), fs = vface(i, j);
            if (unk[fe] < 0) div += known[fe];
            if (unk[fw] < 0) div -= known[fw];
            if (unk[fn] < 0) div += known[fn];
            if (unk[fs] < 0) div -= known[fs];
            q[c] = div / h;
        }

    Eigen::SimplicialLDLT<SparseMatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success) throw NumericalError("Stokes: momentum factorization failed");

    auto project = [](VectorXd& v) { v.array() -= v.mean(); };
    auto schur = [&](const VectorXd& p) {
        VectorXd s = G.transpose() * ldlt.solve(G * p);
        project(s);
        return s;
    };
    VectorXd b = G.transpose() * ldlt.solve(fu) - q;
    project(b);
    VectorXd p = VectorXd::Zero(n_p), r = b, d = r;
    const double bnorm = b.norm();
    double rr = r.squaredNorm();
    int it = 0;
    if (bnorm > 0) {
        for (; it < opt.max_iterations && std::sqrt(rr) > opt.tolerance * bnorm; ++it) {
            VectorXd sd = schur(d);
            double alpha = rr / d.dot(sd);
            p += alpha * d;
            r -= alpha * sd;
            double rr_new = r.squaredNorm();
            d = r + (rr_new / rr) * d;
            rr = rr_new;
        }
        if (std::sqrt(rr) > opt.tolerance * bnorm)
            throw NumericalError("Stokes: Schur-complement CG did not converge, relative residual " +
                                 std::to_string(std::sqrt(rr) / bnorm));
    }
    VectorXd u = ldlt.solve(fu - G * p);
    if (!u.allFinite() || !p.allFinite()) throw NumericalError("Stokes: non-finite solution");

    if (diag) {
        diag->iterations = it;
        diag->relative_residual = bnorm > 0 ? std::sqrt(rr) / bnorm : 0.0;
        diag->divergence = (G.transpose() * u - q).cwiseAbs().maxCoeff();
    }

    // Nodal pressures: mean over adjacent fluid cells, then fill from neighbours.
    VectorXd nodal = VectorXd::Zero((n + 1) * (n + 1));
    std::vector<std::uint8_t> have(nodal.size(), 0);
    for (int jn = 0; jn <= n; ++jn)
        for (int in = 0; in <= n; ++in) {
            double s = 0;
            int c = 0;
            for (int dj = -1; dj <= 0; ++dj)
                for (int di = -1; di <= 0; ++di) {
                    int ci = in + di, cj = jn + dj;
                    if (is_solid(ci, cj)) continue;
                    s += p[pidx[cj * n + ci]];
                    ++c;
                }
            if (c) {
                nodal[grid_node(n, in, jn)] = s / c;
                have[grid_node(n, in, jn)] = 1;
            }
        }
    for (bool changed = true; changed;) {
        changed = false;
        auto next = have;
        for (int jn = 0; jn <= n; ++jn)
            for (int in = 0; in <= n; ++in) {
                int k = grid_node(n, in, jn);
                if (have[k]) continue;
                double s = 0;
                int c = 0;
                const int ni[4] = {in - 1, in + 1, in, in}, nj[4] = {jn, jn, jn - 1, jn + 1};
                for (int t = 0; t < 4; ++t) {
                    if (ni[t] < 0 || nj[t] < 0 || ni[t] > n || nj[t] > n) continue;
                    int g = grid_node(n, ni[t], nj[t]);
                    if (have[g]) {
                        s += nodal[g];
                        ++c;
                    }
                }
                if (c) {
                    nodal[k] = s / c;
                    next[k] = 1;
                    changed = true;
                }
            }
        have = std::move(next);
    }
    nodal.array() -= nodal[0];

    FineField ff;
    ff.grid = opt.output_grid > 0 ? opt.output_grid : n + 1;
    ff.values = resample_nodal(nodal, n, ff.grid);
    ff.values[0] = 0.0;
    ff.bc = bc;
    return ff;
}

}  // namespace dgrain
