#include "doctest.h"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "dgrain/dataset.hpp"
#include "dgrain/fem.hpp"
#include "dgrain/fgm.hpp"
#include "dgrain/serialize.hpp"

using namespace dgrain;
namespace fs = std::filesystem;

namespace {

Microstructure pixel_micro(const PixelGrid& g) {
    Microstructure m;
    m.pixels = g;
    return m;
}

Microstructure sample(std::uint64_t seed, int res) {
    MicrostructureParams p;
    p.mu_ex = 4.4;
    p.mu_r_base = -3.5;
    p.seed = seed;
    return sample_microstructure(p, res);
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / ("dgrain_test_fgm_" + name);
    fs::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("fine Darcy: uniform permeability") {
    for (LinearSolver s : {LinearSolver::pcg, LinearSolver::direct}) {
        DarcyOptions opt;
        opt.fine_res = 32;
        opt.solver = s;
        auto m = pixel_micro(PixelGrid(64));
        FineField fx = solve_fine_darcy(m, {1, 0, 0}, opt);
        FineField fy = solve_fine_darcy(m, {0, 1, 0}, opt);
        REQUIRE(fx.grid == 33);
        for (int j = 0; j < 33; ++j)
            for (int i = 0; i < 33; ++i) {
                CHECK(std::abs(fx.at(i, j) + i / 32.0) < 1e-8);
                CHECK(std::abs(fy.at(i, j) + j / 32.0) < 1e-8);
            }
        CHECK(fx.values[0] == 0.0);
    }
}

TEST_CASE("fine Darcy: two layers in series") {
    const double eps = 0.1;
    PixelGrid g(32);
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 16; ++i) g.set(i, j, true);
    DarcyOptions opt;
    opt.fine_res = 32;
    opt.eps_solid = eps;
    FineField f = solve_fine_darcy(pixel_micro(g), {1, 0, 0}, opt);
    // Unit flux through resistances 1/eps and 1 in series.
    auto exact = [&](double x) { return x < 0.5 ? -x / eps : -0.5 / eps - (x - 0.5); };
    for (int j = 0; j < 33; j += 4)
        for (int i = 0; i < 33; ++i) CHECK(std::abs(f.at(i, j) - exact(i / 32.0)) < 1e-8 * 5.5);
    double left = f.at(8, 3) - f.at(7, 3), right = f.at(25, 3) - f.at(24, 3);
    CHECK(left / right == doctest::Approx(1 / eps).epsilon(1e-8));
}

TEST_CASE("fine Darcy properties on a sampled microstructure") {
    Microstructure m = sample(3, 128);
    DarcyOptions opt;
    opt.fine_res = 64;
    DarcyDiagnostics diag;
    FineField f1 = solve_fine_darcy(m, {1, 0, 0}, opt, &diag);
    CHECK(diag.relative_residual <= 1e-10);
    CHECK(f1.values[0] == 0.0);
    CHECK(f1.values.allFinite());

    SUBCASE("linear in the boundary data") {
        FineField f2 = solve_fine_darcy(m, {2, 0, 0}, opt);
        CHECK((f2.values - 2 * f1.values).norm() <= 1e-10 * f2.values.norm());
    }
    SUBCASE("discrete mass conservation") {
        VectorXd k = element_permeability(m.pixels, 64, opt.eps_solid);
        BoundaryFlux bc{1, 1, 0};
        VectorXd u = solve_darcy_nodal(64, k, bc, opt);
        VectorXd load = drop_anchor(flux_load(64, bc));
        VectorXd r = assemble_darcy(64, k) * drop_anchor(u) - load;
        CHECK(r.norm() <= 1e-8 * load.norm());
    }
    SUBCASE("direct and iterative solvers agree") {
        DarcyOptions d = opt;
        d.solver = LinearSolver::direct;
        FineField fd = solve_fine_darcy(m, {1, 0, 0}, d);
        CHECK((fd.values - f1.values).norm() <= 1e-6 * fd.values.norm());
    }
    SUBCASE("output grid resampling") {
        DarcyOptions o = opt;
        o.output_grid = 33;
        FineField fr = solve_fine_darcy(m, {1, 0, 0}, o);
        REQUIRE(fr.grid == 33);
        for (int j = 0; j < 33; j += 7)
            for (int i = 0; i < 33; i += 5) CHECK(fr.at(i, j) == doctest::Approx(f1.at(2 * i, 2 * j)).epsilon(1e-12));
    }
}

TEST_CASE("fine Darcy: invalid options") {
    auto m = pixel_micro(PixelGrid(64));
    DarcyOptions opt;
    opt.fine_res = 8;
    CHECK_THROWS_AS(solve_fine_darcy(m, {1, 0, 0}, opt), ConfigError);
    opt.fine_res = 32;
    opt.eps_solid = 1.0;
    CHECK_THROWS_AS(solve_fine_darcy(m, {1, 0, 0}, opt), ConfigError);
    opt.eps_solid = 1e-8;
    opt.fine_res = 48;
    CHECK_THROWS_AS(solve_fine_darcy(m, {1, 0, 0}, opt), ConfigError);
}

TEST_CASE("element permeability is the block mean") {
    PixelGrid g(4);
    g.set(0, 0, true);
    g.set(1, 0, true);
    g.set(3, 3, true);
    VectorXd k = element_permeability(g, 2, 0.5);
    CHECK(k[0] == doctest::Approx(0.75));
    CHECK(k[1] == 1.0);
    CHECK(k[3] == doctest::Approx(0.875));
    CHECK(element_permeability(g, 4, 0.5)[0] == 0.5);
}

TEST_CASE("fine Stokes") {
    StokesOptions opt;
    opt.fine_res = 32;
    SUBCASE("empty channel is plane flow") {
        StokesDiagnostics diag;
        FineField f = solve_fine_stokes(pixel_micro(PixelGrid(32)), {1, 0, 0}, opt, &diag);
        CHECK(f.values.cwiseAbs().maxCoeff() < 1e-8);
        CHECK(diag.divergence < 1e-8);
    }
    SUBCASE("centered disk is symmetric under y reflection") {
        Microstructure m;
        m.disks = std::vector<Disk>{{0.5, 0.5, 0.2}};
        m.pixels = rasterize(*m.disks, 32);
        FineField f = solve_fine_stokes(m, {1, 0, 0}, opt);
        const int g = f.grid;
        double asym = 0;
        for (int j = 0; j < g; ++j)
            for (int i = 0; i < g; ++i) asym = std::max(asym, std::abs(f.at(i, j) - f.at(i, g - 1 - j)));
        CHECK(asym < 1e-6 * f.values.cwiseAbs().maxCoeff());
        CHECK(f.values[0] == 0.0);
        CHECK(f.at(g - 1, g / 2) < 0.0);
    }
    SUBCASE("blocked pore space") {
        PixelGrid g(32);
        for (int j = 0; j < 32; ++j) g.set(15, j, true), g.set(16, j, true);
        CHECK_THROWS_AS(solve_fine_stokes(pixel_micro(g), {1, 0, 0}, opt), ConfigError);
    }
    SUBCASE("desk-scale cost at 64 cells per side") {
        Microstructure m = sample(5, 128);
        StokesOptions o;
        o.fine_res = 64;
        auto t0 = std::chrono::steady_clock::now();
        FineField f = solve_fine_stokes(m, {1, 0, 0}, o);
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        CHECK(f.values.allFinite());
        CHECK(secs < 10.0);
    }
}

TEST_CASE("dataset round trip") {
    const fs::path dir = scratch("roundtrip");
    Dataset d;
    DarcyOptions opt;
    opt.fine_res = 32;
    const BoundaryFlux bcs[3] = {{1, 1, 0}, {0, 0, -1}, {0.3, -0.7, 0.2}};
    for (int k = 0; k < 3; ++k) {
        d.ids.push_back(k);
        d.micro.push_back(sample(10 + k, 64));
        d.fields.push_back(solve_fine_darcy(d.micro.back(), bcs[k], opt));
    }
    write_dataset(dir, d);
    Dataset r = ingest_dataset(dir);
    REQUIRE(r.size() == 3);
    for (int k = 0; k < 3; ++k) {
        CHECK(r.ids[std::size_t(k)] == k);
        CHECK(r.micro[std::size_t(k)].pixels == d.micro[std::size_t(k)].pixels);
        CHECK(r.micro[std::size_t(k)].disks->size() == d.micro[std::size_t(k)].disks->size());
        CHECK(r.fields[std::size_t(k)].values == d.fields[std::size_t(k)].values);
        CHECK(r.fields[std::size_t(k)].bc == bcs[k]);
    }

    SUBCASE("corrupted sidecar names the file") {
        std::ofstream(field_path(dir, 1).string() + ".json") << "{\"grid\": ";
        CHECK_THROWS_WITH_AS(ingest_dataset(dir), doctest::Contains("sample_1.uf.json"), IoError);
    }
    SUBCASE("missing field") {
        fs::remove(field_path(dir, 2));
        CHECK_THROWS_AS(ingest_dataset(dir), IoError);
        CHECK(ingest_dataset(dir, false).size() == 3);
    }
    SUBCASE("grid mismatch") {
        DarcyOptions o = opt;
        o.output_grid = 17;
        write_field(field_path(dir, 0), solve_fine_darcy(d.micro[0], bcs[0], o));
        CHECK_THROWS_AS(ingest_dataset(dir), IoError);
    }
    SUBCASE("non-finite values") {
        FineField bad = d.fields[0];
        bad.values[5] = std::nan("");
        write_field(field_path(dir, 0), bad);
        CHECK_THROWS_AS(ingest_dataset(dir), IoError);
    }
    SUBCASE("truncated pixel file") {
        fs::resize_file(micro_path(dir, 1), 10);
        CHECK_THROWS_AS(ingest_dataset(dir), IoError);
    }
    fs::remove_all(dir);
}

TEST_CASE("initial log-permeability") {
    auto m = pixel_micro(PixelGrid(64));
    CHECK(initial_log_permeability(m, Partition::uniform(16, 4)).isZero(0));
    PixelGrid g(64);
    for (int j = 0; j < 32; ++j)
        for (int i = 0; i < 32; ++i) g.set(i, j, (i + j) % 3 == 0);
    VectorXd l = initial_log_permeability(pixel_micro(g), Partition::uniform(16, 2));
    CHECK(l[0] < 0);
    CHECK(l[1] == 0);
}
