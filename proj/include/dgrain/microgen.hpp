#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dgrain/random.hpp"
#include "dgrain/types.hpp"

namespace dgrain {

struct MicrostructureParams {
    double mu_ex = 7.8;
    double sigma_ex = 0.2;
    double mu_r_base = -5.23;
    double sigma_r = 0.3;
    double l_x = 0.08;
    double l_r = 0.05;
    double l_s = 1.2;
    double margin = 0.003;
    std::uint64_t seed = 0;

    void validate() const;
};

struct Disk {
    double x = 0, y = 0, r = 0;
};

/// Binary pixel field on the unit square. Pixel (i, j) has center
/// ((i + 0.5) / R, (j + 0.5) / R); storage is row-major with j as the row.
class PixelGrid {
public:
    PixelGrid() = default;
    explicit PixelGrid(int resolution, bool value = false)
        : res_(resolution), data_(static_cast<std::size_t>(resolution) * resolution, value) {}

    int resolution() const { return res_; }
    std::size_t size() const { return data_.size(); }

    bool operator()(int i, int j) const { return data_[static_cast<std::size_t>(j) * res_ + i] != 0; }
    void set(int i, int j, bool v) { data_[static_cast<std::size_t>(j) * res_ + i] = v; }

    const std::vector<std::uint8_t>& data() const { return data_; }
    std::vector<std::uint8_t>& data() { return data_; }

    std::size_t count_solid() const;
    double pore_fraction() const { return 1.0 - double(count_solid()) / double(size()); }

    bool operator==(const PixelGrid& o) const { return res_ == o.res_ && data_ == o.data_; }

private:
    int res_ = 0;
    std::vector<std::uint8_t> data_;
};

struct Microstructure {
    PixelGrid pixels;  ///< true = solid
    std::optional<std::vector<Disk>> disks;
    std::optional<MicrostructureParams> params;
};

/// Zero-mean unit-variance squared-exponential GP, k(x,x') = exp(-|x-x'|^2 / l^2),
/// sampled exactly on an n x n node grid over [0,1]^2 and evaluated by
/// bilinear interpolation.
class GridGP {
public:
    GridGP(double length_scale, int n, Rng& rng);
    double operator()(double x, double y) const;
    const MatrixXd& values() const { return values_; }

private:
    int n_;
    MatrixXd values_;  ///< values_(i, j) at (i/(n-1), j/(n-1))
};

/// Symmetric square root S of the 1-D SE covariance on n equispaced nodes.
/// The 2-D grid covariance is S S^T (x) S S^T, so S Z S^T is an exact draw.
MatrixXd se_covariance_sqrt(double length_scale, int n);

inline constexpr int kAuxGridSize = 32;
inline constexpr int kProposalBudgetFactor = 50;

Microstructure sample_microstructure(const MicrostructureParams& params, int resolution);

PixelGrid rasterize(const std::vector<Disk>& disks, int resolution);

bool disks_overlap(const Disk& a, const Disk& b);
bool disk_respects_margin(const Disk& d, double margin);

/// Microstructure that is statistically homogeneous everywhere except the
/// lower-left quadrant [0, 0.5)^2, which is tiled by 0.125 x 0.125 sub-cells
/// of independently drawn solid fractions. Constant radius.
struct TiledParams {
    double radius = 0.01;
    double base_fraction = 0.2;
    double min_fraction = 0.02;
    double max_fraction = 0.35;
    double tile = 0.125;
    double margin = 0.003;
    std::uint64_t seed = 0;
};

Microstructure sample_tiled_microstructure(const TiledParams& params, int resolution);

}  // namespace dgrain
