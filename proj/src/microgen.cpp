#include "dgrain/microgen.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dgrain {

void MicrostructureParams::validate() const {
    require(std::isfinite(mu_ex) && std::isfinite(mu_r_base), "microstructure log-means must be finite");
    require(sigma_ex > 0 && sigma_r > 0, "sigma_ex and sigma_r must be > 0");
    require(l_x > 0 && l_r > 0 && l_s > 0, "length scales and sigmoid slope must be > 0");
    require(margin >= 0 && margin < 0.5, "margin must lie in [0, 0.5)");
}

std::size_t PixelGrid::count_solid() const {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
}

MatrixXd se_covariance_sqrt(double length_scale, int n) {
    MatrixXd k(n, n);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b) {
            double d = double(a - b) / double(n - 1);
            k(a, b) = std::exp(-d * d / (length_scale * length_scale));
        }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(k);
    VectorXd s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

GridGP::GridGP(double length_scale, int n, Rng& rng) : n_(n) {
    MatrixXd s = se_covariance_sqrt(length_scale, n);
    std::normal_distribution<double> nd(0.0, 1.0);
    MatrixXd z(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) z(i, j) = nd(rng);
    values_ = s * z * s.transpose();
}

double GridGP::operator()(double x, double y) const {
    double fx = std::clamp(x, 0.0, 1.0) * (n_ - 1);
    double fy = std::clamp(y, 0.0, 1.0) * (n_ - 1);
    int i = std::min(int(fx), n_ - 2);
    int j = std::min(int(fy), n_ - 2);
    double u = fx - i, v = fy - j;
    return (1 - u) * (1 - v) * values_(i, j) + u * (1 - v) * values_(i + 1, j) +
           (1 - u) * v * values_(i, j + 1) + u * v * values_(i + 1, j + 1);
}

bool disks_overlap(const Disk& a, const Disk& b) {
    double dx = a.x - b.x, dy = a.y - b.y;
    double rr = a.r + b.r;
    return dx * dx + dy * dy <= rr * rr;
}

bool disk_respects_margin(const Disk& d, double margin) {
    return d.x - d.r >= margin && d.x + d.r <= 1.0 - margin && d.y - d.r >= margin &&
           d.y + d.r <= 1.0 - margin;
}

namespace {

// Uniform bucket grid over disk centers for overlap queries.
class DiskIndex {
public:
    explicit DiskIndex(int cells) : n_(cells), buckets_(std::size_t(cells) * cells) {}

    bool overlaps(const Disk& d) const {
        double reach = d.r + r_max_;
        int i0 = cell(d.x - reach), i1 = cell(d.x + reach);
        int j0 = cell(d.y - reach), j1 = cell(d.y + reach);
        for (int j = j0; j <= j1; ++j)
            for (int i = i0; i <= i1; ++i)
                for (int k : buckets_[std::size_t(j) * n_ + i])
                    if (disks_overlap(d, disks_[k])) return true;
        return false;
    }

    void insert(const Disk& d) {
        buckets_[std::size_t(cell(d.y)) * n_ + cell(d.x)].push_back(int(disks_.size()));
        disks_.push_back(d);
        r_max_ = std::max(r_max_, d.r);
    }

    std::vector<Disk> take() { return std::move(disks_); }

private:
    int cell(double x) const { return std::clamp(int(std::floor(x * n_)), 0, n_ - 1); }

    int n_;
    std::vector<std::vector<int>> buckets_;
    std::vector<Disk> disks_;
    double r_max_ = 0.0;
};

}  // namespace

Microstructure sample_microstructure(const MicrostructureParams& p, int resolution) {
    p.validate();
    require(resolution >= 16, "resolution must be >= 16");

    Rng rng = SeedSeq(p.seed).child("microgen").rng();
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> ud(0.0, 1.0);

    double n_draw = std::exp(p.mu_ex + p.sigma_ex * nd(rng));
    long n_ex = std::lround(n_draw);
    require(n_ex >= 0 && n_ex < 10'000'000, "exclusion count out of range");

    GridGP gp_x(p.l_x, kAuxGridSize, rng);
    GridGP gp_r(p.l_r, kAuxGridSize, rng);

    const long budget = kProposalBudgetFactor * std::max<long>(n_ex, 1);
    long proposals = 0;
    DiskIndex index(64);
    for (long placed = 0; placed < n_ex;) {
        if (++proposals > budget)
            throw NumericalError("microgen: proposal budget of " + std::to_string(budget) +
                                 " (50 x N_ex) exhausted after placing " + std::to_string(placed) +
                                 " of " + std::to_string(n_ex) + " disks");
        double x = p.margin + (1.0 - 2.0 * p.margin) * ud(rng);
        double y = p.margin + (1.0 - 2.0 * p.margin) * ud(rng);
        double density = 1.0 / (1.0 + std::exp(-p.l_s * gp_x(x, y)));
        if (ud(rng) >= density) continue;
        Disk d{x, y, std::exp(p.mu_r_base + gp_r(x, y) + p.sigma_r * nd(rng))};
        if (!disk_respects_margin(d, p.margin) || index.overlaps(d)) continue;
        index.insert(d);
        ++placed;
    }

    Microstructure m;
    m.disks = index.take();
    m.pixels = rasterize(*m.disks, resolution);
    m.params = p;
    return m;
}

PixelGrid rasterize(const std::vector<Disk>& disks, int resolution) {
    require(resolution > 0, "resolution must be positive");
    PixelGrid g(resolution);
    const double h = 1.0 / resolution;
    for (const Disk& d : disks) {
        int i0 = std::max(0, int(std::floor((d.x - d.r) * resolution)));
        int i1 = std::min(resolution - 1, int(std::ceil((d.x + d.r) * resolution)));
        int j0 = std::max(0, int(std::floor((d.y - d.r) * resolution)));
        int j1 = std::min(resolution - 1, int(std::ceil((d.y + d.r) * resolution)));
        double r2 = d.r * d.r;
        for (int j = j0; j <= j1; ++j) {
            double dy = (j + 0.5) * h - d.y;
            for (int i = i0; i <= i1; ++i) {
                double dx = (i + 0.5) * h - d.x;
                if (dx * dx + dy * dy < r2) g.set(i, j, true);
            }
        }
    }
    return g;
}

Microstructure sample_tiled_microstructure(const TiledParams& p, int resolution) {
    require(p.radius > 0 && p.tile > 0 && p.tile <= 0.5, "invalid tiled microstructure parameters");
    require(p.min_fraction >= 0 && p.max_fraction < 0.5 && p.min_fraction <= p.max_fraction,
            "tile fractions must satisfy 0 <= min <= max < 0.5");
    Rng rng = SeedSeq(p.seed).child("tiled").rng();
    std::uniform_real_distribution<double> ud(0.0, 1.0);
    const double disk_area = M_PI * p.radius * p.radius;
    DiskIndex index(64);

    auto fill = [&](double x0, double y0, double x1, double y1, double fraction, bool exclude_ll) {
        double area = (x1 - x0) * (y1 - y0) - (exclude_ll ? 0.25 : 0.0);
        long target = std::lround(fraction * area / disk_area);
        long budget = kProposalBudgetFactor * std::max<long>(target, 1);
        long proposals = 0;
        for (long placed = 0; placed < target;) {
            if (++proposals > budget)
                throw NumericalError("microgen: proposal budget of " + std::to_string(budget) +
                                     " exhausted in tiled sampler");
            Disk d{x0 + (x1 - x0) * ud(rng), y0 + (y1 - y0) * ud(rng), p.radius};
            if (exclude_ll && d.x < 0.5 && d.y < 0.5) continue;
            if (!disk_respects_margin(d, p.margin) || index.overlaps(d)) continue;
            index.insert(d);
            ++placed;
        }
    };

    int tiles = int(std::lround(0.5 / p.tile));
    for (int tj = 0; tj < tiles; ++tj)
        for (int ti = 0; ti < tiles; ++ti) {
            double f = p.min_fraction + (p.max_fraction - p.min_fraction) * ud(rng);
            fill(ti * p.tile, tj * p.tile, (ti + 1) * p.tile, (tj + 1) * p.tile, f, false);
        }
    fill(0.0, 0.0, 1.0, 1.0, p.base_fraction, true);

    Microstructure m;
    m.disks = index.take();
    m.pixels = rasterize(*m.disks, resolution);
    return m;
}

}  // namespace dgrain
