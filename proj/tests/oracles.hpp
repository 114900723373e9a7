#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. They follow the feature definitions literally and share no code
// with the library.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "dgrain/features.hpp"
#include "dgrain/microgen.hpp"

namespace oracle {

using dgrain::Disk;
using dgrain::FeatureKind;
using dgrain::FeatureSpec;
using dgrain::Microstructure;
using dgrain::Phase;
using dgrain::PixelGrid;
using dgrain::Region;

inline bool is(const PixelGrid& g, int i, int j, Phase p) { return g(i, j) == (p == Phase::solid); }

inline double phase_fraction(const PixelGrid& g, const Region& r, Phase p) {
    long n = 0, c = 0;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i) {
            ++n;
            if (is(g, i, j, p)) ++c;
        }
    return double(c) / double(n);
}

inline double interface_area(const PixelGrid& g, const Region& r) {
    long c = 0;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i)
            for (int q = 0; q < 2; ++q) {
                int a = i + (q == 0), b = j + (q == 1);
                if (a < r.i1 && b < r.j1 && g(a, b) != g(i, j)) ++c;
            }
    return double(c) / g.resolution();
}

/// Every axis-aligned segment of k pixel spacings (k + 1 pixels) inside r.
inline double lineal_path(const PixelGrid& g, const Region& r, Phase p, int k) {
    long total = 0, good = 0;
    for (int dir = 0; dir < 2; ++dir)
        for (int j = r.j0; j < r.j1; ++j)
            for (int i = r.i0; i < r.i1; ++i) {
                int ie = i + (dir == 0 ? k : 0), je = j + (dir == 1 ? k : 0);
                if (ie >= r.i1 || je >= r.j1) continue;
                ++total;
                bool all = true;
                for (int s = 0; s <= k; ++s)
                    all = all && is(g, i + (dir == 0 ? s : 0), j + (dir == 1 ? s : 0), p);
                if (all) ++good;
            }
    return total ? double(good) / double(total) : 0.0;
}

inline std::vector<int> chords(const PixelGrid& g, const Region& r, Phase p) {
    std::vector<int> out;
    // Rows, then columns; a chord starts where the phase begins.
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i)
            if (is(g, i, j, p) && (i == r.i0 || !is(g, i - 1, j, p))) {
                int e = i;
                while (e + 1 < r.i1 && is(g, e + 1, j, p)) ++e;
                out.push_back(e - i + 1);
            }
    for (int i = r.i0; i < r.i1; ++i)
        for (int j = r.j0; j < r.j1; ++j)
            if (is(g, i, j, p) && (j == r.j0 || !is(g, i, j - 1, p))) {
                int e = j;
                while (e + 1 < r.j1 && is(g, i, e + 1, p)) ++e;
                out.push_back(e - j + 1);
            }
    return out;
}

inline double chord_density(const PixelGrid& g, const Region& r, Phase p, double lo, double hi) {
    auto c = oracle::chords(g, r, p);
    if (c.empty()) return 0.0;
    long in = 0;
    for (int len : c) {
        double l = double(len) / g.resolution();
        if (l >= lo && l < hi) ++in;
    }
    return double(in) / (double(c.size()) * (hi - lo));
}

enum class Metric { euclidean, chessboard, cityblock };

/// Distance from pore pixel (i, j) to the nearest solid pixel in r, in pixels;
/// distance to the region edge when r holds no solid.
inline double nearest_solid(const PixelGrid& g, const Region& r, int i, int j, Metric m) {
    double best = std::numeric_limits<double>::infinity();
    for (int b = r.j0; b < r.j1; ++b)
        for (int a = r.i0; a < r.i1; ++a) {
            if (!g(a, b)) continue;
            double dx = std::abs(a - i), dy = std::abs(b - j);
            double d = m == Metric::euclidean ? std::sqrt(dx * dx + dy * dy)
                       : m == Metric::chessboard ? std::max(dx, dy)
                                                 : dx + dy;
            best = std::min(best, d);
        }
    if (std::isinf(best)) {
        double x = i - r.i0 + 0.5, y = j - r.j0 + 0.5;
        best = std::min({x, r.width() - x, y, r.height() - y});
    }
    return best;
}

struct DtStats {
    double mean = 0, variance = 0, max = 0;
};

inline DtStats dt_stats(const PixelGrid& g, const Region& r, Metric m) {
    std::vector<double> d;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i)
            if (!g(i, j)) d.push_back(oracle::nearest_solid(g, r, i, j, m));
    DtStats s;
    if (d.empty()) return s;
    for (double v : d) s.mean += v;
    s.mean /= double(d.size());
    for (double v : d) {
        s.variance += (v - s.mean) * (v - s.mean);
        s.max = std::max(s.max, v);
    }
    s.variance /= double(d.size());
    return s;
}

/// Histogram density of (distance - half pixel) at bin floor(d * R), per unit length.
inline double pore_size_density(const PixelGrid& g, const Region& r, double d) {
    long pore = 0, solid = 0, hit = 0;
    const long bin = long(std::floor(d * g.resolution()));
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i) (g(i, j) ? solid : pore)++;
    if (solid == 0 || pore == 0) return 0.0;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i)
            if (!g(i, j) && long(std::floor(oracle::nearest_solid(g, r, i, j, Metric::euclidean) - 0.5)) == bin) ++hit;
    return double(hit) * g.resolution() / double(pore);
}

inline double two_point(const PixelGrid& g, const Region& r, Phase p, int k) {
    if (k == 0) return oracle::phase_fraction(g, r, p);
    long total = 0, good = 0;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i) {
            if (i + k < r.i1) {
                ++total;
                good += is(g, i, j, p) && is(g, i + k, j, p);
            }
            if (j + k < r.j1) {
                ++total;
                good += is(g, i, j, p) && is(g, i, j + k, p);
            }
        }
    return total ? double(good) / double(total) : 0.0;
}

inline std::vector<const Disk*> disks_in(const std::vector<Disk>& disks, const Region& r, int res) {
    std::vector<const Disk*> in;
    for (const Disk& d : disks) {
        // Pixel-index test of the center: floor(x R) in [i0, i1).
        if (d.x * res >= r.i0 && d.x * res < r.i1 && d.y * res >= r.j0 && d.y * res < r.j1) in.push_back(&d);
    }
    return in;
}

struct PairStats {
    double mean_edge = 0, min_edge = 0, mean_center = 0;
};

inline PairStats pair_stats(const std::vector<Disk>& disks, const Region& r, int res) {
    auto in = oracle::disks_in(disks, r, res);
    PairStats s;
    if (in.size() < 2) {
        double diag = std::sqrt(double(r.width()) * r.width() + double(r.height()) * r.height()) / res;
        s.mean_edge = s.min_edge = s.mean_center = diag;
        return s;
    }
    s.min_edge = std::numeric_limits<double>::infinity();
    long n = 0;
    for (std::size_t a = 0; a < in.size(); ++a)
        for (std::size_t b = 0; b < in.size(); ++b) {
            if (b <= a) continue;
            double c = std::sqrt((in[a]->x - in[b]->x) * (in[a]->x - in[b]->x) +
                                 (in[a]->y - in[b]->y) * (in[a]->y - in[b]->y));
            s.mean_center += c;
            s.mean_edge += c - in[a]->r - in[b]->r;
            s.min_edge = std::min(s.min_edge, c - in[a]->r - in[b]->r);
            ++n;
        }
    s.mean_center /= double(n);
    s.mean_edge /= double(n);
    return s;
}

inline double transform(double v, dgrain::TransformKind t, double power) {
    switch (t) {
        case dgrain::TransformKind::identity: return v;
        case dgrain::TransformKind::log: return std::log(v < 1e-12 ? 1e-12 : v);
        case dgrain::TransformKind::power: return std::pow(v < 0 ? 0.0 : v, power);
        case dgrain::TransformKind::exp: return std::exp(v);
    }
    return v;
}

inline int pixels_for(double d, int res) {
    double k = d * res;
    return k < 1.0 ? 0 : int(std::lround(k));
}

/// Raw (untransformed) feature value.
inline double raw_feature(const FeatureSpec& s, const Microstructure& m, const Region& r) {
    const PixelGrid& g = m.pixels;
    const int res = g.resolution();
    switch (s.kind) {
        case FeatureKind::constant: return 1.0;
        case FeatureKind::pore_fraction: return oracle::phase_fraction(g, r, Phase::pore);
        case FeatureKind::interface_area: return oracle::interface_area(g, r);
        case FeatureKind::maxwell: {
            double f = oracle::phase_fraction(g, r, Phase::solid);
            return std::max((1 - f) / (1 + f), 1e-6);
        }
        case FeatureKind::sca: return std::max(1 - 2 * oracle::phase_fraction(g, r, Phase::solid), 1e-6);
        case FeatureKind::lineal_path: return oracle::lineal_path(g, r, s.phase, pixels_for(s.d, res));
        case FeatureKind::chord_length_density: return oracle::chord_density(g, r, s.phase, s.bin_lo, s.bin_hi);
        case FeatureKind::two_point_correlation: return oracle::two_point(g, r, s.phase, int(std::lround(s.d * res)));
        case FeatureKind::dt_mean: return oracle::dt_stats(g, r, Metric::euclidean).mean;
        case FeatureKind::dt_variance: return oracle::dt_stats(g, r, Metric::euclidean).variance;
        case FeatureKind::dt_max: return oracle::dt_stats(g, r, Metric::euclidean).max;
        case FeatureKind::pore_size_density: return oracle::pore_size_density(g, r, s.d);
        case FeatureKind::void_nearest_neighbor:
            return oracle::pore_size_density(g, r, 0.0) * oracle::phase_fraction(g, r, Phase::pore);
        case FeatureKind::radius_moment: {
            auto in = oracle::disks_in(*m.disks, r, res);
            double acc = 0;
            for (const Disk* d : in) acc += std::pow(d->r, s.moment);
            return in.empty() ? 0.0 : acc / double(in.size());
        }
        case FeatureKind::mean_edge_distance: return oracle::pair_stats(*m.disks, r, res).mean_edge;
        case FeatureKind::min_edge_distance: return oracle::pair_stats(*m.disks, r, res).min_edge;
        case FeatureKind::mean_center_distance: return oracle::pair_stats(*m.disks, r, res).mean_center;
    }
    return 0.0;
}

inline double feature(const FeatureSpec& s, const Microstructure& m, const Region& r) {
    return transform(raw_feature(s, m, r), s.transform, s.power);
}

/// Counting features compared for exact equality; everything else to 1e-12.
inline bool is_counting(const FeatureSpec& s) {
    if (s.transform != dgrain::TransformKind::identity) return false;
    switch (s.kind) {
        case FeatureKind::constant:
        case FeatureKind::pore_fraction:
        case FeatureKind::interface_area:
        case FeatureKind::lineal_path:
        case FeatureKind::chord_length_density:
        case FeatureKind::two_point_correlation:
        case FeatureKind::pore_size_density: return true;
        default: return false;
    }
}

}  // namespace oracle
