#include "dgrain/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "dgrain/cgm.hpp"
#include "dgrain/log.hpp"
#include "dgrain/parallel.hpp"

namespace dgrain {
namespace {

void check_region(const PixelGrid& g, const Region& r) {
    require(r.i0 >= 0 && r.j0 >= 0 && r.i1 <= g.resolution() && r.j1 <= g.resolution(),
            "feature region exceeds the pixel grid");
    require(r.i1 > r.i0 && r.j1 > r.j0, "feature region is empty");
}

bool in_phase(const PixelGrid& g, int i, int j, Phase p) { return g(i, j) == (p == Phase::solid); }

// 1-D squared Euclidean distance transform (lower envelope of parabolas).
// f must be finite; unreachable samples carry a large finite value.
void edt_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
    const int n = int(f.size());
    const double inf = std::numeric_limits<double>::infinity();
    int k = 0;
    v[0] = 0;
    z[0] = -inf;
    z[1] = inf;
    for (int q = 1; q < n; ++q) {
        double s;
        for (;;) {
            int p = v[k];
            s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
                continue;
            }
            break;
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = inf;
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double dq = q - v[k];
        d[q] = dq * dq + f[v[k]];
    }
}

double log_clamped(double v) { return std::log(std::max(v, kLogClamp)); }

}  // namespace

double phase_fraction(const PixelGrid& g, const Region& r, Phase phase) {
    check_region(g, r);
    long c = 0;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i) c += in_phase(g, i, j, phase);
    return double(c) / double(r.area());
}

double pore_fraction(const PixelGrid& g, const Region& r) { return phase_fraction(g, r, Phase::pore); }

double interface_area(const PixelGrid& g, const Region& r) {
    check_region(g, r);
    long c = 0;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i) {
            if (i + 1 < r.i1 && g(i, j) != g(i + 1, j)) ++c;
            if (j + 1 < r.j1 && g(i, j) != g(i, j + 1)) ++c;
        }
    return double(c) / g.resolution();
}

int segment_pixels(double d, int resolution) {
    double k = d * resolution;
    if (k < 1.0) return 0;
    return int(std::lround(k));
}

double lineal_path_pixels(const PixelGrid& g, const Region& r, Phase phase, int k) {
    check_region(g, r);
    require(k >= 0, "lineal path length must be >= 0");
    long good = 0, total = 0;
    // Horizontal: running length of in-phase pixels ending at (i, j).
    for (int j = r.j0; j < r.j1; ++j) {
        int run = 0;
        for (int i = r.i0; i < r.i1; ++i) {
            run = in_phase(g, i, j, phase) ? run + 1 : 0;
            if (i - r.i0 >= k) {
                ++total;
                if (run >= k + 1) ++good;
            }
        }
    }
    for (int i = r.i0; i < r.i1; ++i) {
        int run = 0;
        for (int j = r.j0; j < r.j1; ++j) {
            run = in_phase(g, i, j, phase) ? run + 1 : 0;
            if (j - r.j0 >= k) {
                ++total;
                if (run >= k + 1) ++good;
            }
        }
    }
    if (total == 0) {
        log::debug("lineal_path: segment longer than region, returning 0");
        return 0.0;
    }
    return double(good) / double(total);
}

double lineal_path(const PixelGrid& g, const Region& r, Phase phase, double d) {
    require(d >= 0 && d < 1, "lineal path distance must lie in [0, 1)");
    int k = segment_pixels(d, g.resolution());
    if (k == 0 && d > 0) log::debug("lineal_path: d below one pixel, using phase fraction");
    return lineal_path_pixels(g, r, phase, k);
}

std::vector<int> chord_lengths(const PixelGrid& g, const Region& r, Phase phase) {
    check_region(g, r);
    std::vector<int> out;
    auto scan = [&](int outer0, int outer1, int inner0, int inner1, bool rows) {
        for (int a = outer0; a < outer1; ++a) {
            int run = 0;
            for (int b = inner0; b < inner1; ++b) {
                bool p = rows ? in_phase(g, b, a, phase) : in_phase(g, a, b, phase);
                if (p) {
                    ++run;
                } else if (run > 0) {
                    out.push_back(run);
                    run = 0;
                }
            }
            if (run > 0) out.push_back(run);
        }
    };
    scan(r.j0, r.j1, r.i0, r.i1, true);
    scan(r.i0, r.i1, r.j0, r.j1, false);
    return out;
}

VectorXd chord_length_density(const PixelGrid& g, const Region& r, Phase phase,
                              const std::vector<double>& edges) {
    require(edges.size() >= 2, "chord bins need at least two edges");
    require(std::is_sorted(edges.begin(), edges.end()) &&
                std::adjacent_find(edges.begin(), edges.end()) == edges.end(),
            "chord bin edges must be strictly ascending");
    auto chords = chord_lengths(g, r, phase);
    VectorXd dens = VectorXd::Zero(Eigen::Index(edges.size() - 1));
    if (chords.empty()) {
        log::debug("chord_length_density: no chords in region");
        return dens;
    }
    for (int c : chords) {
        double len = double(c) / g.resolution();
        auto it = std::upper_bound(edges.begin(), edges.end(), len);
        if (it == edges.begin() || it == edges.end()) continue;
        dens[std::distance(edges.begin(), it) - 1] += 1.0;
    }
    for (Eigen::Index b = 0; b < dens.size(); ++b)
        dens[b] /= double(chords.size()) * (edges[b + 1] - edges[b]);
    return dens;
}

MatrixXd distance_transform(const PixelGrid& g, const Region& r, Metric metric) {
    check_region(g, r);
    const int w = r.width(), h = r.height();
    MatrixXd d(w, h);
    bool any_solid = false;
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) any_solid |= g(r.i0 + i, r.j0 + j);
    if (!any_solid) {
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i)
                d(i, j) = std::min({i + 0.5, w - i - 0.5, j + 0.5, h - j - 0.5});
        return d;
    }
    const double inf = std::numeric_limits<double>::infinity();
    if (metric == Metric::euclidean) {
        const double big = 4.0 * double(w + h) * double(w + h);
        int n = std::max(w, h);
        std::vector<double> f(n), out(n), z(n + 1);
        std::vector<int> v(n);
        for (int j = 0; j < h; ++j) {
            f.resize(w);
            out.resize(w);
            for (int i = 0; i < w; ++i) f[i] = g(r.i0 + i, r.j0 + j) ? 0.0 : big;
            edt_1d(f, out, v, z);
            for (int i = 0; i < w; ++i) d(i, j) = out[i];
        }
        for (int i = 0; i < w; ++i) {
            f.resize(h);
            out.resize(h);
            for (int j = 0; j < h; ++j) f[j] = d(i, j);
            edt_1d(f, out, v, z);
            for (int j = 0; j < h; ++j) d(i, j) = std::sqrt(out[j]);
        }
        return d;
    }
    // Two-pass chamfer; exact for the 4- and 8-neighbour unit metrics.
    const bool diag = metric == Metric::chessboard;
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) d(i, j) = g(r.i0 + i, r.j0 + j) ? 0.0 : inf;
    auto relax = [&](int i, int j, int di, int dj) {
        int a = i + di, b = j + dj;
        if (a < 0 || b < 0 || a >= w || b >= h) return;
        d(i, j) = std::min(d(i, j), d(a, b) + 1.0);
    };
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) {
            relax(i, j, -1, 0);
            relax(i, j, 0, -1);
            if (diag) {
                relax(i, j, -1, -1);
                relax(i, j, 1, -1);
            }
        }
    for (int j = h - 1; j >= 0; --j)
        for (int i = w - 1; i >= 0; --i) {
            relax(i, j, 1, 0);
            relax(i, j, 0, 1);
            if (diag) {
                relax(i, j, 1, 1);
                relax(i, j, -1, 1);
            }
        }
    return d;
}

DistanceStats distance_transform_stats(const PixelGrid& g, const Region& r, Metric metric) {
    MatrixXd d = distance_transform(g, r, metric);
    DistanceStats s;
    long n = 0;
    double sum = 0, sum2 = 0;
    for (int j = 0; j < r.height(); ++j)
        for (int i = 0; i < r.width(); ++i) {
            if (g(r.i0 + i, r.j0 + j)) continue;
            ++n;
            sum += d(i, j);
            sum2 += d(i, j) * d(i, j);
            s.max = std::max(s.max, d(i, j));
        }
    if (n == 0) return s;
    s.mean = sum / n;
    s.variance = std::max(0.0, sum2 / n - s.mean * s.mean);
    return s;
}

double pore_size_density(const PixelGrid& g, const Region& r, double d) {
    require(d >= 0, "pore size density distance must be >= 0");
    check_region(g, r);
    long n_pore = 0, n_solid = 0;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i) (g(i, j) ? n_solid : n_pore)++;
    if (n_pore == 0) throw ConfigError("pore_size_density: region has no pore pixels");
    if (n_solid == 0) {
        log::debug("pore_size_density: no interface in region, returning 0");
        return 0.0;
    }
    MatrixXd dt = distance_transform(g, r, Metric::euclidean);
    const long bin = long(std::floor(d * g.resolution()));
    long c = 0;
    for (int j = 0; j < r.height(); ++j)
        for (int i = 0; i < r.width(); ++i)
            if (!g(r.i0 + i, r.j0 + j) && long(std::floor(dt(i, j) - 0.5)) == bin) ++c;
    return double(c) * g.resolution() / double(n_pore);
}

double void_nearest_neighbor(const PixelGrid& g, const Region& r) {
    double p = pore_fraction(g, r);
    if (p == 0.0) return 0.0;
    return pore_size_density(g, r, 0.0) * p;
}

double two_point_correlation_pixels(const PixelGrid& g, const Region& r, Phase phase, int k) {
    check_region(g, r);
    require(k >= 0, "two-point distance must be >= 0");
    if (k == 0) return phase_fraction(g, r, phase);
    long good = 0, total = 0;
    for (int j = r.j0; j < r.j1; ++j)
        for (int i = r.i0; i < r.i1; ++i) {
            bool p = in_phase(g, i, j, phase);
            if (i + k < r.i1) {
                ++total;
                good += p && in_phase(g, i + k, j, phase);
            }
            if (j + k < r.j1) {
                ++total;
                good += p && in_phase(g, i, j + k, phase);
            }
        }
    if (total == 0) return 0.0;
    return double(good) / double(total);
}

double two_point_correlation(const PixelGrid& g, const Region& r, Phase phase, double d) {
    require(d >= 0, "two-point distance must be >= 0");
    return two_point_correlation_pixels(g, r, phase, int(std::lround(d * g.resolution())));
}

double effective_medium_from_solid_fraction(double phi_s, EffectiveMedium kind) {
    double k = kind == EffectiveMedium::maxwell ? (1 - phi_s) / (1 + phi_s) : 1 - 2 * phi_s;
    if (k < kEpsK) {
        log::debug("effective_medium: estimate clamped at eps_K");
        k = kEpsK;
    }
    return k;
}

double effective_medium(const PixelGrid& g, const Region& r, EffectiveMedium kind) {
    return effective_medium_from_solid_fraction(phase_fraction(g, r, Phase::solid), kind);
}

ExclusionStats exclusion_statistics(const std::vector<Disk>& disks, const Region& r, int resolution) {
    const double x0 = double(r.i0) / resolution, x1 = double(r.i1) / resolution;
    const double y0 = double(r.j0) / resolution, y1 = double(r.j1) / resolution;
    std::vector<const Disk*> in;
    for (const Disk& d : disks)
        if (d.x >= x0 && d.x < x1 && d.y >= y0 && d.y < y1) in.push_back(&d);
    ExclusionStats s;
    s.count = int(in.size());
    for (const Disk* d : in) {
        s.mean_sqrt_r += std::sqrt(d->r);
        s.mean_r += d->r;
    }
    if (!in.empty()) {
        s.mean_sqrt_r /= double(in.size());
        s.mean_r /= double(in.size());
    }
    const double sentinel = std::hypot(x1 - x0, y1 - y0);
    if (in.size() < 2) {
        s.mean_center_distance = s.min_center_distance = sentinel;
        s.mean_edge_distance = s.min_edge_distance = sentinel;
        return s;
    }
    double sum_c = 0, sum_e = 0;
    s.min_center_distance = s.min_edge_distance = std::numeric_limits<double>::infinity();
    long pairs = 0;
    for (std::size_t a = 0; a < in.size(); ++a)
        for (std::size_t b = a + 1; b < in.size(); ++b) {
            double c = std::hypot(in[a]->x - in[b]->x, in[a]->y - in[b]->y);
            double e = c - in[a]->r - in[b]->r;
            sum_c += c;
            sum_e += e;
            s.min_center_distance = std::min(s.min_center_distance, c);
            s.min_edge_distance = std::min(s.min_edge_distance, e);
            ++pairs;
        }
    s.mean_center_distance = sum_c / pairs;
    s.mean_edge_distance = sum_e / pairs;
    return s;
}

// ==========================================================================
// Registry
// ==========================================================================

bool FeatureSpec::needs_disks() const {
    return kind == FeatureKind::radius_moment || kind == FeatureKind::mean_edge_distance ||
           kind == FeatureKind::min_edge_distance || kind == FeatureKind::mean_center_distance;
}

FeatureRegistry default_registry() {
    FeatureRegistry reg;
    auto add = [&](std::string id, FeatureKind kind, TransformKind t = TransformKind::identity,
                   double power = 1.0) {
        FeatureSpec s;
        s.id = std::move(id);
        s.kind = kind;
        s.transform = t;
        s.power = power;
        reg.push_back(s);
        return &reg.back();
    };
    add("constant", FeatureKind::constant)->scope = FeatureScope::global;

    add("pore_fraction", FeatureKind::pore_fraction);
    add("log_pore_fraction", FeatureKind::pore_fraction, TransformKind::log);
    add("pore_fraction_pow0.5", FeatureKind::pore_fraction, TransformKind::power, 0.5);
    add("pore_fraction_pow1.5", FeatureKind::pore_fraction, TransformKind::power, 1.5);
    add("pore_fraction_pow2", FeatureKind::pore_fraction, TransformKind::power, 2.0);
    add("exp_pore_fraction", FeatureKind::pore_fraction, TransformKind::exp);

    add("interface_area", FeatureKind::interface_area);
    add("log_interface_area", FeatureKind::interface_area, TransformKind::log);
    add("interface_area_pow2", FeatureKind::interface_area, TransformKind::power, 2.0);
    add("interface_area_pow0.5", FeatureKind::interface_area, TransformKind::power, 0.5);

    add("maxwell", FeatureKind::maxwell);
    add("log_maxwell", FeatureKind::maxwell, TransformKind::log);
    add("log_sca", FeatureKind::sca, TransformKind::log);

    for (double d : {0.025, 0.01, 0.005, 0.002}) {
        std::string tag = std::to_string(d);
        tag.erase(tag.find_last_not_of('0') + 1);
        add("lineal_path_" + tag, FeatureKind::lineal_path)->d = d;
        add("log_lineal_path_" + tag, FeatureKind::lineal_path, TransformKind::log)->d = d;
    }

    const double edges[4] = {0.0, 0.01, 0.03, 0.1};
    const char* names[3] = {"0-0.01", "0.01-0.03", "0.03-0.1"};
    for (int b = 0; b < 3; ++b) {
        auto* s = add(std::string("log_chord_density_") + names[b], FeatureKind::chord_length_density,
                      TransformKind::log);
        s->bin_lo = edges[b];
        s->bin_hi = edges[b + 1];
    }

    add("two_point_0.01", FeatureKind::two_point_correlation)->d = 0.01;
    add("two_point_0.05", FeatureKind::two_point_correlation)->d = 0.05;

    add("edt_mean", FeatureKind::dt_mean);
    add("edt_variance", FeatureKind::dt_variance);
    add("edt_max", FeatureKind::dt_max);

    add("radius_moment_0.5", FeatureKind::radius_moment)->moment = 0.5;
    add("radius_moment_1", FeatureKind::radius_moment)->moment = 1.0;

    add("mean_edge_distance", FeatureKind::mean_edge_distance);
    add("log_mean_edge_distance", FeatureKind::mean_edge_distance, TransformKind::log);
    return reg;
}

void validate_registry(const FeatureRegistry& reg) {
    require(!reg.empty(), "feature registry is empty");
    require(reg.front().kind == FeatureKind::constant, "feature registry must start with the constant");
    std::set<std::string> ids;
    for (const auto& s : reg) {
        require(!s.id.empty(), "feature id must be non-empty");
        require(ids.insert(s.id).second, "duplicate feature id: " + s.id);
        if (s.kind == FeatureKind::lineal_path || s.kind == FeatureKind::two_point_correlation ||
            s.kind == FeatureKind::pore_size_density)
            require(s.d >= 0 && s.d < 1, "feature distance out of range in " + s.id);
        if (s.kind == FeatureKind::chord_length_density)
            require(s.bin_lo >= 0 && s.bin_hi > s.bin_lo, "invalid chord bin in " + s.id);
    }
}

double apply_transform(double v, TransformKind t, double power) {
    switch (t) {
        case TransformKind::identity: return v;
        case TransformKind::log: return log_clamped(v);
        case TransformKind::power: return std::pow(std::max(v, 0.0), power);
        case TransformKind::exp: return std::exp(v);
    }
    return v;
}

double evaluate_feature(const FeatureSpec& s, const Microstructure& m, const Region& r) {
    const PixelGrid& g = m.pixels;
    double v = 0;
    if (s.needs_disks() && !m.disks)
        throw ConfigError("feature '" + s.id + "' requires disk geometry but the microstructure is pixel-only");
    switch (s.kind) {
        case FeatureKind::constant: v = 1.0; break;
        case FeatureKind::pore_fraction: v = pore_fraction(g, r); break;
        case FeatureKind::interface_area: v = interface_area(g, r); break;
        case FeatureKind::maxwell: v = effective_medium(g, r, EffectiveMedium::maxwell); break;
        case FeatureKind::sca: v = effective_medium(g, r, EffectiveMedium::sca); break;
        case FeatureKind::lineal_path: v = lineal_path(g, r, s.phase, s.d); break;
        case FeatureKind::chord_length_density:
            v = chord_length_density(g, r, s.phase, {s.bin_lo, s.bin_hi})[0];
            break;
        case FeatureKind::two_point_correlation: v = two_point_correlation(g, r, s.phase, s.d); break;
        case FeatureKind::dt_mean: v = distance_transform_stats(g, r, Metric::euclidean).mean; break;
        case FeatureKind::dt_variance: v = distance_transform_stats(g, r, Metric::euclidean).variance; break;
        case FeatureKind::dt_max: v = distance_transform_stats(g, r, Metric::euclidean).max; break;
        case FeatureKind::pore_size_density:
            v = pore_fraction(g, r) > 0 ? pore_size_density(g, r, s.d) : 0.0;
            break;
        case FeatureKind::void_nearest_neighbor: v = void_nearest_neighbor(g, r); break;
        case FeatureKind::radius_moment: {
            const double x0 = double(r.i0) / g.resolution(), x1 = double(r.i1) / g.resolution();
            const double y0 = double(r.j0) / g.resolution(), y1 = double(r.j1) / g.resolution();
            long n = 0;
            for (const Disk& d : *m.disks)
                if (d.x >= x0 && d.x < x1 && d.y >= y0 && d.y < y1) {
                    v += std::pow(d.r, s.moment);
                    ++n;
                }
            v = n ? v / n : 0.0;
            break;
        }
        case FeatureKind::mean_edge_distance:
            v = exclusion_statistics(*m.disks, r, g.resolution()).mean_edge_distance;
            break;
        case FeatureKind::min_edge_distance:
            v = exclusion_statistics(*m.disks, r, g.resolution()).min_edge_distance;
            break;
        case FeatureKind::mean_center_distance:
            v = exclusion_statistics(*m.disks, r, g.resolution()).mean_center_distance;
            break;
    }
    return apply_transform(v, s.transform, s.power);
}

Region cell_region(const Partition& p, int cell, int resolution) {
    const Cell& c = p[cell];
    auto px = [&](int e) { return int(std::lround(double(e) * resolution / p.n_el())); };
    return {px(c.x0), px(c.y0), px(c.x1), px(c.y1)};
}

FeatureMatrix assemble_feature_matrix(const Microstructure& m, const Partition& p, const FeatureRegistry& reg) {
    validate_registry(reg);
    const int nc = p.size();
    FeatureMatrix fm;
    fm.values.resize(nc, Eigen::Index(reg.size()));
    for (const auto& s : reg) fm.columns.push_back(s.id);
    const Region full = Region::full(m.pixels);
    for (std::size_t k = 0; k < reg.size(); ++k) {
        const FeatureSpec& s = reg[k];
        if (s.scope == FeatureScope::global) {
            fm.values.col(Eigen::Index(k)).setConstant(evaluate_feature(s, m, full));
        } else {
            for (int c = 0; c < nc; ++c)
                fm.values(c, Eigen::Index(k)) = evaluate_feature(s, m, cell_region(p, c, m.pixels.resolution()));
        }
    }
    for (Eigen::Index c = 0; c < fm.values.rows(); ++c)
        for (Eigen::Index k = 0; k < fm.values.cols(); ++k) {
            double& v = fm.values(c, k);
            if (!std::isfinite(v)) {
                fm.flags.push_back("non-finite value in '" + reg[k].id + "' clamped");
                v = std::isnan(v) ? 0.0 : std::copysign(1e12, v);
            }
        }
    for (const auto& f : fm.flags) log::debug("features: " + f);
    return fm;
}

std::vector<FeatureMatrix> assemble_feature_matrices(const std::vector<Microstructure>& ms, const Partition& p,
                                                     const FeatureRegistry& reg, int parallelism) {
    std::vector<FeatureMatrix> out(ms.size());
    parallel_for(int(ms.size()), parallelism, [&](int n) { out[n] = assemble_feature_matrix(ms[n], p, reg); });
    return out;
}

}  // namespace dgrain
