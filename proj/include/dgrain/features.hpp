#pragma once

#include <string>
#include <vector>

#include "dgrain/microgen.hpp"
#include "dgrain/types.hpp"

namespace dgrain {

class Partition;

/// Half-open pixel rectangle [i0, i1) x [j0, j1).
struct Region {
    int i0 = 0, j0 = 0, i1 = 0, j1 = 0;

    static Region full(const PixelGrid& g) { return {0, 0, g.resolution(), g.resolution()}; }
    int width() const { return i1 - i0; }
    int height() const { return j1 - j0; }
    long area() const { return long(width()) * height(); }
};

enum class Phase { pore = 0, solid = 1 };
enum class Metric { euclidean, chessboard, cityblock };
enum class EffectiveMedium { maxwell, sca };

inline constexpr double kLogClamp = 1e-12;
inline constexpr double kEpsK = 1e-6;

double pore_fraction(const PixelGrid& g, const Region& r);
double phase_fraction(const PixelGrid& g, const Region& r, Phase phase);
double interface_area(const PixelGrid& g, const Region& r);

/// Segment length in whole pixel spacings: round(d * R), or 0 when d * R < 1.
int segment_pixels(double d, int resolution);

double lineal_path(const PixelGrid& g, const Region& r, Phase phase, double d);
double lineal_path_pixels(const PixelGrid& g, const Region& r, Phase phase, int k);

/// Run lengths (in pixels) of maximal same-phase runs along every row and
/// column of the region. Runs are truncated at the region boundary.
std::vector<int> chord_lengths(const PixelGrid& g, const Region& r, Phase phase);

/// Density of chord length (domain units) in each bin [edges[b], edges[b+1]):
/// count_b / (total chords * bin width). All zero when there are no chords.
VectorXd chord_length_density(const PixelGrid& g, const Region& r, Phase phase,
                              const std::vector<double>& edges);

/// Distance from each pore pixel center to the nearest solid pixel center,
/// in pixels, computed on the region as a standalone image. Solid pixels get 0.
/// With no solid pixel in the region the distance to the region edge is used.
MatrixXd distance_transform(const PixelGrid& g, const Region& r, Metric metric);

struct DistanceStats {
    double mean = 0, variance = 0, max = 0;
};
DistanceStats distance_transform_stats(const PixelGrid& g, const Region& r, Metric metric);

/// Density at distance d (domain units) of the pore-pixel distance to the
/// interface, taken as the Euclidean transform minus half a pixel, using a
/// histogram with one-pixel bins. Returns 0 when the region has no solid.
double pore_size_density(const PixelGrid& g, const Region& r, double d);
/// Void nearest-neighbor density at zero distance, normalized by all pixels.
double void_nearest_neighbor(const PixelGrid& g, const Region& r);

double two_point_correlation(const PixelGrid& g, const Region& r, Phase phase, double d);
double two_point_correlation_pixels(const PixelGrid& g, const Region& r, Phase phase, int k);

double effective_medium(const PixelGrid& g, const Region& r, EffectiveMedium kind);
double effective_medium_from_solid_fraction(double phi_s, EffectiveMedium kind);

struct ExclusionStats {
    int count = 0;
    double mean_sqrt_r = 0, mean_r = 0;
    double mean_center_distance = 0, min_center_distance = 0;
    double mean_edge_distance = 0, min_edge_distance = 0;
};
/// Statistics over the disks whose centers lie in the region (domain units).
/// Pair distances fall back to the region diagonal with fewer than two disks.
ExclusionStats exclusion_statistics(const std::vector<Disk>& disks, const Region& r, int resolution);

// ==========================================================================
// Registry
// ==========================================================================

enum class FeatureScope { global, local };

enum class FeatureKind {
    constant,
    pore_fraction,
    interface_area,
    maxwell,
    sca,
    lineal_path,
    chord_length_density,
    two_point_correlation,
    dt_mean,
    dt_variance,
    dt_max,
    pore_size_density,
    void_nearest_neighbor,
    radius_moment,
    mean_edge_distance,
    min_edge_distance,
    mean_center_distance,
};

enum class TransformKind { identity, log, power, exp };

struct FeatureSpec {
    std::string id;
    FeatureScope scope = FeatureScope::local;
    FeatureKind kind = FeatureKind::constant;
    Phase phase = Phase::pore;
    double d = 0;                    ///< distance parameter, domain units
    double bin_lo = 0, bin_hi = 0;   ///< chord-length bin, domain units
    double moment = 1;               ///< radius moment exponent
    TransformKind transform = TransformKind::identity;
    double power = 1;                ///< exponent for TransformKind::power

    bool needs_disks() const;
};

using FeatureRegistry = std::vector<FeatureSpec>;

FeatureRegistry default_registry();
void validate_registry(const FeatureRegistry& reg);

double apply_transform(double v, TransformKind t, double power);
double evaluate_feature(const FeatureSpec& spec, const Microstructure& m, const Region& r);

struct FeatureMatrix {
    MatrixXd values;                 ///< cells x features
    std::vector<std::string> columns;
    std::vector<std::string> flags;  ///< non-fatal degeneracies encountered
};

/// Pixel region covered by a partition cell.
Region cell_region(const Partition& p, int cell, int resolution);

FeatureMatrix assemble_feature_matrix(const Microstructure& m, const Partition& p,
                                      const FeatureRegistry& reg);

std::vector<FeatureMatrix> assemble_feature_matrices(const std::vector<Microstructure>& ms,
                                                     const Partition& p, const FeatureRegistry& reg,
                                                     int parallelism = 1);

}  // namespace dgrain
