#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "dgrain/types.hpp"

namespace dgrain {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over raw bytes.
std::uint64_t hash_bytes(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t hash_string(std::string_view s);

/// Counter-based seed splitting: a child seed is a pure function of the parent
/// seed and the key path, so streams never depend on the order of draws.
class SeedSeq {
public:
    explicit SeedSeq(std::uint64_t root = 0) : state_(mix64(root)) {}

    SeedSeq child(std::uint64_t key) const {
        SeedSeq s;
        s.state_ = mix64(state_ ^ mix64(key + 0x632be59bd9b4e019ULL));
        return s;
    }
    SeedSeq child(std::string_view key) const { return child(hash_string(key)); }

    std::uint64_t value() const { return state_; }
    Rng rng() const { return Rng(state_); }

private:
    std::uint64_t state_ = 0;
};

inline VectorXd standard_normal(Rng& rng, Eigen::Index n) {
    std::normal_distribution<double> nd(0.0, 1.0);
    VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z[i] = nd(rng);
    return z;
}

/// Gamma draw with shape/rate parametrization.
inline double gamma_rate(Rng& rng, double shape, double rate) {
    std::gamma_distribution<double> g(shape, 1.0 / rate);
    return g(rng);
}

}  // namespace dgrain
