#include "dgrain/random.hpp"

namespace dgrain {

std::uint64_t hash_bytes(const void* data, std::size_t n, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t hash_string(std::string_view s) { return hash_bytes(s.data(), s.size()); }

}  // namespace dgrain
