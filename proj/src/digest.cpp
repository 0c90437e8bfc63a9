#include "gatgan/digest.hpp"

namespace gatgan {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < bytes; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t param_digest(const ParamList& params) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : params) {
        const auto v = p.tensor.values();
        h = fnv1a(v.data(), v.size() * sizeof(double), h);
    }
    return h;
}

}  // namespace gatgan
