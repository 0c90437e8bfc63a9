#pragma once

#include <cstddef>
#include <cstdint>

#include "gatgan/layers.hpp"

namespace gatgan {

// FNV-1a over raw bytes; used for checkpoint integrity and the phase
// isolation assertions in tests.
std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed = 1469598103934665603ULL);

// Digest over every tensor's value bytes in listing order.
std::uint64_t param_digest(const ParamList& params);

}  // namespace gatgan
