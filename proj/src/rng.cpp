#include "gatgan/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "gatgan/errors.hpp"

namespace gatgan {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u clamped away from 0 so log stays finite.
    double u = uniform();
    if (u < 0x1.0p-53) u = 0x1.0p-53;
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double a = 2.0 * std::numbers::pi * v;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw ContractError("Rng::below requires n > 0");
    const std::uint64_t rem = std::uint64_t(-n) % n;  // 2^64 mod n
    for (;;) {
        std::uint64_t x = engine_();
        if (x >= rem) return x % n;
    }
}

Rng Rng::stream(std::uint64_t tag) const {
    return Rng(mix64(seed_ ^ mix64(tag)));
}

std::string Rng::state() const {
    std::ostringstream os;
    os << seed_ << ' ' << (has_spare_ ? 1 : 0) << ' '
       << std::bit_cast<std::uint64_t>(spare_) << ' ' << engine_;
    return os.str();
}

void Rng::set_state(const std::string& s) {
    std::istringstream is(s);
    int spare_flag = 0;
    std::uint64_t spare_bits = 0;
    is >> seed_ >> spare_flag >> spare_bits >> engine_;
    if (!is) throw ParseError("malformed rng state string");
    has_spare_ = spare_flag != 0;
    spare_ = std::bit_cast<double>(spare_bits);
}

}  // namespace gatgan
