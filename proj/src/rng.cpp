#include "viewpaint/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "viewpaint/error.hpp"

namespace viewpaint {

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw ContractError("uniform_int: hi < lo");
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(gen_());  // full 64-bit span
    std::uint64_t mask = range - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    std::uint64_t x;
    do {
        x = gen_() & mask;
    } while (x >= range);
    return lo + static_cast<std::int64_t>(x);
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    // u1 in (0,1] so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

std::string Rng::serialize() const {
    std::ostringstream os;
    os << gen_;
    os << ' ' << (has_cached_ ? 1 : 0) << ' ' << std::bit_cast<std::uint64_t>(cached_);
    return os.str();
}

void Rng::deserialize(const std::string& s) {
    std::istringstream is(s);
    std::mt19937_64 gen;
    int cached_flag = 0;
    std::uint64_t bits = 0;
    is >> gen >> cached_flag >> bits;
    if (is.fail()) throw FormatError("Rng::deserialize: malformed state string");
    gen_ = gen;
    has_cached_ = cached_flag != 0;
    cached_ = std::bit_cast<double>(bits);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (index + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace viewpaint
