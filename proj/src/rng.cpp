#include "cliloop/rng.hpp"

#include <cmath>
#include <numbers>

namespace cliloop {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t bound = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next_u64();
    while (x >= bound) x = next_u64();
    return x % n;
}

double Rng::normal() {
    if (has_cached_) {
        has_cached_ = false;
        return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
}

namespace {

constexpr std::uint64_t kFnvOffset = 1469598103934665603ULL;
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;

void hash_bytes(std::uint64_t& h, const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= kFnvPrime;
    }
}

void hash_u64(std::uint64_t& h, std::uint64_t v) {
    unsigned char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<unsigned char>(v >> (8 * i));
    hash_bytes(h, bytes, 8);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
    std::uint64_t h = kFnvOffset;
    hash_u64(h, base);
    hash_bytes(h, tag.data(), tag.size());
    return h;
}

std::uint64_t derive_seed(std::uint64_t base, std::string_view tag, std::uint64_t index) {
    std::uint64_t h = derive_seed(base, tag);
    hash_u64(h, index);
    return h;
}

}  // namespace cliloop
