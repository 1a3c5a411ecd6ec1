#include "cliloop/digest.hpp"

#include <cstring>

namespace cliloop {

namespace {
constexpr std::uint64_t kFnvPrime = 1099511628211ULL;
}

void Digest::add_byte(unsigned char b) {
    state_ ^= b;
    state_ *= kFnvPrime;
}

void Digest::add_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        state_ ^= static_cast<unsigned char>(v >> (8 * i));
        state_ *= kFnvPrime;
    }
}

void Digest::add(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    add_u64(bits);
}

void Digest::add(const Vector& v) {
    for (double x : v) add(x);
}

void Digest::add(const Matrix& m) {
    add_u64(m.rows());
    add_u64(m.cols());
    for (double x : m.data()) add(x);
}

std::string digest_hex(std::uint64_t digest) {
    static const char* hex = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = hex[digest & 0xF];
        digest >>= 4;
    }
    return out;
}

}  // namespace cliloop
