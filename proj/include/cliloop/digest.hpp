#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cliloop/matrix.hpp"

namespace cliloop {

// FNV-1a content hash over little-endian value bytes. Used to verify
// bitwise equality of parameter sets without keeping full copies around.
class Digest {
public:
    void add(double v);
    void add_u64(std::uint64_t v);
    void add_byte(unsigned char b);
    void add(const Vector& v);
    void add(const Matrix& m);
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = 1469598103934665603ULL;
};

std::string digest_hex(std::uint64_t digest);

}  // namespace cliloop
