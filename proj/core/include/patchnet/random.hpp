#pragma once

#include <cstdint>
#include <random>

namespace patchnet {

// Every random draw in the library goes through this type so that streams are
// reproducible across standard libraries:
//   * engine: std::mt19937_64 (bit-exact by the standard);
//   * stream k of master seed s is seeded with std::seed_seq{lo(s), hi(s),
//     lo(k), hi(k), tag}, so streams do not depend on generation order;
//   * uniform doubles take the top 53 bits: (x >> 11) * 2^-53 in [0, 1);
//   * integers in [lo, hi] use rejection sampling on the raw 64-bit output.
class Rng {
public:
    explicit Rng(std::uint64_t seed);
    static Rng stream(std::uint64_t master, std::uint64_t index, std::uint32_t tag = 0);

    std::uint64_t next() { return engine_(); }
    double uniform();                        // [0, 1)
    double uniform(double lo, double hi);    // [lo, hi)
    std::int64_t integer(std::int64_t lo, std::int64_t hi);  // inclusive
    std::mt19937_64& engine() { return engine_; }

private:
    explicit Rng(std::mt19937_64 engine) : engine_(std::move(engine)) {}
    std::mt19937_64 engine_;
};

}  // namespace patchnet
