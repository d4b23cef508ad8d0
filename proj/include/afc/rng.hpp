// rng.hpp - deterministic random streams and count sampling
//
// All stochastic code in the library draws from streams created here so a
// master seed reproduces every result bit for bit.  The Poisson sampler is
// hand-rolled on top of the standardized mt19937_64 output; the std::
// distributions are implementation-defined and would break cross-toolchain
// reproducibility.
#pragma once

#include <cstdint>
#include <random>

namespace afc {

// Mixes a salt into a master seed; used to give each scan point / trial block
// an independent stream.  splitmix64 finalizer, good avalanche behaviour.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t salt) {
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) : gen_(seed) {}

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Exact Poisson sample for any mean >= 0.  Knuth multiplication on
    // chunks of mean <= 30 so the running product never underflows.
    std::uint64_t poisson(double mean);

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
};

}  // namespace afc
