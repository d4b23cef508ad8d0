#include "afc/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace afc {

std::uint64_t RandomStream::poisson(double mean) {
    if (!(mean >= 0.0))
        throw std::invalid_argument("rng: poisson mean must be non-negative");
    std::uint64_t total = 0;
    // Split large means into chunks; a sum of independent Poissons with the
    // chunk means is distributed exactly as Poisson(mean).
    while (mean > 30.0) {
        constexpr double chunk = 30.0;
        double limit = std::exp(-chunk);
        std::uint64_t k = 0;
        double prod = 1.0;
        do {
            prod *= uniform();
            ++k;
        } while (prod > limit);
        total += k - 1;
        mean -= chunk;
    }
    if (mean > 0.0) {
        double limit = std::exp(-mean);
        std::uint64_t k = 0;
        double prod = 1.0;
        do {
            prod *= uniform();
            ++k;
        } while (prod > limit);
        total += k - 1;
    }
    return total;
}

}  // namespace afc
