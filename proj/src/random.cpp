#include "elmeta/random.hpp"

#include <cmath>
#include <numbers>

namespace elmeta {

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate),
                      static_cast<std::uint32_t>(replicate >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    engine_.seed(seq);
}

double RandomStream::uniform() {
    // 53 random bits, offset by half an ulp so that neither 0 nor 1 can occur.
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RandomStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double angle = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
}

double RandomStream::chi_square4() { return -2.0 * std::log(uniform() * uniform()); }

double RandomStream::lognormal11() { return std::exp(1.0 + normal()); }

}  // namespace elmeta
