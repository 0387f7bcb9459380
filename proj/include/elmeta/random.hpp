#pragma once

#include <cstdint>
#include <random>

namespace elmeta {

/// Reproducible random stream keyed by (seed, replicate, stream). Variates are derived from
/// the raw 64-bit engine output by hand so results do not depend on the standard library's
/// distribution implementations.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::uint64_t replicate, std::uint64_t stream = 0);

    /// Uniform on the open interval (0, 1).
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    /// Chi-square with 4 degrees of freedom: -2 log(U1 U2).
    double chi_square4();
    /// exp(N(1, 1)).
    double lognormal11();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace elmeta
