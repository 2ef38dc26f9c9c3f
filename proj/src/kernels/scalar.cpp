#include "dcmmc/kernels/kernels.hpp"

#include <cmath>

namespace dcmmc::kernels::scalar {

void compare_carriers(double cycles, double level, const double* phase_frac,
                      const double* displacement, std::uint8_t* out, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        const double x = cycles + phase_frac[j];
        const double frac = x - std::floor(x);
        const double carrier = std::abs(2.0 * frac - 1.0);
        out[j] = (level - displacement[j] >= carrier) ? 1 : 0;
    }
}

ComplexSum project_harmonic(const double* x, std::size_t n, std::size_t harmonic,
                            const double* cos_table, const double* sin_table) {
    ComplexSum acc;
    const std::size_t step = harmonic % n;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        acc.re += x[i] * cos_table[k];
        acc.im -= x[i] * sin_table[k];
        k += step;
        if (k >= n) k -= n;
    }
    return acc;
}

}  // namespace dcmmc::kernels::scalar
