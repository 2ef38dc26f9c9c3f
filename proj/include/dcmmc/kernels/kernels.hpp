#pragma once

// Data-parallel inner loops with a portable scalar reference and an AVX2
// variant. The active variant is picked once at startup from CPUID; set
// DCMMC_FORCE_SCALAR=1 in the environment to pin the scalar path.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace dcmmc::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa);

/// Variant selected for this process.
Isa active_isa();

/// True if the running CPU can execute the given variant.
bool isa_available(Isa isa);

/// Symmetric triangular carriers on [0, 1] compared against a shared level.
/// For module j the carrier position is frac(cycles + phase_frac[j]) and the
/// carrier value |2 frac - 1|; the module is inserted (out[j] = 1) when
/// level - displacement[j] >= carrier.
void compare_carriers(double cycles, double level, std::span<const double> phase_frac,
                      std::span<const double> displacement, std::span<std::uint8_t> out);
void compare_carriers(Isa isa, double cycles, double level, std::span<const double> phase_frac,
                      std::span<const double> displacement, std::span<std::uint8_t> out);

struct ComplexSum {
    double re = 0.0;
    double im = 0.0;
};

/// One DFT bin of a periodic record: sum_n x[n] * (cos, -sin)(2 pi h n / P)
/// where P = x.size() and the tables hold cos/sin(2 pi k / P), k < P.
ComplexSum project_harmonic(std::span<const double> x, std::size_t harmonic,
                            std::span<const double> cos_table, std::span<const double> sin_table);
ComplexSum project_harmonic(Isa isa, std::span<const double> x, std::size_t harmonic,
                            std::span<const double> cos_table, std::span<const double> sin_table);

namespace scalar {
void compare_carriers(double cycles, double level, const double* phase_frac,
                      const double* displacement, std::uint8_t* out, std::size_t n);
ComplexSum project_harmonic(const double* x, std::size_t n, std::size_t harmonic,
                            const double* cos_table, const double* sin_table);
}  // namespace scalar

namespace avx2 {
void compare_carriers(double cycles, double level, const double* phase_frac,
                      const double* displacement, std::uint8_t* out, std::size_t n);
ComplexSum project_harmonic(const double* x, std::size_t n, std::size_t harmonic,
                            const double* cos_table, const double* sin_table);
}  // namespace avx2

}  // namespace dcmmc::kernels
