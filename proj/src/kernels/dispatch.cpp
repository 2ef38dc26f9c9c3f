#include "dcmmc/kernels/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace dcmmc::kernels {

namespace {

bool cpu_has_avx2() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Isa detect() {
    const char* force = std::getenv("DCMMC_FORCE_SCALAR");
    if (force != nullptr && std::strcmp(force, "0") != 0 && force[0] != '\0') return Isa::Scalar;
    return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw std::invalid_argument(what);
}

}  // namespace

std::string_view isa_name(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

Isa active_isa() {
    static const Isa isa = detect();
    return isa;
}

bool isa_available(Isa isa) {
    return isa == Isa::Scalar || cpu_has_avx2();
}

void compare_carriers(Isa isa, double cycles, double level, std::span<const double> phase_frac,
                      std::span<const double> displacement, std::span<std::uint8_t> out) {
    require_same_size(phase_frac.size(), displacement.size(), "compare_carriers: size mismatch");
    require_same_size(phase_frac.size(), out.size(), "compare_carriers: size mismatch");
    if (isa == Isa::Avx2 && isa_available(Isa::Avx2)) {
        avx2::compare_carriers(cycles, level, phase_frac.data(), displacement.data(), out.data(),
                               out.size());
    } else {
        scalar::compare_carriers(cycles, level, phase_frac.data(), displacement.data(), out.data(),
                                 out.size());
    }
}

void compare_carriers(double cycles, double level, std::span<const double> phase_frac,
                      std::span<const double> displacement, std::span<std::uint8_t> out) {
    compare_carriers(active_isa(), cycles, level, phase_frac, displacement, out);
}

ComplexSum project_harmonic(Isa isa, std::span<const double> x, std::size_t harmonic,
                            std::span<const double> cos_table, std::span<const double> sin_table) {
    require_same_size(x.size(), cos_table.size(), "project_harmonic: table size mismatch");
    require_same_size(x.size(), sin_table.size(), "project_harmonic: table size mismatch");
    if (x.empty()) return {};
    if (isa == Isa::Avx2 && isa_available(Isa::Avx2)) {
        return avx2::project_harmonic(x.data(), x.size(), harmonic, cos_table.data(),
                                      sin_table.data());
    }
    return scalar::project_harmonic(x.data(), x.size(), harmonic, cos_table.data(),
                                    sin_table.data());
}

ComplexSum project_harmonic(std::span<const double> x, std::size_t harmonic,
                            std::span<const double> cos_table, std::span<const double> sin_table) {
    return project_harmonic(active_isa(), x, harmonic, cos_table, sin_table);
}

}  // namespace dcmmc::kernels
