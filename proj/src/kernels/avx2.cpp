#include "dcmmc/kernels/kernels.hpp"

#include <cmath>

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define DCMMC_HAVE_AVX2_BUILD 1
#else
#define DCMMC_HAVE_AVX2_BUILD 0
#endif

namespace dcmmc::kernels::avx2 {

#if DCMMC_HAVE_AVX2_BUILD

void compare_carriers(double cycles, double level, const double* phase_frac,
                      const double* displacement, std::uint8_t* out, std::size_t n) {
    const __m256d vcycles = _mm256_set1_pd(cycles);
    const __m256d vlevel = _mm256_set1_pd(level);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d sign = _mm256_set1_pd(-0.0);
    std::size_t j = 0;
    for (; j + 4 <= n; j += 4) {
        const __m256d x = _mm256_add_pd(vcycles, _mm256_loadu_pd(phase_frac + j));
        const __m256d frac = _mm256_sub_pd(x, _mm256_floor_pd(x));
        const __m256d carrier = _mm256_andnot_pd(sign, _mm256_sub_pd(_mm256_mul_pd(two, frac), one));
        const __m256d ref = _mm256_sub_pd(vlevel, _mm256_loadu_pd(displacement + j));
        const int bits = _mm256_movemask_pd(_mm256_cmp_pd(ref, carrier, _CMP_GE_OQ));
        out[j + 0] = static_cast<std::uint8_t>(bits & 1);
        out[j + 1] = static_cast<std::uint8_t>((bits >> 1) & 1);
        out[j + 2] = static_cast<std::uint8_t>((bits >> 2) & 1);
        out[j + 3] = static_cast<std::uint8_t>((bits >> 3) & 1);
    }
    for (; j < n; ++j) {
        const double x = cycles + phase_frac[j];
        const double frac = x - std::floor(x);
        const double carrier = std::abs(2.0 * frac - 1.0);
        out[j] = (level - displacement[j] >= carrier) ? 1 : 0;
    }
}

ComplexSum project_harmonic(const double* x, std::size_t n, std::size_t harmonic,
                            const double* cos_table, const double* sin_table) {
    const std::size_t step = harmonic % n;
    ComplexSum acc;
    std::size_t i = 0;
    if (n >= 8) {
        const int ni = static_cast<int>(n);
        const int s = static_cast<int>(step);
        int k0 = 0;
        int k1 = s;
        int k2 = static_cast<int>((2 * step) % n);
        int k3 = static_cast<int>((3 * step) % n);
        __m128i idx = _mm_setr_epi32(k0, k1, k2, k3);
        const __m128i inc = _mm_set1_epi32(static_cast<int>((4 * step) % n));
        const __m128i vn = _mm_set1_epi32(ni);
        const __m128i vn_minus_1 = _mm_set1_epi32(ni - 1);
        __m256d re = _mm256_setzero_pd();
        __m256d im = _mm256_setzero_pd();
        for (; i + 4 <= n; i += 4) {
            const __m256d xv = _mm256_loadu_pd(x + i);
            const __m256d c = _mm256_i32gather_pd(cos_table, idx, 8);
            const __m256d sn = _mm256_i32gather_pd(sin_table, idx, 8);
            re = _mm256_add_pd(re, _mm256_mul_pd(xv, c));
            im = _mm256_sub_pd(im, _mm256_mul_pd(xv, sn));
            idx = _mm_add_epi32(idx, inc);
            idx = _mm_sub_epi32(idx, _mm_and_si128(_mm_cmpgt_epi32(idx, vn_minus_1), vn));
        }
        alignas(32) double lr[4];
        alignas(32) double li[4];
        _mm256_store_pd(lr, re);
        _mm256_store_pd(li, im);
        acc.re = (lr[0] + lr[1]) + (lr[2] + lr[3]);
        acc.im = (li[0] + li[1]) + (li[2] + li[3]);
    }
    std::size_t k = (i * step) % n;
    for (; i < n; ++i) {
        acc.re += x[i] * cos_table[k];
        acc.im -= x[i] * sin_table[k];
        k += step;
        if (k >= n) k -= n;
    }
    return acc;
}

#else

void compare_carriers(double cycles, double level, const double* phase_frac,
                      const double* displacement, std::uint8_t* out, std::size_t n) {
    scalar::compare_carriers(cycles, level, phase_frac, displacement, out, n);
}

ComplexSum project_harmonic(const double* x, std::size_t n, std::size_t harmonic,
                            const double* cos_table, const double* sin_table) {
    return scalar::project_harmonic(x, n, harmonic, cos_table, sin_table);
}

#endif

}  // namespace dcmmc::kernels::avx2
