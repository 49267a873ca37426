/* Window scores for up to four consecutive positions.
 *
 * acc[j * nf + f] = bias[f] + sum_k xp[j * d + k] * wt[k * nf + f], with k
 * summed in order for every (j, f), so blocking never changes the result.
 * restrict lets the compiler vectorize the filter loop.
 */
#ifndef DIALOGACT_CONV_BLOCK_H
#define DIALOGACT_CONV_BLOCK_H

#include <stddef.h>

/* an AVX2 clone picked at load time where supported; FMA is left out so
 * every clone rounds identically */
#if defined(__GNUC__) && !defined(__clang__) && defined(__x86_64__) && defined(__linux__)
#define CONV_CLONES __attribute__((target_clones("avx2", "default")))
#else
#define CONV_CLONES
#endif

CONV_CLONES static void conv_score_block(const double *restrict xp, const double *restrict wt,
                                    const double *restrict bias, ptrdiff_t nb, ptrdiff_t d,
                                    ptrdiff_t wd, ptrdiff_t nf, double *restrict acc)
{
    double *restrict a0 = acc;
    double *restrict a1 = acc + nf;
    double *restrict a2 = acc + 2 * nf;
    double *restrict a3 = acc + 3 * nf;
    for (ptrdiff_t f = 0; f < nb * nf; ++f)
        acc[f] = 0.0;
    if (nb == 4) {
        for (ptrdiff_t k = 0; k < wd; ++k) {
            const double *restrict wk = wt + k * nf;
            const double x0 = xp[k], x1 = xp[d + k], x2 = xp[2 * d + k], x3 = xp[3 * d + k];
            for (ptrdiff_t f = 0; f < nf; ++f) {
                a0[f] += x0 * wk[f];
                a1[f] += x1 * wk[f];
                a2[f] += x2 * wk[f];
                a3[f] += x3 * wk[f];
            }
        }
    } else {
        for (ptrdiff_t j = 0; j < nb; ++j) {
            double *restrict aj = acc + j * nf;
            for (ptrdiff_t k = 0; k < wd; ++k) {
                const double *restrict wk = wt + k * nf;
                const double xv = xp[j * d + k];
                for (ptrdiff_t f = 0; f < nf; ++f)
                    aj[f] += xv * wk[f];
            }
        }
    }
    for (ptrdiff_t j = 0; j < nb; ++j)
        for (ptrdiff_t f = 0; f < nf; ++f)
            acc[j * nf + f] += bias[f];
}

#endif
