# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled UCB phase loop; see ``_ucb_py`` for the reference semantics."""
from libc.math cimport sqrt, NAN
from libc.stdlib cimport malloc, free


cdef double _arm_score(const long long[:, :, ::1] counts, const double[:, :, ::1] sums,
                       Py_ssize_t g, Py_ssize_t M, Py_ssize_t K, int S,
                       const double[::1] coef, const double[::1] pay, double log2,
                       double* vals, char* taken) noexcept nogil:
    cdef Py_ssize_t j, k, s, best
    cdef long long n
    cdef double total = 0.0
    for j in range(M):
        for k in range(K):
            n = counts[g, j, k]
            if n == 0:
                vals[k] = 1.0
            else:
                vals[k] = sums[g, j, k] / n + sqrt(log2 / n)
            taken[k] = 0
        for s in range(S):
            best = -1
            for k in range(K):
                if not taken[k] and (best < 0 or vals[k] > vals[best]):
                    best = k
            taken[best] = 1
            total += vals[best]
    return coef[g] * total - pay[g]


def ucb_phase(const double[:, :, ::1] means, const double[::1] coef, const double[::1] pay,
              int S, const double[:, :, ::1] uniforms, long long[:, :, ::1] counts,
              double[:, :, ::1] sums, double log_term, bint bernoulli,
              long long[::1] chosen, unsigned char[:, :, ::1] assign,
              double[:, :, ::1] rewards, double[::1] exp_util):
    cdef Py_ssize_t G = means.shape[0], M = means.shape[1], K = means.shape[2]
    cdef Py_ssize_t n_rounds = uniforms.shape[0]
    cdef double log2 = 2.0 * log_term
    cdef Py_ssize_t t, g, h, j, k, s, best
    cdef long long n
    cdef double acc, mu, r
    cdef double* score = <double*> malloc(G * sizeof(double))
    cdef double* vals = <double*> malloc(K * sizeof(double))
    cdef char* taken = <char*> malloc(K * sizeof(char))
    if score == NULL or vals == NULL or taken == NULL:
        free(score); free(vals); free(taken)
        raise MemoryError()
    with nogil:
        for g in range(G):
            score[g] = _arm_score(counts, sums, g, M, K, S, coef, pay, log2, vals, taken)
        for t in range(n_rounds):
            g = 0
            for h in range(1, G):
                if score[h] > score[g]:
                    g = h
            chosen[t] = g
            acc = 0.0
            for j in range(M):
                for k in range(K):
                    n = counts[g, j, k]
                    if n == 0:
                        vals[k] = 1.0
                    else:
                        vals[k] = sums[g, j, k] / n + sqrt(log2 / n)
                    taken[k] = 0
                for s in range(S):
                    best = -1
                    for k in range(K):
                        if not taken[k] and (best < 0 or vals[k] > vals[best]):
                            best = k
                    taken[best] = 1
                    acc += means[g, j, best]
                for k in range(K):
                    if taken[k]:
                        mu = means[g, j, k]
                        if bernoulli:
                            r = 1.0 if uniforms[t, j, k] < mu else 0.0
                        else:
                            r = mu
                        assign[t, j, k] = 1
                        rewards[t, j, k] = r
                        counts[g, j, k] += 1
                        sums[g, j, k] += r
                    else:
                        assign[t, j, k] = 0
                        rewards[t, j, k] = NAN
            exp_util[t] = coef[g] * acc - pay[g]
            score[g] = _arm_score(counts, sums, g, M, K, S, coef, pay, log2, vals, taken)
    free(score); free(vals); free(taken)
