"""Reference implementation of the UCB phase loop.

Mirrors ``_ucb.pyx`` operation for operation (same selection order, same
summation order) so the two backends agree bit for bit.
"""
import math

import numpy as np


def _arm_score(counts, sums, g, M, K, S, coef, pay, log2):
    total = 0.0
    for j in range(M):
        vals = []
        for k in range(K):
            n = counts[g, j, k]
            vals.append(1.0 if n == 0 else sums[g, j, k] / n + math.sqrt(log2 / n))
        taken = [False] * K
        for _ in range(S):
            best = -1
            for k in range(K):
                if not taken[k] and (best < 0 or vals[k] > vals[best]):
                    best = k
            taken[best] = True
            total += vals[best]
    return coef[g] * total - pay[g]


def ucb_phase(means, coef, pay, S, uniforms, counts, sums, log_term, bernoulli,
              chosen, assign, rewards, exp_util):
    """Run ``len(uniforms)`` optimistic rounds, mutating ``counts``/``sums`` in place.

    Outputs are written into ``chosen`` (arm index), ``assign`` (0/1 policy),
    ``rewards`` (observed reward, NaN when not recommended) and ``exp_util``
    (exact expected utility of the played pair).
    """
    G, M, K = means.shape
    n_rounds = uniforms.shape[0]
    log2 = 2.0 * log_term
    score = np.empty(G)
    for g in range(G):
        score[g] = _arm_score(counts, sums, g, M, K, S, coef, pay, log2)
    for t in range(n_rounds):
        g = 0
        for h in range(1, G):
            if score[h] > score[g]:
                g = h
        chosen[t] = g
        acc = 0.0
        for j in range(M):
            vals = []
            for k in range(K):
                n = counts[g, j, k]
                vals.append(1.0 if n == 0 else sums[g, j, k] / n + math.sqrt(log2 / n))
            taken = [False] * K
            for _ in range(S):
                best = -1
                for k in range(K):
                    if not taken[k] and (best < 0 or vals[k] > vals[best]):
                        best = k
                taken[best] = True
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
                    rewards[t, j, k] = math.nan
        exp_util[t] = coef[g] * acc - pay[g]
        score[g] = _arm_score(counts, sums, g, M, K, S, coef, pay, log2)
