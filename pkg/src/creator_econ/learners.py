"""Discretize-then-UCB learners for return-based and feature-based contracts.

Both learners keep one optimistic estimate per (contract index, user,
creator) key.  After a sweep that plays every discretized contract once,
each round picks the contract whose optimistic utility, with the per-user
top-S recommendation, is largest.  The round loop itself lives in
:mod:`creator_econ._kernels`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .economy import (
    EconomyInstance,
    FeatureContract,
    RecommendationPolicy,
    RejectedInput,
    ReturnContract,
    mean_matrix,
)
from .environment import (
    RoundOutcome,
    ball_lattice,
    contents_for_alphas,
    contents_for_thetas,
    index_policy,
    oracle_optimum,
    settle_round,
    trace_from_utilities,
)

RETURN_REFERENCE_FINENESS = 1e-3


@dataclass(frozen=True, eq=False)
class GridSpec:
    epsilon: float
    points: np.ndarray  # (G,) alphas or (G, d) thetas
    kind: str  # "return" | "feature"

    def __len__(self):
        return len(self.points)

    def contract(self, index: int):
        if self.kind == "return":
            return ReturnContract(self.points[index])
        return FeatureContract(self.points[index])


def build_alpha_grid(T: int) -> GridSpec:
    """Uniform grid {0, eps, 2 eps, ...} on [0, 1) with eps = T^(-1/3)."""
    if T < 1:
        raise RejectedInput(f"T must be a positive integer, got {T}")
    eps = T ** (-1.0 / 3.0)
    # guard against 1/eps landing a hair above an integer
    n = max(1, math.ceil(1.0 / eps - 1e-9))
    return GridSpec(eps, np.arange(n) * eps, "return")


def build_feature_covering(d: int, T: int) -> GridSpec:
    """Euclidean eps-net of the unit ball with eps = T^(-1/(d+2)).

    Lattice of spacing eps / sqrt(d) clipped to the ball.  Rounding each
    coordinate of a ball point toward zero lands on a lattice point that is
    still inside the ball and at most eps away, so this is a valid net.
    """
    if d < 1 or T < 1:
        raise RejectedInput("d and T must be positive")
    eps = T ** (-1.0 / (d + 2))
    if eps >= 1.0:
        return GridSpec(eps, np.zeros((1, d)), "feature")
    return GridSpec(eps, ball_lattice(d, eps / math.sqrt(d)), "feature")


class UcbTable:
    """Observation counts and reward sums per (contract index, user, creator)."""

    def __init__(self, n_contracts: int, M: int, K: int, T: int, epsilon: float, delta: float):
        if not (0.0 < delta < 1.0):
            raise RejectedInput(f"delta must lie in (0, 1), got {delta}")
        self.counts = np.zeros((n_contracts, M, K), dtype=np.int64)
        self.sums = np.zeros((n_contracts, M, K))
        self.T, self.epsilon, self.delta, self.M, self.K = T, epsilon, delta, M, K

    @property
    def log_term(self) -> float:
        return math.log(self.M * self.K * self.T / (self.epsilon * self.delta))

    def values(self) -> np.ndarray:
        """Optimistic estimates for every key; unvisited keys read 1."""
        n = self.counts
        safe = np.maximum(n, 1)
        est = self.sums / safe + np.sqrt(2.0 * self.log_term / safe)
        return np.where(n == 0, 1.0, est)

    def copy(self) -> "UcbTable":
        new = UcbTable.__new__(UcbTable)
        new.__dict__.update(self.__dict__)
        new.counts = self.counts.copy()
        new.sums = self.sums.copy()
        return new


def ucb_estimate(table: UcbTable, key: tuple[int, int, int]) -> float:
    n = int(table.counts[key])
    if n == 0:
        return 1.0
    return float(table.sums[key]) / n + math.sqrt(2.0 * table.log_term / n)


def _scores(ucb: np.ndarray, S: int, coef: np.ndarray, pay: np.ndarray):
    # Summation order matches the kernels: users in order, then ranks in order.
    order = np.argsort(-ucb, axis=-1, kind="stable")[..., :S]
    top = np.take_along_axis(ucb, order, axis=-1)
    total = np.zeros(ucb.shape[0])
    for j in range(ucb.shape[1]):
        for s in range(S):
            total = total + top[:, j, s]
    mask = np.zeros(ucb.shape, dtype=bool)
    np.put_along_axis(mask, order, True, axis=-1)
    return coef * total - pay, mask


def select_return(table: UcbTable, grid: GridSpec, contents, S: int):
    """Joint argmax of (1 - alpha) * sum of per-user top-S optimistic rewards.

    Returns ``(index, alpha, policy)``; ties go to the lowest index.
    ``contents`` is accepted for symmetry with the feature learner; the
    return score does not depend on it.
    """
    alphas = np.asarray(grid.points, dtype=float)
    scores, masks = _scores(table.values(), S, 1.0 - alphas, np.zeros(len(alphas)))
    g = int(np.argmax(scores))
    return g, float(alphas[g]), RecommendationPolicy(masks[g], S)


def feature_payments(points: np.ndarray, contents: np.ndarray) -> np.ndarray:
    """Total payment sum_k theta . c_k(theta) for every covering point."""
    return np.einsum("gkd,gd->g", contents, points)


def select_feature(table: UcbTable, covering: GridSpec, contents, S: int):
    """Joint argmax of sum of per-user top-S optimistic rewards minus payments."""
    pts = np.asarray(covering.points, dtype=float)
    pay = feature_payments(pts, np.asarray(contents, dtype=float))
    scores, masks = _scores(table.values(), S, np.ones(len(pts)), pay)
    g = int(np.argmax(scores))
    return g, pts[g].copy(), RecommendationPolicy(masks[g], S)


def update(table: UcbTable, outcome: RoundOutcome, contract_index: int, grid: GridSpec | None = None) -> UcbTable:
    """Fold the observed rewards of one round into ``table`` (in place)."""
    if grid is not None and outcome.contract != grid.contract(contract_index):
        raise RejectedInput(
            f"outcome contract {outcome.contract} does not match grid index {contract_index}"
        )
    if not (0 <= contract_index < table.counts.shape[0]):
        raise RejectedInput(f"contract index {contract_index} out of range")
    mask = outcome.policy.assign
    table.counts[contract_index][mask] += 1
    table.sums[contract_index][mask] += outcome.rewards[mask]
    return table


# -- full runs ---------------------------------------------------------------


@dataclass(eq=False)
class Trajectory:
    """Compact record of a run; :meth:`outcome` rebuilds individual rounds."""

    instance: EconomyInstance
    grid: GridSpec
    contents: np.ndarray  # (G, K, d)
    chosen: np.ndarray  # (T,)
    assign: np.ndarray  # (T, M, K) bool
    rewards: np.ndarray  # (T, M, K), NaN where unobserved
    expected_utility: np.ndarray  # (T,)
    table: UcbTable
    n_explore: int

    def __len__(self):
        return len(self.chosen)

    def outcome(self, t: int) -> RoundOutcome:
        g = int(self.chosen[t])
        contract = self.grid.contract(g)
        policy = RecommendationPolicy(self.assign[t], self.instance.S)
        contents = self.contents[g]
        totals = np.where(self.assign[t], self.rewards[t], 0.0).sum(axis=0)
        if self.grid.kind == "return":
            payments = contract.alpha * totals
        else:
            payments = contents @ contract.theta
        return RoundOutcome(
            contract=contract,
            contents=contents,
            policy=policy,
            rewards=self.rewards[t],
            payments=payments,
            realized_platform_utility=float(np.sum(totals - payments)),
        )

    def __iter__(self):
        return (self.outcome(t) for t in range(len(self)))


def _run_tabular(instance, grid, contents, coef, pay, T, delta, seed, backend):
    G = len(grid)
    if T < G:
        raise RejectedInput(f"T={T} is smaller than the {G}-point discretization; the sweep cannot finish")
    M, K, S = instance.M, instance.K, instance.S
    means = np.ascontiguousarray(mean_matrix(instance.rewards, contents))
    table = UcbTable(G, M, K, T, grid.epsilon, delta)
    rng = np.random.default_rng(seed)

    chosen = np.empty(T, dtype=np.int64)
    assign = np.empty((T, M, K), dtype=np.uint8)
    rewards = np.empty((T, M, K))
    utils = np.empty(T)

    sweep_policy = index_policy(M, K, S)
    for t in range(G):
        outcome = settle_round(instance, grid.contract(t), contents[t], sweep_policy, rng.random((M, K)))
        update(table, outcome, t)
        chosen[t] = t
        assign[t] = sweep_policy.assign
        rewards[t] = outcome.rewards
        utils[t] = coef[t] * float(np.sum(means[t] * sweep_policy.assign)) - pay[t]

    kernel = {None: _kernels.ucb_phase, "python": _kernels.python_ucb_phase,
              "cython": _kernels.compiled_ucb_phase}[backend]
    if kernel is None:
        raise RejectedInput("compiled kernel requested but not built")
    uniforms = rng.random((T - G, M, K))
    kernel(
        means, np.ascontiguousarray(coef, dtype=float), np.ascontiguousarray(pay, dtype=float),
        int(S), uniforms, table.counts, table.sums, table.log_term,
        bool(instance.rewards.bernoulli), chosen[G:], assign[G:], rewards[G:], utils[G:],
    )
    return Trajectory(instance, grid, contents, chosen, assign.astype(bool), rewards, utils, table, G)


def reference_feature_fineness(d: int) -> float:
    """Per-coordinate spacing of the feature reference lattice (<= ~2e5 points)."""
    if d <= 2:
        return 1e-2
    return max(1e-2, 2.0 / (2e5 ** (1.0 / d)))


def run_alg1(instance: EconomyInstance, T: int, delta: float = 0.05, seed: int = 0,
             backend: str | None = None, reference_fineness: float = RETURN_REFERENCE_FINENESS):
    """Return-based contract learner.  Returns ``(trajectory, regret_trace)``."""
    grid = build_alpha_grid(T)
    contents = contents_for_alphas(instance, grid.points)
    traj = _run_tabular(instance, grid, contents, 1.0 - grid.points, np.zeros(len(grid)),
                        T, delta, seed, backend)
    oracle = oracle_optimum(instance, "return", reference_fineness, points=grid.points)
    return traj, trace_from_utilities(traj.expected_utility, oracle.value)


def run_alg2(instance: EconomyInstance, T: int, delta: float = 0.05, seed: int = 0,
             backend: str | None = None, reference_fineness: float | None = None):
    """Feature-based (linear) contract learner.  Returns ``(trajectory, regret_trace)``."""
    grid = build_feature_covering(instance.d, T)
    contents = contents_for_thetas(instance, grid.points)
    pay = feature_payments(grid.points, contents)
    traj = _run_tabular(instance, grid, contents, np.ones(len(grid)), pay, T, delta, seed, backend)
    fine = reference_fineness or reference_feature_fineness(instance.d)
    oracle = oracle_optimum(instance, "feature", fine, points=grid.points)
    return traj, trace_from_utilities(traj.expected_utility, oracle.value)


def optimism_violations(traj: Trajectory) -> tuple[int, int]:
    """Count (round, visited key) pairs whose optimistic estimate is below the true mean.

    The state after round t's update is charged to round t.  Returns
    ``(violations, total_pairs)``.
    """
    means = mean_matrix(traj.instance.rewards, traj.contents)
    T = len(traj)
    log2 = 2.0 * traj.table.log_term
    violations = total = 0
    G, M, K = means.shape
    for g in range(G):
        rounds_g = np.nonzero(traj.chosen == g)[0]
        if rounds_g.size == 0:
            continue
        for j in range(M):
            for k in range(K):
                hit = traj.assign[rounds_g, j, k]
                t_upd = rounds_g[hit]
                if t_upd.size == 0:
                    continue
                r = traj.rewards[t_upd, j, k]
                n = np.arange(1, t_upd.size + 1)
                ucb = np.cumsum(r) / n + np.sqrt(log2 / n)
                lasts = np.append(t_upd[1:], T) - t_upd  # rounds each state persists
                bad = ucb < means[g, j, k]
                violations += int(np.sum(lasts[bad]))
                total += int(T - t_upd[0])
    return violations, total
