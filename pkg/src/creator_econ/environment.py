"""Round execution, exact expected utilities, oracle optima and regret traces."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .economy import (
    BALL_TOL,
    ContractSpec,
    EconomyInstance,
    FeatureContract,
    RecommendationPolicy,
    RejectedInput,
    ResponseMode,
    ReturnContract,
    contract_payment,
    generate_content,
    mean_matrix,
    project_to_ball,
    quadratic_response,
    validate_policy,
)

TRACE_HEADER = ("round", "expected_utility", "cumulative_regret")


# -- contents ----------------------------------------------------------------


def realize_contents(instance: EconomyInstance, contract: ContractSpec) -> np.ndarray:
    """(K, d) contents produced by every creator under ``contract``.

    Quadratic creators facing a return share respond to the aggregate reward
    ``alpha * sum_j u_j``, which is only defined under full recommendation.
    """
    rows = []
    for creator in instance.creators:
        if creator.mode is ResponseMode.QUADRATIC and isinstance(contract, ReturnContract):
            if not instance.full_recommendation:
                raise RejectedInput(
                    "return contracts with QuadraticBestResponse creators require S == K"
                )
            rows.append(quadratic_response(creator, contract.alpha * instance.aggregate_user))
        else:
            rows.append(generate_content(creator, contract))
    return np.vstack(rows)


def contents_for_alphas(instance: EconomyInstance, alphas) -> np.ndarray:
    """Vectorized :func:`realize_contents` over return shares; shape (G, K, d)."""
    alphas = np.asarray(alphas, dtype=float).reshape(-1, 1)
    out = np.empty((alphas.shape[0], instance.K, instance.d))
    for k, creator in enumerate(instance.creators):
        if creator.mode is ResponseMode.SMOOTH:
            out[:, k] = (1.0 - alphas) * creator.anchor_a + alphas * creator.anchor_b
        else:
            if not instance.full_recommendation:
                raise RejectedInput(
                    "return contracts with QuadraticBestResponse creators require S == K"
                )
            grad = alphas * instance.aggregate_user
            out[:, k] = project_to_ball(creator.cost_center + creator.cost_scale * grad)
    return out


def contents_for_thetas(instance: EconomyInstance, thetas) -> np.ndarray:
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    out = np.empty((thetas.shape[0], instance.K, instance.d))
    for k, creator in enumerate(instance.creators):
        if creator.mode is not ResponseMode.QUADRATIC:
            raise RejectedInput("SmoothInterpolation creators only accept return contracts")
        out[:, k] = project_to_ball(creator.cost_center + creator.cost_scale * thetas)
    return out


# -- policies ----------------------------------------------------------------


def top_s_mask(values: np.ndarray, S: int) -> np.ndarray:
    """Boolean mask of the ``S`` largest entries along the last axis, lowest index on ties."""
    order = np.argsort(-values, axis=-1, kind="stable")[..., :S]
    mask = np.zeros(values.shape, dtype=bool)
    np.put_along_axis(mask, order, True, axis=-1)
    return mask


def index_policy(M: int, K: int, S: int) -> RecommendationPolicy:
    """Every user gets the first ``S`` creators by index."""
    assign = np.zeros((M, K), dtype=bool)
    assign[:, :S] = True
    return RecommendationPolicy(assign, S)


def optimal_policy_for_contract(instance: EconomyInstance, contract: ContractSpec) -> RecommendationPolicy:
    """Per-user top-S by mean reward.  Optimal because utility separates over (j, k)."""
    means = mean_matrix(instance.rewards, realize_contents(instance, contract))
    return RecommendationPolicy(top_s_mask(means, instance.S), instance.S)


def _check_policy(instance: EconomyInstance, policy: RecommendationPolicy) -> None:
    if policy.assign.shape != (instance.M, instance.K):
        raise RejectedInput(
            f"policy shape {policy.assign.shape} != (M, K) = {(instance.M, instance.K)}"
        )
    if policy.S != instance.S or not validate_policy(policy):
        raise RejectedInput("invalid recommendation policy: every row must sum to S")


# -- one round ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RoundOutcome:
    contract: ContractSpec
    contents: np.ndarray  # (K, d)
    policy: RecommendationPolicy
    rewards: np.ndarray  # (M, K), NaN where not recommended
    payments: np.ndarray  # (K,)
    realized_platform_utility: float

    @property
    def observed_rewards(self) -> dict:
        jj, kk = np.nonzero(self.policy.assign)
        return {(int(j), int(k)): float(self.rewards[j, k]) for j, k in zip(jj, kk)}

    def __eq__(self, other):
        if not isinstance(other, RoundOutcome):
            return NotImplemented
        return (
            self.contract == other.contract
            and self.policy == other.policy
            and np.array_equal(self.contents, other.contents)
            and np.array_equal(self.rewards, other.rewards, equal_nan=True)
            and np.array_equal(self.payments, other.payments)
            and self.realized_platform_utility == other.realized_platform_utility
        )


def settle_round(
    instance: EconomyInstance,
    contract: ContractSpec,
    contents: np.ndarray,
    policy: RecommendationPolicy,
    uniforms: np.ndarray,
) -> RoundOutcome:
    """Resolve one round given the (M, K) uniform draws backing the rewards."""
    means = mean_matrix(instance.rewards, contents)
    if instance.rewards.bernoulli:
        draws = (uniforms < means).astype(float)
    else:
        draws = means.copy()
    rewards = np.where(policy.assign, draws, np.nan)
    totals = np.where(policy.assign, draws, 0.0).sum(axis=0)
    payments = np.array(
        [contract_payment(contract, contents[k], totals[k]) for k in range(instance.K)]
    )
    return RoundOutcome(
        contract=contract,
        contents=contents,
        policy=policy,
        rewards=rewards,
        payments=payments,
        realized_platform_utility=float(np.sum(totals - payments)),
    )


def run_round(
    instance: EconomyInstance,
    contract: ContractSpec,
    policy: RecommendationPolicy,
    rng: np.random.Generator,
) -> RoundOutcome:
    """Play one round: creators respond, the platform recommends, users reward.

    Consumes exactly one ``rng.random((M, K))`` draw so that a run is a
    deterministic function of its seed.
    """
    _check_policy(instance, policy)
    contents = realize_contents(instance, contract)
    uniforms = rng.random((instance.M, instance.K))
    return settle_round(instance, contract, contents, policy, uniforms)


# -- exact expectations ------------------------------------------------------


def expected_utility_return(instance: EconomyInstance, alpha: float, policy: RecommendationPolicy) -> float:
    contract = ReturnContract(alpha)
    _check_policy(instance, policy)
    means = mean_matrix(instance.rewards, realize_contents(instance, contract))
    return (1.0 - contract.alpha) * float(np.sum(means * policy.assign))


def expected_utility_feature(instance: EconomyInstance, theta, policy: RecommendationPolicy) -> float:
    contract = FeatureContract(theta)
    _check_policy(instance, policy)
    contents = realize_contents(instance, contract)
    means = mean_matrix(instance.rewards, contents)
    return float(np.sum(means * policy.assign)) - float(np.sum(contents @ contract.theta))


def expected_utility(instance: EconomyInstance, contract: ContractSpec, policy: RecommendationPolicy) -> float:
    if isinstance(contract, ReturnContract):
        return expected_utility_return(instance, contract.alpha, policy)
    return expected_utility_feature(instance, contract.theta, policy)


# -- oracle ------------------------------------------------------------------


def alpha_reference_grid(fineness: float) -> np.ndarray:
    n = int(math.floor(1.0 / fineness + 1e-9))
    pts = np.arange(n + 1) * fineness
    pts[pts > 1.0] = 1.0
    return np.unique(np.append(pts, 1.0))


def ball_lattice(d: int, spacing: float) -> np.ndarray:
    """All points of the cubic lattice ``spacing * Z^d`` inside the unit ball."""
    n = int(math.floor(1.0 / spacing + 1e-9))
    ticks = np.arange(-n, n + 1) * spacing
    if d == 1:
        pts = ticks.reshape(-1, 1)
    else:
        pts = np.array(list(itertools.product(ticks, repeat=d)))
    norms = np.linalg.norm(pts, axis=1)
    pts = pts[norms <= 1.0 + BALL_TOL]
    return project_to_ball(pts)


def utilities_for_alphas(instance: EconomyInstance, alphas) -> tuple[np.ndarray, np.ndarray]:
    """Best-policy utility for every alpha and the matching (G, M, K) policy masks."""
    alphas = np.asarray(alphas, dtype=float)
    means = mean_matrix(instance.rewards, contents_for_alphas(instance, alphas))
    mask = top_s_mask(means, instance.S)
    return (1.0 - alphas) * np.sum(means * mask, axis=(1, 2)), mask


def utilities_for_thetas(instance: EconomyInstance, thetas) -> tuple[np.ndarray, np.ndarray]:
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    contents = contents_for_thetas(instance, thetas)
    means = mean_matrix(instance.rewards, contents)
    mask = top_s_mask(means, instance.S)
    pay = np.einsum("gkd,gd->g", contents, thetas)
    return np.sum(means * mask, axis=(1, 2)) - pay, mask


@dataclass(frozen=True, eq=False)
class OracleResult:
    contract: ContractSpec
    policy: RecommendationPolicy
    value: float

    def __iter__(self):
        return iter((self.contract, self.policy, self.value))


def oracle_optimum(
    instance: EconomyInstance,
    contract_family: str,
    fineness: float | None = None,
    points=None,
) -> OracleResult:
    """Brute-force the best (contract, policy) pair over a finite contract family.

    ``contract_family`` is ``"return"`` (uniform alpha grid of spacing
    ``fineness`` on [0, 1]) or ``"feature"`` (lattice of spacing ``fineness``
    per coordinate inside the ball).  Explicit ``points`` are evaluated in
    addition to, or instead of, the reference grid.
    """
    if contract_family not in ("return", "feature"):
        raise RejectedInput(f"unknown contract family {contract_family!r}")
    cand = []
    if fineness is not None:
        if not fineness > 0:
            raise RejectedInput("fineness must be positive")
        if contract_family == "return":
            cand.append(alpha_reference_grid(fineness))
        else:
            cand.append(ball_lattice(instance.d, fineness))
    if points is not None:
        pts = np.asarray(points, dtype=float)
        if contract_family == "feature":
            pts = pts.reshape(-1, instance.d)
        cand.append(pts.reshape(-1) if contract_family == "return" else pts)
    cand = [c for c in cand if len(c)]
    if not cand:
        raise RejectedInput("empty contract family")
    if contract_family == "return":
        alphas = np.concatenate(cand)
        values, masks = utilities_for_alphas(instance, alphas)
        best = int(np.argmax(values))
        contract = ReturnContract(alphas[best])
    else:
        thetas = np.vstack(cand)
        values, masks = utilities_for_thetas(instance, thetas)
        best = int(np.argmax(values))
        contract = FeatureContract(thetas[best])
    return OracleResult(contract, RecommendationPolicy(masks[best], instance.S), float(values[best]))


# -- regret ------------------------------------------------------------------


def checkpoints(T: int) -> list[int]:
    step = max(1, math.ceil(T / 10))
    pts = list(range(step, T + 1, step))
    if not pts or pts[-1] != T:
        pts.append(T)
    return pts


@dataclass(frozen=True, eq=False)
class RegretTrace:
    per_round_expected_utility: np.ndarray
    oracle_value: float
    cumulative_regret_at: dict = field(default_factory=dict)

    @property
    def T(self) -> int:
        return len(self.per_round_expected_utility)

    def cumulative_regret(self) -> np.ndarray:
        # summing per-round gaps keeps the curve exactly flat on oracle rounds
        return np.cumsum(self.oracle_value - self.per_round_expected_utility)

    @property
    def final_regret(self) -> float:
        return float(self.cumulative_regret()[-1])

    def to_csv(self, path) -> None:
        cum = self.cumulative_regret()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for t, (u, r) in enumerate(zip(self.per_round_expected_utility, cum), start=1):
                w.writerow((t, repr(float(u)), repr(float(r))))


def trace_from_utilities(utilities, oracle_value: float) -> RegretTrace:
    u = np.asarray(utilities, dtype=float)
    cum = np.cumsum(float(oracle_value) - u)
    at = {t: float(cum[t - 1]) for t in checkpoints(len(u))} if len(u) else {}
    return RegretTrace(u, float(oracle_value), at)


def build_regret_trace(
    per_round_contracts_and_policies: Iterable[tuple[ContractSpec, RecommendationPolicy]],
    instance: EconomyInstance,
    oracle_value: float,
) -> RegretTrace:
    """Regret trace from exact expected utilities of the played (contract, policy) pairs."""
    utils = [expected_utility(instance, c, p) for c, p in per_round_contracts_and_policies]
    return trace_from_utilities(utils, oracle_value)


def read_trace_csv(path) -> np.ndarray:
    """Load a trace CSV as an (T, 3) float array."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if tuple(rows[0]) != TRACE_HEADER:
        raise RejectedInput(f"{path}: unexpected trace header {rows[0]}")
    return np.array(rows[1:], dtype=float)
