"""Full recommendation (S = K): best-responding creators and pure contract design.

Every item reaches every user, so the platform only chooses the contract.
Creators pay the quadratic cost ``|c - b_k|^2 / (2 lambda_k)``.  Under a
return share alpha a creator maximizes ``alpha * sum_j u_j . c - cost``;
under a linear feature contract theta it maximizes ``theta . c - cost``.
Both have the closed form ``proj_ball(b_k + lambda_k * gradient)``.

The closed forms assume the clip-free regime, where every relevant dot
product ``u_j . c`` lies in [0, 1] and mean rewards are exactly linear.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .economy import (
    CreatorProfile,
    EconomyInstance,
    RejectedInput,
    ResponseMode,
    mean_matrix,
    project_to_ball,
    quadratic_response,
)
from .environment import (
    RegretTrace,
    alpha_reference_grid,
    trace_from_utilities,
)
from .learners import build_alpha_grid, reference_feature_fineness, run_alg2

CLIP_TOL = 1e-12
CHECK_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class BestResponseProblem:
    creator: CreatorProfile
    users: np.ndarray  # (M, d)

    def __post_init__(self):
        if self.creator.mode is not ResponseMode.QUADRATIC:
            raise RejectedInput("best responses need a QuadraticBestResponse creator")
        object.__setattr__(self, "users", np.atleast_2d(np.asarray(self.users, dtype=float)))

    @property
    def aggregate(self) -> np.ndarray:
        return self.users.sum(axis=0)

    def clip_free(self, content) -> bool:
        dots = self.users @ np.asarray(content, dtype=float)
        return bool(np.all(dots >= -CLIP_TOL) and np.all(dots <= 1.0 + CLIP_TOL))

    def aggregate_reward(self, content) -> float:
        return float(self.aggregate @ np.asarray(content, dtype=float))


def problems(instance: EconomyInstance) -> list[BestResponseProblem]:
    return [BestResponseProblem(c, instance.rewards.users) for c in instance.creators]


def _require_full(instance: EconomyInstance) -> None:
    if not instance.full_recommendation:
        raise RejectedInput(f"full recommendation requires S == K, got S={instance.S}, K={instance.K}")
    if instance.modes != {ResponseMode.QUADRATIC}:
        raise RejectedInput("full recommendation requires QuadraticBestResponse creators")


def best_response_return(problem: BestResponseProblem, alpha: float, check: bool = True) -> np.ndarray:
    if not (0.0 <= alpha <= 1.0):
        raise RejectedInput(f"alpha must lie in [0, 1], got {alpha}")
    c = quadratic_response(problem.creator, alpha * problem.aggregate)
    if check and not problem.clip_free(c):
        raise RejectedInput("clip-free regime violated: the closed-form response is not valid here")
    return c


def best_response_feature(problem: BestResponseProblem, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if np.linalg.norm(theta) > 1.0 + 1e-9:
        raise RejectedInput("theta must lie in the unit ball")
    return quadratic_response(problem.creator, theta)


def utility_return_full(instance: EconomyInstance, alpha: float) -> float:
    _require_full(instance)
    contents = np.vstack([best_response_return(p, alpha, check=False) for p in problems(instance)])
    return (1.0 - alpha) * float(mean_matrix(instance.rewards, contents).sum())


def utility_feature_full(instance: EconomyInstance, theta) -> float:
    _require_full(instance)
    theta = np.asarray(theta, dtype=float)
    contents = np.vstack([best_response_feature(p, theta) for p in problems(instance)])
    return float(mean_matrix(instance.rewards, contents).sum()) - float(np.sum(contents @ theta))


def _utilities_return(instance, alphas):
    alphas = np.asarray(alphas, dtype=float).reshape(-1, 1)
    ubar = instance.aggregate_user
    contents = np.stack(
        [project_to_ball(c.cost_center + c.cost_scale * alphas * ubar) for c in instance.creators],
        axis=1,
    )
    return (1.0 - alphas[:, 0]) * mean_matrix(instance.rewards, contents).sum(axis=(1, 2))


def _utilities_feature(instance, thetas):
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    contents = np.stack(
        [project_to_ball(c.cost_center + c.cost_scale * thetas) for c in instance.creators], axis=1
    )
    pay = np.einsum("gkd,gd->g", contents, thetas)
    return mean_matrix(instance.rewards, contents).sum(axis=(1, 2)) - pay


def embedded_thetas(instance: EconomyInstance, alphas) -> np.ndarray:
    """Reward-proportional feature contracts alpha * sum_j u_j."""
    return np.outer(np.asarray(alphas, dtype=float), instance.aggregate_user)


def check_superset_dominance(instance: EconomyInstance, alpha_grid, theta_grid):
    """Compare the best feature contract on ``theta_grid`` with the best return share.

    ``theta_grid`` must contain the embedded contracts ``alpha * ubar`` for
    every alpha in ``alpha_grid``.  Returns ``(max_u_f, max_u_r, dominates)``.
    """
    _require_full(instance)
    if np.linalg.norm(instance.aggregate_user) > 1.0 + 1e-12:
        raise RejectedInput("embedding needs |sum_j u_j| <= 1 so alpha * ubar stays in the ball")
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    theta_grid = np.atleast_2d(np.asarray(theta_grid, dtype=float))
    for emb in embedded_thetas(instance, alpha_grid):
        if np.min(np.linalg.norm(theta_grid - emb, axis=1)) > 1e-12:
            raise RejectedInput(f"theta_grid lacks the embedded contract {emb}")
    max_f = float(np.max(_utilities_feature(instance, theta_grid)))
    max_r = float(np.max(_utilities_return(instance, alpha_grid)))
    return max_f, max_r, max_f >= max_r - CHECK_TOL


# -- learners ----------------------------------------------------------------


def run_full_return_learner(instance: EconomyInstance, T: int, delta: float = 0.05, seed: int = 0,
                            reference_fineness: float = 1e-3) -> RegretTrace:
    """UCB over the uniform alpha grid using the pooled per-round reward.

    Each play of alpha observes all K*M Bernoulli rewards; their average is
    one bounded sample of ``sum_j sum_k E[R] / (K M)``.
    """
    _require_full(instance)
    grid = build_alpha_grid(T)
    G = len(grid)
    if T < G:
        raise RejectedInput(f"T={T} is smaller than the {G}-point grid")
    alphas = grid.points
    ubar = instance.aggregate_user
    contents = np.stack(
        [project_to_ball(c.cost_center + c.cost_scale * alphas[:, None] * ubar) for c in instance.creators],
        axis=1,
    )
    means = mean_matrix(instance.rewards, contents)  # (G, M, K)
    KM = instance.K * instance.M
    pooled = means.sum(axis=(1, 2)) / KM
    true_util = (1.0 - alphas) * KM * pooled
    log_term = math.log(T / (grid.epsilon * delta))

    rng = np.random.default_rng(seed)
    counts = np.zeros(G)
    sums = np.zeros(G)
    utils = np.empty(T)
    for t in range(T):
        if t < G:
            g = t
        else:
            est = sums / counts + np.sqrt(2.0 * log_term / counts)
            g = int(np.argmax((1.0 - alphas) * est))
        u = rng.random((instance.M, instance.K))
        obs = (u < means[g]).mean() if instance.rewards.bernoulli else pooled[g]
        counts[g] += 1
        sums[g] += obs
        utils[t] = true_util[g]
    ref = alpha_reference_grid(reference_fineness)
    oracle = max(float(np.max(_utilities_return(instance, ref))), float(np.max(true_util)))
    return trace_from_utilities(utils, oracle)


def run_full_feature_learner(instance: EconomyInstance, T: int, delta: float = 0.05, seed: int = 0,
                             d: int | None = None) -> RegretTrace:
    """Tabular UCB over the feature eps-net with best-responding creators."""
    _require_full(instance)
    if d is not None and d != instance.d:
        raise RejectedInput(f"d={d} does not match the instance dimension {instance.d}")
    _, trace = run_alg2(instance, T, delta, seed, reference_fineness=reference_feature_fineness(instance.d))
    return trace


# -- structural checks -------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float

    def line(self) -> str:
        return f"CHECK {self.name} {'pass' if self.passed else 'fail'} margin={self.margin:.6g}"


ResponseFn = Callable[[BestResponseProblem, np.ndarray], np.ndarray]


def _return_response(problem: BestResponseProblem, alpha: float) -> np.ndarray:
    return best_response_return(problem, alpha, check=False)


def monotonicity_margin(instance: EconomyInstance, alpha_samples,
                        response: Callable = _return_response) -> float:
    """Smallest ``ratio(a') - ratio(a)`` over consecutive samples, where
    ``ratio(a) = u_{r,k}(a) / (1 - a)`` is creator k's expected aggregate reward."""
    alphas = np.sort(np.asarray(alpha_samples, dtype=float))
    if alphas.size < 2:
        return math.inf
    if alphas[0] < 0 or alphas[-1] >= 1:
        raise RejectedInput("alpha samples must lie in [0, 1)")
    worst = math.inf
    for p in problems(instance):
        ratios = np.array(
            [mean_matrix(instance.rewards, response(p, a)[None, :]).sum() for a in alphas]
        )
        worst = min(worst, float(np.min(np.diff(ratios))))
    return worst


def monotonicity_check(instance: EconomyInstance, alpha_samples, response: Callable = _return_response) -> bool:
    return monotonicity_margin(instance, alpha_samples, response) >= -CHECK_TOL


def alignment_margin(creator: CreatorProfile, theta_samples, gamma_samples,
                     response: ResponseFn = best_response_feature) -> float:
    """Smallest ``(c*(theta + gamma) - c*(theta)) . gamma`` over the sampled pairs."""
    prob = BestResponseProblem(creator, np.zeros((1, creator.d)))
    thetas = np.atleast_2d(np.asarray(theta_samples, dtype=float))
    gammas = np.atleast_2d(np.asarray(gamma_samples, dtype=float))
    worst = math.inf
    for th, ga in zip(thetas, gammas):
        diff = response(prob, th + ga) - response(prob, th)
        worst = min(worst, float(diff @ ga))
    return worst


def response_alignment_check(creator: CreatorProfile, theta_samples, gamma_samples,
                             response: ResponseFn = best_response_feature) -> bool:
    return alignment_margin(creator, theta_samples, gamma_samples, response) >= -CHECK_TOL


def unconstrained_feature_response(problem: BestResponseProblem, theta) -> np.ndarray:
    """Best response to any gradient vector, inside the ball or not."""
    return quadratic_response(problem.creator, theta)


def creator_feature_utility(problem: BestResponseProblem, theta,
                            response: ResponseFn = unconstrained_feature_response) -> float:
    """Linear per-creator utility ``(sum_j u_j - theta) . c*(theta)``."""
    theta = np.asarray(theta, dtype=float)
    return float((problem.aggregate - theta) @ response(problem, theta))


def continuity_margin(problem: BestResponseProblem, theta, alpha: float, eta,
                      response: ResponseFn = unconstrained_feature_response) -> float:
    """Slack of the bound ``u(theta) - u(theta + gamma) <= 2 (|gamma| + |eta| / alpha)``
    with ``gamma = alpha (ubar - theta) + eta``; negative means violated."""
    theta = np.asarray(theta, dtype=float)
    eta = np.asarray(eta, dtype=float)
    gamma = alpha * (problem.aggregate - theta) + eta
    lhs = creator_feature_utility(problem, theta, response) - creator_feature_utility(
        problem, theta + gamma, response
    )
    rhs = 2.0 * (np.linalg.norm(gamma) + np.linalg.norm(eta) / alpha)
    return float(rhs - lhs)


def flipped_cost_feature(problem: BestResponseProblem, theta) -> np.ndarray:
    """Fault-injection mutant: the cost term enters with the wrong sign."""
    return project_to_ball(problem.creator.cost_center - problem.creator.cost_scale * np.asarray(theta))


def flipped_cost_return(problem: BestResponseProblem, alpha: float) -> np.ndarray:
    return flipped_cost_feature(problem, alpha * problem.aggregate)


# -- random clip-free instances ------------------------------------------------


def random_clip_free_instance(rng: np.random.Generator, d: int = 2, K: int | None = None,
                              M: int | None = None) -> EconomyInstance:
    """Full-recommendation instance with nonnegative users and |sum_j u_j| <= 1.

    Users and cost centers sit in the nonnegative orthant, so every
    reward-proportional response ``proj(b + alpha lambda ubar)`` keeps all
    dot products in [0, 1].
    """
    from .economy import make_instance

    K = K or int(rng.integers(1, 4))
    M = M or int(rng.integers(1, 4))
    dirs = np.abs(rng.normal(size=(M, d)))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    weights = rng.dirichlet(np.ones(M)) * rng.uniform(0.3, 1.0)
    users = dirs * weights[:, None]
    creators = []
    for _ in range(K):
        b = np.abs(rng.normal(size=d))
        b *= rng.uniform(0.0, 0.6) / np.linalg.norm(b)
        creators.append(dict(mode=ResponseMode.QUADRATIC, cost_center=b, cost_scale=rng.uniform(0.2, 3.0)))
    return make_instance(users, creators, S=K)


def random_ball_points(rng: np.random.Generator, n: int, d: int, radius: float = 1.0) -> np.ndarray:
    x = rng.normal(size=(n, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * (radius * rng.random(n) ** (1.0 / d))[:, None]


def run_property_checks(instance: EconomyInstance, seed: int = 0, n_alpha: int = 100,
                        n_pairs: int = 1000, mutant: bool = False) -> list[CheckResult]:
    """Structural checks for a full-recommendation instance (``check`` CLI)."""
    _require_full(instance)
    rng = np.random.default_rng(seed)
    feat = flipped_cost_feature if mutant else unconstrained_feature_response
    ret = flipped_cost_return if mutant else _return_response
    results = []

    alphas = np.linspace(0.0, 1.0, n_alpha, endpoint=False)
    m = monotonicity_margin(instance, alphas, ret)
    results.append(CheckResult("monotonicity", m >= -CHECK_TOL, m))

    worst = math.inf
    for creator in instance.creators:
        th = random_ball_points(rng, n_pairs, instance.d, 0.5)
        ga = random_ball_points(rng, n_pairs, instance.d, 0.5)
        worst = min(worst, alignment_margin(creator, th, ga, feat))
    results.append(CheckResult("response_alignment", worst >= -CHECK_TOL, worst))

    worst = math.inf
    for p in problems(instance):
        for _ in range(max(1, n_pairs // instance.K)):
            theta = random_ball_points(rng, 1, instance.d)[0]
            a = rng.uniform(1e-3, 1.0)
            eta = random_ball_points(rng, 1, instance.d, 0.05)[0]
            worst = min(worst, continuity_margin(p, theta, a, eta, feat))
    results.append(CheckResult("utility_continuity", worst >= -CHECK_TOL, worst))

    worst = math.inf
    for p in problems(instance):
        for _ in range(10):
            theta = random_ball_points(rng, 1, instance.d)[0]
            c_star = feat(p, theta)
            cand = random_ball_points(rng, 100, instance.d)
            obj = cand @ theta - np.array([p.creator.cost(c) for c in cand])
            worst = min(worst, float(theta @ c_star - p.creator.cost(c_star) - obj.max()))
    results.append(CheckResult("best_response_optimality", worst >= -CHECK_TOL, worst))

    if np.linalg.norm(instance.aggregate_user) <= 1.0:
        alpha_grid = np.linspace(0.0, 1.0, 101)
        theta_grid = np.vstack([embedded_thetas(instance, alpha_grid), random_ball_points(rng, 500, instance.d)])
        f, r, ok = check_superset_dominance(instance, alpha_grid, theta_grid)
        results.append(CheckResult("superset_dominance", ok, f - r))
    return results
