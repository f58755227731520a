"""Domain types and pure evaluation functions for the creator economy.

Contents, contract parameters and user preference vectors are plain
``numpy`` float arrays living in the d-dimensional unit ball.  Everything
here is immutable and side-effect free.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

BALL_TOL = 1e-9


class RejectedInput(ValueError):
    """Raised when an operation receives arguments outside its contract."""


class ResponseMode(str, enum.Enum):
    SMOOTH = "SmoothInterpolation"
    QUADRATIC = "QuadraticBestResponse"


def as_content(coords, name: str = "content") -> np.ndarray:
    """Validate ``coords`` as a point of the unit ball and return a float copy."""
    arr = np.array(coords, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise RejectedInput(f"{name} must be a non-empty 1-d vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise RejectedInput(f"{name} has non-finite coordinates")
    if np.linalg.norm(arr) > 1.0 + BALL_TOL:
        raise RejectedInput(f"{name} has norm {np.linalg.norm(arr):.6g} > 1")
    arr.setflags(write=False)
    return arr


def project_to_ball(x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the unit ball (works row-wise on 2-d input)."""
    x = np.asarray(x, dtype=float)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    scale = np.where(norms > 1.0, 1.0 / np.where(norms > 0, norms, 1.0), 1.0)
    return x * scale


@dataclass(frozen=True)
class ReturnContract:
    """Pays each creator the fraction ``alpha`` of the reward its content earned."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 <= a <= 1.0):
            raise RejectedInput(f"alpha must lie in [0, 1], got {a}")
        object.__setattr__(self, "alpha", a)


@dataclass(frozen=True, eq=False)
class FeatureContract:
    """Linear feature contract: pays ``theta . c`` regardless of realized reward."""

    theta: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "theta", as_content(self.theta, "theta"))

    def __eq__(self, other):
        return isinstance(other, FeatureContract) and np.array_equal(self.theta, other.theta)

    def __hash__(self):
        return hash(self.theta.tobytes())


ContractSpec = Union[ReturnContract, FeatureContract]


@dataclass(frozen=True, eq=False)
class CreatorProfile:
    """A content creator.

    ``SmoothInterpolation`` creators answer a return share alpha with the
    point ``(1 - alpha) * anchor_a + alpha * anchor_b``.  ``QuadraticBestResponse``
    creators pay the cost ``|c - cost_center|^2 / (2 * cost_scale)`` and
    best-respond to linear incentives.
    """

    index: int
    anchor_a: np.ndarray
    anchor_b: np.ndarray
    cost_center: np.ndarray
    cost_scale: float
    mode: ResponseMode

    def __post_init__(self):
        object.__setattr__(self, "anchor_a", as_content(self.anchor_a, "anchor_a"))
        object.__setattr__(self, "anchor_b", as_content(self.anchor_b, "anchor_b"))
        object.__setattr__(self, "cost_center", as_content(self.cost_center, "cost_center"))
        object.__setattr__(self, "mode", ResponseMode(self.mode))
        if not (float(self.cost_scale) > 0):
            raise RejectedInput(f"cost_scale must be positive, got {self.cost_scale}")
        object.__setattr__(self, "cost_scale", float(self.cost_scale))
        dims = {self.anchor_a.size, self.anchor_b.size, self.cost_center.size}
        if len(dims) != 1:
            raise RejectedInput("creator vectors must share one dimension")

    @property
    def d(self) -> int:
        return self.anchor_a.size

    def cost(self, content) -> float:
        diff = np.asarray(content) - self.cost_center
        return float(diff @ diff) / (2.0 * self.cost_scale)


@dataclass(frozen=True, eq=False)
class RewardModel:
    users: np.ndarray  # (M, d)
    bernoulli: bool = True

    def __post_init__(self):
        u = np.array(self.users, dtype=float)
        if u.ndim != 2 or u.shape[0] < 1:
            raise RejectedInput("users must be a non-empty (M, d) array")
        if np.any(np.linalg.norm(u, axis=1) > 1.0 + BALL_TOL):
            raise RejectedInput("every user vector must have norm <= 1")
        u.setflags(write=False)
        object.__setattr__(self, "users", u)

    @property
    def M(self) -> int:
        return self.users.shape[0]

    @property
    def d(self) -> int:
        return self.users.shape[1]


@dataclass(frozen=True)
class LipschitzMeta:
    L: float
    L1: float
    L2: float
    L3: float


@dataclass(frozen=True, eq=False)
class RecommendationPolicy:
    assign: np.ndarray  # (M, K) bool
    S: int

    def __post_init__(self):
        a = np.array(self.assign, dtype=bool)
        if a.ndim != 2:
            raise RejectedInput("assign must be an (M, K) matrix")
        a.setflags(write=False)
        object.__setattr__(self, "assign", a)
        object.__setattr__(self, "S", int(self.S))

    def __eq__(self, other):
        return (
            isinstance(other, RecommendationPolicy)
            and self.S == other.S
            and np.array_equal(self.assign, other.assign)
        )


def validate_policy(policy: RecommendationPolicy) -> bool:
    """True iff every user row recommends exactly ``S`` items."""
    return bool(np.all(policy.assign.sum(axis=1) == policy.S))


def lipschitz_constants(creators: Sequence[CreatorProfile], users: np.ndarray) -> LipschitzMeta:
    user_norm = float(np.max(np.linalg.norm(users, axis=1)))
    span = max(float(np.linalg.norm(c.anchor_b - c.anchor_a)) for c in creators)
    return LipschitzMeta(
        L=user_norm * span,
        L1=user_norm,
        L2=1.0,
        L3=max(c.cost_scale for c in creators),
    )


@dataclass(frozen=True, eq=False)
class EconomyInstance:
    creators: tuple
    rewards: RewardModel
    S: int
    lipschitz_meta: LipschitzMeta = field(default=None)

    def __post_init__(self):
        creators = tuple(self.creators)
        object.__setattr__(self, "creators", creators)
        if not creators:
            raise RejectedInput("an instance needs at least one creator")
        if not (1 <= int(self.S) <= len(creators)):
            raise RejectedInput(f"S must satisfy 1 <= S <= K={len(creators)}, got {self.S}")
        object.__setattr__(self, "S", int(self.S))
        if any(c.d != self.rewards.d for c in creators):
            raise RejectedInput("creator and user dimensions differ")
        if self.lipschitz_meta is None:
            object.__setattr__(
                self, "lipschitz_meta", lipschitz_constants(creators, self.rewards.users)
            )

    @property
    def K(self) -> int:
        return len(self.creators)

    @property
    def M(self) -> int:
        return self.rewards.M

    @property
    def d(self) -> int:
        return self.rewards.d

    @property
    def full_recommendation(self) -> bool:
        return self.S == self.K

    @property
    def modes(self) -> set:
        return {c.mode for c in self.creators}

    @property
    def aggregate_user(self) -> np.ndarray:
        """Sum of user preference vectors (the linear aggregate reward)."""
        return self.rewards.users.sum(axis=0)


def generate_content(creator: CreatorProfile, contract: ContractSpec) -> np.ndarray:
    """Deterministic content produced by ``creator`` under ``contract``."""
    if creator.mode is ResponseMode.SMOOTH:
        if not isinstance(contract, ReturnContract):
            raise RejectedInput("SmoothInterpolation creators only accept return contracts")
        a = contract.alpha
        return (1.0 - a) * creator.anchor_a + a * creator.anchor_b
    if not isinstance(contract, FeatureContract):
        raise RejectedInput(
            "QuadraticBestResponse creators answer return contracts only under full "
            "recommendation; use fullreco.best_response_return"
        )
    return quadratic_response(creator, contract.theta)


def quadratic_response(creator: CreatorProfile, gradient: np.ndarray) -> np.ndarray:
    """argmax over the ball of ``gradient . c - cost(c)``, i.e. proj(b + lambda * gradient)."""
    return project_to_ball(creator.cost_center + creator.cost_scale * np.asarray(gradient, dtype=float))


def mean_reward(model: RewardModel, j: int, content) -> float:
    if not (0 <= j < model.M):
        raise RejectedInput(f"user index {j} outside [0, {model.M})")
    return float(np.clip(model.users[j] @ np.asarray(content, dtype=float), 0.0, 1.0))


def mean_matrix(model: RewardModel, contents: np.ndarray) -> np.ndarray:
    """Mean rewards for every (user, item); ``contents`` is (..., K, d), result (..., M, K)."""
    dots = np.einsum("md,...kd->...mk", model.users, contents)
    return np.clip(dots, 0.0, 1.0)


def contract_payment(contract: ContractSpec, content, total_reward: float) -> float:
    if total_reward < 0:
        raise RejectedInput("total_reward must be nonnegative")
    if isinstance(contract, ReturnContract):
        return contract.alpha * float(total_reward)
    return float(contract.theta @ np.asarray(content, dtype=float))


# -- instance files --------------------------------------------------------


def instance_from_dict(doc: dict, bernoulli: bool = True) -> EconomyInstance:
    try:
        d = int(doc["d"])
        S = int(doc["S"])
        users = np.array(doc["users"], dtype=float)
        raw = doc["creators"]
    except KeyError as exc:
        raise RejectedInput(f"instance document missing field {exc.args[0]!r}") from None
    if users.ndim != 2 or users.shape[1] != d:
        raise RejectedInput(f"users must be an array of length-{d} arrays")
    creators = []
    for k, rec in enumerate(raw):
        try:
            creators.append(
                CreatorProfile(
                    index=k,
                    anchor_a=rec["anchor_a"],
                    anchor_b=rec["anchor_b"],
                    cost_center=rec["cost_center"],
                    cost_scale=rec["cost_scale"],
                    mode=rec["mode"],
                )
            )
        except KeyError as exc:
            raise RejectedInput(f"creator {k} missing field {exc.args[0]!r}") from None
    if any(c.d != d for c in creators):
        raise RejectedInput(f"creator vectors must have length d={d}")
    return EconomyInstance(creators=creators, rewards=RewardModel(users, bernoulli), S=S)


def instance_to_dict(instance: EconomyInstance) -> dict:
    return {
        "d": instance.d,
        "S": instance.S,
        "users": instance.rewards.users.tolist(),
        "creators": [
            {
                "mode": c.mode.value,
                "anchor_a": c.anchor_a.tolist(),
                "anchor_b": c.anchor_b.tolist(),
                "cost_center": c.cost_center.tolist(),
                "cost_scale": c.cost_scale,
            }
            for c in instance.creators
        ],
    }


def load_instance(path) -> EconomyInstance:
    with open(Path(path), encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RejectedInput(f"instance file {path} is not valid JSON: {exc}") from None
    return instance_from_dict(doc)


def save_instance(instance: EconomyInstance, path) -> None:
    with open(Path(path), "w", encoding="utf-8") as fh:
        json.dump(instance_to_dict(instance), fh, indent=2)
        fh.write("\n")


def make_instance(
    users,
    creators: Sequence[dict],
    S: int,
    bernoulli: bool = True,
) -> EconomyInstance:
    """Convenience constructor; missing creator fields default to zeros / unit scale."""
    users = np.atleast_2d(np.array(users, dtype=float))
    d = users.shape[1]
    zero = np.zeros(d)
    profiles = [
        CreatorProfile(
            index=k,
            anchor_a=rec.get("anchor_a", zero),
            anchor_b=rec.get("anchor_b", zero),
            cost_center=rec.get("cost_center", zero),
            cost_scale=rec.get("cost_scale", 1.0),
            mode=rec.get("mode", ResponseMode.SMOOTH),
        )
        for k, rec in enumerate(creators)
    ]
    return EconomyInstance(creators=profiles, rewards=RewardModel(users, bernoulli), S=S)


def bundled_instance(name: str) -> Path:
    """Path of an instance file shipped with the package (``desk_return`` etc.)."""
    path = Path(__file__).parent / "instances" / f"{name}.json"
    if not path.is_file():
        raise RejectedInput(f"no bundled instance named {name!r}")
    return path
