import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from creator_econ.economy import (
    CreatorProfile,
    EconomyInstance,
    FeatureContract,
    RecommendationPolicy,
    RejectedInput,
    ResponseMode,
    ReturnContract,
    RewardModel,
    bundled_instance,
    contract_payment,
    generate_content,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    make_instance,
    mean_reward,
    save_instance,
    validate_policy,
)

from conftest import random_smooth_instance


def smooth(a, b):
    return CreatorProfile(0, a, b, np.zeros(len(a)), 1.0, ResponseMode.SMOOTH)


def quad(b, lam):
    return CreatorProfile(0, np.zeros(len(b)), np.zeros(len(b)), b, lam, ResponseMode.QUADRATIC)


# generate_content


def test_smooth_midpoint():
    c = generate_content(smooth([0, 0], [1, 0]), ReturnContract(0.5))
    assert np.array_equal(c, [0.5, 0.0])


def test_quadratic_interior():
    # b + lambda theta = (0.3, 0.4), norm 0.5: no projection
    c = generate_content(quad([0, 0], 1.0), FeatureContract([0.3, 0.4]))
    np.testing.assert_allclose(c, [0.3, 0.4], atol=1e-15)


def test_quadratic_boundary_projection():
    # (0.5, 0) + 2 * (1, 0) = (2.5, 0) -> (1, 0)
    c = generate_content(quad([0.5, 0], 2.0), FeatureContract([1.0, 0.0]))
    np.testing.assert_allclose(c, [1.0, 0.0], atol=1e-15)


def test_quadratic_zero_contract_returns_cost_center():
    b = np.array([0.2, -0.4])
    c = generate_content(quad(b, 3.0), FeatureContract([0.0, 0.0]))
    assert np.array_equal(c, b)


@pytest.mark.parametrize(
    "creator,contract",
    [
        (smooth([0, 0], [1, 0]), FeatureContract([0.1, 0.1])),
        (quad([0, 0], 1.0), ReturnContract(0.3)),
    ],
)
def test_incompatible_pairing_rejected(creator, contract):
    with pytest.raises(RejectedInput):
        generate_content(creator, contract)


def test_generate_content_is_pure():
    cr = smooth([0.3, -0.2], [-0.7, 0.5])
    first = generate_content(cr, ReturnContract(0.37))
    assert all(np.array_equal(first, generate_content(cr, ReturnContract(0.37))) for _ in range(1000))
    q = quad([0.1, 0.2], 1.7)
    first = generate_content(q, FeatureContract([0.6, -0.5]))
    assert all(np.array_equal(first, generate_content(q, FeatureContract([0.6, -0.5]))) for _ in range(1000))


# mean_reward


def test_mean_reward_examples():
    m = RewardModel(np.array([[1.0, 0.0], [0.0, 0.0], [1 / math.sqrt(2), 1 / math.sqrt(2)]]))
    assert mean_reward(m, 0, [0.5, 0.5]) == 0.5
    assert mean_reward(m, 1, [0.3, -0.9]) == 0.0
    # exactly 1 in real arithmetic; float rounding may land one ulp below
    r = mean_reward(m, 2, [1 / math.sqrt(2), 1 / math.sqrt(2)])
    assert r <= 1.0 and r == pytest.approx(1.0, abs=1e-15)


def test_mean_reward_clips_negative():
    m = RewardModel(np.array([[1.0, 0.0]]))
    assert mean_reward(m, 0, [-0.5, 0.0]) == 0.0


@pytest.mark.parametrize("j", [-1, 3])
def test_mean_reward_index_out_of_range(j):
    m = RewardModel(np.zeros((3, 2)))
    with pytest.raises(RejectedInput):
        mean_reward(m, j, [0.0, 0.0])


# contract_payment


def test_contract_payment_examples():
    assert contract_payment(ReturnContract(0.3), [0, 0], 0.5) == pytest.approx(0.15, abs=1e-15)
    assert contract_payment(ReturnContract(0.0), [0, 0], 3.0) == 0.0
    assert contract_payment(FeatureContract([1.0, 0.0]), [0.25, 0.9], 7.0) == 0.25


def test_negative_total_reward_rejected():
    with pytest.raises(RejectedInput):
        contract_payment(ReturnContract(0.5), [0.0], -1.0)


@pytest.mark.parametrize("alpha", [-0.1, 1.2])
def test_alpha_out_of_range(alpha):
    with pytest.raises(RejectedInput):
        ReturnContract(alpha)


def test_theta_outside_ball_rejected():
    with pytest.raises(RejectedInput):
        FeatureContract([0.8, 0.8])


# validate_policy


def test_validate_policy_examples():
    assert validate_policy(RecommendationPolicy([[True, False]], 1))
    assert not validate_policy(RecommendationPolicy([[True, True]], 1))
    assert validate_policy(RecommendationPolicy(np.ones((2, 2), bool), 2))


# instance plumbing


def test_instance_invariants():
    with pytest.raises(RejectedInput):
        make_instance([[1.0, 0.0]], [{}], S=2)
    with pytest.raises(RejectedInput):
        make_instance([[1.0, 0.0]], [{}], S=0)
    with pytest.raises(RejectedInput):
        make_instance([[1.0, 1.0]], [{}], S=1)  # user outside ball
    with pytest.raises(RejectedInput):
        CreatorProfile(0, [0.0], [0.0], [0.0], -1.0, ResponseMode.QUADRATIC)


def test_lipschitz_meta_nonnegative(rng):
    for _ in range(20):
        meta = random_smooth_instance(rng).lipschitz_meta
        assert min(meta.L, meta.L1, meta.L2, meta.L3) >= 0


def test_json_round_trip(tmp_path, rng):
    inst = random_smooth_instance(rng, K=3, M=2, S=2)
    p = tmp_path / "inst.json"
    save_instance(inst, p)
    back = load_instance(p)
    assert instance_to_dict(back) == instance_to_dict(inst)
    doc = json.loads(p.read_text())
    assert set(doc) == {"d", "S", "users", "creators"}
    assert set(doc["creators"][0]) == {"mode", "anchor_a", "anchor_b", "cost_center", "cost_scale"}


def test_instance_missing_field():
    with pytest.raises(RejectedInput, match="users"):
        instance_from_dict({"d": 1, "S": 1, "creators": []})
    doc = {"d": 1, "S": 1, "users": [[0.5]], "creators": [{"mode": "SmoothInterpolation"}]}
    with pytest.raises(RejectedInput, match="anchor_a"):
        instance_from_dict(doc)


@pytest.mark.parametrize("name", ["desk_return", "desk_feature", "desk_full"])
def test_bundled_instances_load(name):
    inst = load_instance(bundled_instance(name))
    assert isinstance(inst, EconomyInstance)


# properties


@st.composite
def smooth_instances(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_smooth_instance(np.random.default_rng(seed))


@settings(max_examples=60, deadline=None)
@given(smooth_instances(), st.floats(0, 1), st.floats(0, 1))
def test_smooth_reward_lipschitz_in_alpha(inst, a1, a2):
    L = inst.lipschitz_meta.L
    for creator in inst.creators:
        c1 = generate_content(creator, ReturnContract(a1))
        c2 = generate_content(creator, ReturnContract(a2))
        for j in range(inst.M):
            gap = abs(mean_reward(inst.rewards, j, c1) - mean_reward(inst.rewards, j, c2))
            assert gap <= L * abs(a1 - a2) + 1e-12


def ball_vectors(d):
    return st.lists(st.floats(-1, 1), min_size=d, max_size=d).map(np.array).filter(
        lambda v: np.linalg.norm(v) <= 1.0
    )


@settings(max_examples=100, deadline=None)
@given(ball_vectors(2), ball_vectors(2), ball_vectors(2), st.floats(0.05, 5.0))
def test_quadratic_response_lipschitz(b, t1, t2, lam):
    cr = quad(b, lam)
    c1 = generate_content(cr, FeatureContract(t1))
    c2 = generate_content(cr, FeatureContract(t2))
    assert np.linalg.norm(c1 - c2) <= lam * np.linalg.norm(t1 - t2) + 1e-12


@settings(max_examples=100, deadline=None)
@given(ball_vectors(3), ball_vectors(3), ball_vectors(3))
def test_linear_contract_lipschitz(theta, c1, c2):
    g = FeatureContract(theta)
    diff = abs(contract_payment(g, c1, 0.0) - contract_payment(g, c2, 0.0))
    assert diff <= np.linalg.norm(theta) * np.linalg.norm(c1 - c2) + 1e-12
    assert diff <= np.linalg.norm(c1 - c2) + 1e-12


@settings(max_examples=100, deadline=None)
@given(ball_vectors(2), ball_vectors(2), st.floats(0, 1), st.floats(0, 100))
def test_ranges(u, c, alpha, total):
    m = RewardModel(u[None, :])
    assert 0.0 <= mean_reward(m, 0, c) <= 1.0
    pay = contract_payment(ReturnContract(alpha), c, total)
    assert 0.0 <= pay <= total
