import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorcov.errors import GoalOutsideTriangle, InvalidNoise, NonConvergence, NonPositiveParams
from anchorcov.geometry import Triangle, subdivide
from anchorcov.mdp import (
    build_costs,
    build_kernel,
    build_mdp,
    default_beta,
    goal_centroid,
    goal_state,
    sensed_targets,
    value_iteration,
)
from oracles import bfs_distances, corner_adjacency, policy_path_length, value_iteration_dense

EQUI = Triangle.from_points((0, 0), (2, 0), (1, np.sqrt(3)))
RIGHT = Triangle.from_points((0, 0), (4, 0), (0, 4))


def test_sensed_targets_closed_triangle():
    pts = [(1, 1), (4, 0), (3, 3), (-0.1, 0)]
    assert list(sensed_targets(RIGHT, pts)) == [0, 1]
    assert len(sensed_targets(RIGHT, [])) == 0


def test_goal_centroid_fallback_to_neighbors():
    assert np.allclose(goal_centroid(RIGHT, []), [4 / 3, 4 / 3])
    assert np.allclose(goal_centroid(RIGHT, [(1, 1), (2, 0)]), [1.5, 0.5])


def test_goal_state_outside():
    with pytest.raises(GoalOutsideTriangle):
        goal_state(subdivide(3), RIGHT, (5, 5))


def test_kernel_interior_row():
    k = build_kernel(3, 0.3)
    s = next(s for s in range(9) if len(k.actions(s)) == 4)
    acts = k.actions(s)
    for a in acts:
        row = k.transition(s, a)
        assert row[a] == pytest.approx(0.7 + 0.3 / 4)
        assert row[a] == pytest.approx(0.775)
        for b in acts:
            if b != a:
                assert row[b] == pytest.approx(0.075)
        assert row.sum() == pytest.approx(1.0)


def test_kernel_deterministic_and_uncontained():
    k = build_kernel(4, 0.0)
    for s in range(17):
        for a in k.actions(s):
            row = k.transition(s, a)
            assert row[a] == 1.0 and row.sum() == 1.0
    # uncontained state: single action, the cell holding the triangle centroid
    assert len(k.actions(16)) == 1
    w = subdivide(4).centroids[k.actions(16)[0]]
    assert np.all(w > 0)


def test_kernel_actions_match_adjacency_oracle():
    for M in (2, 3, 6):
        sub = subdivide(M)
        adj = corner_adjacency(sub)
        k = build_kernel(M)
        for s in range(M * M):
            assert k.actions(s) == sorted([s] + adj[s])


def test_kernel_rejects_noise():
    with pytest.raises(InvalidNoise):
        build_kernel(3, 1.0)
    with pytest.raises(InvalidNoise):
        build_kernel(3, -0.1)


def test_costs_hand_computed_equilateral():
    sub = subdivide(2)
    goal = 2  # the inverted middle cell
    assert not sub.upward[goal]
    costs = build_costs(sub, EQUI, goal, alpha=2.0, beta=7.0)
    # corner-cell centroid to triangle centroid: sqrt(1/4 + 1/12) = 1/sqrt(3)
    for s in (0, 1, 3):
        assert costs[s] == pytest.approx(2.0 / np.sqrt(3))
    assert costs[goal] == -7.0
    assert costs[4] == pytest.approx(2.0 * 2.0)  # alpha * diameter
    assert build_costs(sub, EQUI, goal, 1.0, 1.0, outside_point=(1, -1))[4] == pytest.approx(
        np.hypot(0, 1 + np.sqrt(3) / 3))


def test_costs_default_beta_and_validation():
    sub = subdivide(3)
    assert default_beta(RIGHT) == pytest.approx(10 * np.sqrt(32))
    assert build_costs(sub, RIGHT, 0)[0] == -default_beta(RIGHT)
    with pytest.raises(NonPositiveParams):
        build_costs(sub, RIGHT, 0, alpha=0.0)
    with pytest.raises(NonPositiveParams):
        build_costs(sub, RIGHT, 0, beta=-1.0)


def test_m1_closed_form_matches_iteration():
    mdp = build_mdp(1, RIGHT, 1, targets=[(1, 1)])
    pol = value_iteration(mdp)
    assert list(pol.action) == [0, 0]
    P = [[np.array([1.0, 0.0])], [np.array([1.0, 0.0])]]
    V = value_iteration_dense(P, mdp.costs, mdp.gamma, [[0], [0]], iters=2000)
    assert np.allclose(pol.value, V, atol=1e-8)


@pytest.mark.parametrize("eps", [0.0, 0.2])
def test_values_match_dense_oracle(eps):
    M = 3
    mdp = build_mdp(1, RIGHT, M, targets=[(3.0, 0.5)], epsilon=eps)
    pol = value_iteration(mdp)
    k = mdp.kernel
    P = [{a: k.transition(s, a) for a in k.actions(s)} for s in range(mdp.n_states)]
    acts = [k.actions(s) for s in range(mdp.n_states)]
    V = value_iteration_dense(P, mdp.costs, mdp.gamma, acts, iters=400)
    assert np.allclose(pol.value, V, atol=1e-7)


def test_residuals_contract():
    mdp = build_mdp(1, RIGHT, 8, targets=[(0.5, 3.0)], gamma=0.8, epsilon=0.1)
    pol = value_iteration(mdp)
    r = np.array(pol.residuals)
    assert r[-1] < 1e-9
    assert np.all(r[1:] <= mdp.gamma * r[:-1] * (1 + 1e-9) + 1e-12)


def test_nonconvergence_raised():
    mdp = build_mdp(1, RIGHT, 5, targets=[(1, 1)])
    with pytest.raises(NonConvergence):
        value_iteration(mdp, max_iters=3)


@pytest.mark.parametrize("M", [2, 4, 7])
def test_policy_paths_are_geodesics(M):
    adj = corner_adjacency(subdivide(M))
    rng = np.random.default_rng(M)
    for _ in range(5):
        w = rng.dirichlet(np.ones(3))
        mdp = build_mdp(1, RIGHT, M, targets=[w @ RIGHT.vertices])
        pol = value_iteration(mdp)
        dist = bfs_distances(adj, mdp.goal)
        assert pol.action[mdp.goal] == mdp.goal
        for s in range(M * M):
            assert policy_path_length(pol.action, s, mdp.goal) == dist[s]


@pytest.mark.parametrize("eps", [0.0, 0.3])
def test_goal_absorbing(eps):
    mdp = build_mdp(1, RIGHT, 6, targets=[(1.0, 2.0)], epsilon=eps)
    pol = value_iteration(mdp)
    assert pol.action[mdp.goal] == mdp.goal


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 10.0), st.integers(0, 10_000))
def test_policy_invariant_under_cost_scaling(c, seed):
    rng = np.random.default_rng(seed)
    h = rng.dirichlet(np.ones(3)) @ RIGHT.vertices
    a = value_iteration(build_mdp(1, RIGHT, 5, targets=[h], alpha=1.0, beta=3.0))
    b = value_iteration(build_mdp(1, RIGHT, 5, targets=[h], alpha=c, beta=3.0 * c))
    assert np.array_equal(a.action, b.action)
    assert np.allclose(b.value, c * a.value, rtol=1e-6, atol=1e-6 * c)


def test_policy_invariant_under_similarity():
    h = np.array([3.0, 0.4])
    a = value_iteration(build_mdp(1, RIGHT, 6, targets=[h]))
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    moved = Triangle(2.5 * RIGHT.vertices @ rot.T + 7.0)
    b = value_iteration(build_mdp(1, moved, 6, targets=[2.5 * h @ rot.T + 7.0]))
    assert np.array_equal(a.action, b.action)


def test_policy_dump_shape():
    mdp = build_mdp(9, RIGHT, 3, targets=[(1, 1)])
    d = value_iteration(mdp).to_dict(9)
    assert d["agent"] == 9 and d["M"] == 3
    assert len(d["policy"]) == len(d["value"]) == 10
