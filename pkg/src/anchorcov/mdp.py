"""Per-follower finite MDP over the cells of its communication triangle.

States ``0 .. M**2 - 1`` are the subdivision cells (the contained states);
state ``M**2`` is the single uncontained state standing for every position
outside the triangle. Each contained state may stay put or move to an
edge-adjacent cell. The uncontained state has one action: enter the cell that
holds the triangle centroid, which for ``M = 1`` is the whole triangle.

The kernel mixes two base measures::

    P(. | s, a) = (1 - eps) * delta_a + eps * uniform(actions(s))

so ``eps = 0`` gives deterministic moves. Stage costs depend on the state
only: ``alpha`` times the distance between cell centroids and the goal
centroid, minus ``beta`` at the goal.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    GoalOutsideTriangle,
    InvalidNoise,
    NonConvergence,
    NonPositiveParams,
    OutsideTriangle,
)
from .geometry import CONTAIN_TOL, barycentric_coords, locate_cell, subdivide

MAX_ACTIONS = 4


def sensed_targets(tri, targets):
    """Indices of the targets inside the closed triangle."""
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    if len(targets) == 0:
        barycentric_coords(tri.centroid, tri)  # still reject degenerate triangles
        return np.zeros(0, dtype=int)
    w = barycentric_coords(targets, tri)
    return np.flatnonzero(np.all(w >= -CONTAIN_TOL, axis=1))


def goal_centroid(tri, sensed_points, neighbor_positions=None):
    """Mean of the sensed targets, or of the three in-neighbors when none are sensed."""
    sensed_points = np.asarray(sensed_points, dtype=float).reshape(-1, 2)
    if len(sensed_points):
        return sensed_points.mean(axis=0)
    if neighbor_positions is None:
        neighbor_positions = tri.vertices
    return np.asarray(neighbor_positions, dtype=float).mean(axis=0)


def goal_state(sub, tri, h):
    w = barycentric_coords(h, tri)
    try:
        return locate_cell(sub, w)
    except OutsideTriangle as exc:
        raise GoalOutsideTriangle(str(exc)) from exc


@dataclass(frozen=True, eq=False)
class Kernel:
    """Action lists and transition probabilities of one resolution.

    ``succ[s, a]`` is the successor of the a-th action of ``s``; unused slots
    repeat the first action and are masked out by ``valid``.
    ``probs[s, a, b]`` is the probability of landing on ``succ[s, b]``.
    """

    M: int
    epsilon: float
    succ: np.ndarray
    valid: np.ndarray
    probs: np.ndarray

    @property
    def n_states(self):
        return len(self.succ)

    def actions(self, s):
        return [int(a) for a in self.succ[s][self.valid[s]]]

    def transition(self, s, a):
        """Dense distribution over all states after taking action ``a`` in ``s``."""
        slots = list(self.succ[s])
        k = slots.index(a)
        out = np.zeros(self.n_states)
        for b, target in enumerate(slots):
            if self.valid[s, b]:
                out[target] += self.probs[s, k, b]
        return out


@lru_cache(maxsize=128)
def build_kernel(M, epsilon=0.0):
    if not 0.0 <= epsilon < 1.0:
        raise InvalidNoise(f"noise must lie in [0, 1), got {epsilon!r}")
    sub = subdivide(M)
    n = len(sub)
    center = locate_cell(sub, np.full(3, 1.0 / 3.0))
    succ = np.full((n + 1, MAX_ACTIONS), -1, dtype=int)
    for s in range(n):
        acts = sorted((s,) + sub.adjacency[s])
        succ[s, : len(acts)] = acts
    succ[n, 0] = center
    valid = succ >= 0
    counts = valid.sum(axis=1)
    succ = np.where(valid, succ, succ[:, :1])

    probs = np.zeros((n + 1, MAX_ACTIONS, MAX_ACTIONS))
    spread = np.where(valid, epsilon / counts[:, None], 0.0)
    probs += spread[:, None, :]
    idx = np.arange(MAX_ACTIONS)
    probs[:, idx, idx] += (1.0 - epsilon) * valid
    pad_s, pad_a = np.nonzero(~valid)
    probs[pad_s, pad_a] = probs[pad_s, 0]
    for arr in (succ, valid, probs):
        arr.setflags(write=False)
    return Kernel(M, float(epsilon), succ, valid, probs)


def default_beta(tri, alpha=1.0):
    return 10.0 * alpha * tri.diameter


def build_costs(sub, tri, goal, alpha=1.0, beta=None, outside_point=None):
    """Stage cost per state, uncontained state last.

    The uncontained cost is ``alpha`` times the distance from
    ``outside_point`` to the goal centroid; without a point it falls back to
    ``alpha`` times the triangle diameter. It never influences the policy of
    a contained state.
    """
    if beta is None:
        beta = default_beta(tri, alpha)
    if alpha <= 0 or beta <= 0:
        raise NonPositiveParams(f"alpha and beta must be positive, got {alpha!r}, {beta!r}")
    centers = sub.centroids @ tri.vertices
    goal_xy = centers[goal]
    costs = np.empty(len(sub) + 1)
    costs[:-1] = alpha * np.hypot(*(centers - goal_xy).T)
    costs[goal] = -beta
    if outside_point is None:
        costs[-1] = alpha * tri.diameter
    else:
        costs[-1] = alpha * float(np.hypot(*(np.asarray(outside_point) - goal_xy)))
    return costs


@dataclass
class LocalMdp:
    agent: int
    triangle: object
    M: int
    goal: int
    costs: np.ndarray
    kernel: Kernel
    gamma: float = 0.9
    alpha: float = 1.0
    beta: float = 1.0
    sensed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    h: np.ndarray = None

    @property
    def subdivision(self):
        return subdivide(self.M)

    @property
    def n_states(self):
        return self.M * self.M + 1

    @property
    def uncontained(self):
        return self.M * self.M

    def actions(self, s):
        return self.kernel.actions(s)

    def state_of(self, point):
        """MDP state of a world position: its cell, or the uncontained state."""
        w = barycentric_coords(point, self.triangle)
        if np.any(w < -CONTAIN_TOL):
            return self.uncontained
        return locate_cell(self.subdivision, w)

    def cell_point(self, s):
        return self.subdivision.centroids[s] @ self.triangle.vertices


def build_mdp(agent, tri, M, targets=(), alpha=1.0, beta=None, gamma=0.9,
              epsilon=0.0, outside_point=None):
    """Assemble the local MDP of one follower for its current triangle."""
    if not 0.0 < gamma < 1.0:
        raise NonPositiveParams(f"discount must lie in (0, 1), got {gamma!r}")
    sub = subdivide(M)
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    sensed = sensed_targets(tri, targets)
    h = goal_centroid(tri, targets[sensed])
    goal = goal_state(sub, tri, h)
    if beta is None:
        beta = default_beta(tri, alpha)
    costs = build_costs(sub, tri, goal, alpha, beta, outside_point)
    return LocalMdp(agent, tri, M, goal, costs, build_kernel(M, epsilon),
                    gamma, alpha, beta, sensed, h)


@dataclass
class Policy:
    action: np.ndarray
    value: np.ndarray
    goal: int
    M: int
    iterations: int = 0
    residuals: list = field(default_factory=list, repr=False)

    def to_dict(self, agent):
        return {
            "agent": int(agent),
            "M": int(self.M),
            "goal": int(self.goal),
            "policy": [int(a) for a in self.action],
            "value": [float(v) for v in self.value],
        }


def _q_values(mdp, V):
    # padded slots duplicate a real action, so they never change the minimum
    k = mdp.kernel
    Vs = V[k.succ]
    if k.epsilon != 0.0:
        Vs = np.einsum("sab,sb->sa", k.probs, Vs)
    return mdp.costs[:, None] + mdp.gamma * Vs


def value_iteration(mdp, tol=1e-9, max_iters=100_000, warm_start=None):
    """Solve the Bellman optimality equation by successive approximation.

    Ties between actions go to the smallest successor index.
    """
    n = mdp.n_states
    if mdp.M == 1:
        # single cell: both states lead to it and no recursion is needed
        v0 = mdp.costs[0] / (1.0 - mdp.gamma)
        value = np.array([v0, mdp.costs[1] + mdp.gamma * v0])
        return Policy(np.zeros(2, dtype=int), value, mdp.goal, 1)

    V = np.zeros(n) if warm_start is None else np.array(warm_start, dtype=float)
    residuals = []
    for it in range(1, max_iters + 1):
        V_new = _q_values(mdp, V).min(axis=1)
        res = float(np.max(np.abs(V_new - V)))
        residuals.append(res)
        V = V_new
        if res < tol:
            break
    else:
        raise NonConvergence(f"Bellman residual {res:.3e} after {max_iters} sweeps")

    Q = np.where(mdp.kernel.valid, _q_values(mdp, V), np.inf)
    qmin = Q.min(axis=1, keepdims=True)
    ties = Q <= qmin + 1e-12 * np.maximum(1.0, np.abs(qmin))
    slot = np.argmax(ties, axis=1)  # first tie; successors are sorted ascending
    action = mdp.kernel.succ[np.arange(n), slot]
    return Policy(action, V, mdp.goal, mdp.M, it, residuals)


def policy_step(policy, state):
    return int(policy.action[state])
