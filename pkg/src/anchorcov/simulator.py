"""Discrete-time coverage dynamics ``y[t+1] = Gamma[t] y[t]``.

Anchors hold their desired positions. At every round each follower forms its
communication triangle from its in-neighbors, finds its MDP state, and moves
to the centroid of the cell its policy selects (``ideal`` mode) or to the
closest point whose barycentric weights are all at least ``eta`` (``aoc``
mode). A follower outside its triangle heads for the triangle centroid.

Two update schedules are supported:

``synchronous``
    every follower reads the positions of round ``t``; the realized weights
    are exactly the follower rows of ``Gamma[t]``.
``layered``
    layer ``l`` reads the round ``t + 1`` positions already computed for
    earlier layers; ``Gamma[t]`` is then the composed map from anchor
    positions to follower positions.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageError, InvalidEta, InvalidNoise, NonPositiveParams, StepError
from .geometry import CONTAIN_TOL, Triangle, barycentric_coords, locate_cell, subdivide
from .mdp import build_costs, build_kernel, default_beta, goal_centroid, goal_state, \
    sensed_targets, value_iteration, LocalMdp
from .planner import plan as make_plan
from .planner import resolution_of
from .structuring import AgentConfig, build_structure

MODES = ("ideal", "aoc")
SCHEDULES = ("synchronous", "layered")
SAMPLINGS = ("project", "sample")
SETTLE_STEPS = 5
CACHE_TOL = 1e-9


@dataclass
class Scenario:
    config: AgentConfig
    targets: np.ndarray
    anchors_desired: dict = field(default_factory=dict)
    M: object = 35
    alpha: float = 1.0
    beta: float = None
    gamma: float = 0.9
    epsilon: float = 0.0
    mode: str = "ideal"
    eta: float = 0.05
    max_steps: int = 500
    tol: float = None
    seed: int = 0
    core_mode: str = "distance"
    perturb_degenerate: bool = False
    schedule: str = "synchronous"
    aoc_sampling: str = "project"

    def __post_init__(self):
        self.targets = np.asarray(self.targets, dtype=float).reshape(-1, 2)
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}, got {self.schedule!r}")
        if self.aoc_sampling not in SAMPLINGS:
            raise ValueError(f"aoc sampling must be one of {SAMPLINGS}")
        if self.mode == "aoc" and not 0.0 < self.eta < 1.0 / 3.0:
            raise InvalidEta(f"eta must lie in (0, 1/3), got {self.eta!r}")
        if not 0.0 <= self.epsilon < 1.0:
            raise InvalidNoise(f"noise must lie in [0, 1), got {self.epsilon!r}")
        if self.alpha <= 0 or (self.beta is not None and self.beta <= 0):
            raise NonPositiveParams("alpha and beta must be positive")
        if not 0.0 < self.gamma < 1.0:
            raise NonPositiveParams(f"discount must lie in (0, 1), got {self.gamma!r}")
        ms = self.M.values() if isinstance(self.M, dict) else [self.M]
        if any(int(m) != m or m < 1 for m in ms):
            raise ValueError("resolution must be a positive integer")

    def anchor_position(self, agent):
        if agent in self.anchors_desired:
            return np.asarray(self.anchors_desired[agent], dtype=float)
        return self.config.as_dict()[agent]

    def resolution(self, agent):
        return resolution_of(self.M, agent)


@dataclass
class CachedPolicy:
    goal: int
    vertices: np.ndarray
    policy: object


@dataclass
class WorldState:
    t: int
    r: dict
    cache: dict = field(default_factory=dict)
    solves: int = 0


def project_truncated_simplex(v, floor):
    """Euclidean projection of ``v`` onto ``{w : w >= floor, sum(w) = 1}``."""
    v = np.asarray(v, dtype=float)
    n = len(v)
    mass = 1.0 - n * floor
    u = np.sort(v - floor)[::-1]
    css = np.cumsum(u) - mass
    rho = np.nonzero(u - css / np.arange(1, n + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - floor - theta, 0.0) + floor


def aoc_realize(commanded, eta):
    """Closest weight vector to ``commanded`` with every component >= ``eta``."""
    if not 0.0 < eta < 1.0 / 3.0:
        raise InvalidEta(f"eta must lie in (0, 1/3), got {eta!r}")
    commanded = np.asarray(commanded, dtype=float)
    if np.all(commanded >= eta):
        return commanded.copy()
    w = project_truncated_simplex(commanded, eta)
    return w / w.sum()


def agent_rng(seed, agent, step):
    """Counter-based generator keyed by (seed, agent, step)."""
    return np.random.Generator(np.random.Philox(key=[seed, agent * 1_000_003 + step]))


def _sample_in_cell(cell_vertices, rng, shrink=0.5):
    """Uniform point in the cell shrunk about its centroid (edge-aligned)."""
    center = cell_vertices.mean(axis=0)
    corners = center + shrink * (cell_vertices - center)
    return rng.dirichlet(np.ones(3)) @ corners


def follower_step(agent, world, scenario, dnn, positions, step=None):
    """Advance one follower by one round.

    ``positions`` are the in-neighbor positions this follower reads. Returns
    ``(next position, realized weights, event)``.
    """
    nbrs = dnn.in_neighbors[agent]
    verts = np.array([positions[j] for j in nbrs])
    tri = Triangle(verts)
    M = scenario.resolution(agent)
    sub = subdivide(M)
    r = world.r[agent]
    w_now = barycentric_coords(r, tri)
    step = world.t if step is None else step

    targets = scenario.targets
    sensed = sensed_targets(tri, targets)
    h = goal_centroid(tri, targets[sensed])
    if scenario.mode == "aoc":
        h = aoc_realize(barycentric_coords(h, tri), scenario.eta) @ verts
    goal = goal_state(sub, tri, h)
    event = {"agent": int(agent), "goal": int(goal), "sensed": int(len(sensed))}

    if np.any(w_now < -CONTAIN_TOL):
        # outside: collapse to one cell, head for the triangle centroid
        commanded = np.full(3, 1.0 / 3.0)
        cell_vertices = np.eye(3)
        event.update(state="U", action=0, solved=False)
    else:
        state = locate_cell(sub, w_now)
        cached = world.cache.get(agent)
        solved = False
        if (cached is None or cached.goal != goal
                or np.max(np.abs(cached.vertices - verts)) > CACHE_TOL):
            beta = scenario.beta if scenario.beta is not None else default_beta(tri, scenario.alpha)
            costs = build_costs(sub, tri, goal, scenario.alpha, beta, outside_point=r)
            mdp = LocalMdp(agent, tri, M, goal, costs, build_kernel(M, scenario.epsilon),
                           scenario.gamma, scenario.alpha, beta, sensed, h)
            warm = None
            if cached is not None and len(cached.policy.value) == mdp.n_states:
                warm = cached.policy.value
            policy = value_iteration(mdp, warm_start=warm)
            cached = CachedPolicy(goal, verts.copy(), policy)
            world.cache[agent] = cached
            world.solves += 1
            solved = True
        action = int(cached.policy.action[state])
        commanded = sub.centroids[action]
        cell_vertices = sub.vertices(action)
        event.update(state=int(state), action=action, solved=solved)

    if scenario.mode == "ideal":
        realized = commanded.copy()
    elif scenario.aoc_sampling == "sample":
        rng = agent_rng(scenario.seed, agent, step)
        realized = aoc_realize(_sample_in_cell(cell_vertices, rng), scenario.eta)
    else:
        realized = aoc_realize(commanded, scenario.eta)
    return realized @ verts, realized, event


def assemble_gamma(weights, dnn, schedule="synchronous"):
    """Stacked row-stochastic matrix of one round, in layer order.

    ``weights`` maps each follower to the realized weights on its in-neighbors.
    """
    order = dnn.order
    index = {i: k for k, i in enumerate(order)}
    n = len(order)
    G = np.zeros((n, n))
    for i in dnn.layers[0]:
        G[index[i], index[i]] = 1.0
    for layer in dnn.layers[1:]:
        for i in layer:
            row = index[i]
            for j, wj in zip(dnn.in_neighbors[i], weights[i]):
                if schedule == "layered" and j not in dnn.layers[0]:
                    G[row] += wj * G[index[j]]
                else:
                    G[row, index[j]] += wj
    return G


@dataclass
class Trajectory:
    order: list
    positions: np.ndarray
    gammas: np.ndarray
    events: list
    converged: bool
    dnn: object = field(repr=False)
    plan: object = field(repr=False)
    tolerances: dict = field(default_factory=dict, repr=False)
    solves: int = 0
    policies: dict = field(default_factory=dict, repr=False)

    @property
    def steps(self):
        return len(self.gammas)

    def position(self, agent, t):
        return self.positions[t, self.order.index(agent)]

    def errors(self):
        """Distance to the desired position, shape (steps + 1, N)."""
        z = self.plan.z
        return np.hypot(*(self.positions - z[None]).transpose(2, 0, 1))


def agent_tolerances(scenario, dnn, desired):
    """Per-agent convergence tolerance: the scenario value or one goal-cell diameter."""
    if scenario.tol is not None:
        return {i: float(scenario.tol) for i in dnn.order}
    return {i: desired.cell_diameter(i, scenario.M) for i in dnn.order}


def prepare(scenario):
    dnn = build_structure(scenario.config, scenario.core_mode, scenario.targets,
                          scenario.perturb_degenerate, scenario.seed)
    anchors = {i: scenario.anchor_position(i) for i in dnn.layers[0]}
    eta = scenario.eta if scenario.mode == "aoc" else None
    desired = make_plan(dnn, anchors, scenario.targets, scenario.M, eta=eta)
    return dnn, desired


def run(scenario, dnn=None, desired=None):
    if dnn is None or desired is None:
        dnn, desired = prepare(scenario)
    order = dnn.order
    ref = scenario.config.as_dict()
    r = {i: (scenario.anchor_position(i) if i in dnn.layers[0] else ref[i].copy())
         for i in order}
    world = WorldState(0, r)
    tolerances = agent_tolerances(scenario, dnn, desired)
    tol_vec = np.array([tolerances[i] for i in order])
    # strict "<" against a zero tolerance can never hold for anchors
    tol_vec = np.where(tol_vec > 0, tol_vec, np.inf)
    z = desired.z

    positions = [np.array([r[i] for i in order])]
    gammas, events = [], []
    followers = dnn.followers
    converged = False
    streak = 0
    steps = 1 if not followers else scenario.max_steps

    for t in range(steps):
        world.t = t
        snapshot = dict(world.r)
        new_r = dict(world.r)
        weights, step_events = {}, []
        for i in followers:
            source = new_r if scenario.schedule == "layered" else snapshot
            try:
                nxt, w, ev = follower_step(i, world, scenario, dnn, source, t)
            except CoverageError as exc:
                raise StepError(t, i, exc) from exc
            new_r[i] = nxt
            weights[i] = w
            step_events.append(ev)
        world.r = new_r
        gammas.append(assemble_gamma(weights, dnn, scenario.schedule))
        events.append(step_events)
        y = np.array([new_r[i] for i in order])
        positions.append(y)

        err = np.hypot(*(y - z).T)
        streak = streak + 1 if np.all(err < tol_vec) else 0
        if not followers or streak >= SETTLE_STEPS:
            converged = True
            break

    return Trajectory(order, np.array(positions), np.array(gammas), events, converged,
                      dnn, desired, tolerances, world.solves,
                      {i: c.policy for i, c in sorted(world.cache.items())})
