"""Reference configurations used by the tests, the acceptance suite and the CLI demo."""

import numpy as np

from .structuring import AgentConfig

# 13-agent formation on a 10 x 10 square. Corners 1-4, core 12 at the centre;
# coordinates chosen so the layered structure has V_1 = [11, 10, 6, 5] and
# V_2 = [7, 8, 9, 13].
THIRTEEN_AGENTS = {
    1: (0.0, 0.0),
    2: (10.0, 0.0),
    3: (10.0, 10.0),
    4: (0.0, 10.0),
    5: (1.8, 5.0),
    6: (5.0, 8.2),
    7: (3.5, 2.5),
    8: (5.0, 9.3),
    9: (0.7, 5.5),
    10: (8.2, 5.0),
    11: (5.0, 1.8),
    12: (5.0, 5.0),
    13: (2.2, 3.5),
}


def thirteen_agent_config():
    return AgentConfig.from_mapping(THIRTEEN_AGENTS)


def coverage_scenario(n_agents=57, resolution=35, seed=3, **overrides):
    """Square four-anchor formation covering a triangular target domain.

    Agents 1-4 sit on the corners of a 100 x 100 square and agent 5 at its
    centre; the remaining agents are drawn uniformly from the interior with a
    minimum spacing. Targets form a regular grid clipped to the triangle
    (10, 10), (90, 10), (50, 90).
    """
    rng = np.random.default_rng(seed)
    pts = [(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0), (50.0, 50.0)]
    while len(pts) < n_agents:
        p = rng.uniform(4.0, 96.0, size=2)
        if min(np.hypot(*(p - q)) for q in pts) > 4.0:
            pts.append((round(float(p[0]), 3), round(float(p[1]), 3)))
    agents = [{"id": k + 1, "x": x, "y": y} for k, (x, y) in enumerate(pts)]

    a, b, c = np.array([10.0, 10.0]), np.array([90.0, 10.0]), np.array([50.0, 90.0])
    targets = []
    for x in np.arange(10.0, 90.01, 4.0):
        for y in np.arange(10.0, 90.01, 4.0):
            p = np.array([x, y])
            d = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1])
            w1 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / d
            w2 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / d
            if min(w1, w2, 1 - w1 - w2) >= 0:
                targets.append([float(x), float(y)])

    scenario = {
        "agents": agents,
        "targets": targets,
        "M": resolution,
        "alpha": 1.0,
        "gamma": 0.9,
        "epsilon": 0.0,
        "mode": "ideal",
        "eta": 0.05,
        "max_steps": 400,
        "seed": 0,
    }
    scenario.update(overrides)
    return scenario
