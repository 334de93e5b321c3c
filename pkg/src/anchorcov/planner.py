"""Desired positions of the whole team from the target set (layer by layer).

Anchors keep their given positions. Each follower looks at the triangle of
its in-neighbors' desired positions, averages the targets inside it (or
falls back to the triangle centroid), and takes the centroid of the
subdivision cell containing that average as its own desired position.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import Triangle, barycentric_coords, subdivide
from .mdp import goal_centroid, goal_state, sensed_targets


def resolution_of(M, agent):
    if isinstance(M, dict):
        return int(M[agent])
    return int(M)


@dataclass
class DesiredPlan:
    p: dict
    tilde_weights: dict
    goal_cells: dict
    order: list
    triangles: dict = field(default_factory=dict, repr=False)

    @property
    def z(self):
        """Desired positions stacked in layer order, shape (N, 2)."""
        return np.array([self.p[i] for i in self.order])

    def cell_diameter(self, agent, M):
        """Diameter of the goal cell of ``agent``; zero for anchors."""
        if agent not in self.tilde_weights:
            return 0.0
        return self.triangles[agent].diameter / resolution_of(M, agent)

    def to_dict(self):
        return {
            "p": {str(i): [float(v) for v in self.p[i]] for i in self.order},
            "tilde_weights": {str(i): [float(v) for v in w]
                              for i, w in self.tilde_weights.items()},
        }


def plan(dnn, anchors, targets, M, eta=None):
    """Desired positions and weights for every agent of ``dnn``.

    ``anchors`` maps each anchor id to its desired position; ``M`` is a
    resolution shared by all followers or a per-agent mapping. With ``eta``
    set, desired weights are kept at least ``eta`` on every in-neighbor: the
    target average is pulled into the truncated triangle before the goal cell
    is chosen, and the cell centroid weights are projected the same way.
    """
    from .simulator import aoc_realize

    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    p = {i: np.asarray(anchors[i], dtype=float) for i in dnn.layers[0]}
    weights, cells, triangles = {}, {}, {}
    for layer in dnn.layers[1:]:
        for i in layer:
            tri = Triangle(np.array([p[j] for j in dnn.in_neighbors[i]]))
            sub = subdivide(resolution_of(M, i))
            inside = sensed_targets(tri, targets)
            h = goal_centroid(tri, targets[inside])
            if eta is not None:
                h = aoc_realize(barycentric_coords(h, tri), eta) @ tri.vertices
            g = goal_state(sub, tri, h)
            w = sub.centroids[g].copy()
            if eta is not None:
                w = aoc_realize(w, eta)
            p[i] = w @ tri.vertices
            weights[i], cells[i], triangles[i] = w, g, tri
    return DesiredPlan(p, weights, cells, dnn.order, triangles)


def gamma_tilde(desired, dnn):
    """Stacked desired weight matrix, rows and columns in layer order."""
    order = dnn.order
    index = {i: k for k, i in enumerate(order)}
    G = np.zeros((len(order), len(order)))
    for i in dnn.layers[0]:
        G[index[i], index[i]] = 1.0
    for i, w in desired.tilde_weights.items():
        for j, wj in zip(dnn.in_neighbors[i], w):
            G[index[i], index[j]] = wj
    return G


def layer_blocks(G, dnn):
    """Split a stacked matrix into blocks ``G[l][h]`` by layer."""
    sizes = [len(layer) for layer in dnn.layers]
    edges = np.concatenate([[0], np.cumsum(sizes)])
    return [[G[edges[l]:edges[l + 1], edges[h]:edges[h + 1]] for h in range(len(sizes))]
            for l in range(len(sizes))]
