"""Layered anchor-follower communication structure from a reference formation.

Hull agents plus one core agent form the anchor layer ``V_0``. The leading
polytope is fan-triangulated around the core; then, layer by layer, every
cell that still contains unassigned agents picks a mentee (the contained
agent closest in aggregate distance to the cell corners), the mentee takes
the cell's corners as its three in-neighbors, and the cell is split in three
around it.
"""

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import (
    DegenerateChild,
    InvalidConfig,
    NoInteriorAgent,
    UnassignableAgent,
)
from .geometry import Triangle, as_point, barycentric_coords, convex_hull

CORE_MODES = ("distance", "target-center")


@dataclass(frozen=True, eq=False)
class AgentConfig:
    """Agent ids with their reference positions."""

    ids: tuple
    positions: np.ndarray

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        if len(ids) != len(pos):
            raise InvalidConfig("ids and positions differ in length")
        if len(ids) < 4:
            raise InvalidConfig(f"need at least 4 agents, got {len(ids)}")
        if len(set(ids)) != len(ids):
            raise InvalidConfig("agent ids must be unique")
        if min(ids) < 1:
            raise InvalidConfig("agent ids must be >= 1")
        for p in pos:
            as_point(p)
        if len({tuple(p) for p in pos}) != len(pos):
            raise InvalidConfig("two agents share a reference position")
        pos.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "positions", pos)

    @classmethod
    def from_mapping(cls, mapping):
        ids = sorted(mapping)
        return cls(tuple(ids), np.array([mapping[i] for i in ids], dtype=float))

    def as_dict(self):
        return {i: self.positions[k] for k, i in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)


class CellRef(NamedTuple):
    vertices: tuple
    layer: int
    slot: int


@dataclass
class DnnStructure:
    layers: list
    in_neighbors: dict
    cell_history: list
    positions: dict = field(repr=False)

    @property
    def M(self):
        return len(self.layers) - 1

    @property
    def anchors(self):
        return list(self.layers[0])

    @property
    def followers(self):
        return [i for layer in self.layers[1:] for i in layer]

    @property
    def order(self):
        """Agents stacked layer by layer, as used for the stacked matrices."""
        return [i for layer in self.layers for i in layer]

    @property
    def layer_of(self):
        return {i: l for l, layer in enumerate(self.layers) for i in layer}

    def to_dict(self):
        return {
            "layers": [list(layer) for layer in self.layers],
            "in_neighbors": {str(i): list(n) for i, n in sorted(self.in_neighbors.items())},
        }

    def to_dot(self):
        lines = ["digraph dnn {", "  rankdir=LR;"]
        for l, layer in enumerate(self.layers):
            shape = "box" if l == 0 else "circle"
            lines.append(f"  subgraph layer_{l} {{ rank=same;")
            for i in layer:
                lines.append(f'    {i} [shape={shape}, label="{i}"];')
            lines.append("  }")
        for i, nbrs in sorted(self.in_neighbors.items()):
            for j in nbrs:
                lines.append(f"  {j} -> {i};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _argmin_by_distance(candidates, corners, positions):
    def key(j):
        return (sum(float(np.linalg.norm(positions[r] - positions[j])) for r in corners), j)

    return min(candidates, key=key)


def _in_closed(tri, p, tol=1e-12):
    return bool(np.all(barycentric_coords(p, tri) >= -tol))


def classify(config, core_mode="distance", targets=None):
    """Return ``(boundary ids in CCW order, core id)``."""
    positions = config.as_dict()
    hull = [config.ids[k] for k in convex_hull(config.positions)]
    interior = [i for i in config.ids if i not in set(hull)]
    if not interior:
        raise NoInteriorAgent("every agent is a hull vertex")
    if core_mode == "distance":
        core = _argmin_by_distance(interior, hull, positions)
    elif core_mode == "target-center":
        if targets is None or len(targets) == 0:
            raise InvalidConfig("target-center core selection needs targets")
        center = np.asarray(targets, dtype=float).reshape(-1, 2).mean(axis=0)
        core = min(interior, key=lambda j: (float(np.linalg.norm(positions[j] - center)), j))
    else:
        raise ValueError(f"unknown core mode {core_mode!r}")
    return hull, core


def fan_triangulate(boundary, core):
    n = len(boundary)
    return [CellRef((boundary[h], boundary[(h + 1) % n], core), 0, h + 1) for h in range(n)]


def cell_triangle(cell, positions):
    return Triangle(np.array([positions[v] for v in cell.vertices]))


def assign_mentee(cell, candidates, positions):
    """Mentee of ``cell`` among ``candidates``, or None if the cell holds none."""
    tri = cell_triangle(cell, positions)
    inside = [j for j in candidates if _in_closed(tri, positions[j])]
    if not inside:
        return None
    return _argmin_by_distance(inside, cell.vertices, positions)


def split_cell(cell, mentee, slot_start=1, positions=None):
    """Split ``(u, v, w)`` into ``(u, v, m), (v, w, m), (w, u, m)``."""
    u, v, w = cell.vertices
    layer = cell.layer + 1
    children = [
        CellRef((u, v, mentee), layer, slot_start),
        CellRef((v, w, mentee), layer, slot_start + 1),
        CellRef((w, u, mentee), layer, slot_start + 2),
    ]
    if positions is not None:
        for child in children:
            if cell_triangle(child, positions).is_degenerate:
                raise DegenerateChild(
                    f"mentee {mentee} is collinear with an edge of cell {cell.vertices}")
    return children


def _perturb(mentee, cell, positions, seed, scale):
    rng = np.random.default_rng([seed, mentee])
    base = positions[mentee].copy()
    tri = cell_triangle(cell, positions)
    for _ in range(32):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        cand = base + scale * np.array([np.cos(theta), np.sin(theta)])
        if np.all(barycentric_coords(cand, tri) > 0):
            return cand
    step = tri.centroid - base
    return base + scale * step / np.linalg.norm(step)


def build_structure(config, core_mode="distance", targets=None,
                    perturb_degenerate=False, seed=0):
    """Run the layered structuring procedure on a reference configuration."""
    positions = {i: p.copy() for i, p in config.as_dict().items()}
    boundary, core = classify(config, core_mode, targets)
    cells = fan_triangulate(boundary, core)
    layers = [list(boundary) + [core]]
    history = [cells]
    in_neighbors = {}
    unassigned = set(config.ids) - set(layers[0])
    span = config.positions.max(axis=0) - config.positions.min(axis=0)
    scale = 1e-9 * float(np.hypot(*span))

    while unassigned:
        # containment is resolved first; edge ties go to the lower slot
        members = {cell.slot: [] for cell in cells}
        pending = sorted(unassigned)
        pts = np.array([positions[a] for a in pending])
        inside = np.array([np.all(barycentric_coords(pts, cell_triangle(c, positions)) >= -1e-12,
                                  axis=1) for c in cells])
        if not inside.any(axis=0).all():
            a = pending[int(np.argmin(inside.any(axis=0)))]
            raise UnassignableAgent(f"agent {a} lies in no current cell")
        first = np.argmax(inside, axis=0)
        for a, k in zip(pending, first):
            members[cells[k].slot].append(a)

        layer = []
        children = []
        for cell in cells:
            if not members[cell.slot]:
                continue
            mentee = assign_mentee(cell, members[cell.slot], positions)
            in_neighbors[mentee] = tuple(cell.vertices)
            layer.append(mentee)
            start = 3 * (len(layer) - 1) + 1
            try:
                kids = split_cell(cell, mentee, start, positions)
            except DegenerateChild:
                if not perturb_degenerate:
                    raise
                positions[mentee] = _perturb(mentee, cell, positions, seed, scale)
                kids = split_cell(cell, mentee, start, positions)
            children.extend(kids)
        layers.append(layer)
        history.append(children)
        unassigned -= set(layer)
        cells = children

    return DnnStructure(layers, in_neighbors, history, positions)


def validate_structure(dnn, config):
    """List every contract violation found in ``dnn``; empty means valid."""
    problems = []
    seen = [i for layer in dnn.layers for i in layer]
    if len(seen) != len(set(seen)):
        problems.append("partition: an agent appears in more than one layer")
    if set(seen) != set(config.ids):
        problems.append("partition: layers do not cover exactly the agent set")
    layer_of = dnn.layer_of
    anchors = set(dnn.layers[0]) if dnn.layers else set()
    positions = dnn.positions or config.as_dict()

    for i in sorted(set(config.ids) - anchors):
        nbrs = dnn.in_neighbors.get(i, ())
        if len(nbrs) != 3 or len(set(nbrs)) != 3:
            problems.append(f"in-neighbors: follower {i} has {len(set(nbrs))} in-neighbors, expected 3")
            continue
        li = layer_of.get(i)
        for j in nbrs:
            lj = layer_of.get(j)
            if lj is None or li is None or lj >= li:
                problems.append(f"feedforward: edge {j} -> {i} does not go to a later layer")
        if all(j in positions for j in nbrs) and i in positions:
            tri = Triangle(np.array([positions[j] for j in nbrs]))
            if tri.is_degenerate or not _in_closed(tri, positions[i]):
                problems.append(f"containment: follower {i} is not inside its mentor cell")
    for i in anchors:
        if dnn.in_neighbors.get(i):
            problems.append(f"in-neighbors: anchor {i} has in-neighbors")

    # Kahn's algorithm over the j -> i edges
    indeg = {i: 0 for i in config.ids}
    out = {i: [] for i in config.ids}
    for i, nbrs in dnn.in_neighbors.items():
        for j in nbrs:
            if j in out and i in indeg:
                out[j].append(i)
                indeg[i] += 1
    queue = [i for i, d in indeg.items() if d == 0]
    visited = 0
    while queue:
        j = queue.pop()
        visited += 1
        for i in out[j]:
            indeg[i] -= 1
            if indeg[i] == 0:
                queue.append(i)
    if visited != len(indeg):
        problems.append("acyclicity: the communication digraph has a cycle")

    for l in range(1, len(dnn.cell_history)):
        m_prev = len(dnn.cell_history[l - 1])
        m_l = len(dnn.cell_history[l])
        n_l = len(dnn.layers[l]) if l < len(dnn.layers) else 0
        if n_l > m_prev:
            problems.append(f"layer {l}: N_l = {n_l} exceeds m_(l-1) = {m_prev}")
        if m_l > 3 * m_prev:
            problems.append(f"layer {l}: m_l = {m_l} exceeds 3 m_(l-1)")
    return problems
