"""Scenario files, trajectory exports and the run manifest.

A scenario is one JSON document::

    {"agents": [{"id": 1, "x": 0.0, "y": 0.0}, ...],
     "targets": [[x, y], ...],
     "anchors_desired": {"1": [x, y]},          # optional
     "M": 35 or {"6": 10, ...},
     "alpha": 1.0, "beta": null, "gamma": 0.9, "epsilon": 0.0,
     "mode": "ideal" | "aoc", "eta": 0.05,
     "max_steps": 500, "tol": null, "seed": 0}

Every writer here produces deterministic bytes: keys are sorted, floats use
``repr`` and files are replaced atomically.
"""

import csv
import io
import json
import os
import tempfile

import numpy as np

from .errors import ScenarioError
from .simulator import Scenario, Trajectory, agent_tolerances, prepare
from .structuring import AgentConfig

DEFAULTS = {
    "anchors_desired": {},
    "M": 35,
    "alpha": 1.0,
    "beta": None,
    "gamma": 0.9,
    "epsilon": 0.0,
    "mode": "ideal",
    "eta": 0.05,
    "max_steps": 500,
    "tol": None,
    "seed": 0,
    "core_mode": "distance",
    "perturb_degenerate": False,
    "schedule": "synchronous",
    "aoc_sampling": "project",
}
KNOWN = {"agents", "targets", *DEFAULTS}


def parse_json(text, what="scenario"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid {what} JSON: {exc.msg}", exc.lineno, exc.colno) from exc


def read_json(path, what="scenario"):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"cannot read {what} {path}: {exc.strerror}") from exc
    return parse_json(text, what)


def _number(doc, key, kind=float, allow_none=False):
    v = doc[key]
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"field {key!r} must be a number, got {v!r}")
    return kind(v)


def resolve(doc, overrides=None):
    """Scenario document with defaults filled in and ``overrides`` applied.

    ``None`` values in ``overrides`` leave the document untouched.
    """
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    unknown = sorted(set(doc) - KNOWN)
    if unknown:
        raise ScenarioError(f"unknown scenario fields: {', '.join(unknown)}")
    for key in ("agents", "targets"):
        if key not in doc:
            raise ScenarioError(f"missing required field {key!r}")
    out = {**DEFAULTS, **doc}
    for key, v in (overrides or {}).items():
        if v is not None:
            out[key] = v
    return out


def _agents(doc):
    agents = doc["agents"]
    if not isinstance(agents, list):
        raise ScenarioError("'agents' must be a list")
    ids, pos = [], []
    for k, a in enumerate(agents):
        if not isinstance(a, dict) or not {"id", "x", "y"} <= set(a):
            raise ScenarioError(f"agents[{k}] must be an object with id, x, y")
        if isinstance(a["id"], bool) or not isinstance(a["id"], int):
            raise ScenarioError(f"agents[{k}].id must be an integer")
        ids.append(a["id"])
        pos.append((_number(a, "x"), _number(a, "y")))
    return AgentConfig(tuple(ids), np.array(pos, dtype=float).reshape(-1, 2))


def _points(v, key):
    try:
        arr = np.array(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{key!r} must hold [x, y] pairs") from exc
    if arr.size == 0:
        return np.zeros((0, 2))
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ScenarioError(f"{key!r} must hold [x, y] pairs")
    return arr


def _id_map(v, key):
    if not isinstance(v, dict):
        raise ScenarioError(f"{key!r} must be an object keyed by agent id")
    try:
        return {int(k): val for k, val in v.items()}
    except ValueError as exc:
        raise ScenarioError(f"{key!r} keys must be agent ids") from exc


def build_scenario(resolved):
    """:class:`Scenario` from a resolved document."""
    d = resolved
    config = _agents(d)
    targets = _points(d["targets"], "targets")
    anchors = {i: _points([p], "anchors_desired")[0]
               for i, p in _id_map(d["anchors_desired"], "anchors_desired").items()}
    M = d["M"]
    if isinstance(M, dict):
        M = {i: int(_number({"M": m}, "M")) for i, m in _id_map(M, "M").items()}
    else:
        M = _number(d, "M")
        if M != int(M):
            raise ScenarioError("'M' must be an integer")
        M = int(M)
    if d["mode"] not in ("ideal", "aoc"):
        raise ScenarioError(f"'mode' must be 'ideal' or 'aoc', got {d['mode']!r}")
    return Scenario(
        config=config,
        targets=targets,
        anchors_desired=anchors,
        M=M,
        alpha=_number(d, "alpha"),
        beta=_number(d, "beta", allow_none=True),
        gamma=_number(d, "gamma"),
        epsilon=_number(d, "epsilon"),
        mode=d["mode"],
        eta=_number(d, "eta"),
        max_steps=_number(d, "max_steps", int),
        tol=_number(d, "tol", allow_none=True),
        seed=_number(d, "seed", int),
        core_mode=d["core_mode"],
        perturb_degenerate=bool(d["perturb_degenerate"]),
        schedule=d["schedule"],
        aoc_sampling=d["aoc_sampling"],
    )


# -- writers -----------------------------------------------------------------

def atomic_write(path, data):
    """Write ``data`` (str or bytes) to ``path`` through a temporary file."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-")
    try:
        os.chmod(tmp, 0o644)
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dumps(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def trajectory_csv(traj):
    rows = []
    for t in range(traj.positions.shape[0]):
        for k, i in enumerate(traj.order):
            x, y = traj.positions[t, k]
            rows.append((t, i, repr(float(x)), repr(float(y))))
    return _csv(("t", "id", "x", "y"), rows)


def sparse_triplets(G):
    r, c = np.nonzero(G)
    return [[int(a), int(b), float(G[a, b])] for a, b in zip(r, c)]


def trajectory_doc(traj):
    """Full trajectory: positions, sparse ``Gamma[t]`` (row, col, value) and events."""
    return {
        "order": [int(i) for i in traj.order],
        "steps": traj.steps,
        "converged": bool(traj.converged),
        "solves": int(traj.solves),
        "positions": traj.positions.tolist(),
        "gammas": [sparse_triplets(G) for G in traj.gammas],
        "events": traj.events,
    }


def load_trajectory(doc, scenario):
    """Rebuild a :class:`Trajectory` from :func:`trajectory_doc` output."""
    try:
        order = [int(i) for i in doc["order"]]
        positions = np.array(doc["positions"], dtype=float)
        n = len(order)
        gammas = np.zeros((len(doc["gammas"]), n, n))
        for t, trip in enumerate(doc["gammas"]):
            for r, c, v in trip:
                gammas[t, int(r), int(c)] = float(v)
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ScenarioError(f"malformed trajectory: {exc}") from exc
    dnn, desired = prepare(scenario)
    if order != dnn.order:
        raise ScenarioError("trajectory agent order does not match the scenario structure")
    return Trajectory(order, positions, gammas, doc.get("events", []),
                      bool(doc.get("converged", False)), dnn, desired,
                      agent_tolerances(scenario, dnn, desired), int(doc.get("solves", 0)))


def paths_csv(traj):
    """One polyline per agent: ``id, seq, x, y``."""
    rows = []
    for k, i in enumerate(traj.order):
        for t in range(traj.positions.shape[0]):
            x, y = traj.positions[t, k]
            rows.append((i, t, repr(float(x)), repr(float(y))))
    return _csv(("id", "seq", "x", "y"), rows)


def errors_csv(traj):
    """Distance to the desired position per agent and step, with desired x/y."""
    err = traj.errors()
    z = traj.plan.z
    rows = []
    for t in range(err.shape[0]):
        for k, i in enumerate(traj.order):
            rows.append((t, i, repr(float(err[t, k])), repr(float(z[k, 0])), repr(float(z[k, 1]))))
    return _csv(("t", "id", "error", "px", "py"), rows)
