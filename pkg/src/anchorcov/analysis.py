"""Post-hoc checks on a run: row-stochasticity, follower-block contraction,
anchor mass of windowed products, and per-agent convergence.

Rows and columns of every ``Gamma[t]`` are in layer order, anchors first, so
each matrix splits as ``[[I, 0], [B, A]]`` with ``A`` the follower block. The
follower block of a product of ``Gamma`` matrices is the product of the ``A``
blocks; ``Phi(t, s) = A[t-1] ... A[s]``.
"""

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import WindowExceedsRun

ROW_TOL = 1e-10
NORM_TOL = 1e-10
ENVELOPE_TOL = 1e-9


def inf_norm(A):
    """Infinity norm with compensated row sums."""
    if A.size == 0:
        return 0.0
    return max(math.fsum(row) for row in np.abs(A))


def check_row_stochastic(gammas):
    """Per-step ``max |row sum - 1|`` and most negative entry.

    Returns ``(deviations, min_entry)``; a run passes when every deviation is
    at most 1e-10 and ``min_entry >= 0``.
    """
    gammas = np.asarray(gammas, dtype=float)
    if gammas.ndim == 2:
        gammas = gammas[None]
    devs = [max((abs(math.fsum(row) - 1.0) for row in G), default=0.0) for G in gammas]
    min_entry = float(gammas.min()) if gammas.size else 0.0
    return devs, min(min_entry, 0.0)


def _split(n_anchors, gammas):
    gammas = np.asarray(gammas, dtype=float)
    return gammas[:, n_anchors:, n_anchors:]


def _window(T, steps):
    if T < 1:
        raise ValueError(f"window length must be >= 1, got {T}")
    if T > steps:
        raise WindowExceedsRun(f"window of {T} steps exceeds a run of {steps} steps")


def anchor_mass(gammas, n_anchors, T):
    """Minimum over windows and followers of the anchor-column mass of
    ``Gamma[t+T-1] ... Gamma[t]``."""
    gammas = np.asarray(gammas, dtype=float)
    _window(T, len(gammas))
    A = _split(n_anchors, gammas)
    if A.shape[1] == 0:
        return 1.0
    worst = np.inf
    for t in range(len(gammas) - T + 1):
        P = np.eye(A.shape[1])
        for k in range(t, t + T):
            P = A[k] @ P
        worst = min(worst, 1.0 - inf_norm(P))
    return float(worst)


def find_t_hat(gammas, n_anchors, eta, t_max=None):
    """Smallest window length whose anchor mass is at least ``eta``, or None."""
    steps = len(gammas)
    t_max = steps if t_max is None else min(t_max, steps)
    for T in range(1, t_max + 1):
        if anchor_mass(gammas, n_anchors, T) >= eta - NORM_TOL:
            return T
    return None


def window_norms(gammas, n_anchors, T):
    """``||A[t+T-1] ... A[t]||_inf`` for every window start ``t``."""
    gammas = np.asarray(gammas, dtype=float)
    _window(T, len(gammas))
    A = _split(n_anchors, gammas)
    out = []
    for t in range(len(gammas) - T + 1):
        P = np.eye(A.shape[1])
        for k in range(t, t + T):
            P = A[k] @ P
        out.append(inf_norm(P))
    return out


def envelope_margins(gammas, n_anchors, eta, T, stride=1):
    """Smallest ``(1-eta)**floor((t-s)/T) - ||Phi(t, s)||_inf`` over pairs ``s < t``.

    Start points ``s`` are taken every ``stride`` steps; every ``t`` after
    each start is checked.
    """
    gammas = np.asarray(gammas, dtype=float)
    _window(T, len(gammas))
    A = _split(n_anchors, gammas)
    n = A.shape[1]
    worst, where = np.inf, None
    for s in range(0, len(gammas), stride):
        P = np.eye(n)
        for t in range(s + 1, len(gammas) + 1):
            P = A[t - 1] @ P
            margin = (1.0 - eta) ** ((t - s) // T) - inf_norm(P)
            if margin < worst:
                worst, where = margin, (s, t)
    return float(worst), where


def contraction_check(gammas, n_anchors, eta, T, stride=1):
    """Window norms against ``1 - eta`` plus the multi-window envelope."""
    norms = window_norms(gammas, n_anchors, T)
    margin, where = envelope_margins(gammas, n_anchors, eta, T, stride)
    ok = max(norms, default=0.0) <= 1.0 - eta + NORM_TOL and margin >= -ENVELOPE_TOL
    return {"T": T, "window_norms": norms, "max_window_norm": max(norms, default=0.0),
            "envelope_margin": margin, "envelope_worst_pair": where, "passed": bool(ok)}


def settling_times(errors, tolerances):
    """First step from which each agent stays within tolerance; None if never.

    ``errors`` has shape (steps + 1, N). An agent with zero error is within
    any tolerance, including zero.
    """
    errors = np.asarray(errors, dtype=float)
    tol = np.asarray(tolerances, dtype=float)
    ok = (errors < tol[None]) | (errors <= 0.0)
    out = []
    for k in range(errors.shape[1]):
        bad = np.flatnonzero(~ok[:, k])
        if len(bad) == 0:
            out.append(0)
        elif bad[-1] == len(ok) - 1:
            out.append(None)
        else:
            out.append(int(bad[-1]) + 1)
    return out


def convergence_report(trajectory, tol=None):
    """Settling time and terminal error per agent, plus per-layer medians."""
    order = trajectory.order
    errors = trajectory.errors()
    if tol is None:
        tols = [trajectory.tolerances[i] for i in order]
    else:
        tols = [0.0 if i in trajectory.dnn.layers[0] else float(tol) for i in order]
    settle = settling_times(errors, tols)
    layer_of = trajectory.dnn.layer_of
    per_layer = {}
    for i, s in zip(order, settle):
        per_layer.setdefault(layer_of[i], []).append(s)
    medians = {}
    for l, vals in sorted(per_layer.items()):
        done = [v for v in vals if v is not None]
        medians[l] = float(np.median(done)) if len(done) == len(vals) else None
    return {
        "settling": {int(i): s for i, s in zip(order, settle)},
        "terminal_error": {int(i): float(e) for i, e in zip(order, errors[-1])},
        "tolerance": {int(i): float(t) for i, t in zip(order, tols)},
        "layer_median_settling": medians,
        "all_within_tolerance": bool(np.all((errors[-1] < np.asarray(tols)) | (errors[-1] <= 0))),
    }


@dataclass
class StabilityReport:
    row_sum_deviation: list = None
    min_entry: float = None
    eta: float = None
    T_hat: int = None
    anchor_mass: float = None
    window_norms: list = None
    max_window_norm: float = None
    envelope_margin: float = None
    settling: dict = None
    terminal_error: dict = None
    layer_median_settling: dict = None
    checks: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(self.checks.values())

    def to_dict(self):
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, default=_jsonable)

    def to_text(self):
        lines = []
        if self.row_sum_deviation is not None:
            lines.append(f"row sums: max deviation {max(self.row_sum_deviation, default=0):.3e}, "
                         f"min entry {self.min_entry:.3e}")
        if self.eta is not None:
            lines.append(f"anchor mass: eta {self.eta:g}, T_hat {self.T_hat}")
        if self.max_window_norm is not None:
            lines.append(f"window norms: max {self.max_window_norm:.6f} "
                         f"(bound {1 - self.eta:.6f}), envelope margin {self.envelope_margin:.3e}")
        if self.layer_median_settling is not None:
            meds = ", ".join(f"{l}: {m}" for l, m in self.layer_median_settling.items())
            lines.append(f"median settling per layer: {meds}")
            lines.append(f"max terminal error: {max(self.terminal_error.values()):.4f}")
        for name, ok in self.checks.items():
            lines.append(f"{'PASS' if ok else 'FAIL'} {name}")
        return "\n".join(lines) + "\n"


def _jsonable(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def analyze(trajectory, eta=None, T=None, tol=None, stride=1):
    """Run every check that applies to ``trajectory``.

    The contraction checks need ``eta``; with ``T`` unset the smallest window
    reaching anchor mass ``eta`` is searched for, and failing to find one
    within the run is reported as a failed check.
    """
    report = StabilityReport()
    gammas = trajectory.gammas
    devs, min_entry = check_row_stochastic(gammas)
    report.row_sum_deviation = [float(d) for d in devs]
    report.min_entry = float(min_entry)
    report.checks["row_stochastic"] = max(devs, default=0.0) <= ROW_TOL and min_entry >= 0.0

    n_anchors = len(trajectory.dnn.layers[0])
    if eta is not None and len(gammas):
        report.eta = float(eta)
        T_hat = T if T is not None else find_t_hat(gammas, n_anchors, eta)
        report.T_hat = T_hat
        report.checks["anchor_mass"] = T_hat is not None
        if T_hat is not None:
            report.anchor_mass = anchor_mass(gammas, n_anchors, T_hat)
            res = contraction_check(gammas, n_anchors, eta, T_hat, stride)
            report.window_norms = res["window_norms"]
            report.max_window_norm = res["max_window_norm"]
            report.envelope_margin = res["envelope_margin"]
            report.checks["contraction"] = res["passed"]

    conv = convergence_report(trajectory, tol)
    report.settling = conv["settling"]
    report.terminal_error = conv["terminal_error"]
    report.layer_median_settling = conv["layer_median_settling"]
    report.checks["terminal_accuracy"] = conv["all_within_tolerance"]
    return report
