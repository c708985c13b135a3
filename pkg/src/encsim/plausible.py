"""Contact-to-mobility inference: positions that agree with an encounter trace.

Each slot is solved by relaxation, warm-started from the previous slot. Pairs
in contact but too far apart pull together like springs, pairs not in contact
but too close push apart, and every node stays within ``v_max * slot_width``
of where it was in the previous slot.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_positive, check_random_state
from .mobility import Arena
from .trace import EncounterTrace, bin_pair_series, n_bins

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InferConfig:
    slot_width: float = 60.0
    max_iters: int = 200
    step_size: float = 0.5
    margin: float = 0.05
    seed: int = 0


@dataclass(frozen=True)
class PositionTrace:
    nodes: Tuple[str, ...]
    slot_width: float
    positions: np.ndarray  # (n_slots, n_nodes, 2)
    satisfaction: np.ndarray  # (n_slots,)
    infeasible_slots: Tuple[int, ...] = ()

    @property
    def n_slots(self):
        return self.positions.shape[0]

    @property
    def satisfaction_ratio(self):
        return float(self.satisfaction.mean()) if self.satisfaction.size else 1.0

    def to_csv(self) -> bytes:
        lines = ["slot,t_s,node,x,y"]
        for s in range(self.n_slots):
            for j, node in enumerate(self.nodes):
                x, y = self.positions[s, j]
                lines.append(f"{s},{s * self.slot_width:g},{node},{x:.6f},{y:.6f}")
        return ("\n".join(lines) + "\n").encode("utf-8")


def contact_tensor(trace: EncounterTrace, nodes, slot_width):
    """Boolean ``(n_slots, n, n)`` array: pair in contact at any time in the slot."""
    index = {n: i for i, n in enumerate(nodes)}
    contact = np.zeros((n_bins(trace.horizon, slot_width), len(nodes), len(nodes)), dtype=bool)
    for a, b in trace.pairs():
        on = bin_pair_series(trace, (a, b), slot_width).values.astype(bool)
        i, j = index[a], index[b]
        contact[:, i, j] = on
        contact[:, j, i] = on
    return contact


def _satisfied(P, C, r):
    d = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=-1)
    iu = np.triu_indices(len(P), 1)
    ok = np.where(C, d <= r, d > r)[iu]
    return ok


def _relax_slot(P, prev, C, arena, cfg, rng, max_step):
    n = len(P)
    r = arena.range
    r_in, r_out = r * (1 - cfg.margin), r * (1 + cfg.margin)
    off_diag = ~np.eye(n, dtype=bool)
    bounds = np.array([arena.width, arena.height])
    for _ in range(cfg.max_iters):
        if _satisfied(P, C, r).all():
            break
        diff = P[None, :, :] - P[:, None, :]  # diff[i, j] points from i to j
        d = np.linalg.norm(diff, axis=-1)
        coincident = (d == 0) & off_diag
        if coincident.any():
            # nudge stacked nodes apart in a reproducible random direction
            for i, j in zip(*np.nonzero(np.triu(coincident))):
                P[j] += rng.normal(scale=1e-3 * r, size=2)
            continue
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(off_diag[..., None], diff / d[..., None], 0.0)
        pull = np.where(C & (d > r_in), d - r_in, 0.0)
        push = np.where(~C & off_diag & (d <= r_out), r_out - d, 0.0)
        step = 0.5 * cfg.step_size * (pull - push)
        P = P + (step[..., None] * unit).sum(axis=1)
        P = np.clip(P, 0.0, bounds)
        if prev is not None:
            delta = P - prev
            norm = np.linalg.norm(delta, axis=1)
            over = norm > max_step
            P[over] = prev[over] + delta[over] * (max_step / norm[over])[:, None]
    return P


def infer_plausible_positions(trace: EncounterTrace, arena: Arena = Arena(), cfg: InferConfig = InferConfig()):
    """Synthesize per-slot positions consistent with ``trace``.

    Slots whose constraints are still violated after ``max_iters`` are listed
    in ``infeasible_slots`` rather than raising.
    """
    check_positive(cfg.slot_width, "slot_width")
    if not trace.records:
        raise ValueError("trace has no encounters")
    nodes = tuple(sorted(trace.nodes))
    rng = check_random_state(cfg.seed)
    C = contact_tensor(trace, nodes, cfg.slot_width)
    # shrink slightly so rounding never pushes a step past the bound
    max_step = arena.v_max * cfg.slot_width * (1 - 1e-9)

    P = np.column_stack([rng.uniform(0, arena.width, len(nodes)), rng.uniform(0, arena.height, len(nodes))])
    prev = None
    out = np.empty((len(C), len(nodes), 2))
    sat = np.empty(len(C))
    infeasible = []
    for s in range(len(C)):
        P = _relax_slot(P.copy(), prev, C[s], arena, cfg, rng, max_step)
        ok = _satisfied(P, C[s], arena.range)
        sat[s] = ok.mean() if ok.size else 1.0
        if not ok.all():
            infeasible.append(s)
        out[s] = P
        prev = P
    if infeasible:
        logger.info("%d of %d slots left with violated constraints", len(infeasible), len(C))
    return PositionTrace(nodes, float(cfg.slot_width), out, sat, tuple(infeasible))


def displacement_violations(pt: PositionTrace, v_max):
    """Count of per-node slot-to-slot moves longer than ``v_max * slot_width``."""
    steps = np.linalg.norm(np.diff(pt.positions, axis=0), axis=-1)
    return int((steps > v_max * pt.slot_width).sum())


class PlausibleMobility(BaseEstimator):
    """Estimator front end for :func:`infer_plausible_positions`.

    ``fit(trace)`` stores ``positions_`` (``(n_slots, n_nodes, 2)``),
    ``satisfaction_`` and ``infeasible_slots_``; ``fit_transform`` returns
    the positions array.
    """

    def __init__(self, width=100.0, height=100.0, range=10.0, v_max=0.5,
                 slot_width=60.0, max_iters=200, step_size=0.5, random_state=0):
        self.width = width
        self.height = height
        self.range = range
        self.v_max = v_max
        self.slot_width = slot_width
        self.max_iters = max_iters
        self.step_size = step_size
        self.random_state = random_state

    def fit(self, X, y=None):
        if not isinstance(X, EncounterTrace):
            raise TypeError(f"expected an EncounterTrace, got {type(X).__name__}")
        arena = Arena(self.width, self.height, self.range, self.v_max)
        cfg = InferConfig(self.slot_width, self.max_iters, self.step_size, seed=self.random_state)
        result = infer_plausible_positions(X, arena, cfg)
        self.trace_ = result
        self.nodes_ = result.nodes
        self.positions_ = result.positions
        self.satisfaction_ = result.satisfaction
        self.infeasible_slots_ = result.infeasible_slots
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).positions_

    def score(self, X=None, y=None):
        """Mean constraint satisfaction of the fitted positions."""
        check_is_fitted(self, "satisfaction_")
        return float(self.satisfaction_.mean())
