"""Agent personalities and the behavior state machine that drives a robot.

A personality holds, per peer, attraction/repulsion gains, a periodic intent
schedule (sum of cosines) and an empirical dwell-time distribution. The
state machine cycles Idle -> Seek -> Dwell -> Repel -> Idle, one target at a
time, and emits a motion command every tick.
"""

import json
import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Dict, Tuple, Union

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_nonnegative, check_positive
from .errors import UnknownNode, UnknownPeer
from .spectrum import PeakPolicy, PeriodicComponent, analyze_series
from .trace import EncounterTrace, bin_pair_series, canonical_pair

if TYPE_CHECKING:  # pragma: no cover
    from .mobility import SensorReading

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PairPersonality:
    attract_gain: float = 1.0
    repulse_gain: float = 1.0
    components: Tuple[PeriodicComponent, ...] = ()
    intent_threshold: float = 0.0
    dwell_samples: Tuple[float, ...] = (60.0,)
    refractory: float = 60.0

    def __post_init__(self):
        for name in ("attract_gain", "repulse_gain", "refractory"):
            check_nonnegative(getattr(self, name), name)
        if not self.dwell_samples:
            raise ValueError("dwell_samples must not be empty")
        for d in self.dwell_samples:
            check_positive(d, "dwell sample")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "dwell_samples", tuple(float(d) for d in self.dwell_samples))

    def to_dict(self):
        return {
            "attract_gain": self.attract_gain,
            "repulse_gain": self.repulse_gain,
            "intent_threshold": self.intent_threshold,
            "refractory_s": self.refractory,
            "components": [c.to_dict() for c in self.components],
            "dwell_samples_s": list(self.dwell_samples),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            attract_gain=float(d.get("attract_gain", 1.0)),
            repulse_gain=float(d.get("repulse_gain", d.get("attract_gain", 1.0))),
            components=tuple(PeriodicComponent.from_dict(c) for c in d.get("components", [])),
            intent_threshold=float(d.get("intent_threshold", 0.0)),
            dwell_samples=tuple(float(x) for x in d.get("dwell_samples_s", [60.0])),
            refractory=float(d.get("refractory_s", 60.0)),
        )


@dataclass(frozen=True)
class Personality:
    node: str
    pairs: Dict[str, PairPersonality] = field(default_factory=dict)
    drag: float = 0.0

    def __post_init__(self):
        check_nonnegative(self.drag, "drag")
        if self.node in self.pairs:
            raise ValueError(f"personality of {self.node!r} cannot list itself as a peer")

    def to_dict(self):
        return {
            "node": self.node,
            "drag": self.drag,
            "pairs": {peer: self.pairs[peer].to_dict() for peer in sorted(self.pairs)},
        }

    @classmethod
    def from_dict(cls, d):
        pairs = {str(peer): PairPersonality.from_dict(pp) for peer, pp in d.get("pairs", {}).items()}
        return cls(str(d["node"]), pairs, float(d.get("drag", 0.0)))

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def loads(cls, text):
        return cls.from_dict(json.loads(text))


# Behavior states. Exactly one target engagement at a time.


@dataclass(frozen=True)
class Idle:
    name = "idle"


@dataclass(frozen=True)
class Seek:
    target: str
    name = "seek"


@dataclass(frozen=True)
class Dwell:
    target: str
    since: float
    duration: float
    name = "dwell"


@dataclass(frozen=True)
class Repel:
    target: str
    until: float
    name = "repel"


BehaviorState = Union[Idle, Seek, Dwell, Repel]
IDLE = Idle()


@dataclass(frozen=True)
class Drive:
    speed: float
    heading_rate: float = 0.0


@dataclass(frozen=True)
class Stop:
    pass


MotionCommand = Union[Drive, Stop]
STOP = Stop()


def intent(pp: PairPersonality, t) -> float:
    """Superposed periodic schedule ``sum m * cos(2 pi t / period + phase)``."""
    return sum(c.magnitude * math.cos(TWO_PI * t / c.period + c.phase) for c in pp.components)


def intent_active(pp: PairPersonality, t) -> bool:
    # a peer with no periodic components has no schedule to follow
    return bool(pp.components) and intent(pp, t) >= pp.intent_threshold


def _wrap_angle(a):
    return (a + math.pi) % TWO_PI - math.pi


def _drive(bearing, heading, gain, drag, v_max, dt):
    speed = min(gain / (1.0 + drag), v_max)
    if speed <= 0:
        return STOP
    return Drive(speed, _wrap_angle(bearing - heading) / dt)


def sample_dwell(pp: PairPersonality, rng) -> float:
    samples = pp.dwell_samples
    return samples[int(rng.integers(len(samples)))]


def step_state(state, sensors: "SensorReading", personality: Personality, t, rng, v_max=0.5, dt=1.0):
    """Advance one agent's behavior by one tick; returns ``(state, command)``.

    Seeking drives along the sensed bearing to the target; a virtual wall
    (target within range) stops the robot and starts a dwell whose length is
    drawn once from the pair's dwell samples. When the dwell is over the
    robot repels away for ``refractory`` seconds and then goes idle.
    """
    pairs = personality.pairs
    walls = sensors.virtual_wall
    for peer in walls:
        if peer not in pairs:
            raise UnknownPeer(f"sensor reports peer {peer!r} unknown to {personality.node!r}")

    drag = personality.drag
    heading = sensors.heading

    if isinstance(state, Repel):
        if t >= state.until:
            return IDLE, STOP
        away = sensors.bearing[state.target] + math.pi
        return state, _drive(away, heading, pairs[state.target].repulse_gain, drag, v_max, dt)

    if isinstance(state, Dwell):
        pp = pairs[state.target]
        if t - state.since >= state.duration:
            new = Repel(state.target, t + pp.refractory)
            away = sensors.bearing[state.target] + math.pi
            return new, _drive(away, heading, pp.repulse_gain, drag, v_max, dt)
        if not walls.get(state.target, False):
            state = Seek(state.target)
        else:
            return state, STOP

    if isinstance(state, Idle):
        best = None
        for peer in sorted(walls):
            pp = pairs[peer]
            if not intent_active(pp, t):
                continue
            value = intent(pp, t)
            if best is None or value > best[0]:
                best = (value, peer)
        if best is None:
            return IDLE, STOP
        state = Seek(best[1])

    target = state.target
    pp = pairs[target]
    if walls.get(target, False):
        return Dwell(target, t, sample_dwell(pp, rng)), STOP
    return state, _drive(sensors.bearing[target], heading, pp.attract_gain, drag, v_max, dt)


@dataclass(frozen=True)
class FitConfig:
    bin_width: float = 86400.0
    policy: PeakPolicy = PeakPolicy()
    top_m: int = 1
    drag: float = 0.0


def fit_personality(trace: EncounterTrace, node, cfg: FitConfig = FitConfig()) -> Personality:
    """Derive a node's personality from its encounters in ``trace``.

    Per peer: the strongest ``top_m`` periodic components of the pair's
    indicator series, dwell samples equal to the observed encounter
    durations, and gains equal to the pair's encounter count over the node's
    busiest pair.
    """
    if node not in trace.nodes:
        raise UnknownNode(f"node {node!r} is not in the trace")
    counts, durations = {}, {}
    for rec in trace.records:
        if node not in rec.pair:
            continue
        peer = rec.b if rec.a == node else rec.a
        counts[peer] = counts.get(peer, 0) + 1
        durations.setdefault(peer, []).append(rec.duration)
    if not counts:
        return Personality(node, {}, cfg.drag)
    top = max(counts.values())
    pairs = {}
    for peer in sorted(counts):
        series = bin_pair_series(trace, canonical_pair(node, peer), cfg.bin_width)
        comps = ()
        if len(series) >= 2:
            _, _, found = analyze_series(series, cfg.policy)
            comps = tuple(found[: cfg.top_m])
        dwell = durations[peer]
        gain = counts[peer] / top
        pairs[peer] = PairPersonality(
            attract_gain=gain,
            repulse_gain=gain,
            components=comps,
            intent_threshold=0.0,
            dwell_samples=tuple(float(d) for d in dwell),
            refractory=float(np.mean(dwell)),
        )
    return Personality(node, pairs, cfg.drag)


class PersonalityFitter(BaseEstimator):
    """Fit personalities for every node of an :class:`EncounterTrace`.

    After ``fit``, ``personalities_`` maps node id to :class:`Personality`.
    """

    def __init__(self, bin_width=86400.0, c=2.0, max_peaks=4, top_m=1, drag=0.0):
        self.bin_width = bin_width
        self.c = c
        self.max_peaks = max_peaks
        self.top_m = top_m
        self.drag = drag

    def fit(self, X, y=None):
        if not isinstance(X, EncounterTrace):
            raise TypeError(f"expected an EncounterTrace, got {type(X).__name__}")
        check_positive(self.bin_width, "bin_width")
        cfg = FitConfig(self.bin_width, PeakPolicy(self.c, self.max_peaks), self.top_m, self.drag)
        self.personalities_ = {n: fit_personality(X, n, cfg) for n in sorted(X.nodes)}
        return self

    def __getitem__(self, node):
        check_is_fitted(self, "personalities_")
        return self.personalities_[node]
