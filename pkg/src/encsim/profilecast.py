"""Profile-based DTN forwarding.

A behavioral profile is a node's share of time per location. Bundles carry a
target profile and one of two delivery modes:

* ``TargetedGradient``: deliver to nodes whose profile matches the target
  (similarity >= sigma) and hand copies up the similarity gradient (peer must
  beat the carrier by more than epsilon).
* ``InterestDissemination``: deliver to and copy among every node whose
  interest profile matches, so interested nodes spread it between themselves.

Forwarding always copies; the carrier keeps its custody. Peers first swap
summary vectors (ids held or already delivered) so nothing is sent twice.
"""

import math
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Union

from .errors import EmptyProfile
from .trace import VisitRecord


class BehavioralProfile(Mapping):
    """Normalized location-preference vector (weights sum to 1)."""

    __slots__ = ("_weights", "_norm")

    def __init__(self, weights):
        weights = {str(k): float(v) for k, v in dict(weights).items() if float(v) != 0.0}
        if not weights:
            raise EmptyProfile("profile needs at least one location with positive weight")
        if any(v < 0 or not math.isfinite(v) for v in weights.values()):
            raise ValueError("profile weights must be finite and non-negative")
        total = math.fsum(weights.values())
        self._weights = {k: weights[k] / total for k in sorted(weights)}
        self._norm = math.sqrt(math.fsum(v * v for v in self._weights.values()))

    def __getitem__(self, key):
        return self._weights[key]

    def __iter__(self):
        return iter(self._weights)

    def __len__(self):
        return len(self._weights)

    def __repr__(self):
        return f"BehavioralProfile({self._weights!r})"

    def __eq__(self, other):
        if isinstance(other, BehavioralProfile):
            return self._weights == other._weights
        return NotImplemented

    def __hash__(self):
        return hash(tuple(self._weights.items()))

    def to_dict(self):
        return dict(self._weights)


def similarity(u: BehavioralProfile, v: BehavioralProfile) -> float:
    """Cosine similarity over the union of locations (missing = 0)."""
    if len(u) > len(v):
        u, v = v, u
    dot = math.fsum(w * v[k] for k, w in u.items() if k in v)
    return min(1.0, max(0.0, dot / (u._norm * v._norm)))


def build_profile(visits: Sequence[VisitRecord], node) -> BehavioralProfile:
    totals = defaultdict(int)
    for v in visits:
        if v.node == node:
            totals[v.location] += v.end - v.start
    if not totals:
        raise EmptyProfile(f"node {node!r} has no visits")
    return BehavioralProfile(totals)


@dataclass(frozen=True)
class TargetedGradient:
    sigma: float = 0.8
    epsilon: float = 0.01
    name = "targeted"

    def __post_init__(self):
        if not 0 <= self.sigma <= 1:
            raise ValueError(f"sigma must lie in [0, 1], got {self.sigma!r}")
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon!r}")


@dataclass(frozen=True)
class InterestDissemination:
    sigma: float = 0.8
    name = "dissemination"

    def __post_init__(self):
        if not 0 <= self.sigma <= 1:
            raise ValueError(f"sigma must lie in [0, 1], got {self.sigma!r}")


DeliveryMode = Union[TargetedGradient, InterestDissemination]


def make_mode(name, sigma=0.8, epsilon=0.01) -> DeliveryMode:
    if name in ("targeted", "gradient", "targeted_gradient"):
        return TargetedGradient(sigma, epsilon)
    if name in ("dissemination", "interest", "interest_dissemination"):
        return InterestDissemination(sigma)
    raise ValueError(f"unknown delivery mode {name!r}")


@dataclass(frozen=True)
class MessageBundle:
    id: str
    src: str
    target_profile: BehavioralProfile
    mode: DeliveryMode = TargetedGradient()
    ttl: float = 6 * 3600
    hop_limit: int = 8
    created: float = 0
    payload_size: int = 0

    def __post_init__(self):
        if not self.ttl > 0:
            raise ValueError(f"bundle {self.id}: ttl must be positive")
        if self.hop_limit < 1:
            raise ValueError(f"bundle {self.id}: hop_limit must be at least 1")

    def expires(self):
        return self.created + self.ttl

    def alive(self, now):
        return now <= self.created + self.ttl


@dataclass(frozen=True)
class Custody:
    bundle: MessageBundle
    hops: int = 0
    received_at: float = 0


@dataclass
class BufferState:
    """A node's bundle store plus the ids it has already had delivered."""

    capacity: int = 1024
    bundles: Dict[str, Custody] = field(default_factory=dict)
    delivered: set = field(default_factory=set)

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("buffer capacity must be at least 1")

    def __contains__(self, bundle_id):
        return bundle_id in self.bundles

    def __len__(self):
        return len(self.bundles)

    def summary_vector(self):
        return set(self.bundles) | self.delivered

    def insert(self, bundle: MessageBundle, hops=0, received_at=0) -> List[str]:
        """Store a copy; returns ids evicted to make room (oldest created first)."""
        if bundle.id in self.bundles:
            return []
        evicted = []
        while len(self.bundles) >= self.capacity:
            victim = min(self.bundles.values(), key=lambda c: (c.bundle.created, c.bundle.id))
            del self.bundles[victim.bundle.id]
            evicted.append(victim.bundle.id)
        self.bundles[bundle.id] = Custody(bundle, hops, received_at)
        return evicted

    def expired(self, now):
        return sorted(
            (c for c in self.bundles.values() if not c.bundle.alive(now)),
            key=lambda c: (c.bundle.created, c.bundle.id),
        )


def prune(buf: BufferState, now) -> BufferState:
    """Copy of ``buf`` without bundles whose ``created + ttl`` lies before ``now``."""
    kept = {bid: c for bid, c in buf.bundles.items() if c.bundle.alive(now)}
    return BufferState(buf.capacity, kept, set(buf.delivered))


@dataclass(frozen=True)
class ForwardAction:
    kind: str  # "deliver" | "forward"
    bundle_id: str
    src: str
    dst: str
    similarity: float


@dataclass
class RoutingNode:
    node: str
    profile: BehavioralProfile
    buffer: BufferState
    interest: Optional[BehavioralProfile] = None

    def profile_for(self, mode):
        if isinstance(mode, InterestDissemination) and self.interest is not None:
            return self.interest
        return self.profile


def on_encounter(carrier: RoutingNode, peer: RoutingNode, t) -> List[ForwardAction]:
    """Decide what ``carrier`` hands to ``peer`` at time ``t``.

    Only live bundles the peer neither holds nor has had delivered are
    considered. In dissemination mode delivery and copying coincide.
    """
    if carrier.node == peer.node:
        raise ValueError("a node cannot encounter itself")
    known = peer.buffer.summary_vector()
    actions = []
    custodies = sorted(carrier.buffer.bundles.values(), key=lambda c: (c.bundle.created, c.bundle.id))
    for custody in custodies:
        b = custody.bundle
        if b.id in known or not b.alive(t):
            continue
        can_copy = custody.hops + 1 <= b.hop_limit
        peer_sim = similarity(peer.profile_for(b.mode), b.target_profile)
        if isinstance(b.mode, TargetedGradient):
            if peer_sim >= b.mode.sigma and peer.node != b.src:
                actions.append(ForwardAction("deliver", b.id, carrier.node, peer.node, peer_sim))
            carrier_sim = similarity(carrier.profile_for(b.mode), b.target_profile)
            if can_copy and peer_sim > carrier_sim + b.mode.epsilon:
                actions.append(ForwardAction("forward", b.id, carrier.node, peer.node, peer_sim))
        else:
            if peer_sim >= b.mode.sigma:
                if peer.node != b.src:
                    actions.append(ForwardAction("deliver", b.id, carrier.node, peer.node, peer_sim))
                if can_copy:
                    actions.append(ForwardAction("forward", b.id, carrier.node, peer.node, peer_sim))
    return actions


def qualifies(node: RoutingNode, bundle: MessageBundle) -> bool:
    return node.node != bundle.src and similarity(node.profile_for(bundle.mode), bundle.target_profile) >= bundle.mode.sigma
