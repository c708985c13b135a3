"""Scenario configuration, the simulation loop, routing replay, metrics and fidelity.

A run is: place the nodes, step the world tick by tick, feed every encounter
event to the routing engine, and summarize. Routing only ever sees encounter
events, so replaying a recorded encounter log reproduces a run's message log
exactly.
"""

import csv
import io
import json
import logging
import math
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .errors import ConfigError, EncsimError, MalformedRow, NoOverlap
from .mobility import Arena, EncounterEvent, make_world, step_world
from .personality import Personality
from .profilecast import (
    BehavioralProfile,
    BufferState,
    MessageBundle,
    RoutingNode,
    make_mode,
    on_encounter,
    qualifies,
)
from .spectrum import PeakPolicy, analyze_series, component_index
from .trace import EncounterRecord, EncounterTrace, bin_pair_series, canonical_pair

logger = logging.getLogger(__name__)

POSITION_HEADER = "tick,node,x,y,heading,state"
ENCOUNTER_EVENT_HEADER = "type,node_a,node_b,t_s"
MESSAGE_HEADER = "event,bundle_id,from,to,t_s,similarity"


# --- configuration --------------------------------------------------------


@dataclass
class NodeSpec:
    id: str
    personality: Personality
    profile: Optional[BehavioralProfile] = None
    interest: Optional[BehavioralProfile] = None
    position: Optional[Tuple[float, float]] = None


@dataclass
class SimConfig:
    seed: int
    duration: int
    nodes: List[NodeSpec]
    arena: Arena = field(default_factory=Arena)
    bundles: List[MessageBundle] = field(default_factory=list)
    capacity: int = 1024
    contact_refresh: int = 30
    position_log_every: int = 1

    @property
    def node_ids(self):
        return [n.id for n in self.nodes]

    @property
    def personalities(self):
        return {n.id: n.personality for n in self.nodes}


def _int_field(d, key, problems, default=None, minimum=None):
    if key not in d:
        if default is None:
            problems.append((key, "required"))
        return default
    value = d[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not float(value).is_integer():
        problems.append((key, f"must be an integer, got {value!r}"))
        return default
    value = int(value)
    if minimum is not None and value < minimum:
        problems.append((key, f"must be >= {minimum}, got {value}"))
    return value


def _profile(value, where, problems):
    if value is None:
        return None
    try:
        return BehavioralProfile(value)
    except (EncsimError, ValueError, TypeError) as exc:
        problems.append((where, str(exc)))
        return None


def load_config(source, base_dir=None, overrides=None) -> SimConfig:
    """Build a :class:`SimConfig` from a JSON path, JSON text or a dict.

    Personality entries are either inline dicts or paths (relative to the
    config file). ``overrides`` may set ``seed``, ``mode``, ``sigma`` and
    ``epsilon``; mode overrides apply to every bundle. All problems are
    collected and raised together as one :class:`ConfigError`.
    """
    if isinstance(source, (str, Path)) and not str(source).lstrip().startswith("{"):
        path = Path(source)
        text = path.read_text(encoding="utf-8")
        base_dir = path.parent if base_dir is None else Path(base_dir)
        source = text
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as exc:
            raise ConfigError([("", f"invalid JSON: {exc}")]) from None
    if not isinstance(source, dict):
        raise ConfigError("config must be a JSON object")
    base_dir = Path(base_dir or ".")
    overrides = dict(overrides or {})
    d = dict(source)
    if overrides.get("seed") is not None:
        d["seed"] = overrides["seed"]
    problems = []

    seed = _int_field(d, "seed", problems)
    duration = _int_field(d, "duration_s", problems, minimum=1)

    arena = Arena()
    if "arena" in d:
        try:
            arena = Arena(**{k: float(v) for k, v in d["arena"].items()})
        except (TypeError, ValueError) as exc:
            problems.append(("arena", str(exc)))
    if not float(arena.dt).is_integer():
        problems.append(("arena.dt", "tick length must be a whole number of seconds"))

    routing = d.get("routing", {})
    mode_name = overrides.get("mode") or routing.get("mode", "targeted")
    sigma = overrides.get("sigma") if overrides.get("sigma") is not None else routing.get("sigma", 0.8)
    epsilon = overrides.get("epsilon") if overrides.get("epsilon") is not None else routing.get("epsilon", 0.01)
    default_mode = None
    try:
        default_mode = make_mode(mode_name, float(sigma), float(epsilon))
    except (TypeError, ValueError) as exc:
        problems.append(("routing", str(exc)))
    capacity = _int_field(routing, "capacity", problems, default=1024, minimum=1)
    refresh = _int_field(d, "contact_refresh_s", problems, default=30, minimum=1)
    log_every = _int_field(d, "position_log_every", problems, default=1, minimum=1)

    nodes, seen = [], set()
    raw_nodes = d.get("nodes")
    if not isinstance(raw_nodes, list) or not raw_nodes:
        problems.append(("nodes", "must be a non-empty list"))
        raw_nodes = []
    for idx, raw in enumerate(raw_nodes):
        where = f"nodes[{idx}]"
        node_id = str(raw.get("id", "")) if isinstance(raw, dict) else ""
        if not node_id:
            problems.append((f"{where}.id", "required"))
            continue
        if node_id in seen:
            problems.append((f"{where}.id", f"duplicate node id {node_id!r}"))
            continue
        seen.add(node_id)
        pers = Personality(node_id)
        ref = raw.get("personality")
        try:
            if isinstance(ref, str):
                pers = Personality.loads((base_dir / ref).read_text(encoding="utf-8"))
            elif isinstance(ref, dict):
                pers = Personality.from_dict({"node": node_id, **ref})
        except (EncsimError, ValueError, KeyError, TypeError) as exc:
            problems.append((f"{where}.personality", str(exc)))
        if pers.node != node_id:
            problems.append((f"{where}.personality", f"file describes node {pers.node!r}"))
        position = raw.get("position")
        if position is not None:
            position = tuple(float(v) for v in position)
            if len(position) != 2 or not (0 <= position[0] <= arena.width and 0 <= position[1] <= arena.height):
                problems.append((f"{where}.position", "must be [x, y] inside the arena"))
                position = None
        nodes.append(
            NodeSpec(
                node_id,
                pers,
                _profile(raw.get("profile"), f"{where}.profile", problems),
                _profile(raw.get("interest"), f"{where}.interest", problems),
                position,
            )
        )
    for spec in nodes:
        for peer in spec.personality.pairs:
            if peer not in seen:
                problems.append((f"nodes[{spec.id}].personality", f"references unknown node {peer!r}"))

    bundles, bundle_ids = [], set()
    for idx, raw in enumerate(d.get("bundles", [])):
        where = f"bundles[{idx}]"
        try:
            bid = str(raw["id"])
            if bid in bundle_ids:
                raise ValueError(f"duplicate bundle id {bid!r}")
            src = str(raw["src"])
            if src not in seen:
                raise ValueError(f"unknown source node {src!r}")
            mode = default_mode
            if "mode" in raw and not overrides.get("mode"):
                m = raw["mode"]
                mode = make_mode(m.get("name", "targeted"), float(m.get("sigma", 0.8)), float(m.get("epsilon", 0.01)))
            created = int(raw.get("created_s", 0))
            if duration is not None and not 0 <= created < duration:
                raise ValueError(f"created_s {created} outside the run")
            bundle = MessageBundle(
                bid, src, BehavioralProfile(raw["target_profile"]), mode,
                float(raw.get("ttl_s", 6 * 3600)), int(raw.get("hop_limit", 8)),
                created, int(raw.get("payload_size", 0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            problems.append((where, str(exc) if not isinstance(exc, KeyError) else f"missing {exc}"))
            continue
        bundle_ids.add(bid)
        bundles.append(bundle)
    if bundles:
        for spec in nodes:
            if spec.profile is None:
                problems.append((f"nodes[{spec.id}].profile", "required when bundles are scheduled"))

    if problems:
        raise ConfigError(problems)
    return SimConfig(seed, duration, nodes, arena, bundles, capacity, refresh, log_every)


# --- routing engine -------------------------------------------------------


@dataclass(frozen=True)
class MessageEvent:
    event: str
    bundle_id: str
    src: str
    dst: str
    t: float
    similarity: Optional[float] = None


class RoutingEngine:
    """Applies profile-cast exchanges to encounter events, tick by tick."""

    def __init__(self, nodes: Dict[str, RoutingNode], bundles, contact_refresh=30):
        self.nodes = nodes
        self.pending = sorted(bundles, key=lambda b: (b.created, b.id))
        self.refresh = contact_refresh
        self.active = {}
        self.log: List[MessageEvent] = []
        self._next_expiry = math.inf

    def _store(self, node, bundle, hops, t):
        buf = self.nodes[node].buffer
        for victim in buf.insert(bundle, hops, t):
            self.log.append(MessageEvent("evict", victim, node, "", t))
        self._next_expiry = min(self._next_expiry, bundle.expires())

    def _expire(self, t):
        self._next_expiry = math.inf
        for node in sorted(self.nodes):
            buf = self.nodes[node].buffer
            for custody in buf.expired(t):
                del buf.bundles[custody.bundle.id]
                self.log.append(MessageEvent("expire", custody.bundle.id, node, "", t))
            for custody in buf.bundles.values():
                self._next_expiry = min(self._next_expiry, custody.bundle.expires())

    def exchange(self, a, b, t):
        na, nb = self.nodes[a], self.nodes[b]
        actions = on_encounter(na, nb, t) + on_encounter(nb, na, t)
        for act in actions:
            # the other direction's copy may have evicted this bundle already
            custody = self.nodes[act.src].buffer.bundles.get(act.bundle_id)
            if custody is None:
                continue
            if act.kind == "deliver":
                self.nodes[act.dst].buffer.delivered.add(act.bundle_id)
            else:
                self._store(act.dst, custody.bundle, custody.hops + 1, t)
            self.log.append(MessageEvent(act.kind, act.bundle_id, act.src, act.dst, t, act.similarity))

    def tick(self, t, events=()):
        while self.pending and self.pending[0].created <= t:
            bundle = self.pending.pop(0)
            if bundle.src not in self.nodes:
                continue
            self.log.append(MessageEvent("create", bundle.id, bundle.src, "", t))
            self._store(bundle.src, bundle, 0, t)
        if t > self._next_expiry:
            self._expire(t)
        for e in events:
            if e.kind == "end":
                self.active.pop((e.a, e.b), None)
        started = set()
        for e in events:
            if e.kind == "start" and e.a in self.nodes and e.b in self.nodes:
                self.active[(e.a, e.b)] = t
                started.add((e.a, e.b))
                self.exchange(e.a, e.b, t)
        for pair in sorted(self.active):
            since = self.active[pair]
            if pair not in started and t > since and (t - since) % self.refresh == 0:
                self.exchange(pair[0], pair[1], t)


def routing_nodes(cfg: SimConfig):
    return {
        n.id: RoutingNode(n.id, n.profile, BufferState(cfg.capacity), n.interest)
        for n in cfg.nodes
        if n.profile is not None
    }


# --- metrics --------------------------------------------------------------


@dataclass
class Metrics:
    delivery_ratio: Optional[float]
    delivered: int
    qualifying: int
    latency_min: Optional[float]
    latency_median: Optional[float]
    latency_max: Optional[float]
    forwards: int
    encounters: Dict[str, int]
    encounter_total: int
    buffer_evictions: int
    expirations: int

    def to_dict(self):
        return {
            "delivery_ratio": self.delivery_ratio,
            "delivered": self.delivered,
            "qualifying": self.qualifying,
            "latency_s": {"min": self.latency_min, "median": self.latency_median, "max": self.latency_max},
            "forwards": self.forwards,
            "encounters": dict(sorted(self.encounters.items())),
            "encounter_total": self.encounter_total,
            "buffer_evictions": self.buffer_evictions,
            "expirations": self.expirations,
        }


def compute_metrics(cfg: SimConfig, encounter_events, message_events) -> Metrics:
    nodes = routing_nodes(cfg)
    qualifying = sum(qualifies(n, b) for b in cfg.bundles for n in nodes.values())
    created = {b.id: b.created for b in cfg.bundles}
    kinds = Counter(e.event for e in message_events)
    latencies = [e.t - created[e.bundle_id] for e in message_events if e.event == "deliver"]
    per_pair = Counter(f"{e.a}|{e.b}" for e in encounter_events if e.kind == "start")
    delivered = kinds["deliver"]
    return Metrics(
        delivery_ratio=delivered / qualifying if qualifying else None,
        delivered=delivered,
        qualifying=qualifying,
        latency_min=min(latencies) if latencies else None,
        latency_median=statistics.median(latencies) if latencies else None,
        latency_max=max(latencies) if latencies else None,
        forwards=kinds["forward"],
        encounters=dict(per_pair),
        encounter_total=sum(per_pair.values()),
        buffer_evictions=kinds["evict"],
        expirations=kinds["expire"],
    )


# --- runs -----------------------------------------------------------------


@dataclass
class ScenarioResult:
    positions: list
    encounters: List[EncounterEvent]
    messages: List[MessageEvent]
    metrics: Metrics
    trace: EncounterTrace


def run_scenario(cfg: SimConfig) -> ScenarioResult:
    """Run the full mobility + routing simulation described by ``cfg``."""
    dt = int(cfg.arena.dt)
    positions = {n.id: n.position for n in cfg.nodes if n.position is not None}
    world = make_world(cfg.arena, cfg.personalities, cfg.seed, positions, cfg.node_ids)
    engine = RoutingEngine(routing_nodes(cfg), cfg.bundles, cfg.contact_refresh)
    pos_log, enc_log = [], []
    for tick in range(cfg.duration // dt):
        t = tick * dt
        if tick % cfg.position_log_every == 0:
            for node in world.order:
                s = world.states[node]
                pos_log.append((tick, node, s.pos[0], s.pos[1], s.heading, s.behavior.name))
        world, events = step_world(world, t)
        enc_log.extend(events)
        engine.tick(t, events)
    metrics = compute_metrics(cfg, enc_log, engine.log)
    trace = trace_from_events(enc_log, cfg.duration, cfg.node_ids)
    logger.info("run finished: %d encounters, %d message events", metrics.encounter_total, len(engine.log))
    return ScenarioResult(pos_log, enc_log, engine.log, metrics, trace)


def replay_route(cfg: SimConfig, encounter_events) -> Tuple[List[MessageEvent], Metrics]:
    """Routing without mobility: drive the engine from a recorded encounter log."""
    dt = int(cfg.arena.dt)
    by_time = defaultdict(list)
    for e in encounter_events:
        by_time[e.t].append(e)
    times = sorted(set(range(0, cfg.duration, dt)) | {t for t in by_time if t < cfg.duration})
    engine = RoutingEngine(routing_nodes(cfg), cfg.bundles, cfg.contact_refresh)
    for t in times:
        events = sorted(by_time.get(t, ()), key=lambda e: (e.kind != "end", e.a, e.b))
        engine.tick(t, events)
    return engine.log, compute_metrics(cfg, encounter_events, engine.log)


def trace_from_events(events, horizon, nodes=None) -> EncounterTrace:
    """Pair up start/end events into records; open encounters close at ``horizon``."""
    open_, records = {}, []
    for e in sorted(events, key=lambda e: (e.t, e.kind != "end", e.a, e.b)):
        pair = canonical_pair(e.a, e.b)
        if e.kind == "start":
            open_.setdefault(pair, e.t)
        elif pair in open_:
            start = open_.pop(pair)
            if e.t > start:
                records.append(EncounterRecord(*pair, start, e.t))
    for pair, start in open_.items():
        if horizon > start:
            records.append(EncounterRecord(*pair, start, horizon))
    return EncounterTrace.from_records(records, horizon=horizon, nodes=nodes)


def events_from_trace(trace: EncounterTrace) -> List[EncounterEvent]:
    events = []
    for r in trace.records:
        events.append(EncounterEvent("start", r.a, r.b, r.start))
        events.append(EncounterEvent("end", r.a, r.b, r.end))
    return sorted(events, key=lambda e: (e.t, e.kind != "end", e.a, e.b))


# --- fidelity -------------------------------------------------------------


@dataclass(frozen=True)
class FidelityConfig:
    bin_width: float = 60.0
    policy: PeakPolicy = PeakPolicy()


@dataclass
class PairFidelity:
    pair: Tuple[str, str]
    source: list
    recovered: list
    matched: bool

    def to_dict(self):
        return {
            "pair": list(self.pair),
            "source": [c.to_dict() for c in self.source],
            "recovered": [dict(k=k, **c.to_dict()) for k, c in self.recovered],
            "matched": self.matched,
        }


@dataclass
class FidelityReport:
    pairs: List[PairFidelity]
    n: int
    bin_width: float

    @property
    def evaluable(self):
        return len(self.pairs)

    @property
    def match_ratio(self) -> Optional[float]:
        if not self.pairs:
            return None
        return sum(p.matched for p in self.pairs) / len(self.pairs)

    def to_dict(self):
        ratio = self.match_ratio
        return {
            "n": self.n,
            "bin_width_s": self.bin_width,
            "evaluable_pairs": self.evaluable,
            "match_ratio": "no components" if ratio is None else ratio,
            "pairs": [p.to_dict() for p in self.pairs],
        }


def source_components(personalities) -> Dict[Tuple[str, str], list]:
    """Scheduled components per unordered pair, merged over both directions."""
    out = defaultdict(list)
    for p in personalities.values():
        for peer, pp in p.pairs.items():
            pair = canonical_pair(p.node, peer)
            for c in pp.components:
                if all(c.period != o.period for o in out[pair]):
                    out[pair].append(c)
    return dict(out)


def evaluate_fidelity(generated: EncounterTrace, source, cfg: FidelityConfig = FidelityConfig()) -> FidelityReport:
    """Check whether the generated trace still shows each pair's scheduled periods.

    A pair matches when every source component has a recovered peak at most
    one frequency bin away from the component's own (fractional) index.
    """
    source = {canonical_pair(*pair): list(comps) for pair, comps in source.items()}
    wanted = {pair: comps for pair, comps in source.items() if comps}
    n = math.ceil(generated.horizon / cfg.bin_width)
    if not wanted:
        return FidelityReport([], n, cfg.bin_width)
    present = set(generated.pairs())
    if not present & set(wanted):
        raise NoOverlap("none of the source pairs appear in the generated trace")
    results = []
    for pair in sorted(wanted):
        recovered = []
        if pair in present:
            series = bin_pair_series(generated, pair, cfg.bin_width)
            if len(series) >= 2:
                _, peaks, comps = analyze_series(series, cfg.policy)
                recovered = [(p.k, c) for p, c in zip(peaks, comps)]
        matched = all(
            any(abs(k - component_index(c.period, n, cfg.bin_width)) <= 1 for k, _ in recovered)
            for c in wanted[pair]
        )
        results.append(PairFidelity(pair, wanted[pair], recovered, matched))
    return FidelityReport(results, n, cfg.bin_width)


# --- log files ------------------------------------------------------------


def _fmt_time(t):
    return str(int(t)) if float(t).is_integer() else repr(float(t))


def _fmt_float(x):
    return "" if x is None else format(x, ".12g")


def write_positions_csv(rows) -> bytes:
    lines = [POSITION_HEADER]
    lines += [f"{tick},{node},{x:.6f},{y:.6f},{h:.6f},{state}" for tick, node, x, y, h, state in rows]
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_encounter_events_csv(events) -> bytes:
    lines = [ENCOUNTER_EVENT_HEADER]
    lines += [f"{e.kind},{e.a},{e.b},{_fmt_time(e.t)}" for e in events]
    return ("\n".join(lines) + "\n").encode("utf-8")


def write_messages_csv(events) -> bytes:
    lines = [MESSAGE_HEADER]
    lines += [
        f"{e.event},{e.bundle_id},{e.src},{e.dst},{_fmt_time(e.t)},{_fmt_float(e.similarity)}"
        for e in events
    ]
    return ("\n".join(lines) + "\n").encode("utf-8")


def _csv_rows(data, header):
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    reader = csv.reader(io.StringIO(text))
    first = next(reader, None)
    if first is None or ",".join(c.strip() for c in first) != header:
        raise MalformedRow(1, f"expected header {header}")
    width = header.count(",") + 1
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != width:
            raise MalformedRow(lineno, f"expected {width} fields, got {len(row)}")
        yield lineno, row


def _parse_time(lineno, text):
    try:
        value = float(text)
    except ValueError:
        raise MalformedRow(lineno, f"bad time {text!r}") from None
    return int(value) if value.is_integer() else value


def read_encounter_events_csv(data) -> List[EncounterEvent]:
    """Read an encounter event log; an encounter *trace* CSV is accepted too."""
    text = data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data
    if text.startswith("node_a,node_b,start_s,end_s"):
        from .trace import parse_encounter_csv

        return events_from_trace(parse_encounter_csv(text))
    events = []
    for lineno, (kind, a, b, t) in _csv_rows(text, ENCOUNTER_EVENT_HEADER):
        if kind not in ("start", "end"):
            raise MalformedRow(lineno, f"unknown event type {kind!r}")
        a, b = canonical_pair(a, b)
        events.append(EncounterEvent(kind, a, b, _parse_time(lineno, t)))
    return events


def read_messages_csv(data) -> List[MessageEvent]:
    events = []
    for lineno, (ev, bid, src, dst, t, sim) in _csv_rows(data, MESSAGE_HEADER):
        events.append(MessageEvent(ev, bid, src, dst, _parse_time(lineno, t), float(sim) if sim else None))
    return events
