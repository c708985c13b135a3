"""Deterministic scenario builders shared by the tests, the docs and the CLI examples."""

import math
from itertools import combinations

import numpy as np

from .mobility import Arena
from .personality import PairPersonality, Personality
from .spectrum import PeriodicComponent
from .trace import EncounterRecord, EncounterTrace


def random_waypoint_trace(seed, n_nodes=5, n_slots=200, slot_width=60, arena=Arena(60.0, 60.0)):
    """Encounter trace sampled from a random-waypoint walk that respects ``v_max``.

    Contacts are read off the sampled slot positions, so the trace is
    feasible by construction. Returns ``(trace, positions)``.
    """
    rng = np.random.default_rng(seed)
    nodes = [f"n{i}" for i in range(n_nodes)]
    step = arena.v_max * slot_width
    pos = np.column_stack([rng.uniform(0, arena.width, n_nodes), rng.uniform(0, arena.height, n_nodes)])
    goals = np.column_stack([rng.uniform(0, arena.width, n_nodes), rng.uniform(0, arena.height, n_nodes)])
    positions = np.empty((n_slots, n_nodes, 2))
    records = []
    for s in range(n_slots):
        positions[s] = pos
        for i, j in combinations(range(n_nodes), 2):
            if np.linalg.norm(pos[i] - pos[j]) <= arena.range:
                records.append(EncounterRecord(nodes[i], nodes[j], s * slot_width, (s + 1) * slot_width))
        delta = goals - pos
        dist = np.linalg.norm(delta, axis=1)
        arrived = dist <= step
        move = np.where(arrived[:, None], delta, delta / np.maximum(dist, 1e-12)[:, None] * step * 0.9)
        pos = pos + move
        for i in np.nonzero(arrived)[0]:
            goals[i] = rng.uniform(0, arena.width), rng.uniform(0, arena.height)
    trace = EncounterTrace.from_records(records, horizon=n_slots * slot_width, nodes=nodes)
    return trace, positions


def contact_density(trace: EncounterTrace, slot_width):
    """Fraction of (pair, slot) cells with a contact."""
    n = len(trace.nodes)
    n_pairs = n * (n - 1) // 2
    slots = math.ceil(trace.horizon / slot_width)
    busy = sum(math.ceil(r.end / slot_width) - r.start // slot_width for r in trace.records)
    return busy / (n_pairs * slots) if n_pairs and slots else 0.0


def weekly_trace(days=128, on_days=3, period=7, node_a="A", node_b="B"):
    """Two users who meet for ``on_days`` consecutive days out of every ``period``."""
    day = 86400
    records = [
        EncounterRecord(node_a, node_b, w * day, min(w + on_days, days) * day)
        for w in range(0, days, period)
    ]
    return EncounterTrace.from_records(records, horizon=days * day)


def periodic_pair_personalities(periods=(600.0, 2100.0), dwell=120.0, refractory=30.0):
    """Node A seeks a stationary node B on a schedule made of ``periods``."""
    comps = tuple(PeriodicComponent(p, 1.0, 0.0) for p in periods)
    pp = PairPersonality(1.0, 1.0, comps, 0.0, (dwell,), refractory)
    return {"A": Personality("A", {"B": pp}), "B": Personality("B")}


ROUTING_LOCATIONS = ("lib", "lab", "gym", "cafe")


def eight_node_profiles():
    """Location preferences for the 8-node routing fixture.

    Similarity to the target ``lib`` profile rises from n0 to n7, so a
    monotone gradient path exists to every qualifying node.
    """
    weights = [
        {"gym": 0.7, "cafe": 0.3},
        {"gym": 0.5, "lib": 0.1, "cafe": 0.4},
        {"lab": 0.6, "lib": 0.2, "gym": 0.2},
        {"lib": 0.4, "lab": 0.4, "cafe": 0.2},
        {"lib": 0.6, "lab": 0.3, "gym": 0.1},
        {"lib": 0.75, "lab": 0.25},
        {"lib": 0.85, "cafe": 0.15},
        {"lib": 0.95, "lab": 0.05},
    ]
    return {f"n{i}": w for i, w in enumerate(weights)}


def exhaustive_schedule(nodes, start=10, spacing=10, duration=5, rounds=2):
    """Every pair meets once per round, in a fixed order."""
    records = []
    t = start
    for _ in range(rounds):
        for a, b in combinations(sorted(nodes), 2):
            records.append(EncounterRecord(a, b, t, t + duration))
            t += spacing
    return EncounterTrace.from_records(records, horizon=t + spacing, nodes=nodes)


def arena_default():
    return Arena()


# --- scenario configs (plain dicts, as written to JSON) ---------------------


def two_node_config(seed=0, duration=200):
    """A at (10, 50) seeks a stationary B at (40, 50) and carries one bundle for it."""
    pair = PairPersonality(1.0, 1.0, (PeriodicComponent(10_000.0, 1.0),), 0.0, (1000.0,), 60.0)
    return {
        "seed": seed,
        "duration_s": duration,
        "routing": {"mode": "targeted", "sigma": 0.8, "epsilon": 0.01},
        "nodes": [
            {"id": "A", "personality": {"pairs": {"B": pair.to_dict()}}, "profile": {"gym": 1.0}, "position": [10, 50]},
            {"id": "B", "profile": {"lib": 1.0}, "position": [40, 50]},
        ],
        "bundles": [{"id": "m1", "src": "A", "created_s": 0, "target_profile": {"lib": 1.0}, "ttl_s": 3600}],
    }


def periodic_config(seed=0, periods=(600.0, 2100.0), duration=86400):
    """Scheduled pair A/B in the default 100 m arena; no bundles.

    Start positions are left to the seeded placement so seeds give different runs.
    """
    pers = periodic_pair_personalities(periods)
    return {
        "seed": seed,
        "duration_s": duration,
        "position_log_every": 60,
        "nodes": [
            {"id": "A", "personality": pers["A"].to_dict()},
            {"id": "B"},
        ],
    }


def eight_node_config(seed=0, duration=None, sigma=0.8, epsilon=0.01):
    """Routing-only config for the 8-node fixture; n0 sends one bundle to the ``lib`` profile."""
    profiles = eight_node_profiles()
    if duration is None:
        duration = exhaustive_schedule(sorted(profiles)).horizon
    return {
        "seed": seed,
        "duration_s": int(duration),
        "routing": {"mode": "targeted", "sigma": sigma, "epsilon": epsilon},
        "nodes": [{"id": n, "profile": w} for n, w in sorted(profiles.items())],
        "bundles": [{"id": "b0", "src": "n0", "created_s": 0, "target_profile": {"lib": 1.0}, "ttl_s": 21600}],
    }
