import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from encsim.errors import EmptyProfile
from encsim.harness import NodeSpec, SimConfig, events_from_trace, replay_route
from encsim.personality import Personality
from encsim.profilecast import (
    BehavioralProfile,
    BufferState,
    InterestDissemination,
    MessageBundle,
    RoutingNode,
    TargetedGradient,
    build_profile,
    on_encounter,
    prune,
    similarity,
)
from encsim.trace import EncounterRecord, EncounterTrace, VisitRecord

from oracles import cosine, flooding_reach, monotone_deliveries

TARGET = BehavioralProfile({"x": 1.0})


def with_sim(s):
    """Profile whose cosine similarity to TARGET is ``s``."""
    return BehavioralProfile({"x": s, "y": math.sqrt(1 - s * s)}) if s < 1 else TARGET


def test_self_similarity():
    p = BehavioralProfile({"a": 0.3, "b": 0.7})
    assert similarity(p, p) == pytest.approx(1.0)


def test_disjoint_profiles():
    assert similarity(BehavioralProfile({"a": 1}), BehavioralProfile({"b": 1})) == 0.0


def test_half_overlap():
    u = {"L1": 0.5, "L2": 0.5}
    v = {"L1": 0.5, "L3": 0.5}
    assert cosine(u, v) == pytest.approx(0.5)
    assert similarity(BehavioralProfile(u), BehavioralProfile(v)) == pytest.approx(0.5)


weights = st.dictionaries(st.sampled_from("abcdef"), st.floats(0.01, 10), min_size=1)


@given(weights, weights, st.floats(0.1, 100))
def test_similarity_properties(u, v, scale):
    pu, pv = BehavioralProfile(u), BehavioralProfile(v)
    s = similarity(pu, pv)
    assert 0 <= s <= 1
    assert s == pytest.approx(similarity(pv, pu))
    assert s == pytest.approx(cosine(u, v))
    assert similarity(pu, BehavioralProfile({k: w * scale for k, w in u.items()})) == pytest.approx(1.0)


def test_profile_normalization():
    p = BehavioralProfile({"a": 3, "b": 1})
    assert dict(p) == {"a": 0.75, "b": 0.25}
    with pytest.raises(EmptyProfile):
        BehavioralProfile({})
    with pytest.raises(ValueError):
        BehavioralProfile({"a": -1, "b": 2})


def test_build_profile_from_visit_durations():
    visits = [VisitRecord("A", "L1", 0, 50), VisitRecord("A", "L2", 50, 75), VisitRecord("A", "L1", 100, 125)]
    assert dict(build_profile(visits, "A")) == {"L1": 0.75, "L2": 0.25}
    assert dict(build_profile([VisitRecord("B", "L1", 0, 5)], "B")) == {"L1": 1.0}
    with pytest.raises(EmptyProfile):
        build_profile(visits, "Z")


def _node(name, profile, *bundles, hops=0):
    buf = BufferState()
    for b in bundles:
        buf.insert(b, hops)
    return RoutingNode(name, profile, buf)


def test_targeted_delivery_to_matching_peer():
    b = MessageBundle("m", "src", TARGET, TargetedGradient(0.8, 0.01))
    actions = on_encounter(_node("c", with_sim(0.3), b), _node("p", with_sim(0.9)), 5)
    assert [(a.kind, a.dst) for a in actions] == [("deliver", "p"), ("forward", "p")]
    assert actions[0].similarity == pytest.approx(0.9)


def test_targeted_margin_blocks_small_improvement():
    b = MessageBundle("m", "src", TARGET, TargetedGradient(0.8, 0.05))
    actions = on_encounter(_node("c", with_sim(0.40), b), _node("p", with_sim(0.42)), 5)
    assert actions == []


def test_dissemination_copies_to_interested_peer():
    b = MessageBundle("m", "src", TARGET, InterestDissemination(0.5))
    actions = on_encounter(_node("c", with_sim(0.1), b), _node("p", with_sim(0.6)), 5)
    assert {(a.kind, a.dst) for a in actions} == {("deliver", "p"), ("forward", "p")}
    assert on_encounter(_node("c", with_sim(0.1), b), _node("q", with_sim(0.4)), 5) == []


def test_dissemination_uses_interest_profile():
    b = MessageBundle("m", "src", TARGET, InterestDissemination(0.5))
    peer = RoutingNode("p", with_sim(0.1), BufferState(), interest=with_sim(0.9))
    assert {a.kind for a in on_encounter(_node("c", with_sim(0.1), b), peer, 5)} == {"deliver", "forward"}


def test_summary_vector_suppresses_known_bundles():
    b = MessageBundle("m", "src", TARGET)
    peer = _node("p", with_sim(0.95), b)
    assert on_encounter(_node("c", with_sim(0.3), b), peer, 5) == []
    delivered = _node("q", with_sim(0.95))
    delivered.buffer.delivered.add("m")
    assert on_encounter(_node("c", with_sim(0.3), b), delivered, 5) == []


def test_hop_limit_stops_copies_not_delivery():
    b = MessageBundle("m", "src", TARGET, TargetedGradient(0.8, 0.0), hop_limit=2)
    actions = on_encounter(_node("c", with_sim(0.3), b, hops=2), _node("p", with_sim(0.9)), 5)
    assert [a.kind for a in actions] == ["deliver"]


def test_expired_bundles_are_ignored():
    b = MessageBundle("m", "src", TARGET, ttl=100, created=0)
    assert on_encounter(_node("c", with_sim(0.3), b), _node("p", with_sim(0.9)), 101) == []


def test_prune_expiry():
    buf = BufferState()
    buf.insert(MessageBundle("old", "s", TARGET, ttl=100, created=0))
    buf.insert(MessageBundle("new", "s", TARGET, ttl=100, created=50))
    assert set(prune(buf, 100).bundles) == {"old", "new"}
    assert set(prune(buf, 101).bundles) == {"new"}
    assert set(buf.bundles) == {"old", "new"}


def test_duplicate_insert_is_noop():
    buf = BufferState()
    b = MessageBundle("m", "s", TARGET)
    buf.insert(b, hops=1, received_at=3)
    before = dict(buf.bundles)
    assert buf.insert(b, hops=5, received_at=9) == []
    assert buf.bundles == before


def test_overflow_evicts_oldest_created():
    buf = BufferState(capacity=2)
    buf.insert(MessageBundle("b", "s", TARGET, created=20))
    buf.insert(MessageBundle("a", "s", TARGET, created=10))
    assert buf.insert(MessageBundle("c", "s", TARGET, created=30)) == ["a"]
    assert set(buf.bundles) == {"b", "c"}


def test_bundle_validation():
    with pytest.raises(ValueError):
        MessageBundle("m", "s", TARGET, ttl=0)
    with pytest.raises(ValueError):
        MessageBundle("m", "s", TARGET, hop_limit=0)
    with pytest.raises(ValueError):
        TargetedGradient(1.5)


# --- multi-hop behaviour against oracles -----------------------------------


def _run_schedule(sims, contacts, src, sigma, eps, hop_limit=8, mode="targeted"):
    nodes = sorted(sims)
    recs = [EncounterRecord(a, b, t, t + 1) for t, a, b in contacts]
    horizon = max(t for t, _, _ in contacts) + 5
    trace = EncounterTrace.from_records(recs, horizon=horizon, nodes=nodes)
    m = TargetedGradient(sigma, eps) if mode == "targeted" else InterestDissemination(sigma)
    cfg = SimConfig(
        seed=0,
        duration=horizon,
        nodes=[NodeSpec(n, Personality(n), with_sim(sims[n])) for n in nodes],
        bundles=[MessageBundle("m", src, TARGET, m, ttl=10 * horizon, hop_limit=hop_limit)],
    )
    return replay_route(cfg, events_from_trace(trace))


@st.composite
def instances(draw):
    n = draw(st.integers(2, 8))
    nodes = [f"n{i}" for i in range(n)]
    sims = {v: draw(st.sampled_from([0.1, 0.3, 0.5, 0.7, 0.82, 0.9, 0.97, 1.0])) for v in nodes}
    pairs = [(a, b) for i, a in enumerate(nodes) for b in nodes[i + 1:]]
    order = draw(st.lists(st.sampled_from(pairs), min_size=1, max_size=30))
    contacts = [(5 + 3 * i, a, b) for i, (a, b) in enumerate(order)]
    src = draw(st.sampled_from(nodes))
    return sims, contacts, src


@settings(max_examples=150, deadline=None)
@given(instances(), st.integers(1, 8))
def test_targeted_gradient_against_oracles(inst, hop_limit):
    sims, contacts, src = inst
    sigma, eps = 0.8, 0.01
    log, metrics = _run_schedule(sims, contacts, src, sigma, eps, hop_limit)
    delivered = [e.dst for e in log if e.event == "deliver"]
    qualifying = {n for n, s in sims.items() if s >= sigma and n != src}

    assert len(delivered) == len(set(delivered))
    assert all(sims[n] >= sigma for n in delivered)
    assert set(delivered) <= flooding_reach(contacts, src, 0, math.inf) & qualifying
    if hop_limit == 8:
        assert set(delivered) == monotone_deliveries(contacts, src, sims, sigma, eps)

    hops = {src: 0}
    for e in log:
        if e.event == "forward":
            assert sims[e.dst] > sims[e.src] + eps
            hops[e.dst] = hops[e.src] + 1
            assert hops[e.dst] <= hop_limit
    assert metrics.delivered == len(delivered)


@settings(max_examples=80, deadline=None)
@given(instances())
def test_dissemination_reaches_interested_component(inst):
    sims, contacts, src = inst
    sigma = 0.8
    log, _ = _run_schedule(sims, contacts, src, sigma, 0.0, mode="dissemination")
    delivered = {e.dst for e in log if e.event == "deliver"}
    # flooding restricted to interested nodes (plus the source) is the oracle
    interested = [(t, a, b) for t, a, b in contacts if all(sims[x] >= sigma or x == src for x in (a, b))]
    assert delivered == flooding_reach(interested, src, 0, math.inf)
