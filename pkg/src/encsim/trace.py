"""Encounter and visit traces: data model, CSV I/O, indirect encounters, binning.

Times are integer seconds from the trace epoch. An encounter covers the
half-open interval ``[start, end)``; two records for the same pair that touch
or overlap are the same co-location and get merged.
"""

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence, Tuple

import numpy as np

from ._validation import check_int_seconds, check_nonnegative, check_positive
from .errors import InvalidInterval, MalformedRow, SelfEncounter, UnknownNode

NodeId = str

ENCOUNTER_HEADER = ("node_a", "node_b", "start_s", "end_s")
VISIT_HEADER = ("node", "location", "start_s", "end_s")
BIN_MODES = ("indicator", "count", "duration")


def canonical_pair(a: NodeId, b: NodeId) -> Tuple[NodeId, NodeId]:
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True, order=True)
class EncounterRecord:
    """One contact interval between two nodes, stored with ``a < b``."""

    start: int
    end: int
    a: NodeId
    b: NodeId

    def __init__(self, a, b, start, end):
        a, b = str(a), str(b)
        if not a or not b:
            raise ValueError("node ids must be non-empty")
        if a == b:
            raise SelfEncounter(f"node {a!r} cannot encounter itself")
        start = check_int_seconds(start, "start")
        end = check_int_seconds(end, "end")
        if end <= start:
            raise InvalidInterval(f"encounter {a}-{b}: end {end} <= start {start}")
        a, b = canonical_pair(a, b)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "end", end)

    @property
    def pair(self):
        return (self.a, self.b)

    @property
    def duration(self):
        return self.end - self.start


@dataclass(frozen=True)
class VisitRecord:
    node: NodeId
    location: str
    start: int
    end: int

    def __post_init__(self):
        if not self.node:
            raise ValueError("visit node id must be non-empty")
        object.__setattr__(self, "start", check_int_seconds(self.start, "start"))
        object.__setattr__(self, "end", check_int_seconds(self.end, "end"))
        if self.end <= self.start:
            raise InvalidInterval(
                f"visit {self.node}@{self.location}: end {self.end} <= start {self.start}"
            )


def _merge(records: Iterable[EncounterRecord]):
    by_pair = defaultdict(list)
    for rec in records:
        by_pair[rec.pair].append(rec)
    merged = []
    for (a, b), recs in by_pair.items():
        recs.sort()
        cur_start, cur_end = recs[0].start, recs[0].end
        for rec in recs[1:]:
            if rec.start <= cur_end:
                cur_end = max(cur_end, rec.end)
            else:
                merged.append(EncounterRecord(a, b, cur_start, cur_end))
                cur_start, cur_end = rec.start, rec.end
        merged.append(EncounterRecord(a, b, cur_start, cur_end))
    merged.sort(key=lambda r: (r.start, r.a, r.b, r.end))
    return tuple(merged)


@dataclass(frozen=True)
class EncounterTrace:
    """Canonical encounter trace: merged per pair and sorted by start time."""

    records: Tuple[EncounterRecord, ...]
    horizon: int
    nodes: frozenset = field(default_factory=frozenset)

    @classmethod
    def from_records(cls, records, horizon=None, nodes=None):
        records = _merge(records)
        max_end = max((r.end for r in records), default=0)
        horizon = max_end if horizon is None else check_int_seconds(horizon, "horizon")
        if horizon < max_end:
            raise InvalidInterval(f"horizon {horizon} ends before last record ({max_end})")
        seen = {n for r in records for n in r.pair}
        nodes = frozenset(seen if nodes is None else set(map(str, nodes)) | seen)
        return cls(records, horizon, nodes)

    def pairs(self):
        """Distinct pairs with at least one record, sorted."""
        return sorted({r.pair for r in self.records})

    def pair_records(self, a, b):
        pair = canonical_pair(a, b)
        return [r for r in self.records if r.pair == pair]

    def __len__(self):
        return len(self.records)


def _read_rows(data, header):
    if isinstance(data, (bytes, bytearray)):
        text = bytes(data).decode("utf-8")
    elif isinstance(data, str):
        text = data
    else:
        raw = data.read()
        text = raw.decode("utf-8") if isinstance(raw, (bytes, bytearray)) else raw
    reader = csv.reader(io.StringIO(text))
    first = next(reader, None)
    if first is None or tuple(c.strip() for c in first) != header:
        raise MalformedRow(1, f"expected header {','.join(header)}")
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise MalformedRow(lineno, f"expected {len(header)} fields, got {len(row)}")
        yield lineno, [c.strip() for c in row]


def _parse_seconds(lineno, text):
    try:
        return int(text)
    except ValueError:
        raise MalformedRow(lineno, f"time {text!r} is not an integer") from None


def parse_encounter_csv(data) -> EncounterTrace:
    """Parse ``node_a,node_b,start_s,end_s`` CSV (bytes, text or a file object)."""
    records = []
    for lineno, (a, b, start, end) in _read_rows(data, ENCOUNTER_HEADER):
        if not a or not b:
            raise MalformedRow(lineno, "empty node id")
        records.append(
            EncounterRecord(a, b, _parse_seconds(lineno, start), _parse_seconds(lineno, end))
        )
    return EncounterTrace.from_records(records)


def write_encounter_csv(trace: EncounterTrace) -> bytes:
    lines = [",".join(ENCOUNTER_HEADER)]
    lines += [f"{r.a},{r.b},{r.start},{r.end}" for r in trace.records]
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse_visit_csv(data) -> list:
    visits = []
    for lineno, (node, loc, start, end) in _read_rows(data, VISIT_HEADER):
        if not node:
            raise MalformedRow(lineno, "empty node id")
        visits.append(
            VisitRecord(node, loc, _parse_seconds(lineno, start), _parse_seconds(lineno, end))
        )
    return visits


def write_visit_csv(visits: Sequence[VisitRecord]) -> bytes:
    lines = [",".join(VISIT_HEADER)]
    lines += [f"{v.node},{v.location},{v.start},{v.end}" for v in visits]
    return ("\n".join(lines) + "\n").encode("utf-8")


def derive_encounters_from_visits(visits: Sequence[VisitRecord], min_overlap=0) -> EncounterTrace:
    """Co-located visits by different nodes become encounters over their overlap.

    The horizon is the end of the last visit, so the derived trace covers the
    whole observation window even where nobody met.
    """
    check_nonnegative(min_overlap, "min_overlap")
    by_location = defaultdict(list)
    for v in visits:
        by_location[v.location].append(v)
    records = []
    for group in by_location.values():
        for v, w in combinations(group, 2):
            if v.node == w.node:
                continue
            lo, hi = max(v.start, w.start), min(v.end, w.end)
            if hi > lo and hi - lo >= min_overlap:
                records.append(EncounterRecord(v.node, w.node, lo, hi))
    horizon = max((v.end for v in visits), default=0)
    return EncounterTrace.from_records(records, horizon=horizon, nodes={v.node for v in visits})


@dataclass(frozen=True)
class BinnedSeries:
    values: np.ndarray
    bin_width: float
    mode: str = "indicator"

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.mode not in BIN_MODES:
            raise ValueError(f"unknown bin mode {self.mode!r}")
        if np.any(values < 0):
            raise ValueError("binned values must be non-negative")
        if self.mode == "indicator" and not np.all((values == 0) | (values == 1)):
            raise ValueError("indicator series must be 0/1")
        if self.mode == "duration" and np.any(values > self.bin_width):
            raise ValueError("duration bins cannot exceed the bin width")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)


def n_bins(horizon, bin_width):
    return math.ceil(horizon / bin_width)


def _bin_records(records, horizon, bin_width, mode):
    n = n_bins(horizon, bin_width)
    if n < 1:
        raise ValueError(f"horizon {horizon} gives no bins at width {bin_width}")
    out = np.zeros(n)
    for rec in records:
        end = min(rec.end, horizon)
        if mode == "count":
            out[int(rec.start // bin_width)] += 1
            continue
        first = int(rec.start // bin_width)
        last = min(n - 1, int(math.ceil(end / bin_width)) - 1)
        for i in range(first, last + 1):
            lo = max(rec.start, i * bin_width)
            hi = min(end, (i + 1) * bin_width)
            if hi > lo:
                if mode == "indicator":
                    out[i] = 1
                else:
                    out[i] += hi - lo
    return out


def bin_pair_series(trace: EncounterTrace, pair, bin_width, mode="indicator") -> BinnedSeries:
    """Bin one pair's encounters into ``ceil(horizon / bin_width)`` slots.

    ``indicator`` marks bins any encounter overlaps, ``count`` counts
    encounter starts and ``duration`` sums overlapped seconds. The final bin
    may be partial; it only spans up to the horizon.
    """
    check_positive(bin_width, "bin_width")
    if mode not in BIN_MODES:
        raise ValueError(f"unknown bin mode {mode!r}")
    a, b = pair
    for node in (a, b):
        if node not in trace.nodes:
            raise UnknownNode(f"node {node!r} is not in the trace")
    values = _bin_records(trace.pair_records(a, b), trace.horizon, bin_width, mode)
    return BinnedSeries(values, bin_width, mode)


def bin_node_series(trace: EncounterTrace, node, bin_width, mode="count") -> BinnedSeries:
    """Sum of a node's pair series, for node-level rather than pair-level analysis."""
    if node not in trace.nodes:
        raise UnknownNode(f"node {node!r} is not in the trace")
    check_positive(bin_width, "bin_width")
    total = np.zeros(max(n_bins(trace.horizon, bin_width), 1))
    for pair in trace.pairs():
        if node in pair:
            total += bin_pair_series(trace, pair, bin_width, mode).values
    if mode == "indicator":
        mode = "count"
    return BinnedSeries(total, bin_width, mode)


def pair_series_matrix(trace: EncounterTrace, bin_width, mode="indicator", pairs: Optional[list] = None):
    """Stack per-pair series into an ``(n_pairs, n_bins)`` array plus the pair labels."""
    pairs = trace.pairs() if pairs is None else [canonical_pair(*p) for p in pairs]
    rows = [bin_pair_series(trace, p, bin_width, mode).values for p in pairs]
    if not rows:
        return np.zeros((0, n_bins(trace.horizon, bin_width))), pairs
    return np.vstack(rows), pairs
