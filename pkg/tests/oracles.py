"""Independent reference computations used to check the package.

Nothing here imports the code under test except plain data types, so a bug
in the production path cannot leak into the expected values.
"""

import cmath
import math
from itertools import combinations


def brute_dft(x):
    """O(N^2) DFT with complex exponentials, full spectrum."""
    n = len(x)
    return [sum(x[t] * cmath.exp(-2j * math.pi * k * t / n) for t in range(n)) for k in range(n)]


def interval_intersection(a, b):
    lo, hi = max(a[0], b[0]), min(a[1], b[1])
    return (lo, hi) if hi > lo else None


def overlap_per_bin(intervals, horizon, width):
    """Seconds of the union of ``intervals`` falling in each bin (sampled per second)."""
    n = math.ceil(horizon / width)
    out = [0] * n
    for s in range(int(horizon)):
        if any(lo <= s < hi for lo, hi in intervals):
            out[int(s // width)] += 1
    return out


def population_std(xs):
    mu = sum(xs) / len(xs)
    return math.sqrt(sum((x - mu) ** 2 for x in xs) / len(xs))


def cosine(u, v):
    keys = set(u) | set(v)
    dot = sum(u.get(k, 0.0) * v.get(k, 0.0) for k in keys)
    nu = math.sqrt(sum(w * w for w in u.values()))
    nv = math.sqrt(sum(w * w for w in v.values()))
    return dot / (nu * nv)


def check_constraints(positions, nodes, records, slot_width, radius):
    """Fraction of (slot, pair) cells whose distance agrees with the contact record.

    ``records`` are ``(a, b, start, end)`` tuples; a pair is in contact in a
    slot when any record overlaps the slot with positive length.
    """
    idx = {n: i for i, n in enumerate(nodes)}
    ok = total = 0
    for s in range(len(positions)):
        lo, hi = s * slot_width, (s + 1) * slot_width
        for a, b in combinations(nodes, 2):
            contact = any(
                {r[0], r[1]} == {a, b} and min(r[3], hi) > max(r[2], lo) for r in records
            )
            pa, pb = positions[s][idx[a]], positions[s][idx[b]]
            d = math.hypot(pa[0] - pb[0], pa[1] - pb[1])
            ok += (d <= radius) if contact else (d > radius)
            total += 1
    return ok / total


def flooding_reach(contacts, src, created, ttl, hop_limit=math.inf):
    """Nodes reachable from ``src`` by time-respecting instantaneous contacts.

    ``contacts`` are ``(t, a, b)``; a copy crosses a contact when one side
    holds it at time ``t`` (within the ttl).
    """
    holders = {src: 0}
    for t, a, b in sorted(contacts):
        if t < created or t > created + ttl:
            continue
        for u, v in ((a, b), (b, a)):
            if u in holders and v not in holders and holders[u] + 1 <= hop_limit:
                holders[v] = holders[u] + 1
                break
    return set(holders) - {src}


def monotone_holders(contacts, src, sims, eps, created=0):
    """Nodes a copy can reach along paths where similarity rises by more than eps per hop.

    Enumerates time-respecting paths depth-first, tracking the earliest
    arrival per node.
    """
    contacts = sorted(contacts)
    arrival = {src: created}

    def visit(node, t0):
        for t, a, b in contacts:
            if t < t0 or node not in (a, b):
                continue
            other = b if a == node else a
            if sims[other] > sims[node] + eps and t < arrival.get(other, math.inf):
                arrival[other] = t
                visit(other, t)

    visit(src, created)
    return arrival


def monotone_deliveries(contacts, src, sims, sigma, eps, created=0):
    arrival = monotone_holders(contacts, src, sims, eps, created)
    out = set()
    for t, a, b in contacts:
        for h, q in ((a, b), (b, a)):
            if h in arrival and arrival[h] <= t and q != src and sims[q] >= sigma:
                out.add(q)
    return out


def brute_dft_matrix(x):
    """Same O(N^2) sum as :func:`brute_dft`, evaluated as one matrix product.

    ``k * t`` is reduced mod ``N`` in integers first so the twiddle angles stay
    exact for large ``N``.
    """
    import numpy as np

    x = np.asarray(x, dtype=float)
    n = len(x)
    kt = np.outer(np.arange(n), np.arange(n)) % n
    return np.exp(-2j * np.pi * kt / n) @ x
