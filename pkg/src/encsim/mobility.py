"""2-D world engine: forces, robot kinematics, sensing and encounter events.

Each tick runs, for every node in sorted id order: sense from start-of-tick
positions, advance the behavior state machine, turn the behavior into a
force, divide by ``1 + drag``, clamp to ``v_max`` and integrate. Walls
reflect. Encounter events are edge-triggered on the start-of-tick distances.
"""

import hashlib
import math
from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Dict, Optional, Tuple

import numpy as np

from ._validation import check_positive
from .errors import SpeedLimit
from .personality import IDLE, STOP, Drive, Personality, Repel, Seek, Stop, step_state

SPEED_EPS = 1e-9


@dataclass(frozen=True)
class Arena:
    width: float = 100.0
    height: float = 100.0
    range: float = 10.0
    v_max: float = 0.5
    dt: float = 1.0

    def __post_init__(self):
        for name in ("width", "height", "range", "v_max", "dt"):
            check_positive(getattr(self, name), name)
        if not self.range < min(self.width, self.height) / 2:
            raise ValueError("range must be below half the smaller arena side")

    def to_dict(self):
        return {"width": self.width, "height": self.height, "range": self.range,
                "v_max": self.v_max, "dt": self.dt}


@dataclass(frozen=True)
class NodeState:
    pos: Tuple[float, float]
    heading: float = 0.0
    speed: float = 0.0
    behavior: object = IDLE


@dataclass(frozen=True)
class SensorReading:
    """What the robot reports to its personality.

    ``virtual_wall`` and ``bearing`` cover the peers the personality knows;
    ``in_range`` lists every node inside the encounter radius.
    """

    virtual_wall: Dict[str, bool]
    bump: bool = False
    in_range: frozenset = frozenset()
    bearing: Dict[str, float] = field(default_factory=dict)
    heading: float = 0.0


@dataclass(frozen=True)
class EncounterEvent:
    kind: str  # "start" | "end"
    a: str
    b: str
    t: float


def stable_node_seed(node) -> int:
    return int.from_bytes(hashlib.sha256(str(node).encode("utf-8")).digest()[:8], "little")


def node_rng(seed, node, stream=0):
    """Per-node generator derived from the run seed; independent of roster order."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stable_node_seed(node), int(stream)))
    return np.random.default_rng(ss)


def _unit(src, dst):
    dx, dy = dst[0] - src[0], dst[1] - src[1]
    d = math.hypot(dx, dy)
    if d == 0.0:
        return 0.0, 0.0
    return dx / d, dy / d


def compute_force(i, states, personalities, t=None):
    """Force on ``i`` from its current engagement; zero when idle or dwelling."""
    behavior = states[i].behavior
    if not isinstance(behavior, (Seek, Repel)):
        return 0.0, 0.0
    target = behavior.target
    if target not in states:
        return 0.0, 0.0
    pp = personalities[i].pairs[target]
    ux, uy = _unit(states[i].pos, states[target].pos)
    if isinstance(behavior, Seek):
        return pp.attract_gain * ux, pp.attract_gain * uy
    return -pp.repulse_gain * ux, -pp.repulse_gain * uy


def commanded_velocity(force, drag, v_max):
    vx, vy = force[0] / (1.0 + drag), force[1] / (1.0 + drag)
    speed = math.hypot(vx, vy)
    if speed > v_max:
        vx, vy = vx * v_max / speed, vy * v_max / speed
    return vx, vy


def robot_execute(cmd, s: NodeState, dt, v_max=math.inf) -> NodeState:
    """Differential-drive kinematics: turn at ``heading_rate``, then roll forward."""
    check_positive(dt, "dt")
    if isinstance(cmd, Stop):
        return replace(s, speed=0.0)
    if cmd.speed < 0 or cmd.speed > v_max + SPEED_EPS:
        raise SpeedLimit(f"commanded speed {cmd.speed} outside [0, {v_max}]")
    heading = s.heading + cmd.heading_rate * dt
    x = s.pos[0] + cmd.speed * math.cos(heading) * dt
    y = s.pos[1] + cmd.speed * math.sin(heading) * dt
    return replace(s, pos=(x, y), heading=heading, speed=cmd.speed)


def reflect(s: NodeState, arena: Arena) -> NodeState:
    """Mirror a position that left the arena back inside, flipping the heading."""
    x, y = s.pos
    heading = s.heading
    while not 0.0 <= x <= arena.width:
        x = -x if x < 0 else 2.0 * arena.width - x
        heading = math.pi - heading
    while not 0.0 <= y <= arena.height:
        y = -y if y < 0 else 2.0 * arena.height - y
        heading = -heading
    if (x, y) == s.pos and heading == s.heading:
        return s
    heading = (heading + math.pi) % (2.0 * math.pi) - math.pi
    return replace(s, pos=(x, y), heading=heading)


@dataclass
class World:
    arena: Arena
    states: Dict[str, NodeState]
    personalities: Dict[str, Personality]
    rngs: Dict[str, np.random.Generator]
    contacts: set = field(default_factory=set)

    @property
    def order(self):
        return sorted(self.states)


def make_world(arena: Arena, personalities, seed, positions: Optional[dict] = None, nodes=None) -> World:
    """Place every node (given position or uniform random) and seed its generator.

    The placement draw and the behavior draws come from separate per-node
    streams, so adding a node never changes another node's trajectory.
    """
    nodes = sorted(set(nodes or ()) | set(personalities) | set(positions or ()))
    positions = positions or {}
    states, rngs, pers = {}, {}, {}
    for n in nodes:
        if n in positions:
            x, y = map(float, positions[n])
            if not (0 <= x <= arena.width and 0 <= y <= arena.height):
                raise ValueError(f"initial position of {n!r} lies outside the arena")
        else:
            place = node_rng(seed, n, stream=1)
            x, y = place.uniform(0, arena.width), place.uniform(0, arena.height)
        states[n] = NodeState((float(x), float(y)))
        rngs[n] = node_rng(seed, n, stream=0)
        pers[n] = personalities.get(n) or Personality(n)
    return World(arena, states, pers, rngs)


def _sense(i, world: World, in_range_of):
    s = world.states[i]
    arena = world.arena
    walls, bearings = {}, {}
    x, y = s.pos
    for peer in world.personalities[i].pairs:
        other = world.states.get(peer)
        if other is None:
            continue
        walls[peer] = peer in in_range_of
        bearings[peer] = math.atan2(other.pos[1] - y, other.pos[0] - x)
    margin = arena.v_max * arena.dt
    bump = x <= margin or y <= margin or x >= arena.width - margin or y >= arena.height - margin
    return SensorReading(walls, bump, frozenset(in_range_of), bearings, s.heading)


def contacts_at(world: World):
    """Pairs (sorted ids) within range at the current positions."""
    states, r = world.states, world.arena.range
    out = set()
    for a, b in combinations(world.order, 2):
        pa, pb = states[a].pos, states[b].pos
        if math.hypot(pa[0] - pb[0], pa[1] - pb[1]) <= r:
            out.add((a, b))
    return out


def step_world(world: World, t):
    """Advance ``world`` one tick in place; returns ``(world, events)``."""
    arena = world.arena
    order = world.order
    now = contacts_at(world)
    events = [EncounterEvent("end", a, b, t) for a, b in sorted(world.contacts - now)]
    events += [EncounterEvent("start", a, b, t) for a, b in sorted(now - world.contacts)]
    world.contacts = now

    neighbours = {i: set() for i in order}
    for a, b in now:
        neighbours[a].add(b)
        neighbours[b].add(a)

    commands = {}
    for i in order:
        sensors = _sense(i, world, neighbours[i])
        behavior, cmd = step_state(
            world.states[i].behavior, sensors, world.personalities[i], t, world.rngs[i],
            v_max=arena.v_max, dt=arena.dt,
        )
        world.states[i] = replace(world.states[i], behavior=behavior)
        commands[i] = cmd

    # forces read start-of-tick positions for everyone, so integrate afterwards
    moves = {}
    for i in order:
        if isinstance(commands[i], Stop):
            moves[i] = STOP
            continue
        force = compute_force(i, world.states, world.personalities, t)
        vx, vy = commanded_velocity(force, world.personalities[i].drag, arena.v_max)
        speed = math.hypot(vx, vy)
        if speed == 0.0:
            moves[i] = STOP
            continue
        turn = math.atan2(vy, vx) - world.states[i].heading
        turn = (turn + math.pi) % (2.0 * math.pi) - math.pi
        moves[i] = Drive(speed, turn / arena.dt)
    for i in order:
        s = robot_execute(moves[i], world.states[i], arena.dt, arena.v_max)
        world.states[i] = reflect(s, arena)
    return world, events
