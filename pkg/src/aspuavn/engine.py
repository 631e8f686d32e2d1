"""Deterministic discrete-event kernel.

One simulation run is strictly single-threaded: a heap of (time, sequence)
ordered events, a flat numpy position array for the unit-disk channel, and an
append-only trace. Everything random flows through the world's seeded
generator, so a (config, seed) pair replays to an identical trace.
"""

from __future__ import annotations

import heapq
import math
from collections import namedtuple
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from aspuavn import mobility
from aspuavn._kernels import in_range_mask
from aspuavn.domain import NodeRole, Position3, UavId, UnknownNodeError

Event = namedtuple("Event", ["time", "sequence", "kind", "payload"])

ARRIVAL = 0    # payload: (packet, at_node)
MOBILITY = 1   # payload: ()
CALL = 2       # payload: (fn, args) — agent timers, probe timeouts, sessions
END = 3

MOBILITY_TICK = 0.1  # seconds between position updates


class ConfigurationError(ValueError):
    pass


class EventQueue:
    """Min-heap on (time, sequence); insertion order breaks time ties."""

    def __init__(self):
        self._heap = []
        self._seq = 0

    def push(self, time: float, kind: int, payload) -> None:
        if not math.isfinite(time):
            raise ValueError("event time must be finite")
        heapq.heappush(self._heap, Event(time, self._seq, kind, payload))
        self._seq += 1

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def peek_time(self) -> Optional[float]:
        return self._heap[0].time if self._heap else None

    def __len__(self):
        return len(self._heap)


@dataclass
class UavNode:
    id: UavId
    role: NodeRole
    st: Optional[mobility.StState] = None
    seq: int = 0                      # destination sequence counter
    rreq_cache: set = field(default_factory=set)
    rreq_replies: dict = field(default_factory=dict)  # (rreq_id, origin) -> count
    alert_cache: set = field(default_factory=set)
    blacklist: set = field(default_factory=set)
    memory: object = None             # SecurityMemory when defense is on
    routing_table: object = None      # created lazily by the session layer
    seen_destinations: dict = field(default_factory=dict)  # sinkhole bait state


class WorldState:
    """Mutable simulation world shared by all modules of one run."""

    def __init__(self, positions: np.ndarray, roles, bounds, comm_range: float,
                 hop_delay: float, rng: np.random.Generator, speed: float = 0.0,
                 mobility_params: Optional[mobility.StParams] = None):
        n = positions.shape[0]
        if len(roles) != n:
            raise ConfigurationError("one role per node required")
        self.clock = 0.0
        self.positions = np.ascontiguousarray(positions, dtype=np.float64)
        self.bounds = bounds
        self.comm_range = float(comm_range)
        self.hop_delay = float(hop_delay)
        self.rng = rng
        self.queue = EventQueue()
        self.trace: list = []
        self.nodes = [UavNode(i, roles[i]) for i in range(n)]
        self.packet_handler: Optional[Callable] = None
        self.services: dict = {}
        self.streams: dict = {}
        self.attack_activation_time = 0.0
        self.ground_truth_attackers = frozenset(
            i for i, r in enumerate(roles) if r.is_attacker)
        self.tx_count = 0
        self.rx_count = 0
        if speed > 0.0:
            params = mobility_params or mobility.StParams(speed=speed)
            for node in self.nodes:
                node.st = mobility.initial_state(params, rng)
            self.mobility_params = params
            self.queue.push(MOBILITY_TICK, MOBILITY, ())
        else:
            self.mobility_params = None

    # -- topology -------------------------------------------------------

    def position_of(self, node: UavId) -> Position3:
        if not 0 <= node < len(self.nodes):
            raise UnknownNodeError(node)
        x, y, z = self.positions[node]
        return Position3(float(x), float(y), float(z))

    def positions_dict(self) -> dict:
        return {i: self.position_of(i) for i in range(len(self.nodes))}

    def neighbors(self, node: UavId) -> list:
        """Ids (ascending) strictly other than `node` within comm_range."""
        if not 0 <= node < len(self.nodes):
            raise UnknownNodeError(node)
        x, y, z = self.positions[node]
        mask = in_range_mask(self.positions, float(x), float(y), float(z),
                             self.comm_range * self.comm_range)
        mask[node] = False
        return [int(i) for i in np.nonzero(mask)[0]]

    def in_range(self, a: UavId, b: UavId) -> bool:
        dx = self.positions[a, 0] - self.positions[b, 0]
        dy = self.positions[a, 1] - self.positions[b, 1]
        dz = self.positions[a, 2] - self.positions[b, 2]
        return dx * dx + dy * dy + dz * dz <= self.comm_range * self.comm_range

    def distance_between(self, a: UavId, b: UavId) -> float:
        dx = self.positions[a, 0] - self.positions[b, 0]
        dy = self.positions[a, 1] - self.positions[b, 1]
        dz = self.positions[a, 2] - self.positions[b, 2]
        return math.sqrt(dx * dx + dy * dy + dz * dz)

    def attacks_active(self) -> bool:
        return self.clock >= self.attack_activation_time

    # -- trace ----------------------------------------------------------

    def log(self, record: tuple) -> None:
        self.trace.append(record)

    def trace_lines(self):
        return [format_record(r) for r in self.trace]

    # -- channel --------------------------------------------------------

    def transmit(self, packet, frm: UavId, to=None, delay: Optional[float] = None,
                 via_tunnel: bool = False) -> int:
        """Schedule delivery; returns number of arrivals scheduled.

        `to=None` broadcasts to every current neighbor. Unicast to an
        out-of-range node is a logged drop, not an error. `via_tunnel`
        bypasses the range check (wormhole out-of-band link).
        """
        d = self.hop_delay if delay is None else delay
        t = self.clock + d
        pk = type(packet).__name__
        if to is None:
            nbrs = self.neighbors(frm)
            self.log(("tx", self.clock, pk, frm, -1))
            self.tx_count += 1
            for nb in nbrs:
                self.queue.push(t, ARRIVAL, (packet, nb))
            return len(nbrs)
        self.log(("tx", self.clock, pk, frm, to))
        self.tx_count += 1
        if via_tunnel or self.in_range(frm, to):
            self.queue.push(t, ARRIVAL, (packet, to))
            return 1
        self.log(("chan_drop", self.clock, pk, frm, to))
        return 0

    def call_at(self, time: float, fn: Callable, *args) -> None:
        if time < self.clock:
            raise ValueError("cannot schedule into the past")
        self.queue.push(time, CALL, (fn, args))

    def call_after(self, delay: float, fn: Callable, *args) -> None:
        self.call_at(self.clock + delay, fn, *args)

    # -- loop -----------------------------------------------------------

    def run(self, until: float) -> None:
        """Process events in deterministic order until the queue drains or
        the next event lies beyond `until`."""
        q = self.queue
        while len(q) and q.peek_time() <= until:
            ev = q.pop()
            self.clock = ev.time
            if ev.kind == ARRIVAL:
                packet, at = ev.payload
                self.rx_count += 1
                if self.packet_handler is not None:
                    self.packet_handler(self, at, packet)
            elif ev.kind == CALL:
                fn, args = ev.payload
                fn(self, *args)
            elif ev.kind == MOBILITY:
                self._mobility_tick()
            elif ev.kind == END:
                break
        if until > self.clock:
            self.clock = until

    def _mobility_tick(self):
        params = self.mobility_params
        for node in self.nodes:
            x, y, z = self.positions[node.id]
            pos, st = mobility.st_step(
                (float(x), float(y), float(z)), node.st, MOBILITY_TICK,
                params, self.rng, self.bounds)
            node.st = st
            self.positions[node.id, 0] = pos[0]
            self.positions[node.id, 1] = pos[1]
            self.positions[node.id, 2] = pos[2]
        self.queue.push(self.clock + MOBILITY_TICK, MOBILITY, ())


def place_nodes_ppp(count: int, bounds, rng: np.random.Generator) -> np.ndarray:
    """Uniform i.i.d. placement in the box — a Poisson point process
    conditioned on the node count."""
    if count < 1:
        raise ConfigurationError("node count must be >= 1")
    bx, by, bz = bounds
    if bx <= 0 or by <= 0 or bz <= 0:
        raise ConfigurationError("topology bounds must have positive volume")
    u = rng.random((count, 3))
    u[:, 0] *= bx
    u[:, 1] *= by
    u[:, 2] *= bz
    return u


def format_record(record: tuple) -> str:
    return "\t".join(_fmt(v) for v in record)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return "(" + ",".join(_fmt(x) for x in v) + ")"
    return str(v)
