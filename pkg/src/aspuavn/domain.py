"""Core value types: identities, geometry, packets, routes, route statistics.

All units are SI (seconds, meters) internally. UAV ids are plain ints, unique
within a scenario.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Optional

UavId = int

# Received signal strength model: tx_power / max(d^2, SSI_EPS). The scheme only
# uses SSI comparatively (attackers transmit hot), so an inverse-square law with
# a 1 m^2 floor is enough.
SSI_EPS = 1.0
NORMAL_TX_POWER = 1.0
ATTACKER_TX_POWER = 4.0

DATA_PAYLOAD_BYTES = 512


@dataclass(frozen=True)
class Position3:
    x: float
    y: float
    z: float

    def as_tuple(self):
        return (self.x, self.y, self.z)


class AttackKind(Enum):
    WORMHOLE = "WH"
    SELECTIVE_FORWARDING = "SF"
    SINKHOLE = "SH"


@dataclass(frozen=True)
class NodeRole:
    """Normal, ground station, or one of the three attacker behaviors."""

    attack: Optional[AttackKind] = None
    ground_station: bool = False
    wormhole_peer: Optional[UavId] = None
    sf_drop_probability: float = 1.0

    @property
    def is_attacker(self) -> bool:
        return self.attack is not None


NORMAL = NodeRole()
GROUND_STATION = NodeRole(ground_station=True)


def distance(a: Position3, b: Position3) -> float:
    """Euclidean distance in meters."""
    dx = a.x - b.x
    dy = a.y - b.y
    dz = a.z - b.z
    return math.sqrt(dx * dx + dy * dy + dz * dz)


def received_ssi(tx_power: float, d: float) -> float:
    """Signal strength index at distance d for the given transmit power."""
    return tx_power / max(d * d, SSI_EPS)


@dataclass(frozen=True)
class Route:
    id: int
    src: UavId
    dst: UavId
    hops: tuple  # ordered UavIds, src first, dst last

    def __post_init__(self):
        if self.hops and (self.hops[0] != self.src or self.hops[-1] != self.dst):
            raise ValueError("route hops must start at src and end at dst")

    @property
    def n_legs(self) -> int:
        return len(self.hops) - 1

    def contains_any(self, ids) -> bool:
        return any(h in ids for h in self.hops)


@dataclass
class RouteStats:
    """Measured behavior of a route — the 'antigen' raw material."""

    delay: float = 0.0   # seconds, one-way
    plr: float = 0.0     # fraction lost over measurement window
    pdr: float = 1.0     # fraction delivered over same window
    fsr: float = 0.0     # repeated/retransmitted sends observed
    rtt: float = 0.0     # seconds
    ssi: float = 0.0     # received signal index, >= 0


class UnknownNodeError(KeyError):
    """A route or query referenced a UAV id absent from the topology."""


def validate_route(route: Route, positions: dict, comm_range: float) -> bool:
    """True iff hops are acyclic and every consecutive pair is within range.

    `positions` maps UavId -> Position3 for the topology snapshot.
    """
    for h in route.hops:
        if h not in positions:
            raise UnknownNodeError(h)
    if len(set(route.hops)) != len(route.hops):
        return False
    for a, b in zip(route.hops, route.hops[1:]):
        if distance(positions[a], positions[b]) > comm_range:
            return False
    return True


# --- packets ---------------------------------------------------------------
#
# One flat dataclass per variant, each carrying the common header (origin,
# sender, timestamp, tx_power). Forwarding replaces `sender`; `origin` stays.


@dataclass(frozen=True)
class _Header:
    origin: UavId = 0
    sender: UavId = 0
    timestamp: float = 0.0
    tx_power: float = NORMAL_TX_POWER


@dataclass(frozen=True)
class Rreq(_Header):
    rreq_id: int = 0
    src: UavId = 0
    dst: UavId = 0
    hop_count: int = 0
    path_so_far: tuple = ()
    dst_seq: int = 0


@dataclass(frozen=True)
class Rrep(_Header):
    rreq_id: int = 0
    route: tuple = ()     # full hop sequence, src first
    dst_seq: int = 0
    hop_count: int = 0    # claimed; may undercut len(route)-1 when forged
    forged: bool = False  # carried for trace audit only, agents never read it


@dataclass(frozen=True)
class Hello(_Header):
    route_id: int = 0
    probe_round: int = 0
    route: tuple = ()


@dataclass(frozen=True)
class Confirm(_Header):
    route_id: int = 0
    probe_round: int = 0
    route: tuple = ()


@dataclass(frozen=True)
class TestPacket(_Header):
    route_id: int = 0
    seq: int = 0
    route: tuple = ()
    watchdog_id: int = 0
    interval: int = 0


@dataclass(frozen=True)
class Data(_Header):
    seq: int = 0
    payload_bytes: int = DATA_PAYLOAD_BYTES
    route: tuple = ()
    session_id: int = 0


@dataclass(frozen=True)
class Alert(_Header):
    blacklisted: UavId = 0
    alert_id: int = 0


Packet = (Rreq, Rrep, Hello, Confirm, TestPacket, Data, Alert)

_PACKET_TYPES = {cls.__name__: cls for cls in Packet}

_TUPLE_FIELDS = {"path_so_far", "route"}


def packet_to_dict(pkt) -> dict:
    d = {"kind": type(pkt).__name__}
    for f in fields(pkt):
        v = getattr(pkt, f.name)
        d[f.name] = list(v) if f.name in _TUPLE_FIELDS else v
    return d


def packet_from_dict(d: dict):
    cls = _PACKET_TYPES[d["kind"]]
    kwargs = {}
    for f in fields(cls):
        v = d[f.name]
        kwargs[f.name] = tuple(v) if f.name in _TUPLE_FIELDS else v
    return cls(**kwargs)


def resend(pkt, sender: UavId):
    """Copy of pkt as re-emitted by `sender` (header updated, body kept)."""
    return replace(pkt, sender=sender)
