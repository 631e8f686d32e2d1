"""On-demand multipath route discovery and data-plane forwarding.

RREQ floods with per-node rebroadcast suppression; only the destination
answers (first K distinct loop-free paths), so forged intermediate replies
are exclusively attacker behavior. Payload-class packets (Hello, Confirm,
TestPacket, Data) are source-routed along the discovered hop list.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

from aspuavn import adversary
from aspuavn.domain import (ATTACKER_TX_POWER, NORMAL_TX_POWER, Alert,
                            AttackKind, Confirm, Data, Hello, Route,
                            RouteStats, Rrep, Rreq, TestPacket, UavId, received_ssi)
from aspuavn.engine import WorldState

DEFAULT_K_ROUTES = 3
DISCOVERY_TIMEOUT = 0.2   # s, collect window for replies
PAYLOAD_KINDS = (Hello, Confirm, TestPacket, Data)


class RoutingTable:
    """Per-source store of candidate routes, at most K per (src, dst)."""

    def __init__(self, k: int = DEFAULT_K_ROUTES):
        self.k = k
        self.entries: dict = {}

    def put(self, route: Route, stats: RouteStats, discovered_at: float):
        key = (route.src, route.dst)
        rows = self.entries.setdefault(key, [])
        rows.append((route, stats, discovered_at))
        if len(rows) > self.k:
            del rows[0: len(rows) - self.k]

    def get(self, src: UavId, dst: UavId) -> list:
        return list(self.entries.get((src, dst), []))


@dataclass
class Candidate:
    route: Route
    stats: RouteStats
    dst_seq: int
    claimed_hops: int
    forged: bool  # trace/audit only; never read by agents


class Discovery:
    def __init__(self, rreq_id: int, src: UavId, dst: UavId, started_at: float,
                 k: int):
        self.rreq_id = rreq_id
        self.src = src
        self.dst = dst
        self.started_at = started_at
        self.k = k
        self.candidates: List[Candidate] = []
        self._hops_seen = set()
        self.done = False

    def offer(self, world: WorldState, rrep: Rrep) -> None:
        if self.done:
            return
        hops = rrep.route
        if not hops or hops[0] != self.src or hops[-1] != self.dst:
            return
        if len(set(hops)) != len(hops) or hops in self._hops_seen:
            return
        src_node = world.nodes[self.src]
        if any(h in src_node.blacklist for h in hops):
            return
        self._hops_seen.add(hops)
        rtt = world.clock - self.started_at
        d = world.distance_between(rrep.sender, self.src)
        ssi = received_ssi(rrep.tx_power, d)
        rid = world.services["route_seq"] = world.services.get("route_seq", 0) + 1
        route = Route(id=rid, src=self.src, dst=self.dst, hops=hops)
        stats = RouteStats(delay=rtt / 2.0, plr=0.0, pdr=1.0, fsr=0.0,
                           rtt=rtt, ssi=ssi)
        self.candidates.append(Candidate(route, stats, rrep.dst_seq,
                                         rrep.hop_count, rrep.forged))
        world.log(("rrep_at_src", world.clock, self.src, self.rreq_id, hops))


def start_discovery(world: WorldState, src: UavId, dst: UavId,
                    k: int = DEFAULT_K_ROUTES) -> Discovery:
    if src == dst:
        raise ValueError("src and dst must differ")
    svc = world.services
    rid = svc["rreq_seq"] = svc.get("rreq_seq", 0) + 1
    disc = Discovery(rid, src, dst, world.clock, k)
    svc.setdefault("discoveries", {})[rid] = disc
    world.nodes[src].rreq_cache.add((rid, src))
    world.log(("discovery_start", world.clock, src, dst, rid))
    rreq = Rreq(origin=src, sender=src, timestamp=world.clock,
                tx_power=_tx_power(world, src), rreq_id=rid, src=src, dst=dst,
                hop_count=0, path_so_far=(src,), dst_seq=0)
    world.transmit(rreq, src)
    return disc


def finish_discovery(world: WorldState, disc: Discovery) -> List[Candidate]:
    disc.done = True
    world.services.get("discoveries", {}).pop(disc.rreq_id, None)
    blacklist = world.nodes[disc.src].blacklist
    kept = [c for c in disc.candidates if not c.route.contains_any(blacklist)]
    world.log(("routes_found", world.clock, disc.src, disc.dst, disc.rreq_id,
               tuple(c.route.hops for c in kept)))
    return kept


def discover_routes(src: UavId, dst: UavId, world: WorldState,
                    k: int = DEFAULT_K_ROUTES,
                    timeout: float = DISCOVERY_TIMEOUT) -> list:
    """Synchronous discovery: flood, run the clock past the collect window,
    return (Route, RouteStats) pairs. Empty means disconnected.

    K is a scenario-wide reply budget; passing it here pins the world's value.
    """
    world.services["k_routes"] = k
    disc = start_discovery(world, src, dst, k)
    world.run(world.clock + timeout)
    return [(c.route, c.stats) for c in finish_discovery(world, disc)]


def send_data(route: Route, n_packets: int, world: WorldState,
              session_id: int = 0, spacing: float = 0.02) -> Tuple[int, int]:
    """Send n data packets along the route; returns (sent, received at dst).

    The route is validated against the current topology before the first
    packet leaves; links breaking mid-transfer surface as channel drops.
    """
    from aspuavn.domain import validate_route
    if not validate_route(route, world.positions_dict(), world.comm_range):
        pass  # still attempt: broken links show up as drops, matching CBR use
    start = world.clock
    for i in range(n_packets):
        world.call_at(start + i * spacing, _send_data_packet, route, i,
                      session_id)
    world.run(start + n_packets * spacing
              + (route.n_legs + 2) * world.hop_delay + 0.05)
    received = sum(1 for r in world.trace
                   if r[0] == "data_delivered" and r[2] == session_id
                   and r[1] >= start)
    return n_packets, received


def _send_data_packet(world: WorldState, route: Route, seq: int,
                      session_id: int) -> None:
    pkt = Data(origin=route.src, sender=route.src, timestamp=world.clock,
               tx_power=_tx_power(world, route.src), seq=seq,
               route=route.hops, session_id=session_id)
    world.log(("data_sent", world.clock, session_id, route.src, seq))
    world.transmit(pkt, route.src, route.hops[1])


def _tx_power(world: WorldState, node_id: UavId) -> float:
    role = world.nodes[node_id].role
    if role.is_attacker and world.attacks_active():
        return ATTACKER_TX_POWER
    return NORMAL_TX_POWER


# --- packet dispatch ---------------------------------------------------------

def install(world: WorldState, attack_config: Optional[adversary.AttackConfig]
            = None) -> None:
    """Wire the protocol stack into the event loop."""
    world.services["attack_config"] = attack_config or adversary.AttackConfig()
    world.packet_handler = handle_packet


def handle_packet(world: WorldState, at: UavId, pkt) -> None:
    node = world.nodes[at]
    kind = type(pkt).__name__
    if pkt.sender in node.blacklist:
        world.log(("blacklist_drop", world.clock, kind, pkt.sender, at))
        return
    world.log(("rx", world.clock, kind, pkt.sender, at))
    if isinstance(pkt, Rreq):
        _on_rreq(world, node, pkt)
    elif isinstance(pkt, Rrep):
        _on_rrep(world, node, pkt)
    elif isinstance(pkt, Alert):
        _on_alert(world, node, pkt)
    elif isinstance(pkt, PAYLOAD_KINDS):
        _on_payload(world, node, pkt)


def _on_rreq(world: WorldState, node, rreq: Rreq) -> None:
    nid = node.id
    if nid == rreq.dst:
        _reply_as_destination(world, node, rreq)
        return
    key = (rreq.rreq_id, rreq.origin)
    if key in node.rreq_cache:
        return
    node.rreq_cache.add(key)
    node.seen_destinations[rreq.dst] = world.clock
    if nid in rreq.path_so_far:
        return
    role = node.role
    cfg = world.services.get("attack_config")
    if role.is_attacker and world.attacks_active() and cfg is not None:
        if role.attack in (AttackKind.SELECTIVE_FORWARDING, AttackKind.SINKHOLE):
            adversary.forge_rrep(world, nid, rreq, cfg)
        elif role.attack is AttackKind.WORMHOLE:
            adversary.tunnel_rreq(world, node, rreq, cfg)
    out = Rreq(origin=rreq.origin, sender=nid, timestamp=world.clock,
               tx_power=_tx_power(world, nid), rreq_id=rreq.rreq_id,
               src=rreq.src, dst=rreq.dst, hop_count=rreq.hop_count + 1,
               path_so_far=rreq.path_so_far + (nid,), dst_seq=rreq.dst_seq)
    world.transmit(out, nid)


def _reply_as_destination(world: WorldState, node, rreq: Rreq) -> None:
    key = (rreq.rreq_id, rreq.origin)
    replied = node.rreq_replies.setdefault(key, set())
    k = world.services.get("k_routes", DEFAULT_K_ROUTES)
    if len(replied) >= k:
        return
    path = rreq.path_so_far + (node.id,)
    if len(set(path)) != len(path) or path in replied:
        return
    if not replied:
        node.seq += 1  # fresh sequence number for this discovery
    replied.add(path)
    rrep = Rrep(origin=node.id, sender=node.id, timestamp=world.clock,
                tx_power=_tx_power(world, node.id), rreq_id=rreq.rreq_id,
                route=path, dst_seq=node.seq, hop_count=rreq.hop_count + 1)
    world.transmit(rrep, node.id, path[-2])


def _on_rrep(world: WorldState, node, rrep: Rrep) -> None:
    hops = rrep.route
    if node.id not in hops:
        return
    idx = hops.index(node.id)
    if idx == 0:
        _deliver_rrep_to_source(world, node, rrep)
        return
    nxt = hops[idx - 1]
    out = replace(rrep, sender=node.id, tx_power=_tx_power(world, node.id))
    world.transmit(out, node.id, nxt, via_tunnel=_is_tunnel_leg(world, node, nxt))


def _deliver_rrep_to_source(world: WorldState, node, rrep: Rrep) -> None:
    discoveries = world.services.get("discoveries", {})
    if rrep.rreq_id in discoveries:
        disc = discoveries[rrep.rreq_id]
        if disc.src == node.id:
            disc.offer(world, rrep)
        return
    if rrep.rreq_id == -1:  # gratuitous advertisement
        for disc in discoveries.values():
            if disc.src == node.id and disc.dst == rrep.route[-1]:
                disc.offer(world, rrep)


def _is_tunnel_leg(world: WorldState, node, target: UavId) -> bool:
    role = node.role
    return (role.attack is AttackKind.WORMHOLE
            and role.wormhole_peer == target
            and world.attacks_active())


def _on_alert(world: WorldState, node, pkt: Alert) -> None:
    if pkt.alert_id in node.alert_cache:
        return
    node.alert_cache.add(pkt.alert_id)
    node.blacklist.add(pkt.blacklisted)
    if node.memory is not None:
        node.memory.purge(pkt.blacklisted)
    world.log(("alert_rx", world.clock, node.id, pkt.blacklisted))
    world.transmit(replace(pkt, sender=node.id,
                           tx_power=_tx_power(world, node.id)), node.id)


def _on_payload(world: WorldState, node, pkt) -> None:
    hops = pkt.route
    nid = node.id
    if nid not in hops:
        return
    idx = hops.index(nid)
    backward = isinstance(pkt, Confirm)
    terminal = idx == 0 if backward else idx == len(hops) - 1
    if terminal:
        _deliver_payload(world, node, pkt)
        return
    watchdog = None
    if isinstance(pkt, TestPacket):
        watchdog = world.services.get("watchdogs", {}).get(pkt.watchdog_id)
        if watchdog is not None:
            watchdog.note_received(nid, pkt.interval)
    role = node.role
    if role.is_attacker and world.attacks_active() and _attacker_drops(world, node, pkt):
        world.log(("attacker_drop", world.clock, type(pkt).__name__, nid))
        return
    nxt = hops[idx - 1] if backward else hops[idx + 1]
    out = replace(pkt, sender=nid, tx_power=_tx_power(world, nid))
    if watchdog is not None:
        # promiscuous observation: a third party in radio range vouches for
        # the retransmission; otherwise the downstream receipt substitutes
        observers = [m for m in world.neighbors(nid) if m != nxt]
        if observers or world.in_range(nid, nxt):
            watchdog.note_forwarded(nid, pkt.interval)
    world.transmit(out, nid, nxt, via_tunnel=_is_tunnel_leg(world, node, nxt))


def _attacker_drops(world: WorldState, node, pkt) -> bool:
    kind = node.role.attack
    if kind is AttackKind.SELECTIVE_FORWARDING:
        return adversary.sf_should_drop(world, node, pkt)
    # wormhole endpoints and sinkholes silently drop all attracted payload
    return True


def _deliver_payload(world: WorldState, node, pkt) -> None:
    if isinstance(pkt, Hello):
        back = Confirm(origin=node.id, sender=node.id, timestamp=world.clock,
                       tx_power=_tx_power(world, node.id),
                       route_id=pkt.route_id, probe_round=pkt.probe_round,
                       route=pkt.route)
        world.transmit(back, node.id, pkt.route[-2])
        return
    if isinstance(pkt, Confirm):
        probes = world.services.get("probes", {})
        cb = probes.pop((pkt.route_id, pkt.probe_round), None)
        if cb is not None:
            cb(world)
        return
    if isinstance(pkt, Data):
        world.log(("data_delivered", world.clock, pkt.session_id, node.id,
                   pkt.seq))
        return
    if isinstance(pkt, TestPacket):
        wd = world.services.get("watchdogs", {}).get(pkt.watchdog_id)
        if wd is not None:
            wd.note_completed(pkt.interval)
