"""Attacker behaviors: wormhole tunneling, selective-forwarding forgery and
drops, sinkhole advertisement.

These are policy hooks invoked by the packet dispatch in `routing`. The
ground-truth attacker set lives on the world for scoring only; nothing in the
agent or immunity layers reads node roles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

from aspuavn.domain import (ATTACKER_TX_POWER, AttackKind, NodeRole, Rrep,
                            Rreq, UavId)
from aspuavn.engine import ConfigurationError, WorldState

SINKHOLE_ADVERTISE_PERIOD = 1.0   # s between gratuitous advertisement rounds
SINKHOLE_BAIT_MAX_AGE = 10.0      # only advertise recently probed destinations


@dataclass
class AttackConfig:
    malicious_fraction: float = 0.0          # percent of nodes
    kinds_enabled: Tuple[AttackKind, ...] = ()
    sf_drop_probability: float = 1.0
    wh_tunnel_delay: float = 0.0
    forged_seq_boost: int = 100
    forged_hop_count: int = 1

    def validate(self):
        if not 0.0 <= self.malicious_fraction < 100.0:
            raise ConfigurationError("malicious_fraction must be in [0, 100)")
        if not 0.0 <= self.sf_drop_probability <= 1.0:
            raise ConfigurationError("sf_drop_probability must be in [0, 1]")


def assign_roles(n: int, config: AttackConfig, rng,
                 ground_stations=()) -> list:
    """Pick attackers uniformly at random among non-ground-station nodes.

    Wormhole attackers are assigned in pairs; the malicious count is rounded
    to the nearest node and, when WH is the only enabled kind, to an even
    number.
    """
    config.validate()
    roles = [NodeRole(ground_station=(i in ground_stations)) for i in range(n)]
    if config.malicious_fraction <= 0.0 or not config.kinds_enabled:
        return roles
    eligible = [i for i in range(n) if i not in set(ground_stations)]
    count = int(round(n * config.malicious_fraction / 100.0))
    count = min(count, len(eligible))
    if count == 0:
        return roles
    kinds = list(config.kinds_enabled)
    if kinds == [AttackKind.WORMHOLE] and count % 2 == 1:
        count = count + 1 if count + 1 <= len(eligible) else count - 1
    chosen = sorted(int(i) for i in rng.choice(eligible, size=count,
                                               replace=False))
    i = 0
    k = 0
    while i < len(chosen):
        kind = kinds[k % len(kinds)]
        k += 1
        if kind is AttackKind.WORMHOLE:
            if i + 1 >= len(chosen):
                # no partner left for a tunnel; fall back to another kind
                other = [kd for kd in kinds if kd is not AttackKind.WORMHOLE]
                fallback = other[0] if other else AttackKind.SELECTIVE_FORWARDING
                roles[chosen[i]] = _role_for(fallback, config, peer=None)
                i += 1
                continue
            a, b = chosen[i], chosen[i + 1]
            roles[a] = NodeRole(attack=AttackKind.WORMHOLE, wormhole_peer=b)
            roles[b] = NodeRole(attack=AttackKind.WORMHOLE, wormhole_peer=a)
            i += 2
        else:
            roles[chosen[i]] = _role_for(kind, config, peer=None)
            i += 1
    return roles


def _role_for(kind: AttackKind, config: AttackConfig, peer) -> NodeRole:
    if kind is AttackKind.SELECTIVE_FORWARDING:
        return NodeRole(attack=kind,
                        sf_drop_probability=config.sf_drop_probability)
    return NodeRole(attack=kind, wormhole_peer=peer)


# --- selective forwarding ----------------------------------------------------

def forge_rrep(world: WorldState, attacker: UavId, rreq: Rreq,
               config: AttackConfig) -> None:
    """Answer an overheard RREQ with a fabricated attractive reply.

    The fake route splices the attacker in as penultimate hop; the claimed
    hop count undercuts every honest path and the destination sequence number
    outbids the honest reply.
    """
    fake_route = rreq.path_so_far + (attacker, rreq.dst)
    if len(set(fake_route)) != len(fake_route):
        return  # splice would introduce a loop; stay quiet
    rrep = Rrep(origin=attacker, sender=attacker, timestamp=world.clock,
                tx_power=ATTACKER_TX_POWER, rreq_id=rreq.rreq_id,
                route=fake_route, dst_seq=rreq.dst_seq + config.forged_seq_boost,
                hop_count=config.forged_hop_count, forged=True)
    prev = rreq.path_so_far[-1]
    world.transmit(rrep, attacker, prev)


def sf_should_drop(world: WorldState, node, pkt) -> bool:
    """Bernoulli drop of a payload-class packet at a selective forwarder."""
    p = node.role.sf_drop_probability
    if p >= 1.0:
        return True
    if p <= 0.0:
        return False
    rng = getattr(world, "streams", {}).get("adversary", world.rng)
    return bool(rng.random() < p)


# --- wormhole ----------------------------------------------------------------

def tunnel_rreq(world: WorldState, endpoint, rreq: Rreq,
                config: AttackConfig) -> None:
    """Re-emit an overheard RREQ at the distant tunnel peer.

    Both endpoints join the recorded path (they do forward the packet) but
    the hop counter is left untouched, so the tunnel masquerades as a single
    short link.
    """
    peer = endpoint.role.wormhole_peer
    if peer is None or not 0 <= peer < len(world.nodes):
        return
    peer_node = world.nodes[peer]
    key = (rreq.rreq_id, rreq.origin)
    if key in peer_node.rreq_cache:
        return
    peer_node.rreq_cache.add(key)
    path = rreq.path_so_far + (endpoint.id, peer)
    if len(set(path)) != len(path):
        return
    out = Rreq(origin=rreq.origin, sender=peer, timestamp=world.clock,
               tx_power=ATTACKER_TX_POWER, rreq_id=rreq.rreq_id, src=rreq.src,
               dst=rreq.dst, hop_count=rreq.hop_count, path_so_far=path,
               dst_seq=rreq.dst_seq)
    world.call_after(config.wh_tunnel_delay, _emit_from_peer, out, peer)


def _emit_from_peer(world: WorldState, rreq: Rreq, peer: UavId) -> None:
    world.transmit(rreq, peer)


# --- sinkhole ----------------------------------------------------------------

def schedule_sinkhole_timers(world: WorldState, config: AttackConfig) -> None:
    for node in world.nodes:
        if node.role.attack is AttackKind.SINKHOLE:
            world.call_at(max(world.clock, world.attack_activation_time),
                          sh_advertise, node.id, config)


def sh_advertise(world: WorldState, attacker: UavId, config: AttackConfig) -> None:
    """Periodically push gratuitous attractive replies for destinations the
    sinkhole has recently seen probed."""
    node = world.nodes[attacker]
    if world.attacks_active():
        cutoff = world.clock - SINKHOLE_BAIT_MAX_AGE
        baits = [d for d, seen in sorted(node.seen_destinations.items())
                 if seen >= cutoff and d != attacker]
        for dst in baits:
            for nb in world.neighbors(attacker):
                if nb == dst:
                    continue
                fake = (nb, attacker, dst)
                rrep = Rrep(origin=attacker, sender=attacker,
                            timestamp=world.clock, tx_power=ATTACKER_TX_POWER,
                            rreq_id=-1, route=fake,
                            dst_seq=config.forged_seq_boost,
                            hop_count=config.forged_hop_count, forged=True)
                world.transmit(rrep, attacker, nb)
    world.call_after(SINKHOLE_ADVERTISE_PERIOD, sh_advertise, attacker, config)
