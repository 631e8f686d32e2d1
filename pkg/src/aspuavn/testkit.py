"""Deterministic small-graph fixtures used by the CI `fixture` subcommand and
the test suite.

All fixtures are static (speed 0) and fully specified, so their oracles are
exact: chain topologies for the complexity accounting, and a three-lane world
with vertex-disjoint source-destination paths for the suspicion pipeline.
"""

from __future__ import annotations

import math

import numpy as np

from aspuavn import agents, analysis, routing
from aspuavn.adversary import AttackConfig
from aspuavn.domain import AttackKind, NodeRole, Route, RouteStats
from aspuavn.engine import WorldState

CHAIN_RANGE = 30.0
HOP_DELAY = 0.005


def make_world(positions, roles=None, comm_range=CHAIN_RANGE,
               hop_delay=HOP_DELAY, seed=0, attack_config=None,
               active_attacks=True) -> WorldState:
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    if roles is None:
        roles = [NodeRole() for _ in range(n)]
    world = WorldState(positions, roles, bounds=(10000.0, 10000.0, 10000.0),
                       comm_range=comm_range, hop_delay=hop_delay,
                       rng=np.random.default_rng(seed), speed=0.0)
    routing.install(world, attack_config or AttackConfig())
    if active_attacks:
        world.attack_activation_time = 0.0
    return world


def chain_world(n: int, spacing: float = CHAIN_RANGE, seed: int = 0):
    """n nodes on a line, consecutive spacing exactly one radio range."""
    positions = [(i * spacing, 0.0, 0.0) for i in range(n)]
    return make_world(positions, seed=seed), spacing


def discovery_on_chain(world: WorldState, n: int):
    """Run one discovery over the chain and compare the trace against the
    closed-form message and latency estimates."""
    src, dst = 0, n - 1
    routing.discover_routes(src, dst, world)
    rreq_id = world.services.get("rreq_seq", 1)
    measured, _ = analysis.measured_control_messages(world.trace, rreq_id,
                                                     static_topology=True)
    x = world.distance_between(src, dst)
    expected = analysis.expected_message_complexity(x, world.comm_range, n)
    latency = analysis.measured_discovery_latency(world.trace, rreq_id)
    expected_latency = analysis.expected_time_complexity(x, world.comm_range,
                                                         world.hop_delay)
    return measured, expected, latency, expected_latency


# --- three-lane fixture --------------------------------------------------------

LANES_RANGE = 35.0
LANES_SRC = 0
LANES_DST = 7
LANES = ((1, 2), (3, 4), (5, 6))  # vertex-disjoint lanes src -> dst


def lanes_positions():
    """Source below, destination above, three two-node lanes at 120-degree
    separation; inter-lane gaps exceed the radio range."""
    rho = 25.0
    pos = [None] * 10
    pos[LANES_SRC] = (0.0, 0.0, 0.0)
    pos[LANES_DST] = (0.0, 0.0, 60.0)
    for k, (a, b) in enumerate(LANES):
        ang = 2.0 * math.pi * k / 3.0
        x, y = rho * math.cos(ang), rho * math.sin(ang)
        pos[a] = (x, y, 20.0)
        pos[b] = (x, y, 40.0)
    pos[8] = (500.0, 500.0, 0.0)   # decoys, out of everyone's range
    pos[9] = (-500.0, -500.0, 0.0)
    return pos


def lanes_world(attacker: int = 1, drop_probability: float = 1.0,
                attack: AttackKind = AttackKind.SELECTIVE_FORWARDING,
                seed: int = 0) -> WorldState:
    roles = [NodeRole() for _ in range(10)]
    if attacker is not None:
        if attack is AttackKind.SELECTIVE_FORWARDING:
            roles[attacker] = NodeRole(attack=attack,
                                       sf_drop_probability=drop_probability)
        else:
            roles[attacker] = NodeRole(attack=attack)
    cfg = AttackConfig(sf_drop_probability=drop_probability)
    return make_world(lanes_positions(), roles=roles, comm_range=LANES_RANGE,
                      seed=seed, attack_config=cfg)


def lanes_routes(world: WorldState):
    """The three hand-built candidate routes with fresh discovery stats."""
    out = []
    for i, (a, b) in enumerate(LANES):
        hops = (LANES_SRC, a, b, LANES_DST)
        rtt = 2 * (len(hops) - 1) * world.hop_delay
        out.append((Route(id=i + 1, src=LANES_SRC, dst=LANES_DST, hops=hops),
                    RouteStats(delay=rtt / 2, rtt=rtt, ssi=1.0)))
    return out


def acceptance_job(args):
    """One desk-scale run for the acceptance sweep; returns a flat dict so
    worker processes ship no traces around. Importable at top level for the
    spawn start method."""
    from aspuavn import analysis as _analysis
    from aspuavn.scenario import PRESETS, run_scenario
    seed, defense, antibodies, malicious = args
    result = run_scenario(PRESETS["desk"], seed, defense=defense,
                          antibodies=antibodies, malicious=malicious,
                          keep_trace=True)
    row = result.row()
    row["audit_violations"] = len(_analysis.audit_isolation(result.trace))
    return row


def lanes_fixture_outcome(seed: int = 0) -> bool:
    """True iff 4-round probing rejects exactly the contaminated lane."""
    world = lanes_world(attacker=1, drop_probability=1.0, seed=seed)
    candidates = lanes_routes(world)
    survivors, rejected = agents.evaluate_routes(candidates, world)
    rejected_ids = {r.id for r, _, _ in rejected}
    survivor_ids = {r.id for r, _, _ in survivors}
    if rejected_ids != {1} or survivor_ids != {2, 3}:
        return False
    return all(s.p_malicious > 50.0 for _, _, s in rejected)
