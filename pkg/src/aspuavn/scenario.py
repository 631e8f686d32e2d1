"""Scenario orchestration: config, world construction, traffic sessions, and
the per-session protection pipeline.

A run is split into an attack-free warm-up (self-antigen collection, when the
defense is on) and a traffic phase. Attacks activate at the warm-up boundary
in both defense modes so on/off runs stay comparable. Each random concern
(placement, role assignment, mobility, attacker coin flips, traffic pairs,
detector training) draws from its own child stream of the run seed, so
defense on/off runs see identical topologies and traffic.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from aspuavn import adversary, analysis, metrics, routing
from aspuavn.agents import Evaluation, Watchdog, decide, thresholds_for
from aspuavn.domain import AttackKind
from aspuavn.engine import ConfigurationError, WorldState, place_nodes_ppp
from aspuavn.immunity import (KbConfig, KnowledgeBase, SecurityMemory,
                              AntigenVerdict, affinity_filter, build_antigen,
                              candidate_maxima, match_select)
from aspuavn.mobility import StParams


@dataclass
class ScenarioConfig:
    name: str = "custom"
    node_count: int = 50
    bounds: Tuple[float, float, float] = (500.0, 500.0, 100.0)
    sim_time: float = 100.0
    comm_range: float = 100.0
    speed: float = 18.0
    hop_delay: float = 0.005
    malicious_fraction: float = 0.0
    attack_kinds: Tuple[str, ...] = ()
    sf_drop_probability: float = 1.0
    wh_tunnel_delay: float = 0.0
    forged_seq_boost: int = 100
    forged_hop_count: int = 1
    antibody_count: int = 200
    detector_radius: float = 0.15
    alpha: float = 0.5
    n_test: int = 10
    probe_timeout: float = 0.2
    discovery_timeout: float = 0.2
    k_routes: int = 3
    defense_enabled: bool = True
    session_interval: float = 1.0
    n_packets: int = 20
    data_spacing: float = 0.02
    warmup_time: float = 15.0
    storing_time: float = 10.0
    max_antigens: int = 1000
    mobility_mean_duration: float = 3.0
    mobility_radius_min: float = 100.0
    mobility_radius_max: float = 500.0
    seeds: Tuple[int, ...] = (1,)
    antibody_sweep: Tuple[int, ...] = ()
    malicious_sweep: Tuple[float, ...] = ()

    def validate(self) -> None:
        def bad(fieldname, why):
            raise ConfigurationError(f"config field '{fieldname}': {why}")

        if self.node_count < 2:
            bad("node_count", "need at least two nodes")
        if any(b <= 0 for b in self.bounds):
            bad("bounds", "must span a positive volume")
        if self.sim_time <= 0:
            bad("sim_time", "must be positive")
        if self.comm_range <= 0:
            bad("range", "must be positive")
        if self.speed < 0:
            bad("speed", "must be non-negative")
        if self.hop_delay <= 0:
            bad("hop_delay", "must be positive")
        if not 0 <= self.malicious_fraction < 100:
            bad("malicious_fraction", "must lie in [0, 100)")
        for k in self.attack_kinds:
            if k not in ("WH", "SF", "SH"):
                bad("attack_kinds", f"unknown attack kind {k!r}")
        if self.defense_enabled and self.antibody_count < 1:
            bad("antibody_count", "need at least one detector when defended")
        if not 0 < self.alpha <= 1:
            bad("alpha", "must lie in (0, 1]")
        if self.k_routes < 1:
            bad("k_routes", "must be >= 1")
        if not self.seeds:
            bad("seeds", "need at least one seed")
        if self.warmup_time >= self.sim_time:
            bad("warmup_time", "must leave room for traffic before sim_time")


PRESETS = {}


def _preset(name, **kw):
    PRESETS[name] = ScenarioConfig(name=name, **kw)


_paper_common = dict(node_count=500, sim_time=1000.0, comm_range=30.0,
                     speed=180.0, attack_kinds=("WH", "SF", "SH"),
                     antibody_count=200, warmup_time=15.0)
_preset("scenario1", bounds=(1000.0, 1000.0, 100.0), malicious_fraction=5.0,
        **_paper_common)
_preset("scenario2", bounds=(2000.0, 2000.0, 100.0), malicious_fraction=10.0,
        **_paper_common)
_preset("scenario3", bounds=(3000.0, 3000.0, 100.0), malicious_fraction=15.0,
        **_paper_common)
_preset("scenario4", bounds=(4000.0, 4000.0, 100.0), malicious_fraction=20.0,
        antibody_sweep=(50, 100, 150, 200, 250, 300, 350), **_paper_common)
# tenth-scale configuration that finishes in seconds on a laptop; the speed is
# dropped and the range raised so link lifetimes stay above the probe cycle
# detector radius: at the 0.15 default a 6-d hypersphere covers so little of
# the unit cube that no detector count in the sweep can matter; 0.45 makes the
# antibody axis meaningful at this scale
_preset("desk", node_count=50, bounds=(500.0, 500.0, 100.0), sim_time=100.0,
        comm_range=150.0, speed=18.0, malicious_fraction=20.0,
        attack_kinds=("SF",), sf_drop_probability=0.5, antibody_count=200,
        detector_radius=0.45, probe_timeout=0.1, discovery_timeout=0.1,
        data_spacing=0.01, antibody_sweep=(50, 100, 200, 350),
        seeds=tuple(range(1, 21)))


@dataclass
class RunResult:
    seed: int
    scenario: str
    defense: bool
    antibodies: int
    malicious_pct: float
    attacks: str
    stats: metrics.ExperimentStats
    cm: metrics.ConfusionMatrix
    theorem: analysis.TheoremReport
    control_msg_count: int
    sim_time: float
    n_sessions: int
    trace: Optional[list] = None

    def row(self) -> dict:
        fpr, fnr, dr = metrics.rates(self.cm)
        have_data = self.stats.n > 0 and sum(self.stats.y) > 0
        return {
            "seed": self.seed,
            "scenario": self.scenario,
            "defense": "on" if self.defense else "off",
            "antibodies": self.antibodies,
            "malicious_pct": self.malicious_pct,
            "attacks": self.attacks or "-",
            "pdr": metrics.pdr(self.stats) if have_data else None,
            "plr": metrics.plr(self.stats) if have_data else None,
            "pooled_pdr": metrics.pooled_pdr(self.stats) if have_data else None,
            "fpr": fpr,
            "fnr": fnr,
            "dr": dr,
            "thm_lhs": self.theorem.lhs,
            "thm_bound": self.theorem.bound,
            "thm_holds": int(self.theorem.holds),
            "thm_beta_min": self.theorem.beta_min,
            "control_msg_count": self.control_msg_count,
            "runtime": self.sim_time,
        }


CSV_COLUMNS = ["seed", "scenario", "defense", "antibodies", "malicious_pct",
               "attacks", "pdr", "plr", "pooled_pdr", "fpr", "fnr", "dr",
               "thm_lhs", "thm_bound", "thm_holds", "thm_beta_min",
               "control_msg_count", "runtime"]


def build_world(cfg: ScenarioConfig, seed: int) -> WorldState:
    cfg.validate()
    ss = np.random.SeedSequence(seed)
    placement_ss, roles_ss, mobility_ss, adv_ss, traffic_ss, train_ss = \
        ss.spawn(6)
    attack_cfg = adversary.AttackConfig(
        malicious_fraction=cfg.malicious_fraction,
        kinds_enabled=tuple(AttackKind(k) for k in cfg.attack_kinds),
        sf_drop_probability=cfg.sf_drop_probability,
        wh_tunnel_delay=cfg.wh_tunnel_delay,
        forged_seq_boost=cfg.forged_seq_boost,
        forged_hop_count=cfg.forged_hop_count)
    positions = place_nodes_ppp(cfg.node_count, cfg.bounds,
                                np.random.default_rng(placement_ss))
    roles = adversary.assign_roles(cfg.node_count, attack_cfg,
                                   np.random.default_rng(roles_ss))
    params = StParams(speed=cfg.speed, mean_duration=cfg.mobility_mean_duration,
                      radius_min=cfg.mobility_radius_min,
                      radius_max=cfg.mobility_radius_max)
    world = WorldState(positions, roles, cfg.bounds, cfg.comm_range,
                       cfg.hop_delay, np.random.default_rng(mobility_ss),
                       speed=cfg.speed, mobility_params=params)
    world.streams = {
        "adversary": np.random.default_rng(adv_ss),
        "traffic": np.random.default_rng(traffic_ss),
        "training": np.random.default_rng(train_ss),
    }
    world.attack_activation_time = cfg.warmup_time
    world.services["k_routes"] = cfg.k_routes
    routing.install(world, attack_cfg)
    if AttackKind.SINKHOLE in attack_cfg.kinds_enabled:
        adversary.schedule_sinkhole_timers(world, attack_cfg)
    if cfg.defense_enabled:
        for node in world.nodes:
            node.memory = SecurityMemory(node.blacklist,
                                         storing_time=cfg.storing_time)
    return world


class SessionManager:
    """Schedules warm-up and traffic sessions and drives the per-session
    protection pipeline."""

    def __init__(self, world: WorldState, cfg: ScenarioConfig):
        self.cfg = cfg
        self.defense = cfg.defense_enabled
        self.rng = world.streams["traffic"]
        self.kb = None
        if self.defense:
            kb_cfg = KbConfig(antigen_collection_time=cfg.warmup_time,
                              storing_time=cfg.storing_time,
                              max_antigens=cfg.max_antigens)
            self.kb = KnowledgeBase(kb_cfg, radius=cfg.detector_radius)
        # legitimate traffic endpoints; experiment harness choice, the agents
        # themselves never see this set
        self.endpoints = sorted(
            set(range(cfg.node_count)) - set(world.ground_truth_attackers)
            - {n.id for n in world.nodes if n.role.ground_station})
        self.session_seq = 0
        self.watchdogged: set = set()
        world.services["sessions"] = self

    # -- scheduling -----------------------------------------------------

    def schedule_all(self, world: WorldState) -> None:
        cfg = self.cfg
        if self.defense:
            t = 0.5
            while t < cfg.warmup_time - 1.0:
                world.call_at(t, _cb_warmup_session, self)
                t += cfg.session_interval
            world.call_at(cfg.warmup_time, _cb_train, self)
        t = cfg.warmup_time + 0.5
        tail = 2.0 + cfg.n_packets * cfg.data_spacing
        while t < cfg.sim_time - tail:
            world.call_at(t, _cb_data_session, self)
            t += cfg.session_interval

    def _pick_pair(self):
        pair = self.rng.choice(self.endpoints, size=2, replace=False)
        return int(pair[0]), int(pair[1])

    # -- warm-up --------------------------------------------------------

    def warmup_session(self, world: WorldState) -> None:
        if len(self.endpoints) < 2:
            return
        src, dst = self._pick_pair()
        disc = routing.start_discovery(world, src, dst, self.cfg.k_routes)
        world.call_after(self.cfg.discovery_timeout, _cb_warmup_disc_done,
                         self, disc)

    def warmup_disc_done(self, world: WorldState, disc) -> None:
        cands = routing.finish_discovery(world, disc)
        if not cands:
            return
        ev = Evaluation([(c.route, c.stats) for c in cands],
                        on_done=self._warmup_evaluated,
                        probe_timeout=self.cfg.probe_timeout)
        ev.start(world)

    def _warmup_evaluated(self, world, survivors, rejected) -> None:
        if not survivors or self.kb is None:
            return
        maxima = candidate_maxima([s for _, s, _ in survivors])
        for route, stats, _ in survivors:
            self.kb.add_self_antigen(build_antigen(stats, maxima, route.id))
            self.kb.note_delay(stats.delay)

    def train(self, world: WorldState) -> None:
        if self.kb is not None:
            self.kb.train(self.cfg.antibody_count, world.streams["training"],
                          now=world.clock)

    # -- traffic --------------------------------------------------------

    def data_session(self, world: WorldState) -> None:
        if len(self.endpoints) < 2:
            return
        src, dst = self._pick_pair()
        self.session_seq += 1
        sid = self.session_seq
        world.log(("session_start", world.clock, sid, src, dst,
                   int(self.defense)))
        if self.defense:
            cached = world.nodes[src].memory.lookup(src, dst, world.clock)
            if cached is not None:
                self._send(world, cached, sid)
                return
        self._discover(world, src, dst, sid, attempt=0)

    def _discover(self, world, src, dst, sid, attempt) -> None:
        disc = routing.start_discovery(world, src, dst, self.cfg.k_routes)
        world.call_after(self.cfg.discovery_timeout, _cb_disc_done, self, disc,
                         sid, attempt)

    def disc_done(self, world: WorldState, disc, sid, attempt) -> None:
        cands = routing.finish_discovery(world, disc)
        if not cands:
            self._retry_or_fail(world, disc.src, disc.dst, sid, attempt)
            return
        if not self.defense:
            best = max(cands, key=lambda c: (c.dst_seq, -c.claimed_hops,
                                             -c.route.id))
            self._send(world, best.route, sid)
            return
        ev = Evaluation(
            [(c.route, c.stats) for c in cands],
            on_done=lambda w, s, r: self._evaluated(w, s, r, disc.src,
                                                    disc.dst, sid, attempt),
            probe_timeout=self.cfg.probe_timeout)
        ev.start(world)

    def _evaluated(self, world, survivors, rejected, src, dst, sid,
                   attempt) -> None:
        # isolation alerts may have landed while the probes were in flight
        blacklist = world.nodes[src].blacklist
        survivors = [(r, s, p) for r, s, p in survivors
                     if not r.contains_any(blacklist)]
        if not survivors:
            self._retry_or_fail(world, src, dst, sid, attempt)
            return
        stats_list = [s for _, s, _ in survivors]
        ths = thresholds_for(stats_list)
        triples = [(r, s, th)
                   for (r, s, _), th in zip(survivors, ths)]
        eliminated, remaining = decide(triples)
        if eliminated is not None:
            world.log(("route_eliminated", world.clock, src,
                       eliminated[0].id, eliminated[2]))
            self._spawn_watchdog(world, eliminated[0])
        # parallel immune verdict on the remaining candidates
        maxima = candidate_maxima(stats_list)
        usable = []
        for route, stats, th in remaining:
            antigen = build_antigen(stats, maxima, route.id)
            if (self.kb is not None
                    and self.kb.verdict(antigen)
                    is AntigenVerdict.NON_SELF_MALICIOUS):
                world.log(("nsa_escalated", world.clock, src, route.id))
                self._spawn_watchdog(world, route)
            else:
                usable.append((route, stats, th))
        if not usable:
            self._retry_or_fail(world, src, dst, sid, attempt)
            return
        filtered = affinity_filter(usable)
        route, stats, th, fr = match_select(filtered)
        world.log(("route_selected", world.clock, src, route.id, th, fr))
        node = world.nodes[src]
        if node.routing_table is None:
            node.routing_table = routing.RoutingTable(self.cfg.k_routes)
        for r, s, _ in usable:
            node.routing_table.put(r, s, world.clock)
        if node.memory is not None:
            node.memory.register(route, fr, th, world.clock)
        self._send(world, route, sid)

    def _spawn_watchdog(self, world: WorldState, route) -> None:
        if route.hops in self.watchdogged:
            return
        self.watchdogged.add(route.hops)
        wd = Watchdog(route, n_test=self.cfg.n_test, alpha=self.cfg.alpha)
        wd.start(world)

    def _retry_or_fail(self, world, src, dst, sid, attempt) -> None:
        if attempt == 0:
            self._discover(world, src, dst, sid, attempt=1)
        else:
            self._fail(world, sid, src)

    def _fail(self, world: WorldState, sid, src) -> None:
        # offered load with no usable route: counted as sent and lost
        for k in range(self.cfg.n_packets):
            world.log(("data_src_drop", world.clock, sid, src, k))

    def _send(self, world: WorldState, route, sid) -> None:
        start = world.clock
        for k in range(self.cfg.n_packets):
            world.call_at(start + k * self.cfg.data_spacing,
                          routing._send_data_packet, route, k, sid)


# module-level callback shims keep scheduled events picklable-free and cheap
def _cb_warmup_session(world, mgr):
    mgr.warmup_session(world)


def _cb_warmup_disc_done(world, mgr, disc):
    mgr.warmup_disc_done(world, disc)


def _cb_train(world, mgr):
    mgr.train(world)


def _cb_data_session(world, mgr):
    mgr.data_session(world)


def _cb_disc_done(world, mgr, disc, sid, attempt):
    mgr.disc_done(world, disc, sid, attempt)


def run_scenario(cfg: ScenarioConfig, seed: int, defense: Optional[bool] = None,
                 antibodies: Optional[int] = None,
                 malicious: Optional[float] = None,
                 keep_trace: bool = False) -> RunResult:
    """Build, run, and score one scenario instance."""
    if defense is not None or antibodies is not None or malicious is not None:
        cfg = replace(cfg,
                      defense_enabled=cfg.defense_enabled
                      if defense is None else defense,
                      antibody_count=cfg.antibody_count
                      if antibodies is None else antibodies,
                      malicious_fraction=cfg.malicious_fraction
                      if malicious is None else malicious)
    world = build_world(cfg, seed)
    mgr = SessionManager(world, cfg)
    mgr.schedule_all(world)
    world.run(cfg.sim_time)
    world.log(("run_end", world.clock))
    return score_world(world, cfg, seed, keep_trace=keep_trace)


def score_world(world: WorldState, cfg: ScenarioConfig, seed: int,
                keep_trace: bool = False) -> RunResult:
    stats, cm = metrics.score_run(world.trace, world.ground_truth_attackers,
                                  cfg.node_count)
    received = sum(stats.x)
    mal_dropped = sum(1 for r in world.trace
                      if r[0] == "attacker_drop" and r[2] == "Data")
    attackers = world.ground_truth_attackers
    route_len = 2
    for rec in world.trace:
        if rec[0] == "routes_found":
            for hops in rec[5]:
                if not any(h in attackers for h in hops):
                    route_len = max(route_len, len(hops))
    theorem = analysis.check_theorem1(analysis.RunMeasurements(
        received=received, mal_dropped=mal_dropped, total_n=cfg.node_count,
        total_m=len(attackers), route_len=route_len))
    ctl = sum(1 for r in world.trace if r[0] == "tx" and r[2] != "Data")
    return RunResult(
        seed=seed, scenario=cfg.name, defense=cfg.defense_enabled,
        antibodies=cfg.antibody_count, malicious_pct=cfg.malicious_fraction,
        attacks=",".join(cfg.attack_kinds), stats=stats, cm=cm,
        theorem=theorem, control_msg_count=ctl, sim_time=cfg.sim_time,
        n_sessions=stats.n, trace=world.trace if keep_trace else None)
