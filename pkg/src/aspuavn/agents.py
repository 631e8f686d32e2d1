"""The three protection agents.

Evaluation agent: probes every candidate route with Hello/Confirm rounds and
keeps a per-route suspicion score. Decision agent: scores survivors with the
four-criteria threshold and hands the worst route to the defensive agent.
Defensive agent: replays TestPacket traffic over a flagged route, compares each
on-route UAV's forwarding count against the EWMA of injected traffic, and
isolates offenders network-wide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Tuple

from aspuavn import analysis
from aspuavn.domain import Alert, Hello, Route, RouteStats, TestPacket
from aspuavn.engine import WorldState
from aspuavn.routing import _tx_power

PROBE_ROUNDS = 4
SUSPICION_INITIAL = 50.0
SUSPICION_REJECT_ABOVE = 50.0
CONFIRM_STEP = 25.0
UNCONFIRM_STEP = 15.0
DEFAULT_PROBE_TIMEOUT = 0.2
DEFAULT_N_TEST = 10
WATCHDOG_INTERVALS = 4
TEST_SPACING = 0.01
DEFAULT_ALPHA = 0.5


class ProbeOutcome(Enum):
    CONFIRMED = "confirmed"
    UNCONFIRMED = "unconfirmed"


class Verdict(Enum):
    MALICIOUS = "malicious"
    NORMAL = "normal"


@dataclass(frozen=True)
class RouteSuspicion:
    route_id: int
    p_malicious: float = SUSPICION_INITIAL
    probe_rounds_done: int = 0


def update_suspicion(s: RouteSuspicion, outcome: ProbeOutcome) -> RouteSuspicion:
    """Apply one probe outcome: -25 on confirmation, +15 otherwise, clamped."""
    if s.probe_rounds_done >= PROBE_ROUNDS:
        raise ValueError("probe rounds exhausted for this route")
    delta = -CONFIRM_STEP if outcome is ProbeOutcome.CONFIRMED else UNCONFIRM_STEP
    p = min(100.0, max(0.0, s.p_malicious + delta))
    return RouteSuspicion(s.route_id, p, s.probe_rounds_done + 1)


# --- decision threshold ------------------------------------------------------

@dataclass(frozen=True)
class ThresholdInputs:
    delay: float
    plr: float
    pdr: float
    fsr: float
    max_delay: float
    max_plr: float
    max_pdr: float
    max_fsr: float


def compute_threshold(inp: ThresholdInputs) -> float:
    """Delay/MaxDelay + PLR/MaxPLR + MaxPDR/PDR + FSR/MaxFSR.

    A dead route (pdr 0) scores +inf; a degenerate axis (max 0) contributes 0.
    """
    if inp.pdr <= 0.0:
        return math.inf
    th = inp.delay / inp.max_delay if inp.max_delay > 0.0 else 0.0
    th += inp.plr / inp.max_plr if inp.max_plr > 0.0 else 0.0
    th += inp.max_pdr / inp.pdr if inp.max_pdr > 0.0 else 0.0
    th += inp.fsr / inp.max_fsr if inp.max_fsr > 0.0 else 0.0
    return th


def thresholds_for(stats_list: List[RouteStats]) -> List[float]:
    """Threshold of every route against the candidate-set maxima."""
    if not stats_list:
        return []
    max_delay = max(s.delay for s in stats_list)
    max_plr = max(s.plr for s in stats_list)
    max_pdr = max(s.pdr for s in stats_list)
    max_fsr = max(s.fsr for s in stats_list)
    return [compute_threshold(ThresholdInputs(s.delay, s.plr, s.pdr, s.fsr,
                                              max_delay, max_plr, max_pdr,
                                              max_fsr))
            for s in stats_list]


def decide(survivors: List[Tuple[Route, RouteStats, float]]):
    """Drop the max-threshold route for the defensive agent; ties go to the
    lowest route id; a lone survivor passes through untouched."""
    if not survivors:
        raise ValueError("decide() needs at least one survivor")
    if len(survivors) == 1:
        return None, list(survivors)
    worst = max(survivors, key=lambda rs: (rs[2], -rs[0].id))
    remaining = [s for s in survivors if s[0].id != worst[0].id]
    return worst, remaining


# --- EWMA --------------------------------------------------------------------

@dataclass(frozen=True)
class EwmaState:
    alpha: float
    m: float = 0.0
    t: int = 0   # samples seen


def ewma_update(state: EwmaState, x: float) -> EwmaState:
    if not 0.0 < state.alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    if state.t == 0:
        return EwmaState(state.alpha, float(x), 1)
    m = state.alpha * x + (1.0 - state.alpha) * state.m
    return EwmaState(state.alpha, m, state.t + 1)


def classify_uav(forwarded_total: int, m_t: float) -> Verdict:
    """Destructive iff the UAV forwarded no more test packets than the mean
    transmission value (boundary inclusive)."""
    return Verdict.MALICIOUS if forwarded_total <= m_t else Verdict.NORMAL


# --- probing machinery ---------------------------------------------------------

@dataclass
class _RouteProbe:
    route: Route
    stats: RouteStats
    suspicion: RouteSuspicion
    confirms: int = 0
    rtt_samples: list = field(default_factory=list)
    rounds_settled: set = field(default_factory=set)
    sent_at: float = 0.0
    finished: bool = False


class Evaluation:
    """Runs 4 probe rounds per candidate route, then splits survivors from
    rejected routes and measures the probe-window statistics."""

    def __init__(self, candidates: List[Tuple[Route, RouteStats]],
                 on_done: Callable, probe_timeout: float = DEFAULT_PROBE_TIMEOUT):
        if not candidates:
            raise ValueError("need at least one candidate route")
        self.probes = [
            _RouteProbe(route=r, stats=replace(s),
                        suspicion=RouteSuspicion(r.id))
            for r, s in candidates]
        self.on_done = on_done
        self.probe_timeout = probe_timeout
        self.done = False
        self.survivors: list = []
        self.rejected: list = []

    def start(self, world: WorldState) -> None:
        for rp in self.probes:
            self._send_round(world, rp, 1)

    def _send_round(self, world: WorldState, rp: _RouteProbe, rnd: int) -> None:
        route = rp.route
        rp.sent_at = world.clock
        key = (route.id, rnd)
        world.services.setdefault("probes", {})[key] = (
            lambda w, rp=rp, rnd=rnd: self._confirmed(w, rp, rnd))
        hello = Hello(origin=route.src, sender=route.src, timestamp=world.clock,
                      tx_power=_tx_power(world, route.src), route_id=route.id,
                      probe_round=rnd, route=route.hops)
        world.transmit(hello, route.src, route.hops[1])
        world.call_after(self.probe_timeout, self._timed_out, route.id, rnd, rp)

    def _confirmed(self, world: WorldState, rp: _RouteProbe, rnd: int) -> None:
        if rnd in rp.rounds_settled:
            return
        rp.rounds_settled.add(rnd)
        rp.confirms += 1
        rp.rtt_samples.append(world.clock - rp.sent_at)
        self._advance(world, rp, rnd, ProbeOutcome.CONFIRMED)

    def _timed_out(self, world: WorldState, route_id: int, rnd: int,
                   rp: _RouteProbe) -> None:
        if rnd in rp.rounds_settled:
            return
        rp.rounds_settled.add(rnd)
        world.services.get("probes", {}).pop((route_id, rnd), None)
        self._advance(world, rp, rnd, ProbeOutcome.UNCONFIRMED)

    def _advance(self, world: WorldState, rp: _RouteProbe, rnd: int,
                 outcome: ProbeOutcome) -> None:
        rp.suspicion = update_suspicion(rp.suspicion, outcome)
        if rnd < PROBE_ROUNDS:
            self._send_round(world, rp, rnd + 1)
        else:
            rp.finished = True
            if all(p.finished for p in self.probes):
                self._finish(world)

    def _finish(self, world: WorldState) -> None:
        self.done = True
        for rp in self.probes:
            c = rp.confirms
            s = rp.stats
            s.pdr = c / PROBE_ROUNDS
            s.plr = 1.0 - s.pdr
            s.fsr = float(PROBE_ROUNDS - c)
            if rp.rtt_samples:
                s.rtt = sum(rp.rtt_samples) / len(rp.rtt_samples)
            s.delay = s.rtt / 2.0
            if rp.suspicion.p_malicious > SUSPICION_REJECT_ABOVE:
                world.log(("route_rejected", world.clock, rp.route.src,
                           rp.route.id, rp.suspicion.p_malicious))
                self.rejected.append((rp.route, s, rp.suspicion))
            else:
                self.survivors.append((rp.route, s, rp.suspicion))
        self.on_done(world, self.survivors, self.rejected)


def probe_route(route: Route, rnd: int, world: WorldState,
                probe_timeout: float = DEFAULT_PROBE_TIMEOUT) -> ProbeOutcome:
    """Single synchronous Hello/Confirm round over a route."""
    result = {}

    def _hit(w):
        result["outcome"] = ProbeOutcome.CONFIRMED

    key = (route.id, rnd)
    world.services.setdefault("probes", {})[key] = _hit
    hello = Hello(origin=route.src, sender=route.src, timestamp=world.clock,
                  tx_power=_tx_power(world, route.src), route_id=route.id,
                  probe_round=rnd, route=route.hops)
    world.transmit(hello, route.src, route.hops[1])
    world.run(world.clock + probe_timeout)
    world.services.get("probes", {}).pop(key, None)
    return result.get("outcome", ProbeOutcome.UNCONFIRMED)


def evaluate_routes(candidates: List[Tuple[Route, RouteStats]],
                    world: WorldState,
                    probe_timeout: float = DEFAULT_PROBE_TIMEOUT):
    """Synchronous evaluation: probe all candidates for 4 rounds and return
    (survivors, rejected) as (Route, RouteStats, RouteSuspicion) triples."""
    out = {}

    def _done(w, survivors, rejected):
        out["sr"] = (survivors, rejected)

    ev = Evaluation(candidates, _done, probe_timeout)
    ev.start(world)
    world.run(world.clock + PROBE_ROUNDS * (probe_timeout + 0.01) + 0.1)
    if "sr" not in out:
        raise RuntimeError("evaluation did not complete within its window")
    return out["sr"]


# --- defensive agent ----------------------------------------------------------

@dataclass
class WatchdogLog:
    """Per-UAV test-packet observations, one slot per interval."""
    received: Dict[int, list]
    forwarded: Dict[int, list]
    completed: list          # deliveries at the route destination
    injected: list           # test packets put on the route per interval
    truncated: bool = False


class Watchdog:
    """Defensive-agent probe of one flagged route: 4 intervals of n_test TestPacket
    packets, per-UAV forwarding counts, EWMA comparison, isolation."""

    def __init__(self, route: Route, n_test: int = DEFAULT_N_TEST,
                 intervals: int = WATCHDOG_INTERVALS,
                 alpha: float = DEFAULT_ALPHA,
                 interval_len: Optional[float] = None,
                 on_done: Optional[Callable] = None,
                 mal_thr: Optional[int] = None):
        self.id = 0  # assigned from the world's counter at start()
        self.route = route
        self.n_test = n_test
        self.intervals = intervals
        self.alpha = alpha
        self.interval_len = (interval_len if interval_len is not None
                             else n_test * TEST_SPACING + 0.2)
        self.on_done = on_done
        self.mal_thr = (mal_thr if mal_thr is not None
                        else analysis.default_mal_threshold(n_test))
        mid = route.hops[1:-1]
        self.log = WatchdogLog(
            received={u: [0] * intervals for u in mid},
            forwarded={u: [0] * intervals for u in mid},
            completed=[0] * intervals, injected=[0] * intervals)
        self._seq = 0

    # counting hooks called from the packet dispatcher
    def note_received(self, uav: int, interval: int) -> None:
        if uav in self.log.received:
            self.log.received[uav][interval - 1] += 1

    def note_forwarded(self, uav: int, interval: int) -> None:
        if uav in self.log.forwarded:
            self.log.forwarded[uav][interval - 1] += 1

    def note_completed(self, interval: int) -> None:
        self.log.completed[interval - 1] += 1

    def start(self, world: WorldState) -> None:
        self.id = world.services["watchdog_seq"] = (
            world.services.get("watchdog_seq", 0) + 1)
        world.services.setdefault("watchdogs", {})[self.id] = self
        world.log(("watchdog_start", world.clock, self.id, self.route.id,
                   self.route.hops))
        self._run_interval(world, 1)

    def _run_interval(self, world: WorldState, interval: int) -> None:
        start = world.clock
        for i in range(self.n_test):
            world.call_at(start + i * TEST_SPACING, self._inject, interval)
        world.call_at(start + self.interval_len, self._interval_done, interval)

    def _inject(self, world: WorldState, interval: int) -> None:
        self._seq += 1
        pkt = TestPacket(origin=self.route.src, sender=self.route.src,
                   timestamp=world.clock,
                   tx_power=_tx_power(world, self.route.src),
                   route_id=self.route.id, seq=self._seq,
                   route=self.route.hops, watchdog_id=self.id,
                   interval=interval)
        self.log.injected[interval - 1] += 1
        world.transmit(pkt, self.route.src, self.route.hops[1])

    def _interval_done(self, world: WorldState, interval: int) -> None:
        if self.log.completed[interval - 1] == 0:
            self.log.truncated = True
        if interval < self.intervals:
            self._run_interval(world, interval + 1)
        else:
            self._finish(world)

    def _finish(self, world: WorldState) -> None:
        world.services.get("watchdogs", {}).pop(self.id, None)
        ewma = EwmaState(self.alpha)
        for x in self.log.injected:
            ewma = ewma_update(ewma, float(x))
        flagged = []
        for uav in self.route.hops[1:-1]:
            rec = sum(self.log.received[uav])
            fwd = sum(self.log.forwarded[uav])
            if rec <= ewma.m:
                # too little traffic ever reached it (upstream drop or route
                # break); a verdict would just blame the victim
                continue
            verdict = classify_uav(fwd, ewma.m)
            if (verdict is Verdict.NORMAL
                    and analysis.mal_threshold_trigger(rec - fwd, self.mal_thr)):
                verdict = Verdict.MALICIOUS
            world.log(("classified", world.clock, uav, verdict.value, self.id))
            if verdict is Verdict.MALICIOUS:
                flagged.append(uav)
        for uav in flagged:
            isolate(uav, world, by=self.route.src)
        world.log(("watchdog_done", world.clock, self.id, tuple(flagged)))
        if self.on_done is not None:
            self.on_done(world, self.log, ewma.m, flagged)


def watchdog_interval(route: Route, n_test: int, world: WorldState) -> WatchdogLog:
    """Synchronous single watchdog interval; returns the observation log."""
    wd = Watchdog(route, n_test=n_test, intervals=1)
    wd.start(world)
    world.run(world.clock + wd.interval_len + 0.1)
    return wd.log


def run_watchdog(route: Route, world: WorldState, n_test: int = DEFAULT_N_TEST,
                 alpha: float = DEFAULT_ALPHA) -> list:
    """Synchronous full defensive-agent pass; returns the isolated UAV ids."""
    out = {}

    def _done(w, log, m, flagged):
        out["flagged"] = flagged

    wd = Watchdog(route, n_test=n_test, alpha=alpha, on_done=_done)
    wd.start(world)
    world.run(world.clock + wd.intervals * (wd.interval_len + 0.01) + 0.2)
    return out.get("flagged", [])


def isolate(uav: int, world: WorldState, by: int) -> None:
    """Broadcast an Alert so every reachable node blacklists the UAV."""
    origin = world.nodes[by]
    if uav in origin.blacklist:
        return  # already isolated from this node's perspective
    origin.blacklist.add(uav)
    if origin.memory is not None:
        origin.memory.purge(uav)
    world.log(("isolated", world.clock, uav, by))
    aid = world.services["alert_seq"] = world.services.get("alert_seq", 0) + 1
    origin.alert_cache.add(aid)
    alert = Alert(origin=by, sender=by, timestamp=world.clock,
                  tx_power=_tx_power(world, by), blacklisted=uav, alert_id=aid)
    world.transmit(alert, by)
