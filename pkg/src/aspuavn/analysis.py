"""Theory harness: drop-bound checks and time/message complexity accounting
evaluated against measured traces.

The drop bound uses the natural logarithm and a configurable scale factor
beta (default 1); because the published bound leaves beta open, the checker
also reports the minimal beta that would make a run satisfy the inequality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple


def link_weight(c: int, r: int) -> float:
    """2^(c - r): doubling per malicious report, halving per reversion."""
    return 2.0 ** (c - r)


def drop_bound(total_m: int, total_n: int, route_len: int,
               beta: float = 1.0) -> float:
    """Upper bound beta * M * N * ln^2(M * len); zero when no attacker."""
    if total_m <= 0:
        return 0.0
    if total_m * route_len <= 1:
        return 0.0
    lg = math.log(total_m * route_len)
    return beta * total_m * total_n * lg * lg


def default_mal_threshold(n_test: int) -> int:
    """Drop count that triggers isolation: half a watchdog window, rounded up."""
    return (n_test + 1) // 2


def mal_threshold_trigger(dropped: int, mal_thr: int) -> bool:
    """Recommend isolation once attributed drops reach the threshold."""
    return dropped >= mal_thr


@dataclass(frozen=True)
class RunMeasurements:
    received: int        # data packets delivered end to end
    mal_dropped: int     # data packets removed by malicious UAVs
    total_n: int
    total_m: int
    route_len: int       # max length of an error-free route observed
    beta: float = 1.0


@dataclass(frozen=True)
class TheoremReport:
    holds: bool
    lhs: float
    bound: float
    beta_min: float
    pdr_fraction: float


def check_theorem1(meas: RunMeasurements) -> TheoremReport:
    """Evaluate (dropped - PDR) * received against the drop bound.

    PDR here is the fraction received / (received + dropped); with no
    attacker the bound degenerates to 0 and the check is the sign identity
    (dropped is 0 by definition, so the left side cannot be positive).
    """
    total = meas.received + meas.mal_dropped
    pdr = meas.received / total if total > 0 else 1.0
    lhs = (meas.mal_dropped - pdr) * meas.received
    bound = drop_bound(meas.total_m, meas.total_n, meas.route_len, meas.beta)
    denom = drop_bound(meas.total_m, meas.total_n, meas.route_len, 1.0)
    if lhs <= 0.0:
        beta_min = 0.0
    elif denom > 0.0:
        beta_min = lhs / denom
    else:
        beta_min = math.inf
    return TheoremReport(holds=lhs <= bound, lhs=lhs, bound=bound,
                         beta_min=beta_min, pdr_fraction=pdr)


# --- complexity --------------------------------------------------------------

def hop_budget(x: float, comm_range: float) -> int:
    """b = floor(x / range) + 1, the per-direction message budget."""
    return int(math.floor(x / comm_range)) + 1


def expected_message_complexity(x: float, comm_range: float, n: int) -> int:
    """2*b + (n - 1) control messages for one discovery."""
    return 2 * hop_budget(x, comm_range) + (n - 1)


def expected_time_complexity(x: float, comm_range: float,
                             per_hop_delay: float) -> float:
    """Three flood traversals' worth of per-hop delays."""
    n_hops = int(math.floor(x / comm_range))
    return 3.0 * n_hops * per_hop_delay


def measured_control_messages(trace, rreq_id: int,
                              static_topology: bool = True
                              ) -> Tuple[int, bool]:
    """Count control messages attributable to one discovery.

    Accounting: the source's originating broadcast plus every RREQ and RREP
    reception. On mobile topologies the count is still produced but flagged
    non-comparable.
    """
    count = 1  # the originating broadcast
    window = False
    for rec in trace:
        if rec[0] == "discovery_start" and rec[4] == rreq_id:
            window = True
            continue
        if not window:
            continue
        if rec[0] == "routes_found" and rec[4] == rreq_id:
            break
        if rec[0] == "rx" and rec[2] in ("Rreq", "Rrep"):
            count += 1
    return count, static_topology


def audit_isolation(trace) -> list:
    """Verify the isolation contract over a whole trace.

    After a node learns of an isolation (its alert reception), it must never
    again process a packet from the isolated UAV, and no discovery it
    completes may return a route through that UAV. Returns the violations
    (empty list = contract held).
    """
    alert_at: dict = {}   # (receiver, uav) -> earliest alert time
    violations = []
    for rec in trace:
        tag = rec[0]
        if tag == "isolated":
            _, t, uav, by = rec
            alert_at.setdefault((by, uav), t)
        elif tag == "alert_rx":
            _, t, receiver, uav = rec
            alert_at.setdefault((receiver, uav), t)
        elif tag == "rx":
            _, t, pk, sender, receiver = rec
            seen = alert_at.get((receiver, sender))
            if seen is not None and t > seen:
                violations.append(("processed_after_alert", t, sender,
                                   receiver, pk))
        elif tag == "routes_found":
            _, t, src, dst, rid, hops_list = rec
            for hops in hops_list:
                for uav in hops:
                    seen = alert_at.get((src, uav))
                    if seen is not None and t > seen:
                        violations.append(("route_contains_isolated", t, src,
                                           uav))
    return violations


def measured_discovery_latency(trace, rreq_id: int) -> Optional[float]:
    """Seconds from flood start to the first reply reaching the source."""
    start = None
    for rec in trace:
        if rec[0] == "discovery_start" and rec[4] == rreq_id:
            start = rec[1]
        elif rec[0] == "rrep_at_src" and rec[3] == rreq_id and start is not None:
            return rec[1] - start
    return None
