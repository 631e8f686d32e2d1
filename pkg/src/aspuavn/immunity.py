"""Knowledge base: negative-selection detectors, affinity filtering, RTT/SSI
matching, hyper-mutation tie-breaks, and the security memory.

Antigens are 6-d behavior vectors (delay, plr, 1-pdr, fsr, rtt, ssi), each
component normalized by its candidate-set maximum, so every coordinate lands
in the unit interval and detectors live in the unit 6-cube.

Note: the route fitness rewards high SSI even though a hot signal is
otherwise an attack indicator; the formula is kept exactly as defined and the
tension is deliberate rather than resolved here.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from aspuavn._kernels import any_match, match_mask, nonself_mask
from aspuavn.domain import Route, RouteStats

DEFAULT_DETECTOR_RADIUS = 0.15
TRAINING_REJECTION_BUDGET = 10 ** 6
MIN_TH_TOLERANCE = 1e-6
FR_TIE_TOLERANCE = 1e-9


class AntigenVerdict(Enum):
    SELF_NORMAL = "self"
    NON_SELF_MALICIOUS = "non-self"


class TrainingError(RuntimeError):
    """Rejection sampling exhausted: the self set covers the space."""


class BlacklistedRouteError(ValueError):
    """Attempted to register a route containing a blacklisted UAV."""


@dataclass(frozen=True)
class Antigen:
    vector: Tuple[float, float, float, float, float, float]
    route_id: int


@dataclass(frozen=True)
class Detector:
    center: Tuple[float, ...]
    radius: float

    def matches(self, antigen: Antigen) -> bool:
        d2 = 0.0
        for c, a in zip(self.center, antigen.vector):
            d = c - a
            d2 += d * d
        return d2 <= self.radius * self.radius


class DetectorSet:
    def __init__(self, centers: np.ndarray, radius: float):
        self.centers = np.ascontiguousarray(centers, dtype=np.float64)
        self.radius = float(radius)

    def __len__(self):
        return self.centers.shape[0]

    def detectors(self) -> List[Detector]:
        return [Detector(tuple(float(v) for v in row), self.radius)
                for row in self.centers]


def _features(s: RouteStats) -> Tuple[float, ...]:
    return (s.delay, s.plr, 1.0 - s.pdr, s.fsr, s.rtt, s.ssi)


def candidate_maxima(stats_list: Sequence[RouteStats]) -> Tuple[float, ...]:
    feats = [_features(s) for s in stats_list]
    return tuple(max(f[i] for f in feats) for i in range(6))


def build_antigen(stats: RouteStats, maxima: Sequence[float],
                  route_id: int) -> Antigen:
    vec = []
    for value, mx in zip(_features(stats), maxima):
        if mx <= 0.0:
            vec.append(0.0)
        else:
            vec.append(min(1.0, max(0.0, value / mx)))
    return Antigen(vector=tuple(vec), route_id=route_id)


def antigens_for(candidates: Sequence[Tuple[Route, RouteStats]]) -> List[Antigen]:
    """Antigens for one candidate set, normalized by the set's maxima."""
    maxima = candidate_maxima([s for _, s in candidates])
    return [build_antigen(s, maxima, r.id) for r, s in candidates]


def train_detectors(self_set: Sequence[Antigen], ni: int, radius: float,
                    rng) -> DetectorSet:
    """Rejection-sample ni detector centers that cover no self antigen."""
    if ni < 1:
        raise ValueError("detector count must be >= 1")
    if not self_set:
        raise ValueError("self set must be non-empty")
    self_arr = np.asarray([a.vector for a in self_set], dtype=np.float64)
    r2 = radius * radius
    accepted = []
    consecutive = 0
    batch_size = max(64, 2 * ni)
    while len(accepted) < ni:
        batch = rng.random((batch_size, 6))
        ok = nonself_mask(batch, self_arr, r2)
        for j in range(batch_size):
            if ok[j]:
                accepted.append(batch[j])
                consecutive = 0
                if len(accepted) == ni:
                    break
            else:
                consecutive += 1
                if consecutive >= TRAINING_REJECTION_BUDGET:
                    raise TrainingError(
                        "self set covers the space; shrink the radius")
    return DetectorSet(np.asarray(accepted), radius)


def classify(antigen: Antigen, detectors: DetectorSet) -> AntigenVerdict:
    point = np.asarray(antigen.vector, dtype=np.float64)
    r2 = detectors.radius * detectors.radius
    if any_match(detectors.centers, r2, point):
        return AntigenVerdict.NON_SELF_MALICIOUS
    return AntigenVerdict.SELF_NORMAL


def classify_batch(antigens: Sequence[Antigen],
                   detectors: DetectorSet) -> List[AntigenVerdict]:
    if not antigens:
        return []
    pts = np.asarray([a.vector for a in antigens], dtype=np.float64)
    hits = match_mask(pts, detectors.centers,
                      detectors.radius * detectors.radius)
    return [AntigenVerdict.NON_SELF_MALICIOUS if h
            else AntigenVerdict.SELF_NORMAL for h in hits]


# --- route selection ---------------------------------------------------------

def affinity_filter(routes_with_th: list) -> list:
    """Keep the low-threshold half: Th no greater than the set median."""
    if not routes_with_th:
        raise ValueError("affinity filter needs at least one route")
    ths = sorted(item[2] for item in routes_with_th)
    n = len(ths)
    median = ths[n // 2] if n % 2 == 1 else (ths[n // 2 - 1] + ths[n // 2]) / 2.0
    return [item for item in routes_with_th if item[2] <= median]


def fitness(rtt_i: float, ssi_i: float, max_rtt: float, max_ssi: float) -> float:
    """(MaxRTT / RTT_i) + (SSI_i / MaxSSI)."""
    if rtt_i <= 0.0:
        raise ValueError("route has no measured round-trip time")
    if max_ssi <= 0.0:
        raise ValueError("max SSI must be positive")
    return max_rtt / rtt_i + ssi_i / max_ssi


def match_select(candidates: list):
    """Among minimum-threshold candidates pick the maximum-fitness route;
    residual ties fall through to hyper-mutation.

    Candidates are (route, stats, th) triples; returns (route, stats, th, fr).
    """
    if not candidates:
        raise ValueError("match_select needs candidates")
    max_rtt = max(s.rtt for _, s, _ in candidates)
    max_ssi = max(s.ssi for _, s, _ in candidates)
    frs = []
    for route, stats, th in candidates:
        fr = fitness(stats.rtt, stats.ssi, max_rtt, max_ssi) \
            if stats.rtt > 0 and max_ssi > 0 else 0.0
        frs.append((route, stats, th, fr))
    min_th = min(item[2] for item in frs)
    lowest = [item for item in frs if item[2] <= min_th + MIN_TH_TOLERANCE]
    best_fr = max(item[3] for item in lowest)
    tied = [item for item in lowest if abs(item[3] - best_fr) <= FR_TIE_TOLERANCE]
    if len(tied) == 1:
        return tied[0]
    chosen = hyper_mutate([(r, s, t) for r, s, t, _ in tied])
    for item in tied:
        if item[0].id == chosen.id:
            return item
    return tied[0]


def hyper_mutate(tied: list) -> Route:
    """Highest PDR wins; residual ties break to the lowest route id."""
    if not tied:
        raise ValueError("hyper_mutate needs routes")
    best = max(tied, key=lambda item: (item[1].pdr, -item[0].id))
    return best[0]


# --- security memory ---------------------------------------------------------

@dataclass
class MemoryEntry:
    route: Route
    f_r: float
    th: float
    registered_at: float


class SecurityMemory:
    """Vetted-route store with expiry and blacklist filtering."""

    def __init__(self, blacklist: set, storing_time: float = 10.0):
        self.blacklist = blacklist
        self.storing_time = storing_time
        self.entries: dict = {}

    def register(self, route: Route, f_r: float, th: float, now: float) -> None:
        if route.contains_any(self.blacklist):
            raise BlacklistedRouteError(route.id)
        self.entries[(route.src, route.dst)] = MemoryEntry(route, f_r, th, now)

    def lookup(self, src, dst, now: float) -> Optional[Route]:
        entry = self.entries.get((src, dst))
        if entry is None:
            return None
        if now - entry.registered_at >= self.storing_time \
                or entry.route.contains_any(self.blacklist):
            del self.entries[(src, dst)]
            return None
        return entry.route

    def purge(self, uav) -> None:
        gone = [k for k, e in self.entries.items() if uav in e.route.hops]
        for k in gone:
            del self.entries[k]


# --- knowledge base ----------------------------------------------------------

@dataclass
class KbConfig:
    antigen_collection_time: float = 15.0
    antigen_toward_min: float = 80.0     # minimum re-training interval
    delay_buffer_max: int = 1400
    storing_time: float = 10.0
    max_antigens: int = 1000

    def validate(self):
        vals = (self.antigen_collection_time, self.antigen_toward_min,
                self.delay_buffer_max, self.storing_time, self.max_antigens)
        if any(v <= 0 for v in vals):
            raise ValueError("knowledge-base constants must be positive")


class KnowledgeBase:
    """Shared immune store: warm-up self antigens, the trained detector set,
    and a bounded buffer of per-route delay samples."""

    def __init__(self, config: KbConfig = KbConfig(),
                 radius: float = DEFAULT_DETECTOR_RADIUS):
        config.validate()
        self.config = config
        self.radius = radius
        self.self_antigens: List[Antigen] = []
        self.detector_set: Optional[DetectorSet] = None
        self.last_trained: Optional[float] = None
        self.delay_samples = deque(maxlen=config.delay_buffer_max)

    def add_self_antigen(self, antigen: Antigen) -> None:
        if len(self.self_antigens) < self.config.max_antigens:
            self.self_antigens.append(antigen)

    def note_delay(self, delay: float) -> None:
        self.delay_samples.append(delay)

    def can_retrain(self, now: float) -> bool:
        return (self.last_trained is None
                or now - self.last_trained >= self.config.antigen_toward_min)

    def train(self, ni: int, rng, now: float = 0.0) -> None:
        if not self.can_retrain(now):
            return
        if not self.self_antigens:
            return
        self.detector_set = train_detectors(self.self_antigens, ni,
                                            self.radius, rng)
        self.last_trained = now

    def verdict(self, antigen: Antigen) -> AntigenVerdict:
        if self.detector_set is None:
            return AntigenVerdict.SELF_NORMAL
        return classify(antigen, self.detector_set)


# --- detector persistence ----------------------------------------------------

def detector_set_to_lines(ds: DetectorSet) -> List[str]:
    lines = []
    for row in ds.centers:
        coords = " ".join(repr(float(v)) for v in row)
        lines.append(f"{coords} {repr(ds.radius)}")
    return lines


def detector_set_from_lines(lines: Sequence[str]) -> DetectorSet:
    centers = []
    radius = DEFAULT_DETECTOR_RADIUS
    for line in lines:
        parts = line.split()
        if not parts:
            continue
        values = [float(p) for p in parts]
        centers.append(values[:-1])
        radius = values[-1]
    return DetectorSet(np.asarray(centers, dtype=np.float64), radius)
