"""Run scoring: delivery ratios, confusion matrix, detection rates.

The delivery formulas keep their published 1/n prefactor verbatim; the pooled
forms (plain sum-over-sum percentages) are reported alongside because the
literal forms scale with the experiment count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple


@dataclass
class ExperimentStats:
    """Per-experiment packet counters: y sent by the source, x received."""

    y: List[int] = field(default_factory=list)
    x: List[int] = field(default_factory=list)

    def add(self, sent: int, received: int) -> None:
        if received > sent or sent < 0:
            raise ValueError("received must lie in [0, sent]")
        self.y.append(sent)
        self.x.append(received)

    @property
    def n(self) -> int:
        return len(self.y)


def pdr(stats: ExperimentStats) -> float:
    """(1/n) * (sum x / sum y) * 100."""
    total_y = sum(stats.y)
    if total_y <= 0:
        raise ValueError("no packets were sent")
    return (1.0 / stats.n) * (sum(stats.x) / total_y) * 100.0


def plr(stats: ExperimentStats) -> float:
    """(1/n) * ((sum y - sum x) / sum y) * 100."""
    total_y = sum(stats.y)
    if total_y <= 0:
        raise ValueError("no packets were sent")
    return (1.0 / stats.n) * ((total_y - sum(stats.x)) / total_y) * 100.0


def pooled_pdr(stats: ExperimentStats) -> float:
    total_y = sum(stats.y)
    if total_y <= 0:
        raise ValueError("no packets were sent")
    return sum(stats.x) / total_y * 100.0


def pooled_plr(stats: ExperimentStats) -> float:
    return 100.0 - pooled_pdr(stats)


@dataclass
class ConfusionMatrix:
    tp: int = 0
    tn: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def all(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


def rates(cm: ConfusionMatrix) -> Tuple[Optional[float], Optional[float],
                                        Optional[float]]:
    """(false positive %, false negative %, detection %); a rate with a zero
    denominator comes back as None (undefined)."""
    fpr = cm.fp / (cm.fp + cm.tn) * 100.0 if cm.fp + cm.tn > 0 else None
    fnr = cm.fn / (cm.fn + cm.tp) * 100.0 if cm.fn + cm.tp > 0 else None
    dr = cm.tp / (cm.tp + cm.fn) * 100.0 if cm.tp + cm.fn > 0 else None
    return fpr, fnr, dr


class TruncatedTraceError(ValueError):
    pass


def score_run(trace, ground_truth_attackers, n_nodes: int
              ) -> Tuple[ExperimentStats, ConfusionMatrix]:
    """Aggregate one run's trace into delivery stats and a per-UAV confusion
    matrix. A UAV never classified counts as predicted normal."""
    if trace is None:
        raise TruncatedTraceError("no trace")
    sent: dict = {}
    received: dict = {}
    predicted_malicious = set()
    saw_end = False
    for rec in trace:
        tag = rec[0]
        if tag == "data_sent" or tag == "data_src_drop":
            sent[rec[2]] = sent.get(rec[2], 0) + 1
        elif tag == "data_delivered":
            received[rec[2]] = received.get(rec[2], 0) + 1
        elif tag == "classified" and rec[3] == "malicious":
            predicted_malicious.add(rec[2])
        elif tag == "isolated":
            predicted_malicious.add(rec[2])
        elif tag == "run_end":
            saw_end = True
    if not saw_end:
        raise TruncatedTraceError("trace has no run_end marker")
    stats = ExperimentStats()
    for sid in sorted(sent):
        stats.add(sent[sid], min(received.get(sid, 0), sent[sid]))
    truth = set(ground_truth_attackers)
    cm = ConfusionMatrix()
    for uav in range(n_nodes):
        actual = uav in truth
        predicted = uav in predicted_malicious
        if actual and predicted:
            cm.tp += 1
        elif actual and not predicted:
            cm.fn += 1
        elif not actual and predicted:
            cm.fp += 1
        else:
            cm.tn += 1
    return stats, cm
