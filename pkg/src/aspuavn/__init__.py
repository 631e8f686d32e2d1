"""Self-protective UAV ad-hoc network simulator.

Deterministic discrete-event simulation of immune-inspired route selection
and intrusion detection: multipath on-demand discovery, probe-based route
suspicion, threshold decisions, negative-selection classification, watchdog
isolation, plus attacker models and a metrics/theory harness.
"""

__version__ = "0.1.0"
