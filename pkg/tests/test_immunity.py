import math

import numpy as np
import pytest

from aspuavn.domain import Route, RouteStats
from aspuavn.immunity import (Antigen, AntigenVerdict, BlacklistedRouteError,
                              Detector, DetectorSet, KbConfig, KnowledgeBase,
                              SecurityMemory, affinity_filter, antigens_for,
                              build_antigen, candidate_maxima, classify,
                              classify_batch, detector_set_from_lines,
                              detector_set_to_lines, fitness, hyper_mutate,
                              match_select, train_detectors)


def brute_force_any_match(antigen, detector_set):
    """Independent O(|De|) matcher: plain loops and math.dist."""
    r = detector_set.radius
    for row in detector_set.centers:
        if math.dist(tuple(row), antigen.vector) <= r:
            return True
    return False


def _antigen(*vec, route_id=0):
    return Antigen(vector=tuple(vec), route_id=route_id)


ORIGIN = _antigen(0, 0, 0, 0, 0, 0)


def test_detectors_avoid_origin_self():
    ds = train_detectors([ORIGIN], ni=50, radius=0.1,
                         rng=np.random.default_rng(0))
    assert len(ds) == 50
    for row in ds.centers:
        assert math.dist(tuple(row), ORIGIN.vector) > 0.1


def test_training_requires_positive_count_and_self():
    with pytest.raises(ValueError):
        train_detectors([ORIGIN], ni=0, radius=0.1,
                        rng=np.random.default_rng(0))
    with pytest.raises(ValueError):
        train_detectors([], ni=5, radius=0.1, rng=np.random.default_rng(0))


def test_trained_set_has_zero_self_matches_exhaustive():
    rng = np.random.default_rng(4)
    self_set = [Antigen(tuple(rng.random(6)), i) for i in range(50)]
    ds = train_detectors(self_set, ni=200, radius=0.15, rng=rng)
    assert len(ds) == 200
    for a in self_set:  # exhaustive pairwise re-check
        for row in ds.centers:
            assert math.dist(tuple(row), a.vector) > 0.15


def test_classify_detector_center_is_nonself():
    ds = train_detectors([ORIGIN], ni=10, radius=0.1,
                         rng=np.random.default_rng(1))
    center = _antigen(*ds.centers[0])
    assert classify(center, ds) is AntigenVerdict.NON_SELF_MALICIOUS


def test_classify_self_elements_stay_self():
    rng = np.random.default_rng(7)
    self_set = [Antigen(tuple(rng.random(6)), i) for i in range(30)]
    ds = train_detectors(self_set, ni=100, radius=0.2, rng=rng)
    for a in self_set:
        assert classify(a, ds) is AntigenVerdict.SELF_NORMAL


def test_classify_matches_brute_force_oracle_1000():
    rng = np.random.default_rng(11)
    self_set = [Antigen(tuple(rng.random(6)), i) for i in range(40)]
    ds = train_detectors(self_set, ni=150, radius=0.18, rng=rng)
    antigens = [Antigen(tuple(rng.random(6)), i) for i in range(1000)]
    verdicts = classify_batch(antigens, ds)
    for a, v in zip(antigens, verdicts):
        expected = brute_force_any_match(a, ds)
        assert (v is AntigenVerdict.NON_SELF_MALICIOUS) == expected
        assert classify(a, ds) is v


def test_detector_match_rule_is_euclidean_ball():
    d = Detector(center=(0.5,) * 6, radius=0.2)
    inside = _antigen(*([0.5] * 5 + [0.69]))
    outside = _antigen(*([0.5] * 5 + [0.71]))
    assert d.matches(inside)
    assert not d.matches(outside)


# --- antigen construction -------------------------------------------------------

def test_antigen_normalized_by_candidate_maxima():
    stats = [RouteStats(delay=0.02, plr=0.5, pdr=0.5, fsr=2.0, rtt=0.04,
                        ssi=1.0),
             RouteStats(delay=0.04, plr=0.25, pdr=0.75, fsr=4.0, rtt=0.08,
                        ssi=2.0)]
    maxima = candidate_maxima(stats)
    a = build_antigen(stats[0], maxima, route_id=1)
    assert a.vector == pytest.approx((0.5, 1.0, 1.0, 0.5, 0.5, 0.5))
    b = build_antigen(stats[1], maxima, route_id=2)
    assert all(0.0 <= v <= 1.0 for v in b.vector)


def test_antigen_zero_max_axis_contributes_zero():
    stats = [RouteStats(delay=0.0, plr=0.0, pdr=1.0, fsr=0.0, rtt=0.0,
                        ssi=0.0)]
    a = build_antigen(stats[0], candidate_maxima(stats), route_id=1)
    assert a.vector == (0.0,) * 6


def test_antigens_for_assigns_route_ids():
    routes = [Route(id=5, src=0, dst=2, hops=(0, 1, 2)),
              Route(id=9, src=0, dst=2, hops=(0, 3, 2))]
    stats = [RouteStats(delay=0.01, rtt=0.02, ssi=1.0),
             RouteStats(delay=0.02, rtt=0.04, ssi=0.5)]
    ags = antigens_for(list(zip(routes, stats)))
    assert [a.route_id for a in ags] == [5, 9]


# --- affinity / fitness / selection ----------------------------------------------

def _triples(*ths):
    out = []
    for i, th in enumerate(ths):
        out.append((Route(id=i + 1, src=0, dst=9, hops=(0, i + 1, 9)),
                    RouteStats(rtt=0.02, ssi=1.0), th))
    return out


def test_affinity_keeps_at_most_median():
    kept = affinity_filter(_triples(1.95, 2.73, 3.72))
    assert [t[2] for t in kept] == [1.95, 2.73]


def test_affinity_single_route_retained():
    kept = affinity_filter(_triples(2.5))
    assert len(kept) == 1


def test_affinity_all_equal_all_retained():
    kept = affinity_filter(_triples(2.0, 2.0, 2.0))
    assert len(kept) == 3


def test_fitness_at_maxima_is_two():
    assert fitness(0.1, 80.0, 0.1, 80.0) == pytest.approx(2.0)


def test_fitness_hand_value():
    assert fitness(0.05, 20.0, 0.1, 80.0) == pytest.approx(2.25)


def test_fitness_improves_when_rtt_halves():
    base = fitness(0.08, 10.0, 0.1, 80.0)
    faster = fitness(0.04, 10.0, 0.1, 80.0)
    assert faster > base


def test_fitness_rejects_unmeasured_route():
    with pytest.raises(ValueError):
        fitness(0.0, 10.0, 0.1, 80.0)


def test_match_select_single_candidate():
    triple = _triples(2.0)[0]
    route, stats, th, fr = match_select([triple])
    assert route.id == 1


def test_match_select_equal_th_prefers_higher_fitness():
    r1 = (Route(id=1, src=0, dst=9, hops=(0, 1, 9)),
          RouteStats(rtt=0.08, ssi=20.0), 2.0)   # fr = 1 + 0.25 = 1.25
    r2 = (Route(id=2, src=0, dst=9, hops=(0, 2, 9)),
          RouteStats(rtt=0.04, ssi=80.0), 2.0)   # fr = 2 + 1 = 3.0
    route, _, _, fr = match_select([r1, r2])
    assert route.id == 2


def test_match_select_min_th_wins_over_fitness():
    r1 = (Route(id=1, src=0, dst=9, hops=(0, 1, 9)),
          RouteStats(rtt=0.08, ssi=80.0), 1.5)
    r2 = (Route(id=2, src=0, dst=9, hops=(0, 2, 9)),
          RouteStats(rtt=0.01, ssi=80.0), 3.0)  # great fitness, bad threshold
    route, _, _, _ = match_select([r1, r2])
    assert route.id == 1


def test_match_select_scale_invariant_per_axis():
    rng = np.random.default_rng(23)
    for _ in range(50):
        stats = [RouteStats(delay=rng.uniform(0.01, 0.1),
                            plr=rng.uniform(0, 0.4),
                            pdr=rng.uniform(0.6, 1.0),
                            fsr=float(rng.integers(0, 9)),
                            rtt=rng.uniform(0.01, 0.2),
                            ssi=rng.uniform(0.1, 4.0)) for _ in range(4)]
        from aspuavn.agents import thresholds_for
        routes = [Route(id=i + 1, src=0, dst=9, hops=(0, i + 1, 9))
                  for i in range(4)]
        ths = thresholds_for(stats)
        chosen_a = match_select(list(zip(routes, stats, ths)))[0].id
        c1, c2 = rng.uniform(0.2, 5.0), rng.uniform(0.2, 5.0)
        scaled = [RouteStats(delay=s.delay, plr=s.plr, pdr=s.pdr, fsr=s.fsr,
                             rtt=s.rtt * c1, ssi=s.ssi * c2) for s in stats]
        ths2 = thresholds_for(scaled)
        chosen_b = match_select(list(zip(routes, scaled, ths2)))[0].id
        assert chosen_a == chosen_b


def test_hyper_mutation_highest_pdr():
    tied = [(Route(id=1, src=0, dst=9, hops=(0, 1, 9)),
             RouteStats(pdr=0.95), 2.0),
            (Route(id=2, src=0, dst=9, hops=(0, 2, 9)),
             RouteStats(pdr=0.85), 2.0)]
    assert hyper_mutate(tied).id == 1


def test_hyper_mutation_residual_tie_lowest_id():
    tied = [(Route(id=4, src=0, dst=9, hops=(0, 1, 9)),
             RouteStats(pdr=0.9), 2.0),
            (Route(id=2, src=0, dst=9, hops=(0, 2, 9)),
             RouteStats(pdr=0.9), 2.0)]
    assert hyper_mutate(tied).id == 2


def test_hyper_mutation_single_input():
    tied = [(Route(id=3, src=0, dst=9, hops=(0, 1, 9)),
             RouteStats(pdr=0.9), 2.0)]
    assert hyper_mutate(tied).id == 3


# --- security memory -------------------------------------------------------------

def _mem(blacklist=None):
    return SecurityMemory(blacklist if blacklist is not None else set(),
                          storing_time=10.0)


def test_memory_register_then_lookup():
    mem = _mem()
    route = Route(id=1, src=0, dst=9, hops=(0, 5, 9))
    mem.register(route, 2.0, 1.5, now=100.0)
    assert mem.lookup(0, 9, now=100.5) == route


def test_memory_expires_after_storing_time():
    mem = _mem()
    route = Route(id=1, src=0, dst=9, hops=(0, 5, 9))
    mem.register(route, 2.0, 1.5, now=100.0)
    assert mem.lookup(0, 9, now=110.0) is None


def test_memory_blacklisted_member_hides_route():
    blacklist = set()
    mem = _mem(blacklist)
    route = Route(id=1, src=0, dst=9, hops=(0, 5, 9))
    mem.register(route, 2.0, 1.5, now=0.0)
    blacklist.add(5)
    assert mem.lookup(0, 9, now=1.0) is None


def test_memory_rejects_blacklisted_registration():
    mem = _mem({5})
    route = Route(id=1, src=0, dst=9, hops=(0, 5, 9))
    with pytest.raises(BlacklistedRouteError):
        mem.register(route, 2.0, 1.5, now=0.0)


def test_memory_purge_removes_routes_through_uav():
    mem = _mem()
    mem.register(Route(id=1, src=0, dst=9, hops=(0, 5, 9)), 2.0, 1.5, 0.0)
    mem.register(Route(id=2, src=1, dst=9, hops=(1, 6, 9)), 2.0, 1.5, 0.0)
    mem.purge(5)
    assert mem.lookup(0, 9, 1.0) is None
    assert mem.lookup(1, 9, 1.0) is not None


# --- knowledge base / persistence -------------------------------------------------

def test_kb_constants_defaults():
    cfg = KbConfig()
    assert cfg.antigen_collection_time == 15.0
    assert cfg.antigen_toward_min == 80.0
    assert cfg.delay_buffer_max == 1400
    assert cfg.storing_time == 10.0
    assert cfg.max_antigens == 1000


def test_kb_caps_self_antigens():
    kb = KnowledgeBase(KbConfig(max_antigens=3))
    for i in range(10):
        kb.add_self_antigen(_antigen(*([0.1 * i] * 6), route_id=i))
    assert len(kb.self_antigens) == 3


def test_kb_retrain_interval_honored():
    kb = KnowledgeBase(KbConfig())
    kb.add_self_antigen(ORIGIN)
    rng = np.random.default_rng(0)
    kb.train(10, rng, now=0.0)
    first = kb.detector_set
    kb.train(10, rng, now=20.0)  # below the 80 s re-training floor
    assert kb.detector_set is first
    kb.train(10, rng, now=100.0)
    assert kb.detector_set is not first


def test_kb_delay_buffer_bounded():
    kb = KnowledgeBase(KbConfig(delay_buffer_max=5))
    for i in range(20):
        kb.note_delay(float(i))
    assert len(kb.delay_samples) == 5


def test_detector_serialization_roundtrip():
    rng = np.random.default_rng(3)
    ds = train_detectors([ORIGIN], ni=25, radius=0.12, rng=rng)
    lines = detector_set_to_lines(ds)
    assert len(lines) == 25
    back = detector_set_from_lines(lines)
    assert back.radius == ds.radius
    assert (back.centers == ds.centers).all()
