import math

import pytest

from aspuavn.domain import (Alert, Confirm, Data, Hello, Position3, Route,
                            Rrep, Rreq, TestPacket, UnknownNodeError, distance,
                            packet_from_dict, packet_to_dict, received_ssi,
                            validate_route)


def test_distance_pythagorean():
    assert distance(Position3(0, 0, 0), Position3(3, 4, 0)) == 5.0


def test_distance_identity():
    assert distance(Position3(1, 1, 1), Position3(1, 1, 1)) == 0.0


def test_distance_hand_arithmetic():
    # sqrt(1 + 4 + 4) = 3
    assert distance(Position3(0, 0, 0), Position3(1, 2, 2)) == 3.0


def test_distance_symmetric():
    a, b = Position3(4.5, -2.0, 7.25), Position3(-1.0, 3.5, 0.0)
    assert distance(a, b) == distance(b, a)


def _positions(*pts):
    return {i: Position3(*p) for i, p in enumerate(pts)}


def test_validate_route_within_range():
    pos = _positions((0, 0, 0), (20, 0, 0), (40, 0, 0))
    route = Route(id=1, src=0, dst=2, hops=(0, 1, 2))
    assert validate_route(route, pos, 30.0)


def test_validate_route_out_of_range():
    pos = _positions((0, 0, 0), (40, 0, 0), (80, 0, 0))
    route = Route(id=1, src=0, dst=2, hops=(0, 1, 2))
    assert not validate_route(route, pos, 30.0)


def test_validate_route_repeated_node():
    pos = _positions((0, 0, 0), (20, 0, 0), (40, 0, 0))
    route = Route(id=1, src=0, dst=0, hops=(0, 1, 0))
    assert not validate_route(route, pos, 30.0)


def test_validate_route_unknown_node():
    pos = _positions((0, 0, 0), (20, 0, 0))
    route = Route(id=1, src=0, dst=9, hops=(0, 9))
    with pytest.raises(UnknownNodeError):
        validate_route(route, pos, 30.0)


def test_validate_route_reverse_symmetry():
    # range symmetry: any accepted route also validates reversed
    import numpy as np
    rng = np.random.default_rng(42)
    for _ in range(50):
        pts = rng.uniform(0, 100, size=(5, 3))
        pos = {i: Position3(*pts[i]) for i in range(5)}
        route = Route(id=1, src=0, dst=4, hops=(0, 1, 2, 3, 4))
        rev = Route(id=2, src=4, dst=0, hops=(4, 3, 2, 1, 0))
        assert validate_route(route, pos, 60.0) == validate_route(rev, pos, 60.0)


def test_route_hops_must_match_endpoints():
    with pytest.raises(ValueError):
        Route(id=1, src=0, dst=2, hops=(1, 2))


def test_ssi_inverse_square_with_floor():
    assert received_ssi(1.0, 10.0) == pytest.approx(0.01)
    assert received_ssi(4.0, 10.0) == pytest.approx(0.04)
    # the 1 m^2 floor prevents a singularity at zero distance
    assert received_ssi(1.0, 0.0) == 1.0


PACKETS = [
    Rreq(origin=1, sender=2, timestamp=0.5, rreq_id=7, src=1, dst=9,
         hop_count=2, path_so_far=(1, 2), dst_seq=3),
    Rrep(origin=9, sender=5, timestamp=1.0, rreq_id=7, route=(1, 5, 9),
         dst_seq=4, hop_count=2),
    Hello(origin=1, sender=1, timestamp=2.0, route_id=3, probe_round=2,
          route=(1, 5, 9)),
    Confirm(origin=9, sender=9, timestamp=2.1, route_id=3, probe_round=2,
            route=(1, 5, 9)),
    TestPacket(origin=1, sender=1, timestamp=3.0, route_id=3, seq=12,
         route=(1, 5, 9), watchdog_id=2, interval=1),
    Data(origin=1, sender=5, timestamp=4.0, seq=17, route=(1, 5, 9),
         session_id=42),
    Alert(origin=1, sender=1, timestamp=5.0, blacklisted=5, alert_id=3),
]


@pytest.mark.parametrize("pkt", PACKETS, ids=lambda p: type(p).__name__)
def test_packet_roundtrip(pkt):
    assert packet_from_dict(packet_to_dict(pkt)) == pkt


def test_data_payload_is_512_bytes():
    assert Data().payload_bytes == 512
