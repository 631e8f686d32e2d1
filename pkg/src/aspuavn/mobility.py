"""Smooth-Turn mobility: straight segments and circular arcs at constant speed.

Vertical motion is suppressed (turns happen in the horizontal plane, z stays
at the placement altitude). Nodes reflect off the topology box walls; a
reflection mid-turn degrades the mode to straight so the arc center stays
consistent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

STRAIGHT = 0
TURNING = 1


@dataclass
class StParams:
    speed: float                  # m/s, constant for every node
    mean_duration: float = 3.0    # s, exponential mode holding time
    radius_min: float = 100.0     # m
    radius_max: float = 500.0     # m


@dataclass
class StState:
    heading: Tuple[float, float, float]   # unit vector, z component 0
    mode: int
    remaining: float
    center: Optional[Tuple[float, float]] = None   # turning only
    radius: float = 0.0
    angular_rate: float = 0.0                      # signed rad/s


def initial_state(params: StParams, rng) -> StState:
    ang = rng.uniform(0.0, 2.0 * math.pi)
    return StState(heading=(math.cos(ang), math.sin(ang), 0.0),
                   mode=STRAIGHT, remaining=rng.exponential(params.mean_duration))


def _sample_mode(pos, heading, params: StParams, rng) -> StState:
    duration = rng.exponential(params.mean_duration)
    if rng.random() < 0.5:
        return StState(heading=heading, mode=STRAIGHT, remaining=duration)
    radius = rng.uniform(params.radius_min, params.radius_max)
    direction = 1.0 if rng.random() < 0.5 else -1.0
    hx, hy, _ = heading
    # center sits perpendicular-left of heading for a CCW (+1) turn
    cx = pos[0] + direction * radius * (-hy)
    cy = pos[1] + direction * radius * hx
    return StState(heading=heading, mode=TURNING, remaining=duration,
                   center=(cx, cy), radius=radius,
                   angular_rate=direction * params.speed / radius)


def _advance(pos, st: StState, dt: float, speed: float):
    x, y, z = pos
    if st.mode == STRAIGHT:
        hx, hy, _ = st.heading
        return (x + hx * speed * dt, y + hy * speed * dt, z), st.heading
    theta = st.angular_rate * dt
    ct, s = math.cos(theta), math.sin(theta)
    cx, cy = st.center
    rx, ry = x - cx, y - cy
    nx = cx + rx * ct - ry * s
    ny = cy + rx * s + ry * ct
    hx, hy, _ = st.heading
    heading = (hx * ct - hy * s, hx * s + hy * ct, 0.0)
    return (nx, ny, z), heading


def st_step(pos, st: StState, dt: float, params: StParams, rng,
            bounds=None):
    """Advance one node by dt seconds; returns (new_position, new_state).

    Splits the step at a mode expiry so the traveled arc length is exactly
    speed*dt, then reflects off the box walls when bounds are given.
    """
    remaining_dt = dt
    while remaining_dt > 0.0:
        step = min(remaining_dt, st.remaining)
        if step > 0.0:
            pos, heading = _advance(pos, st, step, params.speed)
            st = StState(heading=heading, mode=st.mode,
                         remaining=st.remaining - step, center=st.center,
                         radius=st.radius, angular_rate=st.angular_rate)
        remaining_dt -= step
        if st.remaining <= 1e-12:
            st = _sample_mode(pos, st.heading, params, rng)
    if bounds is not None:
        pos, st = _reflect(pos, st, bounds)
    return pos, st


def _reflect(pos, st: StState, bounds):
    coords = list(pos)
    heading = list(st.heading)
    bounced = False
    for axis, extent in enumerate(bounds):
        c = coords[axis]
        while c < 0.0 or c > extent:
            if c < 0.0:
                c = -c
            else:
                c = 2.0 * extent - c
            heading[axis] = -heading[axis]
            bounced = True
        coords[axis] = c
    if not bounced:
        return tuple(coords), st
    # arc center is stale after a wall bounce; fall back to straight flight
    return tuple(coords), StState(heading=tuple(heading), mode=STRAIGHT,
                                  remaining=st.remaining)
