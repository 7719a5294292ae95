"""
The flight-management applications (GPS, speed, angle), each advancing a simple
kinematic state at constant configured rates.
"""

from __future__ import annotations

from typing import Optional, Tuple
from dataclasses import dataclass, replace
from enum import IntEnum
import math

METRES_PER_DEGREE = 111320.0
SEQ_MODULO = 1 << 16


class AppId(IntEnum):
    GPS = 1
    SPEED = 2
    ANGLE = 3


@dataclass(frozen=True)
class AppSample:
    app_id: int
    sample_seq: int
    timestamp: int  # µs
    values: Tuple[float, ...]


@dataclass(frozen=True)
class AppGeneratorState:
    latitude: float
    longitude: float
    speed: float  # m/s
    heading: float  # degrees in [0, 360)
    accel: float  # m/s²
    turn_rate: float  # °/s
    last_t: Optional[int] = None
    sample_seq: int = 0


def sample_values(state: AppGeneratorState, app_id: int) -> Tuple[float, ...]:
    if app_id == AppId.GPS:
        return (state.latitude, state.longitude)
    if app_id == AppId.SPEED:
        return (state.speed,)
    if app_id == AppId.ANGLE:
        return (state.heading,)
    raise ValueError(f"Unknown application id {app_id}.")


def advance(state: AppGeneratorState, dt: float) -> AppGeneratorState:
    """Move the kinematic state dt seconds forward (explicit Euler, flat earth)."""
    if dt == 0:
        return state
    heading_rad = math.radians(state.heading)
    distance = state.speed * dt
    latitude = state.latitude + distance * math.cos(heading_rad) / METRES_PER_DEGREE
    longitude = state.longitude + distance * math.sin(heading_rad) / (
        METRES_PER_DEGREE * math.cos(math.radians(state.latitude))
    )
    return replace(
        state,
        latitude=latitude,
        longitude=longitude,
        speed=state.speed + state.accel * dt,
        heading=(state.heading + state.turn_rate * dt) % 360.0,
    )


def generate_sample(
    state: AppGeneratorState, app_id: int, t: int
) -> Tuple[AppGeneratorState, AppSample]:
    """
    Produce the application's next sample at time t (µs).
    The first sample of a run has no elapsed time, later ones advance the state
    by the time since the previous sample.
    """
    dt = 0.0 if state.last_t is None else (t - state.last_t) / 1e6
    state = advance(state, dt)
    seq = (state.sample_seq + 1) % SEQ_MODULO
    state = replace(state, last_t=t, sample_seq=seq)
    return state, AppSample(
        app_id=int(app_id), sample_seq=seq, timestamp=t, values=sample_values(state, app_id)
    )
