"""
End System traffic regulation per virtual link, and switch routing.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple
from dataclasses import dataclass, replace

from .framing import (
    Frame,
    VirtualLinkConfig,
    encode_frame,
    frame_length,
    FrameTooLarge,
    next_sequence,
)
from .generating import AppSample


@dataclass(frozen=True)
class VlRegulatorState:
    last_emission: Optional[int] = None  # µs
    backlog: Tuple[AppSample, ...] = ()  # encoded on emission, once the sequence number is known
    next_seq: int = 1


@dataclass(frozen=True)
class Emission:
    vl_id: int
    emit_time: int
    vl_seq: int
    raw: bytes


class UnknownVl(Exception):
    def __init__(self, vl_id: int):
        super().__init__(f"No route for VL {vl_id}.")
        self.vl_id = vl_id


def enqueue(state: VlRegulatorState, vl: VirtualLinkConfig, sample: AppSample) -> VlRegulatorState:
    length = frame_length(len(sample.values))
    if length > vl.max_frame_size:
        raise FrameTooLarge(length, vl.max_frame_size)
    return replace(state, backlog=state.backlog + (sample,))


def ready_time(state: VlRegulatorState, vl: VirtualLinkConfig, now: int) -> Optional[int]:
    """Earliest instant from `now` on at which the head of the backlog may leave, None with nothing pending."""
    if not state.backlog:
        return None
    if state.last_emission is None:
        return now
    return max(now, state.last_emission + vl.bag_us)


def regulate(
    state: VlRegulatorState, vl: VirtualLinkConfig, now: int
) -> Tuple[VlRegulatorState, List[Emission]]:
    """
    Emit at most one frame: the head of the backlog, once a BAG has elapsed since
    the previous emission on this VL.
    """
    if not state.backlog:
        return state, []
    if state.last_emission is not None and now - state.last_emission < vl.bag_us:
        return state, []
    sample, backlog = state.backlog[0], state.backlog[1:]
    emission = Emission(
        vl_id=vl.vl_id,
        emit_time=now,
        vl_seq=state.next_seq,
        raw=encode_frame(sample, vl, state.next_seq),
    )
    return (
        VlRegulatorState(
            last_emission=now, backlog=backlog, next_seq=next_sequence(state.next_seq)
        ),
        [emission],
    )


RoutingTable = Mapping[int, Sequence[str]]


def routing_table(vls: Iterable[VirtualLinkConfig]) -> Dict[int, Tuple[str, ...]]:
    return {vl.vl_id: tuple(vl.destinations) for vl in vls}


def route(frame: Frame, table: RoutingTable) -> List[str]:
    """Destinations of the frame's VL. The monitor tap receives every frame regardless."""
    if frame.vl_id not in table:
        raise UnknownVl(frame.vl_id)
    return list(table[frame.vl_id])
