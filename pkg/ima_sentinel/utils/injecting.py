"""
Deterministic fault injection on the frame stream between the switch and the monitor.
"""

from __future__ import annotations

from typing import Callable, Dict, Iterable, Iterator, List, Optional, Tuple, Type, Union
from dataclasses import dataclass, replace
import heapq
import logging

from ima_sentinel import MAX_FRAME_SIZE
from .framing import DecodeError, FrameEvent, decode_frame, next_sequence, pack_frame, peek_vl_id, reencode_frame
from .generating import AppSample
from .partitioning import MajorFrame, shift_partition

logger = logging.getLogger(__name__)

class FaultError(Exception):
    pass

class TargetNotFound(FaultError):
    def __init__(self, fault: object, found: int):
        super().__init__(f"{fault} targets an occurrence the stream does not have ({found} found).")
        self.fault = fault
        self.found = found

@dataclass(frozen=True)
class Drop:
    vl: int
    nth: int = 1

@dataclass(frozen=True)
class Delay:
    vl: int
    delta: int  # µs
    nth: int = 1

@dataclass(frozen=True)
class Duplicate:
    vl: int
    nth: int = 1

@dataclass(frozen=True)
class CorruptValue:
    app: int
    delta: float
    nth_sample: int = 1
    value_index: int = 0

@dataclass(frozen=True)
class CorruptBits:
    vl: int
    byte_index: int
    xor_mask: int
    nth: int = 1

@dataclass(frozen=True)
class RogueVl:
    vl_id: int
    times: Tuple[int, ...]

@dataclass(frozen=True)
class ScheduleShift:
    """Moves a partition's windows before simulation; leaves the stream alone."""

    partition: int
    delta: int  # µs

FaultSpec = Union[Drop, Delay, Duplicate, CorruptValue, CorruptBits, RogueVl, ScheduleShift]

FAULT_TYPES: Dict[str, Type] = {
    "drop": Drop,
    "delay": Delay,
    "duplicate": Duplicate,
    "corrupt_value": CorruptValue,
    "corrupt_bits": CorruptBits,
    "rogue_vl": RogueVl,
    "schedule_shift": ScheduleShift,
}

def fault_type(fault: FaultSpec) -> str:
    return next(name for name, cls in FAULT_TYPES.items() if isinstance(fault, cls))

@dataclass(frozen=True)
class FaultScenario:
    name: str = "fault-free"
    faults: Tuple[FaultSpec, ...] = ()
    seed: int = 0  # reserved for randomized campaigns

def _on_vl(vl_id: int) -> Callable[[FrameEvent], bool]:
    return lambda event: peek_vl_id(event.raw) == vl_id

def _carries_app(app_id: int) -> Callable[[FrameEvent], bool]:
    def matches(event: FrameEvent) -> bool:
        try:
            return decode_frame(event.raw).payload.app_id == app_id
        except DecodeError:
            return False

    return matches

def rogue_events(fault: RogueVl) -> List[FrameEvent]:
    """Smallest valid frames on the rogue VL: one 0.0 value from partition 0."""
    events = []
    seq = 0
    for i, t in enumerate(sorted(fault.times), start=1):
        seq = next_sequence(seq)
        sample = AppSample(app_id=0, sample_seq=i, timestamp=t, values=(0.0,))
        events.append(FrameEvent(t, t, pack_frame(fault.vl_id, 0, sample, seq, MAX_FRAME_SIZE)))
    return events


def _strike(
    events: Iterable[FrameEvent],
    matches: Callable[[FrameEvent], bool],
    nth: int,
    fault: FaultSpec,
    hit: Callable[[FrameEvent], List[FrameEvent]],
) -> Iterator[FrameEvent]:
    """Pass the stream on, with the nth (from 1) matching event replaced by what `hit` makes of it."""
    found = 0
    for event in events:
        if found < nth and matches(event):
            found += 1
            if found == nth:
                logger.debug("Applying %s at %d µs.", fault, event.t_arrive)
                yield from hit(event)
                continue
        yield event
    if found < nth:
        raise TargetNotFound(fault, found)

def _delay(events: Iterable[FrameEvent], fault: Delay) -> Iterator[FrameEvent]:
    """Holds the delayed event back until the stream reaches its new arrival time."""
    held: Optional[FrameEvent] = None
    found = 0
    matches = _on_vl(fault.vl)
    for event in events:
        if held is not None and event.t_arrive >= held.t_arrive:
            yield held
            held = None
        if found < fault.nth and matches(event):
            found += 1
            if found == fault.nth:
                logger.debug("Applying %s at %d µs.", fault, event.t_arrive)
                held = replace(event, t_arrive=event.t_arrive + fault.delta)
                continue
        yield event
    if held is not None:
        yield held
    if found < fault.nth:
        raise TargetNotFound(fault, found)

def _corrupt_value(fault: CorruptValue) -> Callable[[FrameEvent], List[FrameEvent]]:
    def hit(event: FrameEvent) -> List[FrameEvent]:
        frame = decode_frame(event.raw)
        values = list(frame.payload.values)
        if not 0 <= fault.value_index < len(values):
            raise TargetNotFound(fault, len(values))
        values[fault.value_index] += fault.delta
        return [replace(event, raw=reencode_frame(frame, replace(frame.payload, values=tuple(values))))]

    return hit

def _corrupt_bits(fault: CorruptBits) -> Callable[[FrameEvent], List[FrameEvent]]:
    def hit(event: FrameEvent) -> List[FrameEvent]:
        raw = bytearray(event.raw)
        if not 0 <= fault.byte_index < len(raw):
            raise TargetNotFound(fault, len(raw))
        raw[fault.byte_index] ^= fault.xor_mask & 0xFF
        return [replace(event, raw=bytes(raw))]

    return hit

def inject(events: Iterable[FrameEvent], fault: FaultSpec) -> Iterator[FrameEvent]:
    """
    Apply one fault to a stream in arrival order, lazily. A missing target
    raises `TargetNotFound` once the stream is exhausted.
    """
    events = iter(events)
    if isinstance(fault, Drop):
        return _strike(events, _on_vl(fault.vl), fault.nth, fault, lambda event: [])
    if isinstance(fault, Delay):
        if fault.delta < 0:
            raise FaultError(f"{fault} would make a frame arrive before it was sent.")
        return _delay(events, fault)
    if isinstance(fault, Duplicate):
        return _strike(events, _on_vl(fault.vl), fault.nth, fault, lambda event: [event, event])
    if isinstance(fault, CorruptValue):
        return _strike(events, _carries_app(fault.app), fault.nth_sample, fault, _corrupt_value(fault))
    if isinstance(fault, CorruptBits):
        return _strike(events, _on_vl(fault.vl), fault.nth, fault, _corrupt_bits(fault))
    if isinstance(fault, RogueVl):
        return heapq.merge(events, rogue_events(fault), key=lambda e: e.t_arrive)
    if isinstance(fault, ScheduleShift):
        return events
    raise FaultError(f"Unknown fault {fault!r}.")

def inject_scenario(events: Iterable[FrameEvent], scenario: FaultScenario) -> Iterator[FrameEvent]:
    """The stream with the scenario's faults applied one after the other, still in arrival order."""
    stream: Iterator[FrameEvent] = iter(events)
    for fault in scenario.faults:
        stream = inject(stream, fault)
    return stream

def apply_scenario(events: Iterable[FrameEvent], scenario: FaultScenario) -> List[FrameEvent]:
    perturbed = list(inject_scenario(events, scenario))
    logger.debug("Applied %d faults, %d frames in the stream.", len(scenario.faults), len(perturbed))
    return perturbed


def shifted_major_frame(mf: MajorFrame, scenario: FaultScenario) -> MajorFrame:
    for fault in scenario.faults:
        if isinstance(fault, ScheduleShift):
            mf = shift_partition(mf, fault.partition, fault.delta)
    return mf
