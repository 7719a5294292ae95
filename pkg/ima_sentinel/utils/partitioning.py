"""
Time partitioning (major frame and its partition windows) and the inter-partition
ports through which the applications hand their samples to the End System.
"""

from __future__ import annotations

from typing import Iterable, List, Optional, Tuple
from bisect import bisect_right
from dataclasses import dataclass, replace
from enum import Enum

from ima_sentinel import DEFAULT_QUEUING_CAPACITY
from .generating import AppGeneratorState, AppSample


@dataclass(frozen=True)
class PartitionWindow:
    partition_id: int
    offset: int  # µs from MAF start
    duration: int  # µs

    @property
    def end(self) -> int:
        return self.offset + self.duration


@dataclass(frozen=True)
class MajorFrame:
    maf_duration: int  # µs
    windows: Tuple[PartitionWindow, ...]

    @property
    def partition_ids(self) -> List[int]:
        return sorted({w.partition_id for w in self.windows})


@dataclass(frozen=True)
class ScheduleViolation:
    kind: str  # Overlap, OutOfRange, PartitionAbsent, NotSorted, EmptyWindow
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


def validate_major_frame(
    mf: MajorFrame, partition_ids: Iterable[int] = ()
) -> List[ScheduleViolation]:
    """
    Check a major frame, returning every violation found (an empty list means ok).
    `partition_ids` are the declared partitions, each of which needs a window.
    """
    violations = []
    if mf.maf_duration <= 0:
        violations.append(
            ScheduleViolation("OutOfRange", f"MAF duration {mf.maf_duration} µs is not positive")
        )
    for w in mf.windows:
        if w.duration <= 0:
            violations.append(
                ScheduleViolation("EmptyWindow", f"P{w.partition_id} window at {w.offset} µs has duration {w.duration}")
            )
        if w.offset < 0 or w.end > mf.maf_duration:
            violations.append(
                ScheduleViolation(
                    "OutOfRange",
                    f"P{w.partition_id} window [{w.offset}, {w.end}) µs leaves the {mf.maf_duration} µs MAF",
                )
            )
    for before, after in zip(mf.windows, mf.windows[1:]):
        if after.offset < before.offset:
            violations.append(
                ScheduleViolation(
                    "NotSorted", f"P{after.partition_id} at {after.offset} µs follows P{before.partition_id} at {before.offset} µs"
                )
            )
    ordered = sorted(mf.windows, key=lambda w: w.offset)
    for before, after in zip(ordered, ordered[1:]):
        if after.offset < before.end:
            violations.append(
                ScheduleViolation("Overlap", f"P{before.partition_id} and P{after.partition_id}")
            )
    scheduled = set(mf.partition_ids)
    for partition_id in sorted(set(partition_ids) - scheduled):
        violations.append(
            ScheduleViolation("PartitionAbsent", f"P{partition_id} has no window in the MAF")
        )
    return violations


def active_partition(mf: MajorFrame, t: int) -> Optional[int]:
    """The partition whose window contains t (modulo the MAF), if any."""
    position = t % mf.maf_duration
    index = bisect_right([w.offset for w in mf.windows], position) - 1
    if index >= 0 and position < mf.windows[index].end:
        return mf.windows[index].partition_id
    return None


def activations(mf: MajorFrame, maf_index: int) -> List[Tuple[int, int]]:
    """(start time, partition id) of every window activation in the given MAF."""
    base = maf_index * mf.maf_duration
    return sorted((base + w.offset, w.partition_id) for w in mf.windows)


def shift_partition(mf: MajorFrame, partition_id: int, delta: int) -> MajorFrame:
    """Move a partition's windows by delta µs, wrapping around the MAF. The result is not re-validated."""
    windows = [
        replace(w, offset=(w.offset + delta) % mf.maf_duration) if w.partition_id == partition_id else w
        for w in mf.windows
    ]
    return replace(mf, windows=tuple(sorted(windows, key=lambda w: (w.offset, w.partition_id))))


class PortKind(Enum):
    QUEUING = "queuing"
    SAMPLING = "sampling"


class QueueFull(Exception):
    def __init__(self, port: str, capacity: int):
        super().__init__(f"Queuing port {port} already holds {capacity} messages.")
        self.port = port
        self.capacity = capacity


@dataclass(frozen=True)
class Port653:
    name: str
    kind: PortKind = PortKind.QUEUING
    capacity: int = DEFAULT_QUEUING_CAPACITY
    messages: Tuple[AppSample, ...] = ()


def port_send(port: Port653, msg: AppSample) -> Port653:
    if port.kind is PortKind.SAMPLING:
        return replace(port, messages=(msg,))
    if len(port.messages) >= port.capacity:
        raise QueueFull(port.name, port.capacity)
    return replace(port, messages=port.messages + (msg,))


def port_receive(port: Port653) -> Tuple[Port653, Optional[AppSample]]:
    if not port.messages:
        return port, None
    if port.kind is PortKind.SAMPLING:
        return port, port.messages[0]
    return replace(port, messages=port.messages[1:]), port.messages[0]


@dataclass(frozen=True)
class PartitionConfig:
    """A partition hosting one application, the port it writes to and its generator."""

    partition_id: int
    app_id: int
    generator: AppGeneratorState
    port_kind: PortKind = PortKind.QUEUING
    port_capacity: int = DEFAULT_QUEUING_CAPACITY

    def make_port(self) -> Port653:
        return Port653(
            name=f"P{self.partition_id}.out", kind=self.port_kind, capacity=self.port_capacity
        )
