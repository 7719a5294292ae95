"""
The switch-resident monitor: checks every frame reaching the tap against the
expected traffic (time, order and count), the VL sequence numbers and the
physical variation laws of the carried data.
"""

from __future__ import annotations

from typing import Collection, Deque, Dict, List, Mapping, NamedTuple, Optional, Set, Tuple, Union
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
import logging
import math

from ima_sentinel import DEFAULT_EPSILON, DEFAULT_WINDOW_N
from .framing import DecodeError, Frame, FrameEvent, decode_frame, next_sequence, peek_vl_id
from .modeling import ExpectedTrafficModel

logger = logging.getLogger(__name__)


class AnomalyKind(Enum):
    MISSING_DATA = "MissingData"
    UNEXPECTED_COMM = "UnexpectedComm"
    INCOHERENT_DATA = "IncoherentData"
    SEQUENCE_ERROR = "SequenceError"


COUNT_KEYS = {
    AnomalyKind.MISSING_DATA: "missing",
    AnomalyKind.UNEXPECTED_COMM: "unexpected",
    AnomalyKind.INCOHERENT_DATA: "incoherent",
    AnomalyKind.SEQUENCE_ERROR: "sequence",
}


@dataclass(frozen=True)
class Anomaly:
    kind: AnomalyKind
    vl_id: int
    detected_at: int  # µs
    detail: str
    expected: Optional[object] = None
    observed: Optional[object] = None

    def to_dict(self) -> dict:
        d = {"kind": self.kind.value, "vl": self.vl_id, "t": self.detected_at, "detail": self.detail}
        if self.expected is not None:
            d["expected"] = self.expected
        if self.observed is not None:
            d["observed"] = self.observed
        return d


class NoLaw(Exception):
    def __init__(self, app_id: int):
        super().__init__(f"No variation law configured for application {app_id}.")
        self.app_id = app_id


@dataclass(frozen=True)
class ValueLaw:
    max_rate: float  # units per second
    min: float = -math.inf
    max: float = math.inf
    angular: bool = False


@dataclass(frozen=True)
class VariationLaw:
    app_id: int
    values: Tuple[ValueLaw, ...]
    window_n: int = DEFAULT_WINDOW_N
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.window_n < 2:
            raise ValueError(f"A variation law needs a window of at least 2 samples, not {self.window_n}.")


class DataPoint(NamedTuple):
    timestamp: int
    values: Tuple[float, ...]
    coherent: bool


@dataclass(frozen=True)
class MafEnd:
    """Marks that the monitor's clock passed the end of a major frame."""

    t: int


MonitorEvent = Union[FrameEvent, MafEnd]


@dataclass
class MonitorState:
    maf_index: int = 0
    last_seq: Dict[int, int] = field(default_factory=dict)
    windows: Dict[int, Deque[DataPoint]] = field(default_factory=dict)  # per VL
    # per-MAF bookkeeping, cleared by flush_maf
    consumed: Dict[int, Set[int]] = field(default_factory=dict)
    cursor: Dict[int, int] = field(default_factory=dict)
    arrivals: Dict[int, int] = field(default_factory=dict)
    order_position: int = -1
    last_ordered_vl: Optional[int] = None
    unlawful_apps: Set[int] = field(default_factory=set)


def order_positions(model: ExpectedTrafficModel, maf_index: int = 1) -> Dict[int, List[int]]:
    """Per VL, the positions its frames take in the expected order of MAF `maf_index`."""
    positions: Dict[int, List[int]] = {}
    for position, vl_id in enumerate(model.order_in(maf_index)):
        positions.setdefault(vl_id, []).append(position)
    return positions


def check_temporal(
    model: ExpectedTrafficModel, state: MonitorState, event: FrameEvent, vl_id: int
) -> Tuple[MonitorState, List[Anomaly]]:
    t = event.t_arrive
    if vl_id not in model.emissions:
        return state, [
            Anomaly(AnomalyKind.UNEXPECTED_COMM, vl_id, t, f"frame on VL {vl_id}, which is not in the model")
        ]
    anomalies = []
    expectations = model.expected(vl_id, state.maf_index)
    arrivals = state.arrivals.get(vl_id, 0) + 1
    state.arrivals[vl_id] = arrivals
    if arrivals > len(expectations):
        return state, [
            Anomaly(
                AnomalyKind.UNEXPECTED_COMM,
                vl_id,
                t,
                f"frame {arrivals} on VL {vl_id} in a MAF expecting {len(expectations)}",
                expected=len(expectations),
                observed=arrivals,
            )
        ]
    offset = t - state.maf_index * model.maf_duration
    consumed = state.consumed.setdefault(vl_id, set())
    cursor = state.cursor.get(vl_id, 0)
    match = next(
        (
            i
            for i in range(cursor, len(expectations))
            if i not in consumed and expectations[i].covers(offset)
        ),
        None,
    )
    if match is None:
        pending = expectations[cursor] if cursor < len(expectations) else None
        anomalies.append(
            Anomaly(
                AnomalyKind.UNEXPECTED_COMM,
                vl_id,
                t,
                f"frame on VL {vl_id} at {offset} µs into the MAF, outside every expected window",
                expected=[pending.earliest, pending.latest] if pending else None,
                observed=offset,
            )
        )
    else:
        consumed.add(match)
        state.cursor[vl_id] = match + 1
    position = order_positions(model, state.maf_index)[vl_id][arrivals - 1]
    if position < state.order_position:
        anomalies.append(
            Anomaly(
                AnomalyKind.UNEXPECTED_COMM,
                vl_id,
                t,
                f"order: VL {vl_id} arrived after VL {state.last_ordered_vl}",
                expected=list(model.order_in(state.maf_index)),
                observed=[state.last_ordered_vl, vl_id],
            )
        )
    else:
        state.order_position = position
        state.last_ordered_vl = vl_id
    return state, anomalies


def flush_maf(
    model: ExpectedTrafficModel,
    state: MonitorState,
    maf_end: int,
    watched: Optional[Collection[int]] = None,
) -> Tuple[MonitorState, List[Anomaly]]:
    missing = []
    for vl_id in model.vl_ids:
        if watched is not None and vl_id not in watched:
            continue
        consumed = state.consumed.get(vl_id, set())
        for i, e in enumerate(model.expected(vl_id, state.maf_index)):
            if i not in consumed:
                missing.append(e)
    anomalies = [
        Anomaly(
            AnomalyKind.MISSING_DATA,
            e.vl_id,
            maf_end,
            f"no frame on VL {e.vl_id} in [{e.earliest}, {e.latest}] µs of MAF {state.maf_index}",
            expected=[e.earliest, e.latest],
        )
        for e in sorted(missing, key=lambda e: (e.emit_offset, e.vl_id))
    ]
    state.maf_index += 1
    state.consumed.clear()
    state.cursor.clear()
    state.arrivals.clear()
    state.order_position = -1
    state.last_ordered_vl = None
    return state, anomalies


def check_sequence(state: MonitorState, frame: Frame) -> Tuple[MonitorState, List[Anomaly]]:
    """Sequence 0 resets the VL. A frame repeating the last number does not advance it."""
    t = frame.arrival_time or 0
    last = state.last_seq.get(frame.vl_id, 0)
    if frame.vl_seq == 0:
        state.last_seq[frame.vl_id] = 0
        return state, []
    expected = next_sequence(last)
    if frame.vl_seq == expected:
        state.last_seq[frame.vl_id] = frame.vl_seq
        return state, []
    if frame.vl_seq == last:
        return state, [
            Anomaly(
                AnomalyKind.SEQUENCE_ERROR,
                frame.vl_id,
                t,
                f"repeated sequence number {last} on VL {frame.vl_id}",
                expected=expected,
                observed=frame.vl_seq,
            )
        ]
    gap = (frame.vl_seq - expected) % 255
    state.last_seq[frame.vl_id] = frame.vl_seq
    return state, [
        Anomaly(
            AnomalyKind.SEQUENCE_ERROR,
            frame.vl_id,
            t,
            f"gap of {gap} in the sequence numbers of VL {frame.vl_id}",
            expected=expected,
            observed=frame.vl_seq,
        )
    ]


def angular_difference(a: float, b: float) -> float:
    """Signed smallest rotation from a to b, in degrees within [-180, 180)."""
    return ((b - a + 180.0) % 360.0) - 180.0


def check_data(
    law: Optional[VariationLaw], state: MonitorState, frame: Frame
) -> Tuple[MonitorState, List[Anomaly]]:
    """
    Check the frame's values against the newest coherent sample on the same
    VL (two partitions may run the same application). The sample joins the
    window either way, flagged if incoherent.
    """
    sample = frame.payload
    if law is None:
        raise NoLaw(sample.app_id)
    t = frame.arrival_time or 0
    window = state.windows.get(frame.vl_id)
    if window is None or window.maxlen != law.window_n:
        window = deque(window or (), maxlen=law.window_n)
        state.windows[frame.vl_id] = window
    anomalies = []
    if len(sample.values) != len(law.values):
        anomalies.append(
            Anomaly(
                AnomalyKind.INCOHERENT_DATA,
                frame.vl_id,
                t,
                f"application {sample.app_id} sent {len(sample.values)} values, its law covers {len(law.values)}",
                expected=len(law.values),
                observed=len(sample.values),
            )
        )
    reference = next((p for p in reversed(window) if p.coherent), None)
    for index, (value, value_law) in enumerate(zip(sample.values, law.values)):
        if not value_law.min <= value <= value_law.max:
            anomalies.append(
                Anomaly(
                    AnomalyKind.INCOHERENT_DATA,
                    frame.vl_id,
                    t,
                    f"value {index} of application {sample.app_id} is {value}, outside [{value_law.min}, {value_law.max}]",
                    expected=[value_law.min, value_law.max],
                    observed=value,
                )
            )
        if reference is None or index >= len(reference.values):
            continue
        previous = reference.values[index]
        diff = angular_difference(previous, value) if value_law.angular else value - previous
        bound = value_law.max_rate * (sample.timestamp - reference.timestamp) / 1e6 + law.epsilon
        if abs(diff) > bound:
            anomalies.append(
                Anomaly(
                    AnomalyKind.INCOHERENT_DATA,
                    frame.vl_id,
                    t,
                    f"value {index} of application {sample.app_id} changed by {diff:g}, at most {bound:g} allowed",
                    expected=bound,
                    observed=diff,
                )
            )
    window.append(DataPoint(sample.timestamp, tuple(sample.values), not anomalies))
    return state, anomalies


def ingest(
    state: MonitorState,
    model: ExpectedTrafficModel,
    laws: Mapping[int, VariationLaw],
    event: MonitorEvent,
    watched: Optional[Collection[int]] = None,
) -> Tuple[MonitorState, List[Anomaly]]:
    """
    Run every check on one event: a MAF end flushes the expectations, a frame
    goes through the temporal, sequence and data checks in that order.
    Frames on VLs outside the model only get the temporal verdict.
    """
    if isinstance(event, MafEnd):
        return flush_maf(model, state, event.t, watched)
    try:
        decoded = decode_frame(event.raw)
    except DecodeError as e:
        vl_id = peek_vl_id(event.raw)
        if watched is not None and vl_id not in watched:
            return state, []
        return state, [
            Anomaly(
                AnomalyKind.UNEXPECTED_COMM,
                vl_id,
                event.t_arrive,
                f"malformed frame: {e.reason}",
                observed=len(event.raw),
            )
        ]
    if watched is not None and decoded.vl_id not in watched:
        return state, []
    frame = replace(decoded, emit_time=event.t_emit, arrival_time=event.t_arrive)
    state, anomalies = check_temporal(model, state, event, frame.vl_id)
    if frame.vl_id not in model.emissions:
        return state, anomalies
    state, found = check_sequence(state, frame)
    anomalies += found
    try:
        state, found = check_data(laws.get(frame.payload.app_id), state, frame)
        anomalies += found
    except NoLaw as e:
        if e.app_id not in state.unlawful_apps:
            state.unlawful_apps.add(e.app_id)
            logger.warning("%s Its frames are only checked for time and sequence.", e)
    return state, anomalies


class Monitor:
    """Feeds arrivals to `ingest`, inserting the MAF ends they imply."""

    def __init__(
        self,
        model: ExpectedTrafficModel,
        laws: Mapping[int, VariationLaw],
        watched: Optional[Collection[int]] = None,
    ):
        self.model = model
        self.laws = laws
        self.watched = set(watched) if watched is not None else None
        self.state = MonitorState()
        self.anomalies: List[Anomaly] = []

    def _maf_end(self) -> int:
        return (self.state.maf_index + 1) * self.model.maf_duration

    def advance(self, t: int) -> List[Anomaly]:
        """Flush every MAF ending at or before t."""
        found: List[Anomaly] = []
        while self.model.maf_duration > 0 and self._maf_end() <= t:
            self.state, anomalies = ingest(self.state, self.model, self.laws, MafEnd(self._maf_end()), self.watched)
            found += anomalies
        self.anomalies += found
        return found

    def feed(self, event: FrameEvent) -> List[Anomaly]:
        found = self.advance(event.t_arrive)
        self.state, anomalies = ingest(self.state, self.model, self.laws, event, self.watched)
        self.anomalies += anomalies
        return found + anomalies


def anomaly_report(anomalies: List[Anomaly]) -> dict:
    counts = {key: 0 for key in COUNT_KEYS.values()}
    for a in anomalies:
        counts[COUNT_KEYS[a.kind]] += 1
    return {
        "anomalies": [a.to_dict() for a in anomalies],
        "counts": counts,
        "verdict": "PASS" if not anomalies else "FAIL",
    }
