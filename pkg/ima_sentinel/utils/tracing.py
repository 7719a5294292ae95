"""
Frame traces as JSON Lines, one frame event per line.

Decodable frames are written field by field, which is enough to rebuild their
bytes exactly; anything else keeps its raw bytes in hex.
"""

from __future__ import annotations

from typing import IO, Iterable, List
import json
import logging

from ima_sentinel import MAX_FRAME_SIZE
from .framing import DecodeError, FrameError, FrameEvent, decode_frame, pack_frame
from .generating import AppSample

logger = logging.getLogger(__name__)


class TraceError(Exception):
    def __init__(self, line_number: int, reason: str):
        super().__init__(f"Trace line {line_number}: {reason}")
        self.line_number = line_number


def event_record(event: FrameEvent) -> dict:
    try:
        frame = decode_frame(event.raw)
    except DecodeError:
        return {"t_emit": event.t_emit, "t_arrive": event.t_arrive, "raw": event.raw.hex()}
    return {
        "t_emit": event.t_emit,
        "t_arrive": event.t_arrive,
        "vl": frame.vl_id,
        "seq": frame.vl_seq,
        "app": frame.payload.app_id,
        "sample_seq": frame.payload.sample_seq,
        "values": list(frame.payload.values),
        "partition": frame.source_partition,
        "timestamp": frame.payload.timestamp,
    }


def event_from_record(record: dict) -> FrameEvent:
    if "raw" in record:
        return FrameEvent(record["t_emit"], record["t_arrive"], bytes.fromhex(record["raw"]))
    sample = AppSample(
        app_id=record["app"],
        sample_seq=record["sample_seq"],
        timestamp=record.get("timestamp", record["t_emit"]),
        values=tuple(float(v) for v in record["values"]),
    )
    raw = pack_frame(record["vl"], record.get("partition", 0), sample, record["seq"], MAX_FRAME_SIZE)
    return FrameEvent(record["t_emit"], record["t_arrive"], raw)


def dump_frame_trace(events: Iterable[FrameEvent], fp: IO[str]) -> int:
    count = 0
    for event in events:
        fp.write(json.dumps(event_record(event), sort_keys=True) + "\n")
        count += 1
    return count


def load_frame_trace(fp: IO[str]) -> List[FrameEvent]:
    events = []
    for line_number, line in enumerate(fp, start=1):
        if not line.strip():
            continue
        try:
            events.append(event_from_record(json.loads(line)))
        except (ValueError, KeyError, TypeError, FrameError) as e:
            raise TraceError(line_number, str(e)) from e
    if any(later.t_arrive < earlier.t_arrive for earlier, later in zip(events, events[1:])):
        logger.warning("Trace is not in arrival order; sorting it.")
        events.sort(key=lambda e: e.t_arrive)
    return events
