"""
Encapsulation of application samples into VL-addressed frames, and back.

Frame layout (all multi-byte integers big-endian):

    +----------+-------+-----------+-----+------------+-----------+-------+---------+---------+--------+-------+
    | 03000000 | vl_id | partition | app | sample_seq | timestamp | count | values  | padding | vl_seq | CRC32 |
    | 4B       | 2B    | 1B        | 1B  | 2B         | 8B        | 1B    | count*8 | zeros   | 1B     | 4B    |
    +----------+-------+-----------+-----+------------+-----------+-------+---------+---------+--------+-------+

Frames are padded to 64 bytes. The CRC-32 (IEEE 802.3) covers every byte before it.
"""

from __future__ import annotations

from typing import Optional, Tuple
from dataclasses import dataclass
import struct
import zlib

from ima_sentinel import MAX_FRAME_SIZE, MIN_FRAME_SIZE
from .generating import AppSample

PREFIX = b"\x03\x00\x00\x00"
HEADER = struct.Struct("!4sHBBHQB")
VALUE = struct.Struct("!d")
TRAILER = 5  # vl_seq + CRC
MAX_VALUES = 3


class FrameError(Exception):
    pass


class FrameTooLarge(FrameError):
    def __init__(self, length: int, max_frame_size: int):
        super().__init__(f"Frame needs {length} bytes, the VL allows {max_frame_size}.")
        self.length = length
        self.max_frame_size = max_frame_size


class DecodeError(FrameError):
    """The raw bytes do not make a frame. The monitor treats these as malformed-frame events."""

    reason = "malformed"


class TooShort(DecodeError):
    reason = "too short"


class TooLong(DecodeError):
    reason = "too long"


class BadCrc(DecodeError):
    reason = "bad CRC"


class UnknownLayout(DecodeError):
    reason = "unknown layout"


@dataclass(frozen=True)
class VirtualLinkConfig:
    vl_id: int
    bag: int  # ms
    max_frame_size: int  # bytes
    max_jitter: int  # µs
    source_partition: int
    destinations: Tuple[str, ...]

    @property
    def bag_us(self) -> int:
        return self.bag * 1000


@dataclass(frozen=True)
class Frame:
    vl_id: int
    vl_seq: int
    source_partition: int
    payload: AppSample
    raw: bytes
    emit_time: Optional[int] = None
    arrival_time: Optional[int] = None


@dataclass(frozen=True)
class FrameEvent:
    """A frame on the wire: left the End System at t_emit, reached the monitor tap at t_arrive."""

    t_emit: int
    t_arrive: int
    raw: bytes


def next_sequence(n: int) -> int:
    """Successor of a VL sequence number: 1..255 wrapping to 1, 0 is the reset marker."""
    if not 0 <= n <= 255:
        raise ValueError(f"Sequence number {n} does not fit in 8 bits.")
    return 1 if n in (0, 255) else n + 1


def frame_length(value_count: int) -> int:
    return max(MIN_FRAME_SIZE, HEADER.size + value_count * VALUE.size + TRAILER)


def crc32(data: bytes) -> int:
    return zlib.crc32(data) & 0xFFFFFFFF


def pack_frame(
    vl_id: int, source_partition: int, sample: AppSample, seq: int, max_frame_size: int
) -> bytes:
    if not 1 <= len(sample.values) <= MAX_VALUES:
        raise FrameError(f"A frame carries 1 to {MAX_VALUES} values, not {len(sample.values)}.")
    length = frame_length(len(sample.values))
    if length > max_frame_size:
        raise FrameTooLarge(length, max_frame_size)
    body = HEADER.pack(
        PREFIX,
        vl_id,
        source_partition,
        sample.app_id,
        sample.sample_seq,
        sample.timestamp,
        len(sample.values),
    ) + b"".join(VALUE.pack(v) for v in sample.values)
    body = body.ljust(length - TRAILER, b"\x00") + bytes([seq])
    return body + struct.pack("!I", crc32(body))


def encode_frame(sample: AppSample, vl: VirtualLinkConfig, seq: int) -> bytes:
    if not 1 <= seq <= 255:
        raise FrameError(f"Frames are sent with sequence numbers 1 to 255, not {seq}.")
    return pack_frame(vl.vl_id, vl.source_partition, sample, seq, vl.max_frame_size)


def decode_frame(raw: bytes) -> Frame:
    if len(raw) < MIN_FRAME_SIZE:
        raise TooShort(f"Frame of {len(raw)} bytes is shorter than {MIN_FRAME_SIZE}.")
    if len(raw) > MAX_FRAME_SIZE:
        raise TooLong(f"Frame of {len(raw)} bytes is longer than {MAX_FRAME_SIZE}.")
    (expected_crc,) = struct.unpack("!I", raw[-4:])
    if crc32(raw[:-4]) != expected_crc:
        raise BadCrc(f"CRC mismatch on {len(raw)}-byte frame.")
    prefix, vl_id, partition, app_id, sample_seq, timestamp, count = HEADER.unpack_from(raw)
    if prefix != PREFIX:
        raise UnknownLayout(f"Unknown frame prefix {prefix.hex()}.")
    if not 1 <= count <= MAX_VALUES or len(raw) != frame_length(count):
        raise UnknownLayout(f"{count} values do not match a {len(raw)}-byte frame.")
    values_end = HEADER.size + count * VALUE.size
    if any(raw[values_end : len(raw) - TRAILER]):
        raise UnknownLayout("Non-zero padding.")
    vl_seq = raw[-TRAILER]
    values = tuple(
        VALUE.unpack_from(raw, HEADER.size + i * VALUE.size)[0] for i in range(count)
    )
    return Frame(
        vl_id=vl_id,
        vl_seq=vl_seq,
        source_partition=partition,
        payload=AppSample(app_id=app_id, sample_seq=sample_seq, timestamp=timestamp, values=values),
        raw=bytes(raw),
    )


def reencode_frame(frame: Frame, payload: AppSample, max_frame_size: Optional[int] = None) -> bytes:
    """
    The same frame (VL, partition, sequence) carrying another payload, with a
    fresh CRC. The result may not outgrow `max_frame_size`, by default the
    length of the frame it replaces, itself within its VL's bound.
    """
    bound = len(frame.raw) if max_frame_size is None else max_frame_size
    return pack_frame(frame.vl_id, frame.source_partition, payload, frame.vl_seq, bound)


def peek_vl_id(raw: bytes) -> int:
    """Best-effort VL id of possibly malformed bytes, 0 if there are too few of them."""
    return struct.unpack_from("!H", raw, 4)[0] if len(raw) >= 6 else 0
