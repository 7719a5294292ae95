"""
The transmission side: partitions produce one sample per window activation,
hand it over through their port, and the End System regulates each VL.
"""

from __future__ import annotations

from typing import Dict, Iterable, Iterator, List, Sequence
from dataclasses import dataclass, field
import logging

from ima_sentinel import DEFAULT_PROP_DELAY_US
from .framing import FrameEvent, VirtualLinkConfig
from .generating import AppSample, generate_sample
from .partitioning import (
    MajorFrame,
    PartitionConfig,
    QueueFull,
    activations,
    port_receive,
    port_send,
)
from .regulating import Emission, VlRegulatorState, enqueue, ready_time, regulate

logger = logging.getLogger(__name__)


@dataclass
class TransmitterStats:
    samples: int = 0
    frames: int = 0
    queue_full: int = 0
    backlog_left: Dict[int, int] = field(default_factory=dict)


class EndSystem:
    """One regulator per VL. Regulation instants skip idle time, which leaves emissions unchanged."""

    def __init__(self, vls: Iterable[VirtualLinkConfig]):
        self.vls = {vl.vl_id: vl for vl in vls}
        self.by_partition = {vl.source_partition: vl for vl in self.vls.values()}
        self.regulators = {vl_id: VlRegulatorState() for vl_id in self.vls}
        self.emissions: List[Emission] = []

    def submit(self, vl: VirtualLinkConfig, sample: AppSample):
        self.regulators[vl.vl_id] = enqueue(self.regulators[vl.vl_id], vl, sample)

    def regulate_all(self, now: int):
        for vl_id, vl in self.vls.items():
            self.regulators[vl_id], emitted = regulate(self.regulators[vl_id], vl, now)
            self.emissions.extend(emitted)

    def drain(self, until: int, since: int):
        """Emit everything whose BAG elapses in [since, until)."""
        for vl_id, vl in self.vls.items():
            while True:
                t = ready_time(self.regulators[vl_id], vl, since)
                if t is None or t >= until:
                    break
                self.regulators[vl_id], emitted = regulate(self.regulators[vl_id], vl, t)
                self.emissions.extend(emitted)

    def take_emissions(self) -> List[Emission]:
        """The emissions since the last call, in emission order."""
        taken = sorted(self.emissions, key=lambda e: (e.emit_time, e.vl_id))
        self.emissions = []
        return taken


def iter_transmitter(
    mf: MajorFrame,
    partitions: Sequence[PartitionConfig],
    vls: Sequence[VirtualLinkConfig],
    run_mafs: int,
    stats: TransmitterStats | None = None,
) -> Iterator[List[Emission]]:
    """
    The emissions of each major frame in turn, in emission order. A MAF is
    yielded once its end is drained, so no later emission can precede it.
    """
    stats = stats if stats is not None else TransmitterStats()
    generators = {p.partition_id: p.generator for p in partitions}
    apps = {p.partition_id: p.app_id for p in partitions}
    ports = {p.partition_id: p.make_port() for p in partitions}
    end_system = EndSystem(vls)
    now = 0
    for maf in range(run_mafs):
        for t, partition_id in activations(mf, maf):
            end_system.drain(until=t, since=now)
            now = t
            if partition_id in generators:
                generators[partition_id], sample = generate_sample(
                    generators[partition_id], apps[partition_id], t
                )
                stats.samples += 1
                try:
                    ports[partition_id] = port_send(ports[partition_id], sample)
                except QueueFull as e:
                    stats.queue_full += 1
                    logger.warning("%s Sample %d of P%d lost.", e, sample.sample_seq, partition_id)
                ports[partition_id], message = port_receive(ports[partition_id])
                vl = end_system.by_partition.get(partition_id)
                if message is not None and vl is not None:
                    end_system.submit(vl, message)
            end_system.regulate_all(t)
        maf_end = (maf + 1) * mf.maf_duration
        end_system.drain(until=maf_end, since=now)
        now = maf_end
        emissions = end_system.take_emissions()
        stats.frames += len(emissions)
        yield emissions
    stats.backlog_left = {
        vl_id: len(r.backlog) for vl_id, r in end_system.regulators.items() if r.backlog
    }
    if stats.backlog_left:
        logger.warning("Frames still queued at the end of the run: %s", stats.backlog_left)


def simulate_transmitter(
    mf: MajorFrame,
    partitions: Sequence[PartitionConfig],
    vls: Sequence[VirtualLinkConfig],
    run_mafs: int,
    stats: TransmitterStats | None = None,
) -> List[Emission]:
    """Emissions of the End System over `run_mafs` major frames, in emission order."""
    return [e for emissions in iter_transmitter(mf, partitions, vls, run_mafs, stats) for e in emissions]


def switch_stream(emissions: Iterable[Emission], prop_delay: int = DEFAULT_PROP_DELAY_US) -> Iterator[FrameEvent]:
    """The frames as the switch's monitor tap sees them, after the propagation delay."""
    for e in emissions:
        yield FrameEvent(e.emit_time, e.emit_time + prop_delay, e.raw)


def switch_forward(emissions: Iterable[Emission], prop_delay: int = DEFAULT_PROP_DELAY_US) -> List[FrameEvent]:
    return list(switch_stream(emissions, prop_delay))
