"""
One monitored run: transmitter simulation, switch, fault injection, monitor, report.
"""

from __future__ import annotations

from typing import Dict, Iterable, Iterator, List, Optional, Sequence
from collections import Counter
from itertools import chain
from dataclasses import dataclass, field
import json
import logging
import queue
import threading

from .configuring import SystemConfig
from .framing import DecodeError, FrameEvent, decode_frame
from .injecting import FaultScenario, fault_type, inject_scenario, shifted_major_frame
from .modeling import ExpectedTrafficModel, build_expected_model
from .monitoring import Anomaly, Monitor, anomaly_report
from .regulating import UnknownVl, route, routing_table
from .transmitting import TransmitterStats, iter_transmitter, switch_stream

logger = logging.getLogger(__name__)

PIPELINE_DEPTH = 64
PUT_TIMEOUT_S = 0.1
PRODUCER_NAME = "ima-sentinel-producer"


@dataclass
class Report:
    config_digest: str
    scenario: Optional[FaultScenario]
    frames_emitted: int
    frames_received: int
    deliveries: Dict[str, int]
    unroutable: int
    anomalies: List[Anomaly]
    events: List[FrameEvent] = field(default_factory=list, repr=False, compare=False)

    @property
    def verdict(self) -> str:
        return "PASS" if not self.anomalies else "FAIL"

    def to_dict(self) -> dict:
        d = anomaly_report(self.anomalies)
        d.update(
            config_digest=self.config_digest,
            scenario=None
            if self.scenario is None
            else {"name": self.scenario.name, "faults": [fault_type(f) for f in self.scenario.faults]},
            frames={
                "emitted": self.frames_emitted,
                "received": self.frames_received,
                "unroutable": self.unroutable,
            },
            deliveries=dict(sorted(self.deliveries.items())),
        )
        return d


def emit_report(report: Report) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def switch_deliveries(events: Iterable[FrameEvent], config: SystemConfig) -> tuple:
    """Per destination, the frames the switch forwards there, and the count of frames it cannot route."""
    table = routing_table(config.virtual_links)
    deliveries: Counter = Counter()
    unroutable = 0
    for event in events:
        try:
            deliveries.update(route(decode_frame(event.raw), table))
        except (DecodeError, UnknownVl):
            unroutable += 1
    return dict(deliveries), unroutable


def stream_events(config: SystemConfig, stats: Optional[TransmitterStats] = None) -> Iterator[FrameEvent]:
    """The frame events at the monitor tap, faults included, generated one major frame at a time."""
    scenario = config.scenario or FaultScenario()
    mf = shifted_major_frame(config.major_frame, scenario)
    emissions = chain.from_iterable(
        iter_transmitter(mf, config.partitions, config.virtual_links, config.run_mafs, stats)
    )
    return inject_scenario(switch_stream(emissions, config.prop_delay), scenario)


def generate_events(config: SystemConfig, stats: Optional[TransmitterStats] = None) -> List[FrameEvent]:
    return list(stream_events(config, stats))


def expected_model(config: SystemConfig) -> ExpectedTrafficModel:
    return build_expected_model(config.major_frame, config.virtual_links, config.prop_delay)


def monitor_events(
    config: SystemConfig, model: ExpectedTrafficModel, events: Iterable[FrameEvent], until: int
) -> List[Anomaly]:
    monitor = Monitor(model, config.laws_by_app, config.watched_vls)
    for event in events:
        monitor.feed(event)
    monitor.advance(until)
    return monitor.anomalies


def _offer(channel: queue.Queue, item: Optional[FrameEvent], stop: threading.Event) -> bool:
    """Put `item` on the channel unless the consumer stopped first."""
    while not stop.is_set():
        try:
            channel.put(item, timeout=PUT_TIMEOUT_S)
            return True
        except queue.Full:
            continue
    return False


def _pipelined_anomalies(config: SystemConfig, model: ExpectedTrafficModel, until: int, stats: TransmitterStats):
    """
    A producer thread generates the events MAF by MAF while the calling thread
    monitors them. At most PIPELINE_DEPTH events wait in between.
    """
    channel: queue.Queue = queue.Queue(maxsize=PIPELINE_DEPTH)
    stop = threading.Event()
    produced: List[FrameEvent] = []
    failure: List[BaseException] = []

    def produce():
        try:
            for event in stream_events(config, stats):
                produced.append(event)
                if not _offer(channel, event, stop):
                    return
        except BaseException as e:
            failure.append(e)
        _offer(channel, None, stop)

    def stream():
        while True:
            event = channel.get()
            if event is None:
                return
            yield event

    producer = threading.Thread(target=produce, name=PRODUCER_NAME, daemon=True)
    producer.start()
    try:
        anomalies = monitor_events(config, model, stream(), until)
    finally:
        stop.set()
        producer.join()
    if failure:
        raise failure[0]
    return produced, anomalies


def run_scenario(config: SystemConfig, pipelined: bool = False) -> Report:
    model = expected_model(config)
    until = config.run_mafs * config.major_frame.maf_duration
    stats = TransmitterStats()
    if pipelined:
        events, anomalies = _pipelined_anomalies(config, model, until, stats)
    else:
        events = generate_events(config, stats)
        anomalies = monitor_events(config, model, events, until)
    deliveries, unroutable = switch_deliveries(events, config)
    logger.info(
        "%d frames emitted, %d seen by the monitor, %d anomalies.", stats.frames, len(events), len(anomalies)
    )
    return Report(
        config_digest=config.digest,
        scenario=config.scenario,
        frames_emitted=stats.frames,
        frames_received=len(events),
        deliveries=deliveries,
        unroutable=unroutable,
        anomalies=anomalies,
        events=events,
    )


def check_trace(config: SystemConfig, events: Sequence[FrameEvent], run_mafs: Optional[int] = None) -> Report:
    """
    Monitor a recorded trace. Without `run_mafs`, the MAF holding the last
    arrival is the last one checked for missing frames.
    """
    maf = config.major_frame.maf_duration
    if run_mafs is not None:
        until = run_mafs * maf
    else:
        until = (events[-1].t_arrive // maf + 1) * maf if events else 0
    anomalies = monitor_events(config, expected_model(config), events, until)
    deliveries, unroutable = switch_deliveries(events, config)
    return Report(
        config_digest=config.digest,
        scenario=None,
        frames_emitted=len(events),
        frames_received=len(events),
        deliveries=deliveries,
        unroutable=unroutable,
        anomalies=anomalies,
        events=list(events),
    )
