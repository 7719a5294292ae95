"""
The monitor's prediction of the traffic: the transmitter configuration
re-simulated as a netlist on the static kernel.

One scheduler module counts clock ticks and pulses the start of every partition
window, one module per source partition turns those pulses into produced samples,
and one module per virtual link regulates them under its BAG. The clock period is
the greatest common divisor of every duration involved, so each window start and
each BAG expiry falls on a tick.
"""

from __future__ import annotations

from typing import Dict, Iterable, List, Mapping, Sequence, Tuple
from dataclasses import dataclass
from functools import partial, reduce
import logging
import math

from ima_sentinel import DEFAULT_PROP_DELAY_US
from .framing import VirtualLinkConfig
from .partitioning import MajorFrame
from .simulating import (
    Binding,
    ModuleSpec,
    Netlist,
    ProcessKind,
    ProcessSpec,
    Signal,
    elaborate,
    observe,
    observe_registers,
    reset,
    step,
)

logger = logging.getLogger(__name__)

TICK_WIDTH = 64
BACKLOG_WIDTH = 16
SCHEDULER = "scheduler"
SETTLING_MAFS = 3


class InfeasibleConfig(Exception):
    def __init__(self, vl_id: int, reason: str):
        super().__init__(f"VL {vl_id}: {reason}.")
        self.vl_id = vl_id
        self.reason = reason


@dataclass(frozen=True)
class ExpectedEmission:
    vl_id: int
    emit_offset: int  # µs from MAF start
    earliest: int  # arrival bounds, µs from MAF start
    latest: int

    def covers(self, offset: int) -> bool:
        return self.earliest <= offset <= self.latest


@dataclass(frozen=True)
class ExpectedTrafficModel:
    maf_duration: int  # µs
    clock_period: int  # µs per kernel tick
    emissions: Mapping[int, Tuple[ExpectedEmission, ...]]  # per VL, by emission time
    order: Tuple[int, ...]  # VL of each expected emission in a MAF, by emission time
    # the very first MAF, before the regulators reach their steady state
    first_emissions: Mapping[int, Tuple[ExpectedEmission, ...]]
    first_order: Tuple[int, ...]

    def expected(self, vl_id: int, maf_index: int) -> Tuple[ExpectedEmission, ...]:
        emissions = self.first_emissions if maf_index == 0 else self.emissions
        return emissions.get(vl_id, ())

    def order_in(self, maf_index: int) -> Tuple[int, ...]:
        return self.first_order if maf_index == 0 else self.order

    def frames_per_maf(self, vl_id: int, maf_index: int = 1) -> int:
        return len(self.expected(vl_id, maf_index))

    @property
    def vl_ids(self) -> List[int]:
        return sorted(self.emissions)


def partition_module_id(partition_id: int) -> str:
    return f"P{partition_id}"


def vl_module_id(vl_id: int) -> str:
    return f"VL{vl_id}"


def clock_period(mf: MajorFrame, vls: Iterable[VirtualLinkConfig]) -> int:
    steps = [mf.maf_duration]
    steps += [w.offset for w in mf.windows] + [w.duration for w in mf.windows]
    steps += [vl.bag_us for vl in vls]
    return reduce(math.gcd, steps)


def count_ticks(reads: Mapping[str, int]) -> Dict[str, int]:
    return {"count": reads["count"] + 1}


def window_starts(
    reads: Mapping[str, int], maf_ticks: int, starts: Mapping[str, frozenset]
) -> Dict[str, int]:
    position = reads["count"] % maf_ticks
    out = {port: int(position in offsets) for port, offsets in starts.items()}
    out["now"] = reads["count"]
    return out


def produce(reads: Mapping[str, int]) -> Dict[str, int]:
    return {"produce": reads["start"]}


def count_samples(reads: Mapping[str, int]) -> Dict[str, int]:
    return {"samples": reads["samples"] + reads["start"]}


def _may_emit(reads: Mapping[str, int], bag_ticks: int) -> bool:
    pending = reads["backlog"] + reads["produce"]
    elapsed = not reads["sent"] or reads["now"] - reads["last"] >= bag_ticks
    return pending > 0 and elapsed


def emit(reads: Mapping[str, int], bag_ticks: int) -> Dict[str, int]:
    return {"emit": int(_may_emit(reads, bag_ticks))}


def account(reads: Mapping[str, int], bag_ticks: int) -> Dict[str, int]:
    emitted = _may_emit(reads, bag_ticks)
    return {
        "backlog": reads["backlog"] + reads["produce"] - int(emitted),
        "last": reads["now"] if emitted else reads["last"],
        "sent": reads["sent"] | int(emitted),
    }


def expected_traffic_netlist(
    mf: MajorFrame, vls: Sequence[VirtualLinkConfig]
) -> Tuple[Netlist, List[VirtualLinkConfig]]:
    """
    The transmitter as a netlist, and the VLs it models. VLs whose source
    partition never gets a window produce nothing and have no module.
    """
    tick = clock_period(mf, vls)
    maf_ticks = mf.maf_duration // tick
    scheduled = mf.partition_ids
    modeled = [vl for vl in vls if vl.source_partition in scheduled]
    sources = sorted({vl.source_partition for vl in modeled})
    starts = {
        f"start_{partition_module_id(p)}": frozenset(
            w.offset // tick for w in mf.windows if w.partition_id == p
        )
        for p in sources
    }
    modules = [
        ModuleSpec(
            module_id=SCHEDULER,
            registers=(Signal("count", TICK_WIDTH),),
            output_ports=(Signal("now", TICK_WIDTH),) + tuple(Signal(port, 1) for port in starts),
            processes=(
                ProcessSpec(ProcessKind.TRANSITION, ("count",), ("count",), count_ticks, "tick"),
                ProcessSpec(
                    ProcessKind.MOORE,
                    ("count",),
                    ("now",) + tuple(starts),
                    partial(window_starts, maf_ticks=maf_ticks, starts=starts),
                    "windows",
                ),
            ),
        )
    ]
    bindings = []
    for p in sources:
        module_id = partition_module_id(p)
        modules.append(
            ModuleSpec(
                module_id=module_id,
                registers=(Signal("samples", TICK_WIDTH),),
                input_ports=(Signal("start", 1),),
                output_ports=(Signal("produce", 1),),
                processes=(
                    ProcessSpec(ProcessKind.MEALY, ("start",), ("produce",), produce, "produce"),
                    ProcessSpec(
                        ProcessKind.TRANSITION, ("samples", "start"), ("samples",), count_samples, "count"
                    ),
                ),
            )
        )
        bindings.append(Binding(f"{SCHEDULER}.start_{module_id}", f"{module_id}.start"))
    state_reads = ("backlog", "last", "sent", "produce", "now")
    for vl in modeled:
        module_id = vl_module_id(vl.vl_id)
        bag_ticks = vl.bag_us // tick
        modules.append(
            ModuleSpec(
                module_id=module_id,
                registers=(
                    Signal("backlog", BACKLOG_WIDTH),
                    Signal("last", TICK_WIDTH),
                    Signal("sent", 1),
                ),
                input_ports=(Signal("produce", 1), Signal("now", TICK_WIDTH)),
                output_ports=(Signal("emit", 1),),
                processes=(
                    ProcessSpec(
                        ProcessKind.MEALY, state_reads, ("emit",), partial(emit, bag_ticks=bag_ticks), "regulate"
                    ),
                    ProcessSpec(
                        ProcessKind.TRANSITION,
                        state_reads,
                        ("backlog", "last", "sent"),
                        partial(account, bag_ticks=bag_ticks),
                        "account",
                    ),
                ),
            )
        )
        bindings.append(
            Binding(f"{partition_module_id(vl.source_partition)}.produce", f"{module_id}.produce")
        )
        bindings.append(Binding(f"{SCHEDULER}.now", f"{module_id}.now"))
    return Netlist(tuple(modules), tuple(bindings), clock_period=tick), modeled


def _expectations(
    vl: VirtualLinkConfig, offsets: Sequence[int], prop_delay: int, maf_duration: int
) -> Tuple[ExpectedEmission, ...]:
    expected = tuple(
        ExpectedEmission(vl_id=vl.vl_id, emit_offset=t, earliest=t + prop_delay, latest=t + prop_delay + vl.max_jitter)
        for t in offsets
    )
    for e in expected:
        if e.latest >= maf_duration:
            raise InfeasibleConfig(
                vl.vl_id, f"arrival window up to {e.latest} µs reaches past the {maf_duration} µs MAF"
            )
    return expected


def _order(emissions: Mapping[int, Tuple[ExpectedEmission, ...]]) -> Tuple[int, ...]:
    return tuple(
        e.vl_id
        for e in sorted(
            (e for expected in emissions.values() for e in expected), key=lambda e: (e.emit_offset, e.vl_id)
        )
    )


def build_expected_model(
    mf: MajorFrame, vls: Sequence[VirtualLinkConfig], prop_delay: int = DEFAULT_PROP_DELAY_US
) -> ExpectedTrafficModel:
    """
    Simulate the transmitter for three major frames. The first one is kept as
    its own expectation, as no BAG holds back its opening frames. The second
    and third must then match, emissions and leftover backlog alike, and give
    the expectation of every later MAF. A backlog still growing, or a third
    MAF that differs from the second, means the traffic never settles.
    """
    netlist, modeled = expected_traffic_netlist(mf, vls)
    tick = netlist.clock_period
    maf_ticks = mf.maf_duration // tick
    schedule = elaborate(netlist)
    state = reset(netlist, schedule)
    emitted: Dict[int, List[List[int]]] = {vl.vl_id: [[] for _ in range(SETTLING_MAFS)] for vl in modeled}
    queued: Dict[int, List[int]] = {vl.vl_id: [] for vl in modeled}
    for cycle in range(SETTLING_MAFS * maf_ticks):
        maf, position = divmod(cycle, maf_ticks)
        ports = observe(state, schedule)
        for vl in modeled:
            if ports[f"{vl_module_id(vl.vl_id)}.emit"]:
                emitted[vl.vl_id][maf].append(position * tick)
        step(state, schedule, netlist)
        if position == maf_ticks - 1:
            registers = observe_registers(state, schedule)
            for vl in modeled:
                queued[vl.vl_id].append(registers[f"{vl_module_id(vl.vl_id)}.backlog"])
    first_emissions: Dict[int, Tuple[ExpectedEmission, ...]] = {vl.vl_id: () for vl in vls}
    emissions: Dict[int, Tuple[ExpectedEmission, ...]] = {vl.vl_id: () for vl in vls}
    for vl in modeled:
        first, settled, again = emitted[vl.vl_id]
        before, after = queued[vl.vl_id][-2:]
        if after > before:
            raise InfeasibleConfig(
                vl.vl_id, f"{after} samples still queued at the end of MAF {SETTLING_MAFS - 1}, up from {before}"
            )
        if settled != again or after != before:
            raise InfeasibleConfig(vl.vl_id, f"emissions at {settled} µs, then at {again} µs in the next MAF")
        first_emissions[vl.vl_id] = _expectations(vl, first, prop_delay, mf.maf_duration)
        emissions[vl.vl_id] = _expectations(vl, settled, prop_delay, mf.maf_duration)
    order = _order(emissions)
    logger.info(
        "Expected %d frames per MAF on %d VLs (clock period %d µs).", len(order), len(emissions), tick
    )
    return ExpectedTrafficModel(
        maf_duration=mf.maf_duration,
        clock_period=tick,
        emissions=emissions,
        order=order,
        first_emissions=first_emissions,
        first_order=_order(first_emissions),
    )


def _describe_emissions(emissions: Mapping[int, Tuple[ExpectedEmission, ...]]) -> dict:
    return {
        str(vl_id): [
            {"emit_us": e.emit_offset, "earliest_us": e.earliest, "latest_us": e.latest} for e in emissions[vl_id]
        ]
        for vl_id in sorted(emissions)
    }


def describe_model(model: ExpectedTrafficModel) -> dict:
    description = {
        "maf_duration_us": model.maf_duration,
        "clock_period_us": model.clock_period,
        "order": list(model.order),
        "virtual_links": _describe_emissions(model.emissions),
    }
    if model.first_emissions != model.emissions:
        description["first_maf"] = {
            "order": list(model.first_order),
            "virtual_links": _describe_emissions(model.first_emissions),
        }
    return description
