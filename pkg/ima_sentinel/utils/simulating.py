"""
Static-scheduled, cycle-accurate simulation of single-clock communicating
finite state machines.

A netlist is elaborated once into a StaticSchedule. Every clock cycle then runs
the Transition processes (rising edge), the Moore processes and finally the
Mealy processes in topological order (falling edge). No process is ever
discovered, and no value slot ever created, after elaboration.
"""

from __future__ import annotations

from typing import Callable, Dict, Iterable, List, Mapping, NamedTuple, Optional, Tuple
from dataclasses import dataclass, field
from enum import Enum
import json
import logging

import networkx as nx

logger = logging.getLogger(__name__)

MAX_WIDTH = 64

Behavior = Callable[[Mapping[str, int]], Mapping[str, int]]


class KernelError(Exception):
    pass


class NetlistError(KernelError):
    """The netlist breaks a structural rule (bindings, drivers, declared sets)."""


class UnboundPort(NetlistError):
    def __init__(self, port: str, reason: str = "is not bound to any output port"):
        super().__init__(f"Input port {port} {reason}.")
        self.port = port


class WidthMismatch(NetlistError):
    def __init__(self, source: str, destination: str, widths: Tuple[int, int]):
        super().__init__(
            f"Binding {source} -> {destination} joins widths {widths[0]} and {widths[1]}."
        )
        self.source = source
        self.destination = destination
        self.widths = widths


class MultipleDrivers(NetlistError):
    def __init__(self, signal: str, drivers: Tuple[str, str]):
        super().__init__(f"{signal} is driven by both {drivers[0]} and {drivers[1]}.")
        self.signal = signal
        self.drivers = drivers


class CombinationalCycle(KernelError):
    def __init__(self, process_ids: List[str]):
        super().__init__(
            "Mealy processes form a combinational cycle: "
            + " -> ".join(process_ids + process_ids[:1])
        )
        self.process_ids = process_ids


class ContractViolation(KernelError):
    def __init__(self, process_id: str, name: str, access: str):
        super().__init__(
            f"Process {process_id} {access} '{name}' outside its declared set."
        )
        self.process_id = process_id
        self.name = name
        self.access = access


class NonConvergence(KernelError):
    def __init__(self, cycle: int, bound: int, process_ids: List[str]):
        super().__init__(
            f"No quiescence after {bound} delta cycles in cycle {cycle}; still active: {', '.join(process_ids)}"
        )
        self.cycle = cycle
        self.bound = bound
        self.process_ids = process_ids


class ProcessKind(Enum):
    TRANSITION = "transition"
    MOORE = "moore"
    MEALY = "mealy"


@dataclass(frozen=True)
class Signal:
    """A register or port declaration. Ports ignore the reset value."""

    name: str
    width: int
    reset: int = 0


@dataclass(frozen=True)
class ProcessSpec:
    kind: ProcessKind
    reads: Tuple[str, ...]
    writes: Tuple[str, ...]
    behavior: Behavior
    name: str = ""


@dataclass(frozen=True)
class ModuleSpec:
    module_id: str
    registers: Tuple[Signal, ...] = ()
    input_ports: Tuple[Signal, ...] = ()
    output_ports: Tuple[Signal, ...] = ()
    processes: Tuple[ProcessSpec, ...] = ()

    def process_id(self, index: int) -> str:
        process = self.processes[index]
        return f"{self.module_id}.{process.name or f'{process.kind.value}{index}'}"


@dataclass(frozen=True)
class Binding:
    """Connects `source` (module.output_port) to `destination` (module.input_port)."""

    source: str
    destination: str


@dataclass(frozen=True)
class Netlist:
    modules: Tuple[ModuleSpec, ...]
    bindings: Tuple[Binding, ...] = ()
    clock_period: int = 1  # µs per cycle


class TraceRecord(NamedTuple):
    cycle: int
    port: str
    value: int


SignalTrace = List[TraceRecord]


@dataclass(frozen=True)
class CompiledProcess:
    """A process with its names resolved to value slots.

    Slots index the flat store: registers first, then output ports.
    Input ports resolve to the slot of the output port driving them.
    """

    process_id: str
    kind: ProcessKind
    read_names: Tuple[str, ...]
    read_slots: Tuple[int, ...]
    write_names: Tuple[str, ...]
    write_slots: Tuple[int, ...]
    write_masks: Tuple[int, ...]
    behavior: Behavior


@dataclass(frozen=True)
class StaticSchedule:
    transition_order: Tuple[str, ...]
    moore_order: Tuple[str, ...]
    mealy_order: Tuple[str, ...]
    capacity: int
    register_count: int
    processes: Mapping[str, CompiledProcess] = field(repr=False)
    reset_values: Tuple[int, ...] = field(repr=False)
    # every port (outputs then inputs, per module) and the slot holding its value
    port_slots: Tuple[Tuple[str, int], ...] = field(repr=False)
    register_names: Tuple[str, ...] = field(default=(), repr=False)


@dataclass
class SimState:
    cycle: int
    values: List[int]
    register_count: int

    @property
    def register_values(self) -> List[int]:
        return self.values[: self.register_count]

    @property
    def port_values(self) -> List[int]:
        return self.values[self.register_count :]

    def storage_count(self) -> int:
        return len(self.values)

    def copy(self) -> SimState:
        return SimState(self.cycle, list(self.values), self.register_count)


class _GuardedReads(Mapping):
    """Read view that refuses names outside the declared read set."""

    def __init__(self, process_id: str, values: Dict[str, int]):
        self._process_id = process_id
        self._values = values

    def __getitem__(self, name: str) -> int:
        if name not in self._values:
            raise ContractViolation(self._process_id, name, "read")
        return self._values[name]

    def __iter__(self):
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)


def mask(width: int) -> int:
    return (1 << width) - 1


class NetlistLayout:
    """Name resolution shared by the static kernel and the delta-cycle oracle."""

    def __init__(self, netlist: Netlist):
        self.netlist = netlist
        self.slots: Dict[str, int] = {}
        self.widths: Dict[str, int] = {}
        self.reset_values: List[int] = []
        self.register_count = 0
        self.driver_of_input: Dict[str, str] = {}
        self.port_slots: List[Tuple[str, int]] = []
        self.register_names: List[str] = []
        self._allocate()

    def _allocate(self):
        seen_modules = set()
        for module in self.netlist.modules:
            if module.module_id in seen_modules:
                raise NetlistError(f"Module id {module.module_id} is declared twice.")
            seen_modules.add(module.module_id)
            for signal in module.registers + module.input_ports + module.output_ports:
                if not 0 < signal.width <= MAX_WIDTH:
                    raise NetlistError(
                        f"{module.module_id}.{signal.name} has width {signal.width}, widths are 1 to {MAX_WIDTH} bits."
                    )
            names = [s.name for s in module.registers + module.input_ports + module.output_ports]
            if len(names) != len(set(names)):
                raise NetlistError(f"Module {module.module_id} declares a name twice.")
        for module in self.netlist.modules:
            for register in module.registers:
                self._add_slot(f"{module.module_id}.{register.name}", register.width)
                self.register_names.append(f"{module.module_id}.{register.name}")
                self.reset_values.append(register.reset & mask(register.width))
        self.register_count = len(self.reset_values)
        for module in self.netlist.modules:
            for port in module.output_ports:
                self._add_slot(f"{module.module_id}.{port.name}", port.width)
                self.reset_values.append(0)
        self._bind()
        for module in self.netlist.modules:
            for port in module.output_ports:
                name = f"{module.module_id}.{port.name}"
                self.port_slots.append((name, self.slots[name]))
            for port in module.input_ports:
                name = f"{module.module_id}.{port.name}"
                self.port_slots.append((name, self.slots[name]))

    def _add_slot(self, name: str, width: int):
        self.slots[name] = len(self.reset_values)
        self.widths[name] = width

    def _bind(self):
        inputs = {
            f"{m.module_id}.{p.name}": p.width for m in self.netlist.modules for p in m.input_ports
        }
        outputs = self._output_names()
        for binding in self.netlist.bindings:
            if binding.source not in outputs:
                raise NetlistError(f"Binding source {binding.source} is not an output port.")
            if binding.destination not in inputs:
                raise UnboundPort(binding.destination, "is not a declared input port")
            if binding.destination in self.driver_of_input:
                raise UnboundPort(binding.destination, "is bound more than once")
            widths = (self.widths[binding.source], inputs[binding.destination])
            if widths[0] != widths[1]:
                raise WidthMismatch(binding.source, binding.destination, widths)
            self.driver_of_input[binding.destination] = binding.source
        for name, width in inputs.items():
            if name not in self.driver_of_input:
                raise UnboundPort(name)
            self.slots[name] = self.slots[self.driver_of_input[name]]
            self.widths[name] = width

    def _output_names(self) -> set:
        return {
            f"{m.module_id}.{p.name}" for m in self.netlist.modules for p in m.output_ports
        }

    def compile(self) -> Dict[str, CompiledProcess]:
        compiled: Dict[str, CompiledProcess] = {}
        drivers: Dict[str, str] = {}
        for module in self.netlist.modules:
            registers = {r.name for r in module.registers}
            inputs = {p.name for p in module.input_ports}
            outputs = {p.name for p in module.output_ports}
            for index, process in enumerate(module.processes):
                process_id = module.process_id(index)
                if process_id in compiled:
                    raise NetlistError(f"Process id {process_id} is declared twice.")
                readable = registers if process.kind is ProcessKind.MOORE else registers | inputs
                writable = registers if process.kind is ProcessKind.TRANSITION else outputs
                for name in process.reads:
                    if name not in readable:
                        raise NetlistError(
                            f"{process.kind.value.capitalize()} process {process_id} may not read '{name}'."
                        )
                for name in process.writes:
                    if name not in writable:
                        raise NetlistError(
                            f"{process.kind.value.capitalize()} process {process_id} may not write '{name}'."
                        )
                    qualified = f"{module.module_id}.{name}"
                    if qualified in drivers:
                        raise MultipleDrivers(qualified, (drivers[qualified], process_id))
                    drivers[qualified] = process_id
                compiled[process_id] = CompiledProcess(
                    process_id=process_id,
                    kind=process.kind,
                    read_names=tuple(process.reads),
                    read_slots=tuple(self.slots[f"{module.module_id}.{n}"] for n in process.reads),
                    write_names=tuple(process.writes),
                    write_slots=tuple(self.slots[f"{module.module_id}.{n}"] for n in process.writes),
                    write_masks=tuple(
                        mask(self.widths[f"{module.module_id}.{n}"]) for n in process.writes
                    ),
                    behavior=process.behavior,
                )
        return compiled


def mealy_dependency_graph(processes: Mapping[str, CompiledProcess]) -> nx.DiGraph:
    """Edge A -> B when Mealy process A writes a slot that Mealy process B reads."""
    graph = nx.DiGraph()
    mealy = [p for p in processes.values() if p.kind is ProcessKind.MEALY]
    writers: Dict[int, str] = {}
    for process in mealy:
        graph.add_node(process.process_id)
        for slot in process.write_slots:
            writers[slot] = process.process_id
    for process in mealy:
        for slot in process.read_slots:
            if slot in writers:
                graph.add_edge(writers[slot], process.process_id)
    return graph


def elaborate(netlist: Netlist) -> StaticSchedule:
    """
    Check the netlist structure and compute the fixed process evaluation order.
    Transition and Moore processes keep declaration order; Mealy processes are
    topologically sorted, ties broken by declaration order.
    """
    layout = NetlistLayout(netlist)
    processes = layout.compile()
    declaration = {process_id: i for i, process_id in enumerate(processes)}
    graph = mealy_dependency_graph(processes)
    try:
        mealy_order = tuple(nx.lexicographical_topological_sort(graph, key=declaration.get))
    except nx.NetworkXUnfeasible:
        cycle = nx.find_cycle(graph)
        raise CombinationalCycle([edge[0] for edge in cycle])
    schedule = StaticSchedule(
        transition_order=tuple(
            p for p, c in processes.items() if c.kind is ProcessKind.TRANSITION
        ),
        moore_order=tuple(p for p, c in processes.items() if c.kind is ProcessKind.MOORE),
        mealy_order=mealy_order,
        capacity=len(layout.reset_values),
        register_count=layout.register_count,
        processes=processes,
        reset_values=tuple(layout.reset_values),
        port_slots=tuple(layout.port_slots),
        register_names=tuple(layout.register_names),
    )
    logger.debug(
        "Elaborated %d processes (%d Mealy) over %d value slots.",
        len(processes),
        len(mealy_order),
        schedule.capacity,
    )
    return schedule


def evaluate_process(
    process: CompiledProcess, values: List[int], checked: bool
) -> List[Tuple[int, int]]:
    """Run one process against `values`, returning (slot, new value) pairs."""
    reads = {name: values[slot] for name, slot in zip(process.read_names, process.read_slots)}
    result = process.behavior(_GuardedReads(process.process_id, reads) if checked else reads)
    if checked:
        for name in result:
            if name not in process.write_names:
                raise ContractViolation(process.process_id, name, "wrote")
    writes = []
    for name, slot, width_mask in zip(process.write_names, process.write_slots, process.write_masks):
        if name in result:
            writes.append((slot, int(result[name]) & width_mask))
    return writes


def _falling_edge(state: SimState, schedule: StaticSchedule, checked: bool):
    values = state.values
    for process_id in schedule.moore_order + schedule.mealy_order:
        for slot, value in evaluate_process(schedule.processes[process_id], values, checked):
            values[slot] = value


def reset(netlist: Netlist, schedule: StaticSchedule, checked: bool = False) -> SimState:
    """
    Registers at their reset values, ports at zero, then one falling-edge pass
    so outputs reflect the reset registers before the first rising edge.
    """
    state = SimState(cycle=0, values=list(schedule.reset_values), register_count=schedule.register_count)
    _falling_edge(state, schedule, checked)
    return state


def step(
    state: SimState, schedule: StaticSchedule, netlist: Netlist, checked: bool = False
) -> SimState:
    """
    One clock cycle, updating `state` in place (its value store is never resized).
    All Transition processes see the pre-step values; their register writes are
    committed together before the Moore and Mealy processes run.
    """
    values = state.values
    pending: List[Tuple[int, int]] = []
    for process_id in schedule.transition_order:
        pending.extend(evaluate_process(schedule.processes[process_id], values, checked))
    for slot, value in pending:
        values[slot] = value
    _falling_edge(state, schedule, checked)
    state.cycle += 1
    return state


def observe(state: SimState, schedule: StaticSchedule) -> Dict[str, int]:
    return {port: state.values[slot] for port, slot in schedule.port_slots}


def observe_registers(state: SimState, schedule: StaticSchedule) -> Dict[str, int]:
    return dict(zip(schedule.register_names, state.values))


def record(state: SimState, schedule: StaticSchedule, trace: SignalTrace):
    trace.extend(
        TraceRecord(state.cycle, port, state.values[slot]) for port, slot in schedule.port_slots
    )


def run(netlist: Netlist, n_cycles: int, checked: bool = False) -> SignalTrace:
    if n_cycles < 0:
        raise ValueError("n_cycles should be 0 or more.")
    schedule = elaborate(netlist)
    state = reset(netlist, schedule, checked)
    trace: SignalTrace = []
    for _ in range(n_cycles):
        step(state, schedule, netlist, checked)
        record(state, schedule, trace)
    return trace


def port_values(trace: Iterable[TraceRecord], port: str) -> List[int]:
    """The values a port took, cycle by cycle."""
    return [r.value for r in trace if r.port == port]


def dump_signal_trace(trace: Iterable[TraceRecord], fp):
    for r in trace:
        fp.write(json.dumps({"cycle": r.cycle, "port": r.port, "value": r.value}) + "\n")


def load_signal_trace(fp) -> SignalTrace:
    trace: SignalTrace = []
    for line in fp:
        if line.strip():
            d = json.loads(line)
            trace.append(TraceRecord(int(d["cycle"]), str(d["port"]), int(d["value"])))
    return trace


def describe_schedule(schedule: StaticSchedule, clock_period: Optional[int] = None) -> dict:
    description = dict(
        transition_order=list(schedule.transition_order),
        moore_order=list(schedule.moore_order),
        mealy_order=list(schedule.mealy_order),
        capacity=schedule.capacity,
    )
    if clock_period is not None:
        description["clock_period_us"] = clock_period
    return description
