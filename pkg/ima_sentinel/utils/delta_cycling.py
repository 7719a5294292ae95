"""
Dynamic, event-driven reference scheduler.

Each clock cycle goes through evaluation / update rounds (delta cycles) until
no process is triggered anymore, then time elapses. Process order is discovered
at run time from sensitivity lists. This exists to cross-check the static
kernel, which must produce the same trace for every netlist it accepts.
"""

from __future__ import annotations

from typing import Dict, List, Set, Tuple

from ima_sentinel import DEFAULT_DELTA_CYCLE_BOUND
from .simulating import (
    CompiledProcess,
    Netlist,
    NonConvergence,
    ProcessKind,
    SignalTrace,
    SimState,
    TraceRecord,
    evaluate_process,
    NetlistLayout,
)


class DeltaCycleSimulator:
    def __init__(
        self,
        netlist: Netlist,
        delta_bound: int = DEFAULT_DELTA_CYCLE_BOUND,
        checked: bool = False,
    ):
        layout = NetlistLayout(netlist)
        self.processes: Dict[str, CompiledProcess] = layout.compile()
        self.port_slots = layout.port_slots
        self.delta_bound = delta_bound
        self.checked = checked
        self.sensitivity: Dict[int, List[str]] = {}
        for process in self.processes.values():
            if process.kind is ProcessKind.TRANSITION:
                continue  # clock-triggered only
            for slot in process.read_slots:
                self.sensitivity.setdefault(slot, []).append(process.process_id)
        self.state = SimState(
            cycle=0, values=list(layout.reset_values), register_count=layout.register_count
        )
        # initialization: every combinational process is put in the runnable set
        self._settle(self._clock_edge_processes(ProcessKind.MOORE, ProcessKind.MEALY))

    def _clock_edge_processes(self, *kinds: ProcessKind) -> Set[str]:
        return {p for p, c in self.processes.items() if c.kind in kinds}

    def _settle(self, triggered: Set[str]):
        deltas = 0
        values = self.state.values
        while triggered:
            if deltas >= self.delta_bound:
                raise NonConvergence(self.state.cycle, self.delta_bound, sorted(triggered))
            deltas += 1
            # evaluation: every triggered process sees the same values
            updates: List[Tuple[int, int]] = []
            for process_id in sorted(triggered):
                updates.extend(evaluate_process(self.processes[process_id], values, self.checked))
            # update: changed slots wake up their readers
            triggered = set()
            for slot, value in updates:
                if values[slot] != value:
                    values[slot] = value
                    triggered.update(self.sensitivity.get(slot, ()))

    def tick(self):
        values = self.state.values
        updates: List[Tuple[int, int]] = []
        for process_id in self._clock_edge_processes(ProcessKind.TRANSITION):
            updates.extend(evaluate_process(self.processes[process_id], values, self.checked))
        for slot, value in updates:
            values[slot] = value
        # falling edge wakes all generation processes
        self._settle(self._clock_edge_processes(ProcessKind.MOORE, ProcessKind.MEALY))
        self.state.cycle += 1

    def record(self, trace: SignalTrace):
        values = self.state.values
        trace.extend(TraceRecord(self.state.cycle, port, values[slot]) for port, slot in self.port_slots)


def oracle_run(
    netlist: Netlist,
    n_cycles: int,
    delta_bound: int = DEFAULT_DELTA_CYCLE_BOUND,
    checked: bool = False,
) -> SignalTrace:
    if n_cycles < 0:
        raise ValueError("n_cycles should be 0 or more.")
    simulator = DeltaCycleSimulator(netlist, delta_bound=delta_bound, checked=checked)
    trace: SignalTrace = []
    for _ in range(n_cycles):
        simulator.tick()
        simulator.record(trace)
    return trace
