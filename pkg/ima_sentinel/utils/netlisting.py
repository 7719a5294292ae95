"""
Netlist generators for differential testing of the static kernel against the
delta-cycle oracle.
"""

from __future__ import annotations

from typing import Dict, List, Mapping, Optional, Tuple
from dataclasses import dataclass, field
from functools import partial
import logging
import random

from .simulating import (
    Binding,
    CombinationalCycle,
    ModuleSpec,
    Netlist,
    ProcessKind,
    ProcessSpec,
    NonConvergence,
    Signal,
    run,
)
from .delta_cycling import oracle_run

logger = logging.getLogger(__name__)

WORD = 0xFFFFFFFFFFFFFFFF
WIDTHS = (1, 4, 8, 16, 32, 64)

_OPS = {
    "add": lambda acc, v: (acc + v) & WORD,
    "xor": lambda acc, v: acc ^ v,
    "mul": lambda acc, v: (acc * (2 * v + 1)) & WORD,
    "rot": lambda acc, v: (((acc << 3) | (acc >> 61)) & WORD) ^ v,
}


def mix(
    reads: Mapping[str, int], writes: Tuple[str, ...], salts: Tuple[int, ...], ops: Tuple[str, ...]
) -> Dict[str, int]:
    """A pure, order-stable function of the read values, one result per write."""
    out = {}
    for name, salt, op in zip(writes, salts, ops):
        acc = salt
        for key in sorted(reads):
            acc = _OPS[op](acc, reads[key])
        out[name] = acc
    return out


def increment(reads: Mapping[str, int], source: str, target: str, by: int) -> Dict[str, int]:
    return {target: reads[source] + by}


def _mix_process(
    rng: random.Random, kind: ProcessKind, reads: List[str], writes: List[str], name: str
) -> ProcessSpec:
    salts = tuple(rng.randrange(1 << 16) for _ in writes)
    ops = tuple(rng.choice(sorted(_OPS)) for _ in writes)
    return ProcessSpec(
        kind=kind,
        reads=tuple(reads),
        writes=tuple(writes),
        behavior=partial(mix, writes=tuple(writes), salts=salts, ops=ops),
        name=name,
    )


@dataclass
class _Draft:
    module_id: str
    registers: List[Signal]
    outputs: List[Signal]
    # generation processes: (kind, names of the outputs they drive)
    generators: List[Tuple[ProcessKind, List[str]]]
    inputs: List[Signal] = field(default_factory=list)


def random_netlist(seed: int, max_modules: int = 8, max_processes: int = 4) -> Netlist:
    """
    An acyclic netlist: a Mealy process only reads inputs driven by Moore
    processes or by Mealy processes of earlier modules.
    """
    rng = random.Random(seed)
    drafts: List[_Draft] = []
    for m in range(rng.randint(1, max_modules)):
        registers = [
            Signal(f"r{i}", w, rng.randrange(1 << min(w, 16)))
            for i, w in enumerate(rng.choice(WIDTHS) for _ in range(rng.randint(1, 2)))
        ]
        outputs = [Signal(f"o{i}", rng.choice(WIDTHS)) for i in range(rng.randint(1, 3))]
        n_generators = rng.randint(1, min(len(outputs), max_processes - 1))
        generators: List[Tuple[ProcessKind, List[str]]] = [
            (rng.choice((ProcessKind.MOORE, ProcessKind.MEALY)), []) for _ in range(n_generators)
        ]
        for i, port in enumerate(outputs):
            target = generators[i] if i < n_generators else rng.choice(generators)
            target[1].append(port.name)
        drafts.append(_Draft(f"m{m}", registers, outputs, generators))

    bindings: List[Binding] = []
    for index, draft in enumerate(drafts):
        candidates = []
        for other_index, other in enumerate(drafts):
            for kind, ports in other.generators:
                if kind is ProcessKind.MOORE or other_index < index:
                    candidates.extend(
                        (other.module_id, p) for p in other.outputs if p.name in ports
                    )
        if not candidates:
            continue
        for i in range(rng.randint(0, 2)):
            module_id, port = rng.choice(candidates)
            draft.inputs.append(Signal(f"i{i}", port.width))
            bindings.append(Binding(f"{module_id}.{port.name}", f"{draft.module_id}.i{i}"))

    modules = []
    for draft in drafts:
        register_names = [r.name for r in draft.registers]
        input_names = [p.name for p in draft.inputs]
        processes = [
            _mix_process(
                rng,
                ProcessKind.TRANSITION,
                register_names + rng.sample(input_names, rng.randint(0, len(input_names))),
                register_names,
                "transition",
            )
        ]
        for g, (kind, ports) in enumerate(draft.generators):
            reads = rng.sample(register_names, rng.randint(1, len(register_names)))
            if kind is ProcessKind.MEALY:
                reads += rng.sample(input_names, rng.randint(0, len(input_names)))
            processes.append(_mix_process(rng, kind, reads, ports, f"{kind.value}{g}"))
        modules.append(
            ModuleSpec(
                module_id=draft.module_id,
                registers=tuple(draft.registers),
                input_ports=tuple(draft.inputs),
                output_ports=tuple(draft.outputs),
                processes=tuple(processes),
            )
        )
    return Netlist(modules=tuple(modules), bindings=tuple(bindings))


def cyclic_netlist(seed: int) -> Netlist:
    """
    A ring of one to four Mealy incrementers. The increments never add up to a
    multiple of 2**width, so the ring has no fixed point.
    """
    rng = random.Random(seed)
    length = rng.randint(1, 4)
    width = rng.choice((8, 16, 32))
    modules = []
    bindings = []
    for m in range(length):
        modules.append(
            ModuleSpec(
                module_id=f"ring{m}",
                registers=(Signal("count", 8),),
                input_ports=(Signal("a", width),),
                output_ports=(Signal("b", width),),
                processes=(
                    _mix_process(rng, ProcessKind.TRANSITION, ["count"], ["count"], "transition"),
                    ProcessSpec(
                        kind=ProcessKind.MEALY,
                        reads=("a",),
                        writes=("b",),
                        behavior=partial(increment, source="a", target="b", by=rng.randint(1, 3)),
                        name="mealy",
                    ),
                ),
            )
        )
        bindings.append(Binding(f"ring{m}.b", f"ring{(m + 1) % length}.a"))
    return Netlist(modules=tuple(modules), bindings=tuple(bindings))


@dataclass
class SelftestResult:
    cases: int = 0
    cycles: int = 0
    mismatches: List[int] = field(default_factory=list)
    cyclic_cases: int = 0
    cycles_rejected: int = 0
    oracle_diverged: int = 0

    @property
    def passed(self) -> bool:
        return (
            not self.mismatches
            and self.cycles_rejected == self.cyclic_cases
            and self.oracle_diverged == self.cyclic_cases
        )


def run_differential_suite(
    cases: int = 100, seed: int = 0, cycles: int = 1000, cyclic_cases: Optional[int] = 20
) -> SelftestResult:
    """
    Static kernel vs. delta-cycle oracle on `cases` random acyclic netlists,
    plus rejection checks on constructed cyclic ones.
    """
    result = SelftestResult(cases=cases, cycles=cycles, cyclic_cases=cyclic_cases or 0)
    for case in range(cases):
        netlist = random_netlist(seed + case)
        if run(netlist, cycles) != oracle_run(netlist, cycles):
            logger.warning("Traces differ for random netlist with seed %d.", seed + case)
            result.mismatches.append(seed + case)
    for case in range(result.cyclic_cases):
        netlist = cyclic_netlist(seed + case)
        try:
            run(netlist, 1)
        except CombinationalCycle:
            result.cycles_rejected += 1
        try:
            oracle_run(netlist, 1)
        except NonConvergence:
            result.oracle_diverged += 1
    return result
