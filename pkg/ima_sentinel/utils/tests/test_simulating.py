import io

import pytest

from ima_sentinel.utils.netlisting import random_netlist
from ima_sentinel.utils.simulating import (
    Binding,
    CombinationalCycle,
    ContractViolation,
    ModuleSpec,
    MultipleDrivers,
    Netlist,
    NetlistError,
    ProcessKind,
    ProcessSpec,
    Signal,
    UnboundPort,
    WidthMismatch,
    dump_signal_trace,
    elaborate,
    load_signal_trace,
    observe,
    port_values,
    reset,
    run,
    step,
)


def mealy_ring() -> Netlist:
    """M1 reads b and writes a, M2 reads a and writes b."""
    return Netlist(
        modules=(
            ModuleSpec(
                module_id="M1",
                input_ports=(Signal("b", 8),),
                output_ports=(Signal("a", 8),),
                processes=(ProcessSpec(ProcessKind.MEALY, ("b",), ("a",), lambda v: {"a": v["b"]}, "mealy"),),
            ),
            ModuleSpec(
                module_id="M2",
                input_ports=(Signal("a", 8),),
                output_ports=(Signal("b", 8),),
                processes=(ProcessSpec(ProcessKind.MEALY, ("a",), ("b",), lambda v: {"b": v["a"]}, "mealy"),),
            ),
        ),
        bindings=(Binding("M1.a", "M2.a"), Binding("M2.b", "M1.b")),
    )


def counter(width: int, reset_value: int, **moore) -> Netlist:
    return Netlist(
        modules=(
            ModuleSpec(
                module_id="cnt",
                registers=(Signal("r", width, reset=reset_value),),
                output_ports=(Signal("out", width),),
                processes=(
                    ProcessSpec(ProcessKind.TRANSITION, ("r",), ("r",), lambda v: {"r": v["r"] + 1}),
                    ProcessSpec(
                        ProcessKind.MOORE,
                        moore.get("reads", ("r",)),
                        moore.get("writes", ("out",)),
                        moore.get("behavior", lambda v: {"out": v["r"]}),
                    ),
                ),
            ),
        )
    )


def test_toggle_steps(toggle_netlist):
    schedule = elaborate(toggle_netlist)
    state = reset(toggle_netlist, schedule)
    assert observe(state, schedule)["toggle.out"] == 0
    step(state, schedule, toggle_netlist)
    assert observe(state, schedule)["toggle.out"] == 1
    step(state, schedule, toggle_netlist)
    assert observe(state, schedule)["toggle.out"] == 0
    assert state.cycle == 2


def test_toggle_run(toggle_netlist):
    assert port_values(run(toggle_netlist, 4), "toggle.out") == [1, 0, 1, 0]


def test_run_zero_cycles(toggle_netlist):
    assert run(toggle_netlist, 0) == []


def test_mealy_chain_settles_within_a_cycle(mealy_chain):
    schedule = elaborate(mealy_chain)
    assert schedule.mealy_order == ("m1.mealy", "m2.mealy")
    state = reset(mealy_chain, schedule)
    assert observe(state, schedule)["m2.out3"] == 7
    step(state, schedule, mealy_chain)
    assert observe(state, schedule)["m2.out3"] == 7


def test_mealy_cycle_is_rejected():
    with pytest.raises(CombinationalCycle) as e:
        elaborate(mealy_ring())
    assert sorted(e.value.process_ids) == ["M1.mealy", "M2.mealy"]


def test_register_pipeline_has_no_mealy_order(toggle_netlist):
    schedule = elaborate(toggle_netlist)
    assert schedule.mealy_order == ()
    assert schedule.transition_order == ("toggle.flip",)
    assert schedule.moore_order == ("toggle.show",)


def test_values_are_masked_to_their_width():
    netlist = counter(4, 14)
    assert port_values(run(netlist, 3), "cnt.out") == [15, 0, 1]


def test_capacity_is_frozen(mealy_chain):
    schedule = elaborate(mealy_chain)
    state = reset(mealy_chain, schedule)
    capacity = state.storage_count()
    assert capacity == schedule.capacity
    for _ in range(100000):
        step(state, schedule, mealy_chain)
    assert state.storage_count() == capacity
    assert state.cycle == 100000


def test_undeclared_write_is_caught_in_checked_mode():
    netlist = counter(8, 0, behavior=lambda v: {"out": v["r"], "ghost": 1})
    with pytest.raises(ContractViolation) as e:
        run(netlist, 1, checked=True)
    assert e.value.name == "ghost"
    assert port_values(run(netlist, 2), "cnt.out") == [1, 2]


def test_undeclared_read_is_caught_in_checked_mode():
    netlist = counter(8, 0, reads=(), behavior=lambda v: {"out": v["r"]})
    with pytest.raises(ContractViolation) as e:
        run(netlist, 1, checked=True)
    assert e.value.access == "read"


@pytest.mark.parametrize(
    "netlist, error",
    [
        (
            Netlist(modules=(ModuleSpec("m", input_ports=(Signal("i", 8),)),)),
            UnboundPort,
        ),
        (
            Netlist(
                modules=(
                    ModuleSpec("a", output_ports=(Signal("o", 8),)),
                    ModuleSpec("b", input_ports=(Signal("i", 16),)),
                ),
                bindings=(Binding("a.o", "b.i"),),
            ),
            WidthMismatch,
        ),
        (counter(8, 0, reads=("r",), writes=("r",), behavior=lambda v: v), NetlistError),
        (counter(8, 0, reads=("out",)), NetlistError),
        (counter(8, 0, writes=("out", "missing")), NetlistError),
    ],
)
def test_structural_errors(netlist, error):
    with pytest.raises(error):
        elaborate(netlist)


def test_output_port_has_a_single_driver():
    netlist = Netlist(
        modules=(
            ModuleSpec(
                module_id="m",
                registers=(Signal("r", 1),),
                output_ports=(Signal("o", 1),),
                processes=(
                    ProcessSpec(ProcessKind.MOORE, ("r",), ("o",), lambda v: {"o": 0}),
                    ProcessSpec(ProcessKind.MOORE, ("r",), ("o",), lambda v: {"o": 1}),
                ),
            ),
        )
    )
    with pytest.raises(MultipleDrivers, match="driven by both") as e:
        elaborate(netlist)
    assert e.value.signal == "m.o"


def test_binding_source_must_be_an_output(toggle_netlist):
    netlist = Netlist(
        modules=toggle_netlist.modules + (ModuleSpec("sink", input_ports=(Signal("i", 1),)),),
        bindings=(Binding("toggle.r", "sink.i"),),
    )
    with pytest.raises(NetlistError, match="not an output port"):
        elaborate(netlist)


def test_run_is_deterministic():
    netlist = random_netlist(7)
    assert run(netlist, 200) == run(netlist, 200)


def test_signal_trace_jsonl(toggle_netlist):
    trace = run(toggle_netlist, 3)
    buffer = io.StringIO()
    dump_signal_trace(trace, buffer)
    assert buffer.getvalue().splitlines()[0] == '{"cycle": 1, "port": "toggle.out", "value": 1}'
    buffer.seek(0)
    assert load_signal_trace(buffer) == trace
