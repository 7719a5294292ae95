from pathlib import Path

import pytest

from ima_sentinel.utils.configuring import SystemConfig, load_config
from ima_sentinel.utils.framing import VirtualLinkConfig
from ima_sentinel.utils.generating import AppSample
from ima_sentinel.utils.monitoring import ValueLaw, VariationLaw
from ima_sentinel.utils.partitioning import MajorFrame, PartitionWindow
from ima_sentinel.utils.simulating import (
    Binding,
    ModuleSpec,
    Netlist,
    ProcessKind,
    ProcessSpec,
    Signal,
)

BASELINE_PATH = Path(__file__).resolve().parent.parent / "configs" / "baseline.json"


@pytest.fixture(scope="session")
def baseline_text() -> str:
    return BASELINE_PATH.read_text()


@pytest.fixture(scope="session")
def baseline_config(baseline_text) -> SystemConfig:
    return load_config(baseline_text)


@pytest.fixture(scope="session")
def tiled_major_frame() -> MajorFrame:
    """P1, P2 and P3 each get a third of a 300 ms MAF."""
    return MajorFrame(
        300000,
        (
            PartitionWindow(1, 0, 100000),
            PartitionWindow(2, 100000, 100000),
            PartitionWindow(3, 200000, 100000),
        ),
    )


@pytest.fixture(scope="session")
def baseline_vls():
    return tuple(
        VirtualLinkConfig(
            vl_id=i, bag=4, max_frame_size=1518, max_jitter=500, source_partition=i, destinations=(f"CPM{i}",)
        )
        for i in (1, 2, 3)
    )


@pytest.fixture
def speed_law() -> VariationLaw:
    return VariationLaw(app_id=2, values=(ValueLaw(max_rate=5.0, min=0.0, max=350.0),))


@pytest.fixture
def angle_law() -> VariationLaw:
    return VariationLaw(app_id=3, values=(ValueLaw(max_rate=5.0, angular=True),))


@pytest.fixture
def speed_sample() -> AppSample:
    return AppSample(app_id=2, sample_seq=7, timestamp=100000, values=(100.15,))


@pytest.fixture
def toggle_netlist() -> Netlist:
    return create_toggle_netlist()


@pytest.fixture
def mealy_chain() -> Netlist:
    return create_mealy_chain(5)


def create_toggle_netlist() -> Netlist:
    """A 1-bit register flipping every cycle, shown on `out`."""
    return Netlist(
        modules=(
            ModuleSpec(
                module_id="toggle",
                registers=(Signal("r", 1),),
                output_ports=(Signal("out", 1),),
                processes=(
                    ProcessSpec(ProcessKind.TRANSITION, ("r",), ("r",), lambda v: {"r": 1 - v["r"]}, "flip"),
                    ProcessSpec(ProcessKind.MOORE, ("r",), ("out",), lambda v: {"out": v["r"]}, "show"),
                ),
            ),
        )
    )


def create_mealy_chain(start: int) -> Netlist:
    """A constant source, then two Mealy incrementers: m2.out3 = start + 2 within one cycle."""
    # m2 is declared before m1, only the dependency graph puts m1 first
    return Netlist(
        modules=(
            ModuleSpec(
                module_id="src",
                registers=(Signal("c", 16, reset=start),),
                output_ports=(Signal("in1", 16),),
                processes=(ProcessSpec(ProcessKind.MOORE, ("c",), ("in1",), lambda v: {"in1": v["c"]}),),
            ),
            ModuleSpec(
                module_id="m2",
                input_ports=(Signal("a", 16),),
                output_ports=(Signal("out3", 16),),
                processes=(
                    ProcessSpec(ProcessKind.MEALY, ("a",), ("out3",), lambda v: {"out3": v["a"] + 1}, "mealy"),
                ),
            ),
            ModuleSpec(
                module_id="m1",
                input_ports=(Signal("a", 16),),
                output_ports=(Signal("out2", 16),),
                processes=(
                    ProcessSpec(ProcessKind.MEALY, ("a",), ("out2",), lambda v: {"out2": v["a"] + 1}, "mealy"),
                ),
            ),
        ),
        bindings=(Binding("m1.out2", "m2.a"), Binding("src.in1", "m1.a")),
    )
