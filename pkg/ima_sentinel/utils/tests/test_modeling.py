import pytest

from ima_sentinel.utils.framing import VirtualLinkConfig
from ima_sentinel.utils.modeling import (
    ExpectedEmission,
    InfeasibleConfig,
    build_expected_model,
    clock_period,
    describe_model,
    expected_traffic_netlist,
)
from ima_sentinel.utils.partitioning import MajorFrame, PartitionWindow
from ima_sentinel.utils.simulating import elaborate


def single_vl(bag: int = 4, jitter: int = 500):
    return [VirtualLinkConfig(1, bag, 1518, jitter, 1, ("CPM1",))]


def test_baseline_model(tiled_major_frame, baseline_vls):
    model = build_expected_model(tiled_major_frame, baseline_vls, 100)
    assert model.clock_period == 4000
    assert model.emissions[1] == (ExpectedEmission(1, 0, 100, 600),)
    assert model.emissions[2] == (ExpectedEmission(2, 100000, 100100, 100600),)
    assert model.emissions[3] == (ExpectedEmission(3, 200000, 200100, 200600),)
    assert model.order == (1, 2, 3)
    assert [model.frames_per_maf(vl_id) for vl_id in (1, 2, 3, 99)] == [1, 1, 1, 0]


def test_model_is_deterministic(tiled_major_frame, baseline_vls):
    assert build_expected_model(tiled_major_frame, baseline_vls) == build_expected_model(tiled_major_frame, baseline_vls)


def test_zero_partitions():
    model = build_expected_model(MajorFrame(300000, ()), ())
    assert model.emissions == {}
    assert model.order == ()


def test_vl_of_unscheduled_partition_expects_nothing(tiled_major_frame):
    vls = [VirtualLinkConfig(9, 4, 1518, 500, 9, ("CPM1",))]
    model = build_expected_model(tiled_major_frame, vls)
    assert model.frames_per_maf(9) == 0
    assert 9 in model.vl_ids


def test_bag_spreads_a_partitions_samples():
    mf = MajorFrame(10000, (PartitionWindow(1, 0, 1000), PartitionWindow(1, 2000, 1000)))
    model = build_expected_model(mf, single_vl(), prop_delay=0)
    assert [e.emit_offset for e in model.emissions[1]] == [0, 4000]
    assert model.order == (1, 1)


def test_backlog_growing_without_bound():
    mf = MajorFrame(4000, (PartitionWindow(1, 0, 1000), PartitionWindow(1, 1000, 1000)))
    with pytest.raises(InfeasibleConfig, match="3 samples still queued at the end of MAF 2, up from 2"):
        build_expected_model(mf, single_vl())


def test_pattern_that_does_not_repeat():
    mf = MajorFrame(6000, (PartitionWindow(1, 0, 1000),))
    with pytest.raises(InfeasibleConfig) as e:
        build_expected_model(mf, single_vl(bag=8))
    assert e.value.vl_id == 1
    assert "then at [4000] µs" in str(e.value)


def test_arrival_window_past_the_maf():
    mf = MajorFrame(300000, (PartitionWindow(1, 299000, 1000),))
    build_expected_model(mf, single_vl(jitter=500), prop_delay=100)
    with pytest.raises(InfeasibleConfig, match="reaches past"):
        build_expected_model(mf, single_vl(jitter=1000), prop_delay=100)


def test_clock_period(tiled_major_frame, baseline_vls):
    assert clock_period(tiled_major_frame, baseline_vls) == 4000
    assert clock_period(tiled_major_frame, [VirtualLinkConfig(1, 128, 1518, 0, 1, ())]) == 4000
    assert clock_period(MajorFrame(300000, (PartitionWindow(1, 1500, 1000),)), []) == 500


def test_netlist_schedule(tiled_major_frame, baseline_vls):
    netlist, modeled = expected_traffic_netlist(tiled_major_frame, baseline_vls)
    schedule = elaborate(netlist)
    assert schedule.mealy_order == (
        "P1.produce",
        "P2.produce",
        "P3.produce",
        "VL1.regulate",
        "VL2.regulate",
        "VL3.regulate",
    )
    assert schedule.moore_order == ("scheduler.windows",)
    assert [vl.vl_id for vl in modeled] == [1, 2, 3]


def test_describe_model(tiled_major_frame, baseline_vls):
    description = describe_model(build_expected_model(tiled_major_frame, baseline_vls))
    assert description["order"] == [1, 2, 3]
    assert description["virtual_links"]["2"] == [{"emit_us": 100000, "earliest_us": 100100, "latest_us": 100600}]


def late_second_window():
    """P1 runs at the start of the MAF and again 2 ms before its end."""
    return MajorFrame(300000, (PartitionWindow(1, 0, 1000), PartitionWindow(1, 298000, 2000)))


def test_first_maf_differs_from_the_settled_ones():
    model = build_expected_model(late_second_window(), single_vl(), prop_delay=100)
    assert [e.emit_offset for e in model.first_emissions[1]] == [0, 298000]
    assert [e.emit_offset for e in model.emissions[1]] == [2000, 298000]
    assert [e.emit_offset for e in model.expected(1, 0)] == [0, 298000]
    assert model.expected(1, 1) == model.expected(1, 7) == model.emissions[1]
    assert model.order_in(0) == model.order_in(3) == (1, 1)


def test_backlog_carried_over_a_maf_end():
    """The sample of the last window leaves in the next MAF, every MAF."""
    mf = MajorFrame(20000, (PartitionWindow(1, 17000, 1000), PartitionWindow(1, 19000, 1000)))
    model = build_expected_model(mf, single_vl(), prop_delay=0)
    assert [e.emit_offset for e in model.first_emissions[1]] == [17000]
    assert [e.emit_offset for e in model.emissions[1]] == [1000, 17000]
    assert (model.frames_per_maf(1, 0), model.frames_per_maf(1)) == (1, 2)


def test_describe_the_first_maf_when_it_differs(tiled_major_frame, baseline_vls):
    assert "first_maf" not in describe_model(build_expected_model(tiled_major_frame, baseline_vls))
    description = describe_model(build_expected_model(late_second_window(), single_vl()))
    assert description["first_maf"]["virtual_links"]["1"][0] == {"emit_us": 0, "earliest_us": 100, "latest_us": 600}
    assert description["virtual_links"]["1"][0]["emit_us"] == 2000
