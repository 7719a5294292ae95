import logging

import pytest

from ima_sentinel.utils.framing import Frame, FrameEvent, VirtualLinkConfig, pack_frame
from ima_sentinel.utils.generating import AppGeneratorState, AppSample
from ima_sentinel.utils.modeling import build_expected_model
from ima_sentinel.utils.monitoring import (
    AnomalyKind,
    MafEnd,
    Monitor,
    MonitorState,
    NoLaw,
    VariationLaw,
    angular_difference,
    anomaly_report,
    check_data,
    check_sequence,
    check_temporal,
    ingest,
)
from ima_sentinel.utils.partitioning import MajorFrame, PartitionConfig, PartitionWindow
from ima_sentinel.utils.transmitting import simulate_transmitter, switch_forward


@pytest.fixture
def model(tiled_major_frame, baseline_vls):
    return build_expected_model(tiled_major_frame, baseline_vls, 100)


def event(vl_id, t_arrive, seq=1, app_id=None, value=100.0, timestamp=None) -> FrameEvent:
    app_id = app_id or vl_id
    values = (48.0, 2.0) if app_id == 1 else (value,)
    sample = AppSample(app_id, seq, t_arrive - 100 if timestamp is None else timestamp, values)
    return FrameEvent(t_arrive - 100, t_arrive, pack_frame(vl_id, vl_id, sample, seq, 1518))


def frame(vl_id=2, seq=1, value=100.0, timestamp=0, app_id=2) -> Frame:
    return Frame(vl_id, seq, vl_id, AppSample(app_id, 1, timestamp, (value,)), b"", arrival_time=timestamp)


def kinds(anomalies):
    return [a.kind for a in anomalies]


def one_maf(seqs=(1, 1, 1)):
    return [event(1, 100, seqs[0]), event(2, 100100, seqs[1]), event(3, 200100, seqs[2])]


def test_arrival_inside_the_window(model):
    state, anomalies = check_temporal(model, MonitorState(), event(2, 100300), 2)
    assert anomalies == []
    assert state.consumed[2] == {0}


def test_arrival_outside_the_window(model):
    _, anomalies = check_temporal(model, MonitorState(), event(2, 150000), 2)
    assert kinds(anomalies) == [AnomalyKind.UNEXPECTED_COMM]
    assert anomalies[0].expected == [100100, 100600]
    assert anomalies[0].observed == 150000


@pytest.mark.parametrize("t", [100100, 100600])
def test_window_bounds_are_inclusive(model, t):
    assert check_temporal(model, MonitorState(), event(2, t), 2)[1] == []


def test_vl_outside_the_model(model):
    _, anomalies = check_temporal(model, MonitorState(), event(9, 100300), 9)
    assert kinds(anomalies) == [AnomalyKind.UNEXPECTED_COMM]
    assert "not in the model" in anomalies[0].detail


def test_extra_frame_in_a_maf(model):
    state, _ = check_temporal(model, MonitorState(), event(2, 100300), 2)
    _, anomalies = check_temporal(model, state, event(2, 100400), 2)
    assert kinds(anomalies) == [AnomalyKind.UNEXPECTED_COMM]
    assert (anomalies[0].expected, anomalies[0].observed) == (1, 2)


def test_frames_out_of_order(model):
    state, _ = check_temporal(model, MonitorState(), event(2, 100300), 2)
    _, anomalies = check_temporal(model, state, event(1, 100400), 1)
    assert [a.detail for a in anomalies if a.detail.startswith("order")] == ["order: VL 1 arrived after VL 2"]


@pytest.mark.parametrize(
    "last, seq, detail",
    [
        (5, 6, None),
        (5, 8, "gap of 2 in the sequence numbers of VL 2"),
        (255, 1, None),
        (5, 5, "repeated sequence number 5 on VL 2"),
        (5, 0, None),
        (0, 1, None),
    ],
)
def test_sequence_numbers(last, seq, detail):
    state = MonitorState(last_seq={2: last})
    state, anomalies = check_sequence(state, frame(seq=seq))
    assert [a.detail for a in anomalies] == ([detail] if detail else [])
    assert all(a.kind == AnomalyKind.SEQUENCE_ERROR for a in anomalies)


def test_reset_marker_restarts_the_count():
    state, _ = check_sequence(MonitorState(last_seq={2: 17}), frame(seq=0))
    _, anomalies = check_sequence(state, frame(seq=1))
    assert anomalies == []


def test_repeat_does_not_advance():
    state, _ = check_sequence(MonitorState(last_seq={2: 5}), frame(seq=5))
    assert state.last_seq[2] == 5
    assert check_sequence(state, frame(seq=6))[1] == []


def test_speed_within_its_rate(speed_law):
    state, anomalies = check_data(speed_law, MonitorState(), frame(value=100.0, timestamp=0))
    assert anomalies == []
    state, anomalies = check_data(speed_law, state, frame(value=101.0, timestamp=300000))
    assert anomalies == []


def test_speed_beyond_its_rate(speed_law):
    state, _ = check_data(speed_law, MonitorState(), frame(value=100.0, timestamp=0))
    _, anomalies = check_data(speed_law, state, frame(value=102.0, timestamp=300000))
    assert kinds(anomalies) == [AnomalyKind.INCOHERENT_DATA]
    assert anomalies[0].observed == pytest.approx(2.0)
    assert anomalies[0].expected == pytest.approx(1.5 + 1e-9)


def test_heading_wraps_around(angle_law):
    state, _ = check_data(angle_law, MonitorState(), frame(vl_id=3, app_id=3, value=359.5, timestamp=0))
    _, anomalies = check_data(angle_law, state, frame(vl_id=3, app_id=3, value=0.5, timestamp=300000))
    assert anomalies == []


def test_first_sample_has_no_reference(speed_law):
    _, anomalies = check_data(speed_law, MonitorState(), frame(value=300.0, timestamp=0))
    assert anomalies == []


def test_value_out_of_bounds(speed_law):
    _, anomalies = check_data(speed_law, MonitorState(), frame(value=351.0))
    assert kinds(anomalies) == [AnomalyKind.INCOHERENT_DATA]
    assert anomalies[0].expected == [0.0, 350.0]


def test_incoherent_sample_is_not_a_reference(speed_law):
    state, _ = check_data(speed_law, MonitorState(), frame(value=100.0, timestamp=0))
    state, anomalies = check_data(speed_law, state, frame(value=110.0, timestamp=300000))
    assert len(anomalies) == 1
    state, anomalies = check_data(speed_law, state, frame(value=102.0, timestamp=600000))
    assert anomalies == []
    assert [p.coherent for p in state.windows[2]] == [True, False, True]


def test_window_needs_two_samples():
    with pytest.raises(ValueError):
        VariationLaw(2, (), window_n=1)


def test_window_is_bounded(speed_law):
    state = MonitorState()
    for i in range(20):
        state, _ = check_data(speed_law, state, frame(value=100.0, timestamp=i * 300000))
    assert len(state.windows[2]) == speed_law.window_n


def test_no_law():
    with pytest.raises(NoLaw) as e:
        check_data(None, MonitorState(), frame())
    assert e.value.app_id == 2


@pytest.mark.parametrize("a, b, expected", [(359.5, 0.5, 1.0), (0.5, 359.5, -1.0), (10.0, 190.0, -180.0), (90.0, 45.0, -45.0)])
def test_angular_difference(a, b, expected):
    assert angular_difference(a, b) == pytest.approx(expected)


def test_fault_free_mafs(model, speed_law, angle_law):
    monitor = Monitor(model, {2: speed_law, 3: angle_law})
    for e in one_maf() + [event(1, 300100, 2), event(2, 400100, 2, value=100.5, timestamp=400000), event(3, 500100, 2)]:
        monitor.feed(e)
    monitor.advance(600000)
    assert monitor.anomalies == []
    assert monitor.state.maf_index == 2


def test_missing_frame_is_reported_at_the_maf_end(model):
    monitor = Monitor(model, {})
    monitor.feed(event(1, 100))
    monitor.feed(event(3, 200100))
    found = monitor.advance(300000)
    assert [(a.kind, a.vl_id, a.detected_at) for a in found] == [(AnomalyKind.MISSING_DATA, 2, 300000)]
    assert found[0].expected == [100100, 100600]


def test_maf_not_flushed_before_its_end(model):
    monitor = Monitor(model, {})
    assert monitor.advance(299999) == []
    assert len(monitor.advance(300000)) == 3


def test_malformed_frame(model):
    raw = bytearray(event(1, 100).raw)
    raw[30] ^= 1
    state, anomalies = ingest(MonitorState(), model, {}, FrameEvent(0, 100, bytes(raw)))
    assert [(a.kind, a.vl_id) for a in anomalies] == [(AnomalyKind.UNEXPECTED_COMM, 1)]
    assert anomalies[0].detail == "malformed frame: bad CRC"
    assert state.arrivals == {}


def test_missing_law_is_logged_once(model, caplog):
    state = MonitorState()
    with caplog.at_level(logging.WARNING, logger="ima_sentinel.utils.monitoring"):
        state, anomalies = ingest(state, model, {}, event(2, 100100))
        state, _ = ingest(state, model, {}, MafEnd(300000))
        state, _ = ingest(state, model, {}, event(2, 400100, 2))
    assert anomalies == []
    assert len([r for r in caplog.records if "No variation law" in r.getMessage()]) == 1


def test_watched_vls(model):
    monitor = Monitor(model, {}, watched=[1])
    monitor.feed(event(9, 50000))
    assert [(a.kind, a.vl_id) for a in monitor.advance(300000)] == [(AnomalyKind.MISSING_DATA, 1)]


def test_report():
    report = anomaly_report([])
    assert report == {
        "anomalies": [],
        "counts": {"missing": 0, "unexpected": 0, "incoherent": 0, "sequence": 0},
        "verdict": "PASS",
    }


def test_report_of_anomalies(model):
    monitor = Monitor(model, {})
    monitor.advance(300000)
    report = anomaly_report(monitor.anomalies)
    assert report["verdict"] == "FAIL"
    assert report["counts"]["missing"] == 3
    assert report["anomalies"][0] == {
        "kind": "MissingData",
        "vl": 1,
        "t": 300000,
        "detail": "no frame on VL 1 in [100, 600] µs of MAF 0",
        "expected": [100, 600],
    }


def cruising(speed):
    return AppGeneratorState(48.0, 2.0, speed, 45.0, 0.0, 0.0)


def run_monitor(mf, partitions, vls, laws, mafs):
    monitor = Monitor(build_expected_model(mf, vls, 100), laws)
    for e in switch_forward(simulate_transmitter(mf, partitions, vls, mafs), 100):
        monitor.feed(e)
    monitor.advance(mafs * mf.maf_duration)
    return monitor


def test_same_application_on_two_vls(speed_law):
    state, anomalies = check_data(speed_law, MonitorState(), frame(vl_id=1, value=100.0, timestamp=0))
    state, found = check_data(speed_law, state, frame(vl_id=2, value=200.0, timestamp=150000))
    anomalies += found
    state, found = check_data(speed_law, state, frame(vl_id=1, value=100.0, timestamp=300000))
    assert anomalies + found == []
    assert sorted(state.windows) == [1, 2]


def test_two_speed_partitions_at_different_speeds(speed_law):
    mf = MajorFrame(300000, (PartitionWindow(1, 0, 150000), PartitionWindow(2, 150000, 150000)))
    partitions = [PartitionConfig(1, 2, cruising(100.0)), PartitionConfig(2, 2, cruising(200.0))]
    vls = [VirtualLinkConfig(i, 4, 1518, 500, i, ("display",)) for i in (1, 2)]
    monitor = run_monitor(mf, partitions, vls, {2: speed_law}, 5)
    assert monitor.anomalies == []
    assert [p.values for p in monitor.state.windows[2]] == [(200.0,)] * 5


def test_first_maf_has_its_own_expectation(speed_law):
    """The second window's sample waits for the BAG in every MAF but the first."""
    mf = MajorFrame(300000, (PartitionWindow(1, 0, 1000), PartitionWindow(1, 298000, 2000)))
    partitions = [PartitionConfig(1, 2, cruising(100.0))]
    vls = [VirtualLinkConfig(1, 4, 1518, 500, 1, ("display",))]
    monitor = run_monitor(mf, partitions, vls, {2: speed_law}, 4)
    assert monitor.anomalies == []
    assert monitor.state.maf_index == 4


def test_first_maf_frames_outside_the_settled_windows():
    mf = MajorFrame(300000, (PartitionWindow(1, 0, 1000), PartitionWindow(1, 298000, 2000)))
    model = build_expected_model(mf, [VirtualLinkConfig(1, 4, 1518, 500, 1, ())], 100)
    _, anomalies = check_temporal(model, MonitorState(), event(1, 100), 1)
    assert anomalies == []
    _, anomalies = check_temporal(model, MonitorState(maf_index=1), event(1, 300100), 1)
    assert kinds(anomalies) == [AnomalyKind.UNEXPECTED_COMM]
    assert anomalies[0].expected == [2100, 2600]
