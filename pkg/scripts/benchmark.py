#!/usr/bin/env python3

"""
Quick script to time a long fault-free run of the baseline configuration,
transmitter simulation and monitor together, sequential and pipelined.
Expect about 10,000 MAFs in well under 10 seconds on a desktop machine.
"""
from datetime import timedelta
from pathlib import Path
import dataclasses
import sys
import time

import humanize

from ima_sentinel.utils.configuring import load_config
from ima_sentinel.utils.orchestrating import run_scenario

BASELINE = Path(__file__).resolve().parent.parent / "configs" / "baseline.json"


def steady_baseline(mafs: int):
    """The baseline at constant speed, which stays inside its law's bounds however long the run."""
    config = load_config(BASELINE.read_text())
    partitions = tuple(
        dataclasses.replace(p, generator=dataclasses.replace(p.generator, accel=0.0)) for p in config.partitions
    )
    return dataclasses.replace(config, partitions=partitions, run_mafs=mafs)


def time_run(mafs: int, pipelined: bool) -> float:
    config = steady_baseline(mafs)
    start = time.perf_counter()
    report = run_scenario(config, pipelined=pipelined)
    elapsed = time.perf_counter() - start
    print(
        f"{'pipelined' if pipelined else 'sequential'}: {humanize.intcomma(mafs)} MAFs "
        f"({humanize.precisedelta(timedelta(microseconds=mafs * config.major_frame.maf_duration))} simulated), "
        f"{humanize.intcomma(report.frames_received)} frames, {report.verdict}, in {elapsed:.2f} s"
    )
    return elapsed


if __name__ == "__main__":
    mafs = int(sys.argv[1]) if len(sys.argv) > 1 else 10000
    for pipelined in (False, True):
        time_run(mafs, pipelined)
