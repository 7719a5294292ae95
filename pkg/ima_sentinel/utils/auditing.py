"""
BAG conformance audit working from a serialized frame trace alone.
"""

from __future__ import annotations

from typing import Dict, IO, Mapping
from dataclasses import dataclass
import io

import pandas as pd


@dataclass
class BagAudit:
    frames: int
    min_gaps: Dict[int, float]  # µs, per VL with at least two frames
    violations: pd.DataFrame  # vl, t_emit, gap_us, bag_us

    @property
    def passed(self) -> bool:
        return self.violations.empty


def read_trace_frame(fp: IO[str]) -> pd.DataFrame:
    """The trace's decodable frames as a DataFrame with at least `vl` and `t_emit` columns."""
    text = fp.read()
    if not text.strip():
        return pd.DataFrame({"vl": pd.Series(dtype="int64"), "t_emit": pd.Series(dtype="int64")})
    df = pd.read_json(io.StringIO(text), lines=True)
    if "vl" not in df:
        df["vl"] = pd.NA
    df = df.dropna(subset=["vl"])
    return df.astype({"vl": "int64", "t_emit": "int64"})


def audit_bag(fp: IO[str], bags_us: Mapping[int, int]) -> BagAudit:
    """Every pair of successive emissions on a VL must be at least its BAG apart."""
    df = read_trace_frame(fp).sort_values(["vl", "t_emit"], kind="stable")
    df["gap_us"] = df.groupby("vl")["t_emit"].diff()
    df["bag_us"] = df["vl"].map(bags_us)
    violations = df[df["gap_us"] < df["bag_us"]][["vl", "t_emit", "gap_us", "bag_us"]]
    min_gaps = df.dropna(subset=["gap_us"]).groupby("vl")["gap_us"].min()
    return BagAudit(
        frames=len(df),
        min_gaps={int(vl): float(gap) for vl, gap in min_gaps.items()},
        violations=violations.reset_index(drop=True),
    )
