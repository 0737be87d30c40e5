from __future__ import annotations

from typing import Iterable

import pandas as pd


def summarize(values: Iterable[float]) -> dict[str, float]:
    """Median, mean and maximum ignoring NaN entries (NaN if nothing is left)"""
    s = pd.Series(list(values), dtype=float)
    return {
        "median": float(s.median()),
        "mean": float(s.mean()),
        "max": float(s.max()),
        "count": int(s.count()),
    }


def summarize_frame(df: pd.DataFrame, columns: Iterable[str]) -> dict[str, dict[str, float]]:
    return {col: summarize(df[col]) for col in columns}
