"""Error-probability bounds and information-theoretic user capacity.

Given an estimate of the mutual information between fingerprints and device
identity, these routines bound the achievable identification error via Fano's
inequality and derive the largest user population whose error lower bound
stays below a target threshold.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .infotheory import binary_entropy


class BoundValue(NamedTuple):
    """A bound with its clamped value and the raw pre-clamp quantity."""

    value: float
    raw: float


def fano_lower_bound(emi_bits: float, n_users: int, pe: float) -> BoundValue:
    """Fano lower bound on identification error probability.

    raw = (log2(n) - emi - H(pe)) / log2(n - 1); value clamps negatives to 0.
    Only defined for three or more users (log2(n-1) must be positive).
    """
    if n_users < 3:
        raise ValueError(f"n_users must be >= 3: {n_users}")
    raw = (np.log2(n_users) - emi_bits - binary_entropy(pe)) / np.log2(n_users - 1)
    return BoundValue(value=max(0.0, float(raw)), raw=float(raw))


def fano_upper_bound(emi_bits: float, n_users: int) -> BoundValue:
    """Upper bound pe <= (log2(n) - emi) / 2; value clamped into [0, 1]."""
    if n_users < 2:
        raise ValueError(f"n_users must be >= 2: {n_users}")
    raw = 0.5 * (np.log2(n_users) - emi_bits)
    return BoundValue(value=float(np.clip(raw, 0.0, 1.0)), raw=float(raw))


def check_fano_consistency(emi_bits: float, n_users: int, observed_pe: float) -> bool:
    """True when the observed error rate is not below its Fano lower bound."""
    return fano_lower_bound(emi_bits, n_users, observed_pe).value <= observed_pe


@dataclass
class CapacityResult:
    """Largest supportable user count at an error threshold.

    n_c = 2 with below_min set means even the smallest evaluated population
    (3 users) violates the threshold; saturated means the scan hit n_max.
    trace holds the bound ratio for every evaluated N (N = 3 .. n_max).
    """

    n_c: int
    threshold: float
    emi_bits: float
    saturated: bool
    below_min: bool
    trace: np.ndarray


def user_capacity(emi_bits: float, threshold: float, n_max: int = 10_000) -> CapacityResult:
    """Largest N in [3, n_max] whose Fano error lower bound stays <= threshold.

    The scan evaluates (log2(N) - emi - H(threshold)) / log2(N-1) for every
    candidate N and keeps the largest satisfying one.
    """
    if not 0.0 < threshold < 0.5:
        raise ValueError(f"threshold must be in (0, 0.5): {threshold}")
    if n_max < 3:
        raise ValueError(f"n_max must be >= 3: {n_max}")
    n = np.arange(3, n_max + 1)
    ratio = (np.log2(n) - emi_bits - binary_entropy(threshold)) / np.log2(n - 1)
    ok = np.flatnonzero(ratio <= threshold)
    if ok.size == 0:
        return CapacityResult(n_c=2, threshold=threshold, emi_bits=emi_bits,
                              saturated=False, below_min=True, trace=ratio)
    n_c = int(n[ok[-1]])
    return CapacityResult(n_c=n_c, threshold=threshold, emi_bits=emi_bits,
                          saturated=n_c == n_max, below_min=False, trace=ratio)


@dataclass
class CapacityCurvePoint:
    """Capacity results at one parameter value, keyed by threshold."""

    parameter: float
    emi_bits: float
    results: dict


def capacity_curve(parameters, emi_series, thresholds=(0.01, 0.10),
                   n_max: int = 10_000) -> list[CapacityCurvePoint]:
    """Map a series of EMI estimates to capacities at each threshold."""
    parameters = list(parameters)
    emi_series = list(emi_series)
    if len(parameters) != len(emi_series):
        raise ValueError("parameters and emi_series must have equal length")
    points = []
    for param, emi in zip(parameters, emi_series):
        results = {float(t): user_capacity(emi, float(t), n_max) for t in thresholds}
        points.append(CapacityCurvePoint(parameter=float(param),
                                         emi_bits=float(emi), results=results))
    return points


def _threshold_column(threshold: float) -> str:
    return f"nc_at_{threshold * 100:g}pct"


def capacity_table_to_csv(points: list[CapacityCurvePoint], path) -> None:
    """CSV rows: parameter, emi_bits, one nc column per threshold, flags.

    saturated / below_min are set when any threshold's result has the flag.
    """
    if not points:
        raise ValueError("no capacity points to write")
    thresholds = sorted(points[0].results)
    nc_cols = [_threshold_column(t) for t in thresholds]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(["parameter", "emi_bits"] + nc_cols
                          + ["saturated", "below_min"]) + "\n")
        for pt in points:
            res = [pt.results[t] for t in thresholds]
            row = [repr(pt.parameter), repr(pt.emi_bits)]
            row += [str(r.n_c) for r in res]
            row.append("true" if any(r.saturated for r in res) else "false")
            row.append("true" if any(r.below_min for r in res) else "false")
            fh.write(",".join(row) + "\n")
