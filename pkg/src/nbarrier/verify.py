"""Check the a-priori bounds on computed waves over sweeps of weights."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import nbmp
from ._io import csv_text, json_text
from .errors import DimensionMismatch
from .geometry import Region
from .model import system_to_dict

PASS = "pass"
FAIL = "fail"

DEFAULT_VALUES = (0.1, 0.3, 1.0, 3.0, 10.0)


@dataclass(frozen=True)
class VerificationRecord:
    weights: tuple
    p_lower: float
    p_upper: float
    observed_min_p: float
    observed_max_p: float
    tol_verify: float

    @property
    def margin_lo(self) -> float:
        return self.observed_min_p - self.p_lower

    @property
    def margin_hi(self) -> float:
        return self.p_upper - self.observed_max_p

    @property
    def status(self) -> str:
        ok = (
            self.observed_min_p >= self.p_lower - self.tol_verify
            and self.observed_max_p <= self.p_upper + self.tol_verify
        )
        return PASS if ok else FAIL

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_dict(self) -> dict:
        return {
            "weights": list(self.weights),
            "p_lower": self.p_lower,
            "p_upper": self.p_upper,
            "min_p": self.observed_min_p,
            "max_p": self.observed_max_p,
            "margin_lo": self.margin_lo,
            "margin_hi": self.margin_hi,
            "status": self.status,
        }


@dataclass
class VerificationReport:
    system: dict
    region: Region
    wave: dict
    records: list
    tol_verify: float
    chi: int

    @property
    def overall(self) -> str:
        return PASS if all(r.passed for r in self.records) else FAIL

    @property
    def passed(self) -> bool:
        return self.overall == PASS

    def to_dict(self) -> dict:
        return {
            "overall": self.overall,
            "tol_verify": self.tol_verify,
            "chi": self.chi,
            "system": self.system,
            "region": self.region.to_dict(),
            "wave": self.wave,
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self) -> str:
        return json_text(self.to_dict())

    def to_csv(self) -> str:
        n = self.region.n_species
        header = ("alpha", "beta", "gamma")[:n] + (
            "p_lower", "p_upper", "min_p", "max_p", "margin_lo", "margin_hi", "status"
        )
        rows = (
            (*r.weights, r.p_lower, r.p_upper, r.observed_min_p, r.observed_max_p,
             r.margin_lo, r.margin_hi, r.status)
            for r in self.records
        )
        return csv_text(header, rows)


def combination_fields(solution, weights):
    """``p = sum_k w_k X_k`` and ``q = sum_k w_k d_k X_k`` at every grid node."""
    prof = np.asarray(solution.profiles, dtype=float)
    w = np.asarray(weights, dtype=float).reshape(-1)
    d = np.asarray(solution.diffusion, dtype=float)
    if w.size != prof.shape[0] or d.size != prof.shape[0]:
        raise DimensionMismatch(f"{w.size} weights for {prof.shape[0]} species")
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return w @ prof, (w * d) @ prof


def check_bounds(solution, weights, bounds: nbmp.BoundsResult, tol_verify: float = 1e-3) -> VerificationRecord:
    p, _ = combination_fields(solution, weights)
    return VerificationRecord(
        tuple(float(x) for x in np.asarray(weights).reshape(-1)),
        bounds.p_lower,
        bounds.p_upper,
        float(p.min()),
        float(p.max()),
        tol_verify,
    )


def weight_grid(n: int, values=DEFAULT_VALUES) -> list[tuple]:
    """Cartesian product of ``values`` in ``n`` dimensions (first weight slowest)."""
    return [tuple(float(v) for v in w) for w in itertools.product(values, repeat=n)]


def _wave_metadata(solution) -> dict:
    if hasattr(solution, "metadata"):
        return solution.metadata()
    return {
        "t": float(getattr(solution, "t", np.nan)),
        "dt": float(getattr(solution, "dt", np.nan)),
        "grid_points": int(np.asarray(solution.profiles).shape[1]),
        "min_value": float(np.min(solution.profiles)),
    }


def sweep_weights(solution, region: Region, d, chi: int, weight_grid, tol_verify: float = 1e-3) -> VerificationReport:
    """One record per weight tuple, in grid order."""
    grid = [tuple(w) for w in weight_grid]
    if not grid:
        raise ValueError("weight grid is empty")
    records = []
    for w in grid:
        b = nbmp.bounds(w, d, region, chi)
        records.append(check_bounds(solution, w, b, tol_verify))
    system = getattr(solution, "system", None)
    return VerificationReport(
        system=system_to_dict(system) if system is not None else {},
        region=region,
        wave=_wave_metadata(solution),
        records=records,
        tol_verify=tol_verify,
        chi=chi,
    )
