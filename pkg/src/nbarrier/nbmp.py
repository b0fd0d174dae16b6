"""A-priori bounds on weighted sums of traveling-wave components.

For weights ``w`` and diffusion rates ``d`` the combination
``p = sum_k w_k x_k`` of a positive wave joining two equilibria satisfies

    min_k(w_k lower_k) * min(d)/max(d) * chi  <=  p  <=  max_k(w_k upper_k) * max(d)/min(d)

where ``upper``/``lower`` are the intercepts of the enclosing region and
``chi`` is 0 when either end state is the extinction state, 1 otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Region
from .model import EXTINCTION, BoundaryState


@dataclass(frozen=True)
class Weights:
    values: tuple

    def __post_init__(self):
        vals = tuple(float(x) for x in np.asarray(self.values, dtype=float).reshape(-1))
        if len(vals) not in (2, 3):
            raise ValueError("need 2 or 3 weights")
        if not all(np.isfinite(x) and x > 0 for x in vals):
            raise ValueError(f"weights must be positive, got {vals}")
        object.__setattr__(self, "values", vals)

    alpha = property(lambda self: self.values[0])
    beta = property(lambda self: self.values[1])
    gamma = property(lambda self: self.values[2])

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)


@dataclass(frozen=True)
class BoundsResult:
    p_lower: float
    p_upper: float
    chi: int
    weights: tuple
    diffusion: tuple
    region: Region

    def __post_init__(self):
        if self.chi not in (0, 1):
            raise ValueError("chi must be 0 or 1")
        if self.p_lower < 0 or not self.p_lower <= self.p_upper:
            raise ValueError(f"inconsistent bounds {self.p_lower} > {self.p_upper}")
        if self.chi == 0 and self.p_lower != 0:
            raise ValueError("chi = 0 forces a zero lower bound")

    def to_dict(self) -> dict:
        return {
            "p_lower": self.p_lower,
            "p_upper": self.p_upper,
            "chi": self.chi,
            "weights": list(self.weights),
            "diffusion": list(self.diffusion),
            "region": self.region.to_dict(),
        }


def chi_indicator(e_minus: BoundaryState, e_plus: BoundaryState) -> int:
    """0 if either end state is the extinction state, else 1."""
    return 0 if EXTINCTION in (e_minus.kind, e_plus.kind) else 1


def _bounds(weights, d, region: Region, chi: int, n: int) -> BoundsResult:
    w = weights if isinstance(weights, Weights) else Weights(weights)
    d = tuple(float(x) for x in d)
    if len(w) != n or len(d) != n or region.n_species != n:
        raise ValueError(f"weights, diffusion rates and region must all have {n} entries")
    if not all(np.isfinite(x) and x > 0 for x in d):
        raise ValueError("diffusion rates must be positive")
    if chi not in (0, 1):
        raise ValueError("chi must be 0 or 1")
    ratio = max(d) / min(d)
    p_upper = max(wk * uk for wk, uk in zip(w, region.upper)) * ratio
    p_lower = min(wk * lk for wk, lk in zip(w, region.lower)) / ratio * chi
    assert p_lower <= p_upper, (p_lower, p_upper)
    return BoundsResult(p_lower, p_upper, chi, w.values, d, region)


def bounds_two(weights, d, region: Region, chi: int) -> BoundsResult:
    return _bounds(weights, d, region, chi, 2)


def bounds_three(weights, d, pentahedron: Region, chi: int) -> BoundsResult:
    return _bounds(weights, d, pentahedron, chi, 3)


def bounds(weights, d, region: Region, chi: int) -> BoundsResult:
    """Dispatch on the number of species."""
    return _bounds(weights, d, region, chi, region.n_species)
