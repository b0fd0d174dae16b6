"""Reaction systems, boundary states and wave problems.

A :class:`ReactionSystem` holds the per-capita growth fields ``f, g (, h)``
of a two- or three-species competition-diffusion system together with the
diffusion rates.  Fields are plain callables taking one array per species
and broadcasting like numpy ufuncs, so ``system.fields(points)`` evaluates
all of them on a whole grid at once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DomainError, NegativeCoordinate, NotAnEquilibrium

SPECIES = ("u", "v", "w")
FIELDS = ("f", "g", "h")

EXTINCTION = "extinction"
COEXISTENCE = "coexistence"
KINDS = (EXTINCTION, "exclusive_1", "exclusive_2", "exclusive_3", COEXISTENCE)

# negative inputs above this are treated as round-off and clamped to zero
CLAMP_TOL = 1e-13


@dataclass(frozen=True)
class LotkaVolterraParams:
    sigma: tuple
    c: tuple

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        c = np.asarray(self.c, dtype=float)
        n = sigma.size
        if sigma.ndim != 1 or n not in (2, 3):
            raise ValueError(f"sigma must have 2 or 3 entries, got {self.sigma!r}")
        if c.shape != (n, n):
            raise ValueError(f"c must be {n}x{n}, got shape {c.shape}")
        if not (np.all(np.isfinite(sigma)) and np.all(np.isfinite(c))):
            raise ValueError("Lotka-Volterra parameters must be finite")
        if np.any(sigma <= 0):
            raise ValueError(f"intrinsic rates must be positive, got {sigma.tolist()}")
        if np.any(c <= 0):
            raise ValueError(f"interaction coefficients must be positive, got {c.tolist()}")
        object.__setattr__(self, "sigma", tuple(sigma.tolist()))
        object.__setattr__(self, "c", tuple(tuple(row) for row in c.tolist()))

    @property
    def n_species(self) -> int:
        return len(self.sigma)

    def axis_root(self, i: int, k: int) -> float:
        """Root of field ``i`` on axis ``k``: sigma_i / c_ik."""
        return self.sigma[i] / self.c[i][k]

    def coexistence(self) -> np.ndarray:
        return np.linalg.solve(np.array(self.c), np.array(self.sigma))


class LotkaVolterraField:
    """Linear growth field ``sigma - sum_k c_k x_k``."""

    def __init__(self, sigma: float, row: Sequence[float]):
        self.sigma = float(sigma)
        self.row = tuple(float(r) for r in row)

    def __call__(self, *coords):
        out = self.sigma
        for ck, xk in zip(self.row, coords):
            out = out - ck * np.asarray(xk, dtype=float)
        return out

    def __repr__(self):
        return f"LotkaVolterraField(sigma={self.sigma}, row={self.row})"


class TabulatedField:
    """Growth field tabulated on a rectangular grid.

    Values are interpolated multilinearly (bilinear for two species) and
    extrapolated linearly outside the table.
    """

    def __init__(self, axes: Sequence[Sequence[float]], values):
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        self.values = np.asarray(values, dtype=float)
        if self.values.shape != tuple(a.size for a in self.axes):
            raise ValueError("table shape does not match its axes")
        self._interp = RegularGridInterpolator(
            self.axes, self.values, method="linear", bounds_error=False, fill_value=None
        )

    def __call__(self, *coords):
        arrays = np.broadcast_arrays(*[np.asarray(c, dtype=float) for c in coords])
        pts = np.stack([a.ravel() for a in arrays], axis=-1)
        return self._interp(pts).reshape(arrays[0].shape)


@dataclass(frozen=True)
class ReactionSystem:
    growth: tuple
    diffusion: tuple
    name: str = ""
    lotka_volterra: LotkaVolterraParams | None = field(default=None, compare=False)

    def __post_init__(self):
        growth = tuple(self.growth)
        diffusion = tuple(float(d) for d in self.diffusion)
        if len(growth) not in (2, 3):
            raise ValueError("a reaction system has 2 or 3 species")
        if len(diffusion) != len(growth):
            raise ValueError("need one diffusion rate per species")
        if not all(np.isfinite(d) and d > 0 for d in diffusion):
            raise ValueError(f"diffusion rates must be positive, got {diffusion}")
        if not all(callable(g) for g in growth):
            raise TypeError("growth fields must be callable")
        object.__setattr__(self, "growth", growth)
        object.__setattr__(self, "diffusion", diffusion)

    @property
    def n_species(self) -> int:
        return len(self.growth)

    def fields(self, coords) -> np.ndarray:
        """Evaluate every growth field at ``coords`` (shape ``(n, ...)``).

        No domain checks are made; callers that need them go through
        :func:`eval_reaction_terms`.
        """
        coords = np.asarray(coords, dtype=float)
        shape = coords.shape[1:]
        return np.stack(
            [np.broadcast_to(np.asarray(g(*coords), dtype=float), shape) for g in self.growth]
        )

    def field(self, i: int) -> Callable:
        return self.growth[i]

    def with_diffusion(self, diffusion) -> "ReactionSystem":
        return ReactionSystem(self.growth, diffusion, self.name, self.lotka_volterra)


@dataclass(frozen=True)
class BoundaryState:
    point: tuple
    kind: str

    def __post_init__(self):
        point = tuple(float(x) for x in self.point)
        object.__setattr__(self, "point", point)
        if self.kind not in KINDS:
            raise ValueError(f"unknown boundary state kind {self.kind!r}")
        if any(x < 0 for x in point):
            raise NegativeCoordinate(f"boundary state {point} leaves the orthant")
        if _kind_of(point) != self.kind:
            raise ValueError(f"point {point} does not have kind {self.kind}")

    @classmethod
    def at(cls, point) -> "BoundaryState":
        """Boundary state with the kind read off the positivity pattern."""
        kind = _kind_of(tuple(float(x) for x in point))
        if kind is None:
            raise NotAnEquilibrium(f"{tuple(point)} is not an admissible boundary state")
        return cls(point, kind)

    @property
    def n_species(self) -> int:
        return len(self.point)


def _kind_of(point) -> str | None:
    positive = [x > 0 for x in point]
    if not any(positive):
        return EXTINCTION
    if all(positive):
        return COEXISTENCE
    if sum(positive) == 1:
        return f"exclusive_{positive.index(True) + 1}"
    return None


@dataclass(frozen=True)
class WaveProblem:
    system: ReactionSystem
    e_minus: BoundaryState
    e_plus: BoundaryState
    theta: float | str = "free"
    L: float = 30.0
    N: int = 600

    def __post_init__(self):
        n = self.system.n_species
        if self.e_minus.n_species != n or self.e_plus.n_species != n:
            raise ValueError("boundary states must have one coordinate per species")
        if self.e_minus.point == self.e_plus.point:
            raise ValueError("e_minus and e_plus must differ")
        if n == 2 and "exclusive_3" in (self.e_minus.kind, self.e_plus.kind):
            raise ValueError("exclusive_3 is not a two-species state")
        if not (self.L > 0):
            raise ValueError("domain half-length must be positive")
        if int(self.N) != self.N or self.N < 16:
            raise ValueError("need at least 16 grid intervals")
        object.__setattr__(self, "N", int(self.N))
        if isinstance(self.theta, str):
            if self.theta != "free":
                raise ValueError("theta must be a number or 'free'")
        else:
            theta = float(self.theta)
            if not np.isfinite(theta):
                raise ValueError("theta must be finite")
            object.__setattr__(self, "theta", theta)

    @property
    def free_speed(self) -> bool:
        return self.theta == "free"


def make_lotka_volterra(params: LotkaVolterraParams, diffusion, name: str = "") -> ReactionSystem:
    """Lotka-Volterra competition system with ``f_i = sigma_i - sum_j c_ij x_j``."""
    if not isinstance(params, LotkaVolterraParams):
        params = LotkaVolterraParams(*params)
    growth = tuple(LotkaVolterraField(s, row) for s, row in zip(params.sigma, params.c))
    return ReactionSystem(growth, diffusion, name or "lotka_volterra", params)


def _as_point(system: ReactionSystem, point) -> np.ndarray:
    p = np.asarray(point, dtype=float).reshape(-1)
    if p.size != system.n_species:
        raise DomainError(f"expected {system.n_species} coordinates, got {p.size}")
    if np.any(~np.isfinite(p)):
        raise DomainError(f"non-finite coordinates {p.tolist()}")
    if np.any(p < -CLAMP_TOL):
        raise NegativeCoordinate(f"point {p.tolist()} is outside the nonnegative orthant")
    return np.maximum(p, 0.0)


def eval_reaction_terms(system: ReactionSystem, point) -> np.ndarray:
    """Growth values ``(f, g[, h])`` at one point of the orthant."""
    p = _as_point(system, point)
    values = system.fields(p)
    if not np.all(np.isfinite(values)):
        raise DomainError(f"growth field is not finite at {p.tolist()}")
    return values


def classify_boundary_state(system: ReactionSystem, point, tol: float = 1e-9) -> BoundaryState:
    """Classify ``point`` as an equilibrium of the kinetics.

    Coordinates at or below ``tol`` count as zero and are snapped to 0 in the
    returned state.  Exclusive states must zero the growth field of their
    surviving species and coexistence states must zero every field.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    p = _as_point(system, point)
    p = np.where(p > tol, p, 0.0)
    kind = _kind_of(tuple(p))
    if kind is None:
        raise NotAnEquilibrium(f"positivity pattern of {p.tolist()} is not admissible")
    values = eval_reaction_terms(system, p)
    if kind == COEXISTENCE:
        residual = np.max(np.abs(values))
    elif kind == EXTINCTION:
        residual = 0.0
    else:
        residual = abs(values[int(kind[-1]) - 1])
    if residual > tol:
        raise NotAnEquilibrium(f"{p.tolist()} has residual {residual:.3g} > {tol:g} for {kind}")
    return BoundaryState(tuple(p), kind)


# -- serialization ----------------------------------------------------------

_SYSTEM_KEYS = {
    "lotka_volterra": {"species", "type", "sigma", "c", "d", "name"},
    "tabulated": {"species", "type", "axes", "values", "d", "name"},
}


def system_from_dict(doc: dict) -> ReactionSystem:
    """Build a system from its JSON document.

    ``{"species": 2, "type": "lotka_volterra", "sigma": [...], "c": [[...]], "d": [...]}``
    or ``{"species": 2, "type": "tabulated", "axes": [[...], [...]], "values": [table_f, table_g], "d": [...]}``.
    """
    kind = doc.get("type")
    if kind not in _SYSTEM_KEYS:
        raise ValueError(f"unknown system type {kind!r}")
    unknown = set(doc) - _SYSTEM_KEYS[kind]
    if unknown:
        raise ValueError(f"unknown system keys: {sorted(unknown)}")
    n = doc.get("species")
    if n not in (2, 3):
        raise ValueError("species must be 2 or 3")
    d = doc.get("d")
    if d is None or len(d) != n:
        raise ValueError(f"d must list {n} diffusion rates")
    name = doc.get("name", "")
    if kind == "lotka_volterra":
        params = LotkaVolterraParams(doc["sigma"], doc["c"])
        if params.n_species != n:
            raise ValueError("sigma/c size does not match species")
        return make_lotka_volterra(params, d, name)
    axes = doc["axes"]
    values = doc["values"]
    if len(axes) != n or len(values) != n:
        raise ValueError("tabulated system needs one axis and one table per species")
    growth = tuple(TabulatedField(axes, v) for v in values)
    return ReactionSystem(growth, d, name or "tabulated")


def system_to_dict(system: ReactionSystem) -> dict:
    n = system.n_species
    if system.lotka_volterra is not None:
        lv = system.lotka_volterra
        return {
            "species": n,
            "type": "lotka_volterra",
            "name": system.name,
            "sigma": list(lv.sigma),
            "c": [list(r) for r in lv.c],
            "d": list(system.diffusion),
        }
    if all(isinstance(g, TabulatedField) for g in system.growth):
        return {
            "species": n,
            "type": "tabulated",
            "name": system.name,
            "axes": [a.tolist() for a in system.growth[0].axes],
            "values": [g.values.tolist() for g in system.growth],
            "d": list(system.diffusion),
        }
    return {"species": n, "type": "callable", "name": system.name, "d": list(system.diffusion)}


def load_system(path) -> ReactionSystem:
    with open(Path(path)) as fh:
        return system_from_dict(json.load(fh))
