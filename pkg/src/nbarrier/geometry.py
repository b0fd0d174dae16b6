"""Nullcline sampling and the enclosing region between two lines (planes).

The region for ``n`` species is

    { x >= 0 : sum_k x_k / upper_k <= 1  and  sum_k x_k / lower_k >= 1 }

i.e. the band between the lower face through the intercepts ``lower`` and
the upper face through ``upper``.  For three species this is the five-faced
polyhedron bounded additionally by the coordinate planes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial import ConvexHull, QhullError

from ._io import csv_text, json_text
from .errors import DegenerateFit, EmptyNullcline, OrderViolation
from .model import FIELDS, SPECIES, ReactionSystem

BOUNDARY_TOL = 1e-12
BISECTION_ITERS = 60
# relative slack when screening candidate faces; the winner is snapped exactly
_FEAS_TOL = 1e-9

INSIDE = "inside"
BOUNDARY = "boundary"
OUTSIDE_ABOVE = "outside_above"
OUTSIDE_BELOW = "outside_below"


@dataclass(frozen=True)
class NullclineSample:
    label: str
    points: np.ndarray
    band_tol: float

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.ndim != 2 or pts.shape[1] not in (2, 3):
            raise ValueError("points must be an (m, 2) or (m, 3) array")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_species(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return len(self.points)

    def rows(self):
        for p in self.points:
            yield (self.label, *p)

    def to_dict(self) -> dict:
        return {"label": self.label, "band_tol": self.band_tol, "points": self.points}


def samples_to_csv(samples) -> str:
    samples = list(samples)
    n = samples[0].n_species if samples else 2
    rows = itertools.chain.from_iterable(s.rows() for s in samples)
    return csv_text(("label",) + SPECIES[:n], rows)


def samples_to_json(samples) -> str:
    return json_text([s.to_dict() for s in samples])


@dataclass(frozen=True)
class Region:
    """Band between the lower face (intercepts ``lower``) and the upper face."""

    upper: tuple
    lower: tuple

    def __post_init__(self):
        upper = tuple(float(x) for x in self.upper)
        lower = tuple(float(x) for x in self.lower)
        if len(upper) != len(lower) or len(upper) not in (2, 3):
            raise ValueError("need 2 or 3 upper and lower intercepts")
        for k, (hi, lo) in enumerate(zip(upper, lower)):
            if not (np.isfinite(hi) and np.isfinite(lo) and hi > lo > 0):
                raise ValueError(
                    f"intercepts on axis {SPECIES[k]} must satisfy upper > lower > 0, got {hi}, {lo}"
                )
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "lower", lower)

    @property
    def n_species(self) -> int:
        return len(self.upper)

    u_bar = property(lambda self: self.upper[0])
    v_bar = property(lambda self: self.upper[1])
    w_bar = property(lambda self: self.upper[2])
    u_under = property(lambda self: self.lower[0])
    v_under = property(lambda self: self.lower[1])
    w_under = property(lambda self: self.lower[2])

    def inflate(self, margin: float) -> "Region":
        return Region(
            tuple(x * (1 + margin) for x in self.upper),
            tuple(x * (1 - margin) for x in self.lower),
        )

    def to_dict(self) -> dict:
        return {"upper": list(self.upper), "lower": list(self.lower)}

    def to_csv(self) -> str:
        n = self.n_species
        return csv_text(("label",) + SPECIES[:n], [("upper", *self.upper), ("lower", *self.lower)])

    @classmethod
    def from_dict(cls, doc) -> "Region":
        return cls(doc["upper"], doc["lower"])


# -- sampling ---------------------------------------------------------------


def _grid(bounding_box, resolution):
    box = np.asarray(bounding_box, dtype=float).reshape(-1)
    if np.any(box <= 0):
        raise ValueError("bounding box extents must be positive")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    axes = [np.linspace(0.0, b, int(resolution)) for b in box]
    return np.stack(np.meshgrid(*axes, indexing="ij")), box


def _zero_set(func, bounding_box, resolution, band_tol):
    """Points of the orthant box where ``func`` vanishes to within ``band_tol``.

    Grid nodes that already satisfy the band are kept as they are; every
    axis-aligned grid edge with a strict sign change is bisected.
    """
    coords, _ = _grid(bounding_box, resolution)
    n = coords.shape[0]
    vals = np.asarray(func(coords), dtype=float)
    flat = coords.reshape(n, -1).T
    on_node = np.abs(vals) <= band_tol
    found = [flat[on_node.ravel()]]

    lo_pts, hi_pts, lo_vals = [], [], []
    for k in range(n):
        a = [slice(None)] * n
        b = [slice(None)] * n
        a[k] = slice(None, -1)
        b[k] = slice(1, None)
        va, vb = vals[tuple(a)], vals[tuple(b)]
        cross = (va * vb < 0) & ~on_node[tuple(a)] & ~on_node[tuple(b)]
        if not np.any(cross):
            continue
        ca = coords[(slice(None),) + tuple(a)]
        cb = coords[(slice(None),) + tuple(b)]
        lo_pts.append(ca[:, cross].T)
        hi_pts.append(cb[:, cross].T)
        lo_vals.append(va[cross])
    if lo_pts:
        lo = np.concatenate(lo_pts)
        hi = np.concatenate(hi_pts)
        flo = np.concatenate(lo_vals)
        done = np.zeros(len(lo), dtype=bool)
        result = np.empty_like(lo)
        for _ in range(BISECTION_ITERS):
            mid = 0.5 * (lo + hi)
            fm = np.asarray(func(mid.T), dtype=float)
            hit = ~done & (np.abs(fm) <= band_tol)
            result[hit] = mid[hit]
            done |= hit
            if done.all():
                break
            same = np.sign(fm) == np.sign(flo)
            lo = np.where(same[:, None], mid, lo)
            flo = np.where(same, fm, flo)
            hi = np.where(same[:, None], hi, mid)
        found.append(result[done])
    pts = np.concatenate(found) if found else np.empty((0, n))
    return pts


def _field_func(system: ReactionSystem, i: int):
    g = system.growth[i]

    def func(coords):
        coords = np.asarray(coords, dtype=float)
        return np.broadcast_to(np.asarray(g(*coords), dtype=float), coords.shape[1:])

    return func


def sample_nullclines(
    system: ReactionSystem, bounding_box, resolution: int = 201, band_tol: float = 1e-10
) -> list[NullclineSample]:
    """Sample the zero set of every growth field inside ``bounding_box``."""
    n = system.n_species
    box = np.broadcast_to(np.asarray(bounding_box, dtype=float), (n,))
    out = []
    for i in range(n):
        pts = _zero_set(_field_func(system, i), box, resolution, band_tol)
        if len(pts) == 0:
            raise EmptyNullcline(
                f"field {FIELDS[i]} has no zero in the box {box.tolist()}",
                label=FIELDS[i],
                witness=box.copy(),
            )
        out.append(NullclineSample(FIELDS[i], pts, band_tol))
    return out


def axis_roots(func1d, upper: float, resolution: int = 401, tol: float = 1e-12) -> list[float]:
    """All sign changes and exact zeros of a scalar function on ``(0, upper]``."""
    t = np.linspace(0.0, upper, int(resolution))[1:]
    vals = np.array([func1d(x) for x in t], dtype=float)
    roots = [float(x) for x in t[vals == 0.0]]
    for j in np.nonzero(vals[:-1] * vals[1:] < 0)[0]:
        a, b, fa = t[j], t[j + 1], vals[j]
        for _ in range(200):
            m = 0.5 * (a + b)
            fm = func1d(m)
            if fm == 0.0 or b - a <= tol * max(1.0, abs(m)):
                break
            if np.sign(fm) == np.sign(fa):
                a, fa = m, fm
            else:
                b = m
        roots.append(float(m))
    return sorted(roots)


def field_axis_roots(
    system: ReactionSystem, i: int, k: int, upper: float | None = None, resolution: int = 401
) -> list[float]:
    """Roots of field ``i`` restricted to coordinate axis ``k``.

    With ``upper=None`` the axis is scanned over doubling ranges
    ``(0, 1], [1, 2], [2, 4], ...`` until the field is negative at the end
    of a range (or the range passes 2**20).
    """
    n = system.n_species
    g = system.growth[i]

    def func1d(x):
        p = [0.0] * n
        p[k] = x
        return float(g(*p))

    if upper is not None:
        return axis_roots(func1d, upper, resolution)
    roots = axis_roots(func1d, 1.0, resolution)
    a = 1.0
    while func1d(a) >= 0 and a < 2.0**20:
        # (a, 2a]: the shared endpoint a was covered by the previous range
        roots.extend(a + r for r in axis_roots(lambda x: func1d(a + x), a, resolution))
        a *= 2.0
    return sorted(roots)


def default_box(system: ReactionSystem) -> float:
    """Twice the largest positive axis root over all fields and axes."""
    n = system.n_species
    found = [r for i in range(n) for k in range(n) for r in field_axis_roots(system, i, k)]
    if not found:
        raise EmptyNullcline("no field has a positive root on any axis")
    return 2.0 * max(found)


def sample_combined_field(
    system: ReactionSystem,
    weights,
    bounding_box,
    resolution: int = 201,
    band_tol: float = 1e-10,
) -> NullclineSample:
    """Sample ``F = sum_k weight_k x_k field_k`` off the coordinate hyperplanes.

    ``F`` vanishes identically on every axis, so only interior zeros are
    returned, together with the anchors where each field meets its own axis
    (``u_1`` of f, ``v_2`` of g, ``w_3`` of h).
    """
    n = system.n_species
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size != n or np.any(w <= 0):
        raise ValueError(f"need {n} positive weights, got {w.tolist()}")
    box = np.broadcast_to(np.asarray(bounding_box, dtype=float), (n,))

    def combined(coords):
        coords = np.asarray(coords, dtype=float)
        fields = system.fields(coords)
        wb = w.reshape((n,) + (1,) * (coords.ndim - 1))
        return np.sum(wb * coords * fields, axis=0)

    pts = _zero_set(combined, box, resolution, band_tol)
    pts = pts[np.all(pts > 0, axis=1)]
    if len(pts) == 0:
        raise EmptyNullcline("combined field has no interior zero in the box", label="F")
    anchors = []
    for k in range(n):
        for r in field_axis_roots(system, k, k, box[k]):
            p = np.zeros(n)
            p[k] = r
            anchors.append(p)
    if anchors:
        pts = np.concatenate([pts, np.array(anchors)])
    return NullclineSample("F", pts, band_tol)


# -- containment -----------------------------------------------------------


def _face_sums(region: Region, points):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    return pts @ (1.0 / np.array(region.upper)), pts @ (1.0 / np.array(region.lower))


def classify_points(region: Region, points) -> np.ndarray:
    """Vectorized :func:`contains`; returns an array of labels."""
    s_up, s_lo = _face_sums(region, points)
    out = np.full(s_up.shape, INSIDE, dtype=object)
    on_face = (np.abs(s_up - 1) <= BOUNDARY_TOL) | (np.abs(s_lo - 1) <= BOUNDARY_TOL)
    out[on_face] = BOUNDARY
    out[s_lo < 1 - BOUNDARY_TOL] = OUTSIDE_BELOW
    out[s_up > 1 + BOUNDARY_TOL] = OUTSIDE_ABOVE
    return out


def contains(region: Region, point) -> str:
    p = np.asarray(point, dtype=float).reshape(-1)
    if p.size != region.n_species:
        raise ValueError("point dimension does not match the region")
    return str(classify_points(region, p[None, :])[0])


# -- fitting ---------------------------------------------------------------


def _extreme(points):
    """Hull vertices of ``points`` and, when the hull is full-dimensional,
    the supporting planes ``a . x = 1`` of its facets."""
    pts = np.unique(points, axis=0)
    n = pts.shape[1]
    scale = max(1.0, float(np.max(np.abs(pts))))
    planes = None
    if len(pts) > n:
        centered = pts - pts.mean(axis=0)
        sv = np.linalg.svd(centered, compute_uv=False)
        rank = int(np.sum(sv > 1e-9 * scale * max(1.0, sv[0])))
    else:
        rank = 0 if len(pts) == 1 else min(len(pts) - 1, n)
    if rank == n:
        try:
            hull = ConvexHull(pts)
        except QhullError:
            hull = None
        if hull is not None:
            normals, offsets = hull.equations[:, :-1], hull.equations[:, -1]
            keep = np.abs(offsets) > 1e-12 * scale
            planes = -normals[keep] / offsets[keep, None]
            edges = set()
            for simplex in hull.simplices:
                for i, j in itertools.combinations(sorted(simplex), 2):
                    edges.add((i, j))
            vert = np.array(sorted(hull.vertices))
            remap = {v: idx for idx, v in enumerate(vert)}
            edges = sorted((remap[i], remap[j]) for i, j in edges)
            return pts[vert], planes, edges
    # flat set: find its extreme points in its own affine hull
    if len(pts) <= n + 1:
        ext = pts
    else:
        centered = pts - pts.mean(axis=0)
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        r = max(rank, 1)
        proj = centered @ vt[:r].T
        if r == 1:
            ext = pts[[int(np.argmin(proj[:, 0])), int(np.argmax(proj[:, 0]))]]
        else:
            try:
                ext = pts[np.sort(ConvexHull(proj).vertices)]
            except QhullError:
                ext = pts
    edges = list(itertools.combinations(range(len(ext)), 2))
    return ext, None, edges


def _subset_planes(ext):
    n = ext.shape[1]
    combos = list(itertools.combinations(range(len(ext)), n))
    if len(combos) > 200000:
        raise DegenerateFit("too many extreme points for candidate enumeration")
    planes = []
    for idx in combos:
        m = ext[list(idx)]
        if abs(np.linalg.det(m)) < 1e-14:
            continue
        planes.append(np.linalg.solve(m, np.ones(n)))
    return np.array(planes).reshape(-1, n)


def _single_contact(ext):
    """For each extreme point P, the face through P minimizing sum 1/a_k."""
    pos = ext[np.all(ext > 0, axis=1)]
    if len(pos) == 0:
        return np.empty((0, ext.shape[1]))
    r = np.sqrt(pos)
    return 1.0 / (r * r.sum(axis=1, keepdims=True))


def _edge_optima(points, ext, edges):
    """Minimizer of sum 1/a_k along the line of faces touching two extreme points."""
    out = []
    for i, j in edges:
        p, q = ext[i], ext[j]
        d = np.cross(p, q)
        if np.linalg.norm(d) < 1e-12:
            continue
        a0 = np.linalg.lstsq(np.vstack([p, q]), np.ones(2), rcond=None)[0]
        # feasible t: points . (a0 + t d) <= 1 and a0 + t d > 0
        slope = points @ d
        room = 1.0 + _FEAS_TOL - points @ a0
        lo, hi = -np.inf, np.inf
        pos, neg = slope > 1e-15, slope < -1e-15
        if np.any(room[~pos & ~neg] < 0):
            continue
        if np.any(pos):
            hi = min(hi, float(np.min(room[pos] / slope[pos])))
        if np.any(neg):
            lo = max(lo, float(np.max(room[neg] / slope[neg])))
        for k in range(3):
            if d[k] > 0:
                lo = max(lo, -a0[k] / d[k])
            elif d[k] < 0:
                hi = min(hi, -a0[k] / d[k])
            elif a0[k] <= 0:
                lo, hi = 1.0, 0.0
        if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
            continue

        def objective(t):
            a = a0 + t * d
            return np.inf if np.any(a <= 0) else float(np.sum(1.0 / a))

        res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
        if np.isfinite(res.fun):
            out.append(a0 + res.x * d)
    return np.array(out).reshape(-1, 3)


def _best(points, candidates, upper: bool):
    if len(candidates) == 0:
        return None
    cand = candidates[np.all(np.isfinite(candidates), axis=1) & np.all(candidates > 0, axis=1)]
    if len(cand) == 0:
        return None
    values = points @ cand.T
    if upper:
        ok = values.max(axis=0) <= 1 + _FEAS_TOL
    else:
        ok = values.min(axis=0) >= 1 - _FEAS_TOL
    cand = cand[ok]
    if len(cand) == 0:
        return None
    score = np.sum(1.0 / cand, axis=1)
    best = cand[np.argmin(score) if upper else np.argmax(score)]
    # snap so the extreme sample lies exactly on the face
    s = points @ best
    return best / (s.max() if upper else s.min())


def fit_region(samples, strictness_margin: float = 0.0) -> Region:
    """Tightest region containing every sample point.

    Upper intercepts minimize their sum subject to ``sum x_k/upper_k <= 1``
    at every sample; lower intercepts maximize their sum subject to
    ``sum x_k/lower_k >= 1``.  Candidates are the supporting faces of the
    sample hull (facets, plus single-vertex and, in 3-D, edge contacts for
    the upper face, whose objective can be optimal off a vertex).
    """
    if not 0 <= strictness_margin < 1:
        raise ValueError("strictness_margin must lie in [0, 1)")
    samples = list(samples)
    if not samples:
        raise DegenerateFit("no samples to fit")
    points = np.concatenate([np.asarray(s.points, dtype=float) for s in samples])
    if len(points) == 0:
        raise DegenerateFit("no sample points to fit")
    n = points.shape[1]
    if np.any(points < 0):
        raise ValueError("sample points must lie in the nonnegative orthant")

    ext, planes, edges = _extreme(points)
    if planes is None:
        planes = _subset_planes(ext)
    single = _single_contact(ext)
    upper_cands = [planes, single]
    if n == 3:
        upper_cands.append(_edge_optima(points, ext, edges))
    a = _best(points, np.concatenate(upper_cands), upper=True)
    b = _best(points, np.concatenate([planes, single]), upper=False)
    if a is None or b is None:
        which = "upper" if a is None else "lower"
        raise DegenerateFit(f"no admissible {which} face: an intercept would be 0 or unbounded")
    with np.errstate(divide="ignore"):
        upper = 1.0 / a
        lower = 1.0 / b
    if not (np.all(np.isfinite(upper)) and np.all(np.isfinite(lower))):
        raise DegenerateFit("fitted intercept is unbounded")
    if np.any(lower <= 0) or np.any(upper <= 0):
        raise DegenerateFit("fitted intercept is zero")
    upper = upper * (1 + strictness_margin)
    lower = lower * (1 - strictness_margin)
    for k in range(n):
        if not upper[k] > lower[k]:
            witness = np.zeros(n)
            witness[k] = upper[k]
            raise OrderViolation(
                f"upper intercept {upper[k]:.12g} <= lower intercept {lower[k]:.12g} "
                f"on axis {SPECIES[k]}",
                witness=witness,
            )
    return Region(tuple(upper), tuple(lower))
