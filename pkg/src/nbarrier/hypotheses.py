"""Numerical checks of the structural hypotheses on the growth fields.

Two species use the ids H1..H4, three species A1..A4:

1. a unique interior common zero (coexistence state);
2. a unique positive root of every field on every axis (plus, for three
   species, the per-axis roots are not all equal);
3. all fields positive near the origin and negative far out;
4. every nullcline lies in an enclosing region, which is fitted here.

Every check is decided at a finite sampling resolution, which the report
records.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import geometry
from ._io import json_text
from .errors import EmptyNullcline, FitError
from .geometry import Region
from .model import FIELDS, SPECIES, ReactionSystem

PASS = "pass"
FAIL = "fail"
INDETERMINATE = "indeterminate"

CLUSTER_RADIUS = 1e-6


@dataclass
class CheckResult:
    status: str
    message: str = ""
    witness: list | None = None
    data: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in (PASS, FAIL, INDETERMINATE):
            raise ValueError(f"bad status {self.status!r}")
        if self.status == FAIL and self.witness is None:
            raise ValueError("a failed check must carry a witness")

    @property
    def passed(self) -> bool:
        return self.status == PASS


@dataclass
class HypothesisEntry:
    id: str
    status: str
    message: str
    witness: list | None = None

    def to_dict(self) -> dict:
        return {"id": self.id, "status": self.status, "witness": self.witness, "message": self.message}


@dataclass(frozen=True)
class HypothesisOptions:
    bounding_box: float | tuple | None = None
    resolution: int | None = None
    band_tol: float = 1e-10
    tol: float = 1e-9
    small: float | None = None
    large: float | None = None
    margin: float = 0.0

    def resolved_resolution(self, n: int) -> int:
        if self.resolution is not None:
            return int(self.resolution)
        return 201 if n == 2 else 41


@dataclass
class HypothesisReport:
    entries: list
    region: Region | None
    coexistence: list | None
    axis_roots: dict
    resolution: int
    bounding_box: list
    tolerances: dict

    @property
    def all_passed(self) -> bool:
        return all(e.status == PASS for e in self.entries)

    def entry(self, hid: str) -> HypothesisEntry:
        for e in self.entries:
            if e.id == hid:
                return e
        raise KeyError(hid)

    def to_dict(self) -> dict:
        return {
            "all_passed": self.all_passed,
            "entries": [e.to_dict() for e in self.entries],
            "region": self.region.to_dict() if self.region else None,
            "coexistence": self.coexistence,
            "axis_roots": self.axis_roots,
            "resolution": self.resolution,
            "bounding_box": self.bounding_box,
            "tolerances": self.tolerances,
        }

    def to_json(self) -> str:
        return json_text(self.to_dict())

    def table(self) -> str:
        lines = [f"{'id':<4} {'status':<13} message"]
        for e in self.entries:
            lines.append(f"{e.id:<4} {e.status:<13} {e.message}")
        if self.region is not None:
            lines.append(f"region upper={list(self.region.upper)} lower={list(self.region.lower)}")
        return "\n".join(lines)


def _box(system: ReactionSystem, bounding_box) -> np.ndarray:
    n = system.n_species
    if bounding_box is None:
        try:
            bounding_box = geometry.default_box(system)
        except EmptyNullcline:
            bounding_box = 10.0
    return np.broadcast_to(np.asarray(bounding_box, dtype=float), (n,)).copy()


def _fd_jacobian(system: ReactionSystem, x: np.ndarray, step: float) -> np.ndarray:
    """Central-difference Jacobian for a batch of points ``x`` of shape (m, n)."""
    m, n = x.shape
    jac = np.empty((m, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        jac[:, :, k] = (system.fields((x + e).T) - system.fields((x - e).T)).T / (2 * step)
    return jac


def _cluster(points: np.ndarray, radius: float) -> list[np.ndarray]:
    centers: list[np.ndarray] = []
    for p in points:
        if not any(np.linalg.norm(p - c) <= radius for c in centers):
            centers.append(p)
    return centers


def check_coexistence_root(
    system: ReactionSystem, bounding_box=None, resolution: int | None = None, tol: float = 1e-9
) -> CheckResult:
    """Look for interior common zeros of all growth fields.

    Cells of the sampling grid on which every field takes both signs seed a
    Newton iteration (central-difference Jacobian, least-squares steps);
    polished roots are clustered at radius 1e-6.  Passes iff exactly one
    cluster with all coordinates above ``tol`` remains.
    """
    n = system.n_species
    box = _box(system, bounding_box)
    res = resolution or (201 if n == 2 else 41)
    coords, _ = geometry._grid(box, res)
    vals = system.fields(coords)

    corners = []
    for offs in np.ndindex(*(2,) * n):
        sl = tuple(slice(o, o + res - 1) for o in offs)
        corners.append(vals[(slice(None),) + sl])
    corners = np.stack(corners)
    straddle = np.all((corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0), axis=0)
    idx = np.argwhere(straddle)
    h = box / (res - 1)
    x = (idx + 0.5) * h

    step = 1e-6 * float(box.max())
    root_tol = 1e-10
    for _ in range(50):
        if len(x) == 0:
            break
        fx = system.fields(x.T).T
        jac = _fd_jacobian(system, x, step)
        dx = np.einsum("mij,mj->mi", np.linalg.pinv(jac), fx)
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15 * max(1.0, float(box.max())):
            break
    if len(x):
        fx = np.abs(system.fields(x.T).T).max(axis=1)
        good = (
            np.isfinite(fx)
            & (fx <= root_tol)
            & np.all(x > tol, axis=1)
            & np.all(x <= box * (1 + 1e-9), axis=1)
        )
        roots = _cluster(x[good], CLUSTER_RADIUS)
    else:
        roots = []

    data = {"roots": [r.tolist() for r in roots], "resolution": res}
    if len(roots) == 1:
        return CheckResult(PASS, f"unique coexistence state {roots[0].tolist()}", roots[0].tolist(), data)
    if not roots:
        flat = coords.reshape(n, -1)
        worst = np.abs(vals.reshape(n, -1)).max(axis=0)
        interior = np.all(flat > 0, axis=0)
        worst[~interior] = np.inf
        j = int(np.argmin(worst))
        return CheckResult(FAIL, "no interior common zero found", flat[:, j].tolist(), data)
    return CheckResult(
        FAIL, f"{len(roots)} distinct interior common zeros", [r.tolist() for r in roots[:10]], data
    )


def _root_name(i: int, k: int) -> str:
    return f"{SPECIES[k]}_{i + 1}"


def check_axis_roots(system: ReactionSystem, tol: float = 1e-9, bounding_box=None) -> CheckResult:
    """Every field must have exactly one positive root on every axis."""
    n = system.n_species
    box = None if bounding_box is None else _box(system, bounding_box)
    roots: dict[str, list[float]] = {}
    bad = []
    for i in range(n):
        for k in range(n):
            found = geometry.field_axis_roots(system, i, k, None if box is None else box[k])
            found = [r for r in found if r > tol]
            roots[_root_name(i, k)] = found
            if len(found) != 1:
                bad.append((i, k, found))
    data = {"roots": {name: (r[0] if len(r) == 1 else r) for name, r in roots.items()}}
    if bad:
        i, k, found = bad[0]
        w = np.zeros(n)
        w[k] = found[1] if len(found) > 1 else (box[k] if box is not None else 0.0)
        desc = "; ".join(
            f"{FIELDS[i]} on {SPECIES[k]}-axis has {len(f)} roots" for i, k, f in bad
        )
        return CheckResult(FAIL, desc, w.tolist(), data)
    if n == 3:
        for k in range(3):
            lam = [roots[_root_name(i, k)][0] for i in range(3)]
            spread = sum((a - b) ** 2 for a, b in [(lam[0], lam[1]), (lam[0], lam[2]), (lam[1], lam[2])])
            if spread == 0.0:
                w = np.zeros(3)
                w[k] = lam[0]
                return CheckResult(
                    FAIL, f"all three fields share the {SPECIES[k]}-axis root {lam[0]:.6g}", w.tolist(), data
                )
    return CheckResult(PASS, "unique axis roots", None, data)


def _sign_scan(system, small, large, points_per_axis=5):
    n = system.n_species
    near = np.linspace(small / points_per_axis, small, points_per_axis)
    far = np.linspace(large, 2 * large, points_per_axis)
    for label, axis, want_positive in (("near the origin", near, True), ("far out", far, False)):
        grid = np.stack(np.meshgrid(*([axis] * n), indexing="ij")).reshape(n, -1)
        vals = system.fields(grid)
        bad = ~(vals > 0) if want_positive else ~(vals < 0)
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            sign = "positive" if want_positive else "negative"
            return f"{FIELDS[i]} is not {sign} {label}", grid[:, j].tolist()
    return None, None


def check_sign_behavior(system: ReactionSystem, small: float | None = None, large: float | None = None) -> CheckResult:
    """Fields positive on ``(0, small]^n`` and negative on ``[large, 2 large]^n``.

    When the scales are left to their defaults (derived from the axis roots)
    a failure that disappears on a 10x wider scan is reported as
    indeterminate.
    """
    defaults = small is None and large is None
    if small is None or large is None:
        n = system.n_species
        found = [r for i in range(n) for k in range(n) for r in geometry.field_axis_roots(system, i, k)]
        lo, hi = (min(found), max(found)) if found else (1.0, 5.0)
        small = 0.01 * lo if small is None else small
        large = 2.0 * hi if large is None else large
    if not 0 < small < large:
        raise ValueError("need 0 < small < large")
    data = {"small": small, "large": large}
    msg, witness = _sign_scan(system, small, large)
    if msg is None:
        return CheckResult(PASS, f"sign pattern holds (small={small:.3g}, large={large:.3g})", None, data)
    if defaults and _sign_scan(system, small / 10, large * 10)[0] is None:
        return CheckResult(INDETERMINATE, msg + " at default scales; a 10x wider scan passes", witness, data)
    return CheckResult(FAIL, msg, witness, data)


def check_containment(system: ReactionSystem, region: Region, samples) -> CheckResult:
    """Every nullcline sample point must be inside the region or on its boundary."""
    for s in samples:
        labels = geometry.classify_points(region, s.points)
        outside = (labels == geometry.OUTSIDE_ABOVE) | (labels == geometry.OUTSIDE_BELOW)
        if np.any(outside):
            pts = s.points[outside]
            s_up = pts @ (1 / np.array(region.upper))
            s_lo = pts @ (1 / np.array(region.lower))
            excess = np.maximum(s_up - 1, 1 - s_lo)
            w = pts[int(np.argmax(excess))]
            return CheckResult(
                FAIL,
                f"{int(outside.sum())} points of the {s.label}-nullcline leave the region",
                w.tolist(),
                {"label": s.label, "count": int(outside.sum())},
            )
    return CheckResult(PASS, "all nullcline samples inside the region")


def verify_hypotheses(system: ReactionSystem, options: HypothesisOptions | None = None) -> HypothesisReport:
    """Run the four checks (H1-H4 or A1-A4) and fit the enclosing region."""
    opts = options or HypothesisOptions()
    n = system.n_species
    prefix = "H" if n == 2 else "A"
    box = _box(system, opts.bounding_box)
    res = opts.resolved_resolution(n)

    h1 = check_coexistence_root(system, box, res, opts.tol)
    h2 = check_axis_roots(system, opts.tol, box)
    h3 = check_sign_behavior(system, opts.small, opts.large)

    region = None
    try:
        samples = geometry.sample_nullclines(system, box, res, opts.band_tol)
        region = geometry.fit_region(samples, opts.margin)
        h4 = check_containment(system, region, samples)
        if h4.passed:
            h4.message = f"nullclines inside region upper={list(region.upper)} lower={list(region.lower)}"
        else:
            region = None
    except EmptyNullcline as exc:
        h4 = CheckResult(FAIL, str(exc), np.asarray(exc.witness if exc.witness is not None else box).tolist())
    except FitError as exc:
        w = exc.witness if exc.witness is not None else np.zeros(n)
        h4 = CheckResult(FAIL, f"{type(exc).__name__}: {exc}", np.asarray(w).tolist())

    entries = [
        HypothesisEntry(f"{prefix}{j + 1}", c.status, c.message, c.witness)
        for j, c in enumerate((h1, h2, h3, h4))
    ]
    return HypothesisReport(
        entries=entries,
        region=region,
        coexistence=h1.witness if h1.passed else None,
        axis_roots=h2.data.get("roots", {}),
        resolution=res,
        bounding_box=box.tolist(),
        tolerances={"tol": opts.tol, "band_tol": opts.band_tol, "margin": opts.margin},
    )
