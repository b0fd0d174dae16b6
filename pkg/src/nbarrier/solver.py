"""Traveling-wave profiles of competition-diffusion systems.

Two independent routes:

* :func:`solve_bvp` / :func:`solve_bvp_free_speed` discretize

      d_k X_k'' + theta X_k' + X_k f_k(X) = 0   on [-L, L],   X(-L) = e-,  X(L) = e+

  with second-order central differences and solve by damped Newton.  The
  nonlinear part of the Jacobian is formed by finite differences; it is
  block diagonal (one ``n x n`` block per node) so ``n`` residual sweeps
  suffice.
* :func:`time_march` integrates the parabolic system
  ``X_t = d X_yy + X f(X)`` with implicit diffusion and explicit reaction,
  and :func:`estimate_speed` reads the speed off the front positions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicSpline
from scipy.sparse.linalg import factorized, splu

from ._io import csv_text
from .errors import BlowUp, FrontTooClose, JacobianSingular, NoConvergence, NoCrossing, PhaseDegenerate
from .model import SPECIES, BoundaryState, ReactionSystem, WaveProblem

NEGATIVE_TOL = 1e-12


@dataclass(frozen=True)
class NewtonOptions:
    tol: float = 1e-10
    max_iter: int = 200
    fd_step: float = 1e-7
    armijo: float = 1e-4
    min_damping: float = 2.0**-20


@dataclass
class WaveSolution:
    x: np.ndarray
    profiles: np.ndarray
    theta: float
    residual_norm: float
    problem: WaveProblem
    iterations: int = 0
    bc_error: float = 0.0

    @property
    def system(self) -> ReactionSystem:
        return self.problem.system

    @property
    def diffusion(self) -> tuple:
        return self.problem.system.diffusion

    @property
    def n_species(self) -> int:
        return self.profiles.shape[0]

    @property
    def e_minus(self) -> BoundaryState:
        return self.problem.e_minus

    @property
    def e_plus(self) -> BoundaryState:
        return self.problem.e_plus

    def reported_profiles(self) -> np.ndarray:
        """Profiles with round-off negatives (above -1e-12) clamped to zero."""
        p = self.profiles.copy()
        p[(p < 0) & (p >= -NEGATIVE_TOL)] = 0.0
        return p

    def metadata(self) -> dict:
        return {
            "theta": self.theta,
            "free_speed": self.problem.free_speed,
            "L": self.problem.L,
            "N": self.problem.N,
            "residual_norm": self.residual_norm,
            "bc_error": self.bc_error,
            "iterations": self.iterations,
            "e_minus": list(self.e_minus.point),
            "e_plus": list(self.e_plus.point),
            "min_value": float(self.profiles.min()),
        }

    def to_csv(self, weights=None) -> str:
        n = self.n_species
        w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
        prof = self.reported_profiles()
        p = w @ prof
        q = (w * np.asarray(self.diffusion)) @ prof
        cols = [self.x, *prof, p, q]
        return csv_text(("x",) + SPECIES[:n] + ("p", "q"), zip(*cols))


# -- discretization ----------------------------------------------------------


def _grid(problem: WaveProblem):
    x = np.linspace(-problem.L, problem.L, problem.N + 1)
    return x, x[1] - x[0]


def _discrete_residual(system: ReactionSystem, full: np.ndarray, theta: float, h: float) -> np.ndarray:
    """Residual at interior nodes; ``full`` has shape (n, N+1)."""
    d = np.asarray(system.diffusion)[:, None]
    left, mid, right = full[:, :-2], full[:, 1:-1], full[:, 2:]
    return (
        d * (right - 2 * mid + left) / h**2
        + theta * (right - left) / (2 * h)
        + mid * system.fields(mid)
    )


def residual_norm(system: ReactionSystem, solution) -> float:
    """Max over interior nodes and species of the discrete residual."""
    x = np.asarray(solution.x, dtype=float)
    h = x[1] - x[0]
    return float(np.max(np.abs(_discrete_residual(system, np.asarray(solution.profiles), solution.theta, h))))


def _linear_operator(d, theta, h, m, n):
    """Diffusion + advection stencil on the interleaved interior unknowns."""
    size = m * n
    dvec = np.tile(np.asarray(d, dtype=float), m)
    main = -2.0 * dvec / h**2
    up = (dvec / h**2 + theta / (2 * h))[: size - n]
    lo = (dvec / h**2 - theta / (2 * h))[n:]
    return sp.diags([lo, main, up], [-n, 0, n], shape=(size, size), format="csr")


def _reaction_blocks(system, mid, step):
    """Forward-difference Jacobian blocks of X_k f_k(X) at every node: (m, n, n)."""
    n, m = mid.shape
    base = mid * system.fields(mid)
    scale = np.maximum(1.0, np.abs(mid))
    blocks = np.empty((m, n, n))
    for j in range(n):
        pert = mid.copy()
        dj = step * scale[j]
        pert[j] += dj
        blocks[:, :, j] = ((pert * system.fields(pert) - base) / dj).T
    return blocks


def _block_diag(blocks):
    m, n, _ = blocks.shape
    rows = (np.arange(m)[:, None, None] * n + np.arange(n)[None, :, None]).repeat(n, axis=2)
    cols = (np.arange(m)[:, None, None] * n + np.arange(n)[None, None, :]).repeat(n, axis=1)
    return sp.csr_matrix((blocks.ravel(), (rows.ravel(), cols.ravel())), shape=(m * n, m * n))


def _initial_profiles(problem: WaveProblem, x, init):
    em = np.asarray(problem.e_minus.point)
    ep = np.asarray(problem.e_plus.point)
    n = problem.system.n_species
    if init is None or (isinstance(init, str) and init == "tanh"):
        wt = 0.5 * (1 + np.tanh(x))
        full = em[:, None] * (1 - wt) + ep[:, None] * wt
    elif isinstance(init, str):
        raise ValueError(f"unknown initial guess {init!r}")
    elif hasattr(init, "profiles"):
        src_x = np.asarray(getattr(init, "x", getattr(init, "y", None)), dtype=float)
        src = np.asarray(init.profiles, dtype=float)
        full = np.stack([np.interp(x, src_x, src[k]) for k in range(n)])
    else:
        full = np.array(init, dtype=float)
        if full.shape != (n, x.size):
            raise ValueError(f"initial profiles must have shape {(n, x.size)}")
    full = full.copy()
    full[:, 0] = em
    full[:, -1] = ep
    return full


def _newton(residual, jacobian, z, opts: NewtonOptions):
    """Damped Newton on the max-norm of ``residual``; returns (z, norm, iterations)."""
    r = residual(z)
    norm = float(np.max(np.abs(r)))
    for it in range(opts.max_iter):
        if not np.isfinite(norm):
            raise NoConvergence("residual is not finite")
        if norm <= opts.tol:
            return z, norm, it
        try:
            lu = splu(jacobian(z).tocsc())
        except RuntimeError as exc:
            raise JacobianSingular(str(exc)) from exc
        delta = lu.solve(-r)
        if not np.all(np.isfinite(delta)):
            raise JacobianSingular("Newton step is not finite")
        lam = 1.0
        while True:
            trial = z + lam * delta
            r_trial = residual(trial)
            n_trial = float(np.max(np.abs(r_trial)))
            if np.isfinite(n_trial) and n_trial <= (1 - opts.armijo * lam) * norm:
                break
            lam *= 0.5
            if lam < opts.min_damping:
                raise NoConvergence(
                    f"line search failed at iteration {it} with residual {norm:.3e}"
                )
        z, r, norm = trial, r_trial, n_trial
    if norm <= opts.tol:
        return z, norm, opts.max_iter
    raise NoConvergence(f"no convergence in {opts.max_iter} iterations (residual {norm:.3e})")


def _finish(problem, x, full, theta, iterations, opts) -> WaveSolution:
    h = x[1] - x[0]
    res = float(np.max(np.abs(_discrete_residual(problem.system, full, theta, h))))
    bc = max(
        float(np.max(np.abs(full[:, 0] - problem.e_minus.point))),
        float(np.max(np.abs(full[:, -1] - problem.e_plus.point))),
    )
    return WaveSolution(x, full, float(theta), res, problem, iterations, bc)


def _phase_row(problem: WaveProblem, x, phase_anchor):
    em = np.asarray(problem.e_minus.point)
    ep = np.asarray(problem.e_plus.point)
    diff = np.nonzero(em != ep)[0]
    if diff.size == 0:
        raise PhaseDegenerate("end states agree in every component")
    k = int(diff[0])
    target = em[k] + phase_anchor * (ep[k] - em[k])
    # x = 0 lies between nodes j and j+1 (or on node j)
    j = int(np.searchsorted(x, 0.0, side="right") - 1)
    t = (0.0 - x[j]) / (x[j + 1] - x[j])
    return k, target, [(node, wt) for node, wt in ((j, 1 - t), (j + 1, t)) if wt != 0]


def _solve(problem, init, opts, free_theta, phase_anchor, free_end, theta0):
    """Shared Newton driver.

    Unknowns are the interior values (node-major, species-minor), then
    optionally the boundary value of the phase component at ``free_end``,
    then optionally theta.  A phase equation is appended whenever
    ``phase_anchor`` is set.
    """
    system = problem.system
    n = system.n_species
    d = np.asarray(system.diffusion)
    x, h = _grid(problem)
    m = problem.N - 1
    size = m * n
    full = _initial_profiles(problem, x, init)
    phase = None
    if phase_anchor is not None:
        if not 0 < phase_anchor < 1:
            raise ValueError("phase_anchor must lie in (0, 1)")
        phase = _phase_row(problem, x, phase_anchor)
        if any(node in (0, problem.N) for node, _ in phase[2]):
            raise ValueError("phase point must be an interior node")
    n_extra = (free_end is not None) + bool(free_theta)
    k_phase = phase[0] if phase else None

    def unpack(z):
        f = full.copy()
        f[:, 1:-1] = z[:size].reshape(m, n).T
        if free_end == "plus":
            f[k_phase, -1] = z[size]
        elif free_end == "minus":
            f[k_phase, 0] = z[size]
        theta = z[-1] if free_theta else problem.theta
        return f, theta

    def residual(z):
        f, theta = unpack(z)
        r = _discrete_residual(system, f, theta, h).T.ravel()
        if phase is None:
            return r
        k, target, weights = phase
        return np.append(r, sum(wt * f[k, node] for node, wt in weights) - target)

    def jacobian(z):
        f, theta = unpack(z)
        jac = _linear_operator(d, theta, h, m, n) + _block_diag(
            _reaction_blocks(system, f[:, 1:-1], opts.fd_step)
        )
        if phase is None:
            return jac
        cols = []
        if free_end is not None:
            col = np.zeros(size)
            dk = d[k_phase]
            if free_end == "plus":
                col[(m - 1) * n + k_phase] = dk / h**2 + theta / (2 * h)
            else:
                col[k_phase] = dk / h**2 - theta / (2 * h)
            cols.append(col)
        if free_theta:
            cols.append(((f[:, 2:] - f[:, :-2]) / (2 * h)).T.ravel())
        top = sp.hstack([jac] + [sp.csr_matrix(c.reshape(-1, 1)) for c in cols])
        row = np.zeros(size + n_extra)
        for node, wt in phase[2]:
            row[(node - 1) * n + k_phase] = wt
        return sp.vstack([top, sp.csr_matrix(row.reshape(1, -1))]).tocsr()

    z0 = full[:, 1:-1].T.ravel()
    if free_end == "plus":
        z0 = np.append(z0, full[k_phase, -1])
    elif free_end == "minus":
        z0 = np.append(z0, full[k_phase, 0])
    if free_theta:
        z0 = np.append(z0, float(theta0))
    z, _, its = _newton(residual, jacobian, z0, opts)
    f, theta = unpack(z)
    return _finish(problem, x, f, theta, its, opts)


def solve_bvp(
    problem: WaveProblem,
    init="tanh",
    newton_opts: NewtonOptions | None = None,
    phase_anchor: float | None = None,
    free_end: str | None = None,
) -> WaveSolution:
    """Fixed-speed wave on the truncated domain with Dirichlet ends.

    For a monostable connection at supercritical speed every mode decays
    toward the unstable end state, so pinning both ends over-determines
    the truncated problem and Newton lands on a boundary layer.  Passing
    ``phase_anchor`` and ``free_end`` ("minus" or "plus", the end next to
    that state) releases the boundary value of the phase component there
    and fixes translation with the phase condition instead.
    """
    if problem.free_speed:
        raise ValueError("solve_bvp needs a fixed theta; use solve_bvp_free_speed")
    if (phase_anchor is None) != (free_end is None):
        raise ValueError("phase_anchor and free_end go together")
    if free_end not in (None, "minus", "plus"):
        raise ValueError("free_end must be 'minus' or 'plus'")
    return _solve(problem, init, newton_opts or NewtonOptions(), False, phase_anchor, free_end, 0.0)


def solve_bvp_free_speed(
    problem: WaveProblem,
    init="tanh",
    phase_anchor: float = 0.5,
    newton_opts: NewtonOptions | None = None,
    theta0: float = 0.0,
) -> WaveSolution:
    """Wave with unknown speed, pinned by the phase condition

    ``X_k(0) = e-_k + phase_anchor (e+_k - e-_k)`` for the first component
    ``k`` in which the end states differ.
    """
    if phase_anchor is None or not 0 < phase_anchor < 1:
        raise ValueError("phase_anchor must lie in (0, 1)")
    return _solve(problem, init, newton_opts or NewtonOptions(), True, phase_anchor, None, theta0)


def interpolate_solution(solution: WaveSolution, N: int) -> WaveSolution:
    """Cubic-spline transfer of a solution onto a uniform grid with ``N`` intervals."""
    prob = solution.problem
    new_prob = WaveProblem(prob.system, prob.e_minus, prob.e_plus, prob.theta, prob.L, N)
    x, _ = _grid(new_prob)
    full = np.stack([CubicSpline(solution.x, p)(x) for p in solution.profiles])
    full[:, 0] = prob.e_minus.point
    full[:, -1] = prob.e_plus.point
    sol = WaveSolution(x, full, solution.theta, 0.0, new_prob)
    sol.residual_norm = residual_norm(prob.system, sol)
    return sol


# -- time marching -------------------------------------------------------------


@dataclass
class MarchState:
    y: np.ndarray
    profiles: np.ndarray
    t: float
    dt: float
    system: ReactionSystem
    front_position: float | None = None
    front_history: list = field(default_factory=list)

    @property
    def x(self):
        return self.y

    @property
    def diffusion(self):
        return self.system.diffusion

    @property
    def speed_history(self) -> list:
        """Finite-difference speeds between consecutive recorded front positions."""
        hist = [(t, p) for t, p in self.front_history if p is not None]
        return [
            (t1, (p1 - p0) / (t1 - t0)) for (t0, p0), (t1, p1) in zip(hist, hist[1:]) if t1 > t0
        ]

    def to_csv(self) -> str:
        n = self.profiles.shape[0]
        return csv_text(("y",) + SPECIES[:n], zip(self.y, *self.profiles))


def crossings(y, values, level) -> np.ndarray:
    """Positions where ``values`` crosses ``level`` (linear interpolation)."""
    s = np.sign(np.asarray(values, dtype=float) - level)
    out = []
    for j in range(len(s) - 1):
        if s[j] * s[j + 1] < 0:
            a, b = values[j] - level, values[j + 1] - level
            out.append(y[j] + (y[j + 1] - y[j]) * a / (a - b))
        elif s[j] == 0 and 0 < j and s[j - 1] * s[j + 1] < 0:
            out.append(y[j])
    return np.array(out, dtype=float)


def _crossing_indices(values, level):
    s = np.sign(values - level)
    return np.nonzero(s[:-1] * s[1:] < 0)[0]


def time_march(
    system: ReactionSystem,
    y,
    initial,
    dt: float,
    T: float,
    snapshot_times=None,
    scheme: str = "imex_euler",
    front_level: float | None = None,
    front_species: int = 0,
    blowup_threshold: float | None = None,
    boundary_cells: int = 10,
) -> list[MarchState]:
    """IMEX integration of ``X_t = d X_yy + X f(X)`` with zero-flux ends.

    Each step solves ``(I - dt d_k D2) X_k^{new} = X_k + dt X_k f_k(X)``.
    Returns one :class:`MarchState` per requested snapshot time (default:
    just ``T``).  ``front_level`` defaults to the midpoint of the initial
    range of species ``front_species``; the front must stay at least
    ``boundary_cells`` cells away from both ends.
    """
    if scheme != "imex_euler":
        raise ValueError(f"unknown scheme {scheme!r}")
    y = np.asarray(y, dtype=float)
    X = np.array(initial, dtype=float)
    n = system.n_species
    M = y.size
    if X.shape != (n, M):
        raise ValueError(f"initial profiles must have shape {(n, M)}")
    if np.any(X < 0):
        raise ValueError("initial profiles must be nonnegative")
    h = y[1] - y[0]
    if not np.allclose(np.diff(y), h):
        raise ValueError("grid must be uniform")
    if not (dt > 0 and T >= 0):
        raise ValueError("need dt > 0 and T >= 0")
    times = sorted(float(t) for t in (snapshot_times if snapshot_times is not None else [T]))
    if times and (times[0] < 0 or times[-1] > T + 1e-12):
        raise ValueError("snapshot times must lie in [0, T]")
    if blowup_threshold is None:
        blowup_threshold = 10.0 * max(1.0, float(X.max()))
    if front_level is None:
        col = X[front_species]
        front_level = 0.5 * (col.min() + col.max())

    solvers = []
    for d in system.diffusion:
        main = np.full(M, 1 + 2 * dt * d / h**2)
        off = np.full(M - 1, -dt * d / h**2)
        upper, lower = off.copy(), off.copy()
        upper[0] *= 2  # reflected ghost node at each end
        lower[-1] *= 2
        A = sp.diags([lower, main, upper], [-1, 0, 1], format="csc")
        solvers.append(factorized(A))

    def front(Z):
        col = Z[front_species]
        idx = _crossing_indices(col, front_level)
        if idx.size and (idx.min() < boundary_cells or idx.max() > M - 2 - boundary_cells):
            raise FrontTooClose(f"front within {boundary_cells} cells of the boundary")
        pos = crossings(y, col, front_level)
        return float(pos[0]) if pos.size else None

    history = []
    snapshots = []
    t = 0.0
    step = 0
    nsteps = int(round(T / dt))
    if abs(nsteps * dt - T) > 1e-9 * max(1.0, T):
        raise ValueError("T must be an integer multiple of dt")
    pending = list(times)

    def record(t):
        pos = front(X)
        history.append((t, pos))
        while pending and pending[0] <= t + 0.5 * dt:
            pending.pop(0)
            snapshots.append(MarchState(y.copy(), X.copy(), t, dt, system, pos, list(history)))

    record(0.0)
    while step < nsteps:
        F = system.fields(X)
        if dt * np.max(np.abs(F)) > 0.5:
            raise ValueError(f"dt={dt} violates dt*max|field| <= 0.5 at t={t:.4g}")
        rhs = X + dt * X * F
        X = np.stack([solvers[k](rhs[k]) for k in range(n)])
        step += 1
        t = step * dt
        if not np.all(np.isfinite(X)) or X.max() > blowup_threshold:
            raise BlowUp(f"solution exceeded {blowup_threshold:g} at t={t:.4g}")
        record(t)
    return snapshots


def estimate_speed(snapshots, level: float | None = None, species: int = 0) -> float:
    """Least-squares slope of front position against time.

    The front is the first crossing of ``level`` by the given species; by
    default the level is the midpoint of the profile's two end values.
    """
    snaps = list(snapshots)
    if len(snaps) < 3:
        raise ValueError("need at least three snapshots")
    times, positions = [], []
    for s in snaps:
        y = np.asarray(getattr(s, "y", getattr(s, "x", None)), dtype=float)
        col = np.asarray(s.profiles, dtype=float)[species]
        lev = 0.5 * (col[0] + col[-1]) if level is None else level
        pos = crossings(y, col, lev)
        if pos.size == 0:
            raise NoCrossing(f"no crossing of level {lev:g} at t={s.t:g}")
        times.append(float(s.t))
        positions.append(float(pos[0]))
    t = np.array(times)
    p = np.array(positions)
    tc = t - t.mean()
    return float(np.dot(tc, p - p.mean()) / np.dot(tc, tc))


def align_profile(y, profiles, level: float, species: int = 0, at: float = 0.0):
    """Shift coordinates so the first crossing of ``level`` sits at ``at``."""
    pos = crossings(y, np.asarray(profiles)[species], level)
    if pos.size == 0:
        raise NoCrossing(f"no crossing of level {level:g}")
    return np.asarray(y, dtype=float) - pos[0] + at
