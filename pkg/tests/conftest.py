import numpy as np
import pytest

from nbarrier import BoundaryState, LotkaVolterraParams, WaveProblem, make_lotka_volterra
from nbarrier.solver import solve_bvp_free_speed

BISTABLE_C = [[1.0, 2.0], [2.0, 1.0]]
SYM3_C = [[1.0, 2.0, 2.0], [2.0, 1.0, 2.0], [2.0, 2.0, 1.0]]


def lv(sigma, c, d=None):
    d = d if d is not None else (1.0,) * len(sigma)
    return make_lotka_volterra(LotkaVolterraParams(sigma, c), d)


@pytest.fixture(scope="session")
def lv2():
    return lv((1.0, 1.0), BISTABLE_C)


@pytest.fixture(scope="session")
def lv3():
    return lv((1.0, 1.0, 1.0), SYM3_C)


@pytest.fixture(scope="session")
def bistable_problem(lv2):
    return WaveProblem(lv2, BoundaryState.at((1, 0)), BoundaryState.at((0, 1)), "free", 30.0, 600)


@pytest.fixture(scope="session")
def bistable_wave(bistable_problem):
    return solve_bvp_free_speed(bistable_problem, phase_anchor=0.5)


def random_lv(rng, n=2):
    sigma = rng.uniform(0.5, 2.0, n)
    c = rng.uniform(0.2, 3.0, (n, n))
    return lv(sigma, c), sigma, c


def first_crossing(x, values, level):
    """Independent linear-interpolation crossing used as a test oracle."""
    values = np.asarray(values)
    for j in range(len(values) - 1):
        a, b = values[j] - level, values[j + 1] - level
        if a == 0:
            return x[j]
        if a * b < 0:
            return x[j] + (x[j + 1] - x[j]) * a / (a - b)
    return None


def lv_nullcline_points(sigma, c, density=60):
    """Points on the straight nullclines of a Lotka-Volterra system, built analytically."""
    sigma = np.asarray(sigma, float)
    c = np.asarray(c, float)
    n = sigma.size
    pts = []
    for i in range(n):
        corners = np.diag(sigma[i] / c[i])
        if n == 2:
            t = np.linspace(0, 1, density)[:, None]
            pts.append(t * corners[0] + (1 - t) * corners[1])
        else:
            bary = [(a, b, density - a - b) for a in range(density + 1) for b in range(density + 1 - a)]
            w = np.array(bary, float) / density
            pts.append(w @ corners)
    return np.vstack(pts)


def brute_force_region(points, tol=1e-12):
    """Tightest band by enumerating every plane through n sample points.

    Intercepts a_k = 1/intercept; the upper face needs a.P <= 1 for all P and
    minimizes sum of intercepts, the lower face needs a.P >= 1 and maximizes it.
    """
    import itertools

    pts = np.unique(np.round(points, 14), axis=0)
    n = pts.shape[1]
    best_up, best_lo = None, None
    for combo in itertools.combinations(range(len(pts)), n):
        P = pts[list(combo)]
        if abs(np.linalg.det(P)) < 1e-12:
            continue
        a = np.linalg.solve(P, np.ones(n))
        if np.any(a <= 0):
            continue
        s = pts @ a
        obj = float(np.sum(1 / a))
        if np.all(s <= 1 + tol) and (best_up is None or obj < best_up[0]):
            best_up = (obj, 1 / a)
        if np.all(s >= 1 - tol) and (best_lo is None or obj > best_lo[0]):
            best_lo = (obj, 1 / a)
    return best_up[1], best_lo[1]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
