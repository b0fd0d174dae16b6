"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (also collected into the terminal
summary) before asserting.
"""

import subprocess
import sys
import time

import numpy as np
import pytest

from nbarrier import cli, geometry, nbmp, solver, verify
from nbarrier.geometry import Region, classify_points, fit_region, sample_combined_field, sample_nullclines
from nbarrier.hypotheses import HypothesisOptions, verify_hypotheses
from nbarrier.model import BoundaryState, WaveProblem
from nbarrier.solver import MarchState, estimate_speed, solve_bvp, solve_bvp_free_speed, time_march

from conftest import ACCEPTANCE_LINES, BISTABLE_C, SYM3_C, brute_force_region, lv, lv_nullcline_points, random_lv


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_1_two_species_end_to_end(lv2):
    start = time.perf_counter()
    region = fit_region(sample_nullclines(lv2, geometry.default_box(lv2), 201, 1e-10))
    upper, lower = brute_force_region(lv_nullcline_points((1, 1), BISTABLE_C, 80))
    fit_err = max(np.max(np.abs(np.subtract(region.upper, upper))), np.max(np.abs(np.subtract(region.lower, lower))))
    expected_err = np.max(np.abs(np.subtract(region.upper + region.lower, (1, 1, 0.5, 0.5))))

    problem = WaveProblem(lv2, BoundaryState.at((1, 0)), BoundaryState.at((0, 1)), "free", 30.0, 600)
    wave = solve_bvp_free_speed(problem, phase_anchor=0.5)
    chi = nbmp.chi_indicator(problem.e_minus, problem.e_plus)
    rep = verify.sweep_weights(wave, region, lv2.diffusion, chi, verify.weight_grid(2), 1e-3)
    elapsed = time.perf_counter() - start

    ok = (
        fit_err <= 1e-6
        and expected_err <= 1e-6
        and abs(wave.theta) <= 1e-6
        and wave.residual_norm <= 1e-10
        and len(rep.records) == 25
        and rep.passed
        and elapsed <= 60
    )
    report(
        1,
        ok,
        f"fit err vs enumeration {fit_err:.1e}, |theta|={abs(wave.theta):.1e}, "
        f"residual {wave.residual_norm:.1e}, sweep {rep.overall}, {elapsed:.1f}s",
    )


def test_criterion_2_unequal_diffusion():
    system = lv((1, 1), BISTABLE_C, (1, 2))
    region = fit_region(sample_nullclines(system, geometry.default_box(system)))
    b = nbmp.bounds((1, 1), system.diffusion, region, 1)
    exact = nbmp.bounds((1, 1), (1, 2), Region((1, 1), (0.5, 0.5)), 1)
    problem = WaveProblem(system, BoundaryState.at((1, 0)), BoundaryState.at((0, 1)), "free")
    wave = solve_bvp_free_speed(problem)
    rep = verify.sweep_weights(wave, region, system.diffusion, 1, verify.weight_grid(2), 1e-3)
    ok = (
        (exact.p_lower, exact.p_upper) == (0.25, 2.0)
        and abs(b.p_lower - 0.25) <= 1e-12
        and abs(b.p_upper - 2.0) <= 1e-12
        and wave.residual_norm <= 1e-10
        and rep.passed
    )
    report(2, ok, f"bounds ({b.p_lower!r}, {b.p_upper!r}), theta={wave.theta:.5f}, sweep {rep.overall}")


def test_criterion_3_chi_dichotomy(lv2):
    # oracle: compact initial data spreads as a front moving left into extinction
    y = np.linspace(-120, 120, 2401)
    X0 = np.stack([np.where(np.abs(y) <= 2, 1.0, 0.0), np.zeros_like(y)])
    snaps = time_march(lv2, y, X0, 0.05, 40, snapshot_times=np.arange(20, 41, 2), front_level=0.5)
    march_speed = estimate_speed(snaps, 0.5)
    last = snaps[-1]
    pos = solver.crossings(last.y, last.profiles[0], 0.5)[0]
    left = last.y < 0
    init = MarchState(last.y[left] - pos, last.profiles[:, left], last.t, last.dt, lv2)

    problem = WaveProblem(lv2, BoundaryState.at((0, 0)), BoundaryState.at((1, 0)), -2.5, 60.0, 1200)
    wave = solve_bvp(problem, init=init, phase_anchor=0.5, free_end="minus")
    chi = nbmp.chi_indicator(problem.e_minus, problem.e_plus)
    region = fit_region(sample_nullclines(lv2, geometry.default_box(lv2)))
    rep = verify.sweep_weights(wave, region, lv2.diffusion, chi, verify.weight_grid(2), 1e-3)
    min_p = min(r.observed_min_p for r in rep.records)
    ok = (
        march_speed < -1.5
        and wave.residual_norm <= 1e-10
        and chi == 0
        and all(r.p_lower == 0 for r in rep.records)
        and rep.passed
        and min_p >= -1e-12
    )
    report(3, ok, f"march speed {march_speed:.3f}, chi={chi}, residual {wave.residual_norm:.1e}, min p {min_p:.1e}, sweep {rep.overall}")


def test_criterion_4_combined_field_containment():
    rng = np.random.default_rng(20240601)
    weights = np.logspace(-1, 1, 10)
    systems, checked, outside, tried = 0, 0, 0, 0
    while systems < 20:
        tried += 1
        system, _, _ = random_lv(rng)
        rep = verify_hypotheses(system, HypothesisOptions(margin=0.01))
        if not rep.all_passed:
            continue
        systems += 1
        box = geometry.default_box(system)
        for a in weights:
            for b in weights:
                pts = sample_combined_field(system, (a, b), box).points
                labels = classify_points(rep.region, pts)
                checked += len(pts)
                outside += int(np.sum((labels != "inside") & (labels != "boundary")))
    report(4, outside == 0 and systems == 20, f"{systems} systems ({tried} drawn), {checked} C_F points, {outside} outside")


def test_criterion_5_formula_properties():
    rng = np.random.default_rng(7)
    rel = 1e-12
    failures = {"homogeneity": 0, "permutation": 0, "monotonicity": 0, "ordering": 0}

    def close(a, b):
        return abs(a - b) <= rel * max(abs(a), abs(b)) or a == b

    for _ in range(1000):
        n = int(rng.integers(2, 4))
        w = rng.uniform(0.05, 20, n)
        d = rng.uniform(0.05, 20, n)
        upper = rng.uniform(0.1, 10, n)
        region = Region(upper, upper * rng.uniform(0.05, 0.95, n))
        chi = int(rng.integers(0, 2))
        base = nbmp.bounds(w, d, region, chi)

        c = float(np.exp(rng.uniform(-5, 5)))
        scaled = nbmp.bounds(c * w, d, region, chi)
        if not (close(scaled.p_lower, c * base.p_lower) and close(scaled.p_upper, c * base.p_upper)):
            failures["homogeneity"] += 1

        perm = rng.permutation(n)
        pr = Region(np.array(region.upper)[perm], np.array(region.lower)[perm])
        permuted = nbmp.bounds(w[perm], d[perm], pr, chi)
        if not (close(permuted.p_lower, base.p_lower) and close(permuted.p_upper, base.p_upper)):
            failures["permutation"] += 1

        bigger = Region(np.array(region.upper) * rng.uniform(1, 3, n), np.array(region.lower) * rng.uniform(0.1, 1, n))
        grown = nbmp.bounds(w, d, bigger, chi)
        if grown.p_upper < base.p_upper * (1 - rel) or grown.p_lower > base.p_lower * (1 + rel):
            failures["monotonicity"] += 1

        if not base.p_lower <= base.p_upper:
            failures["ordering"] += 1
    report(5, not any(failures.values()), f"1000 draws, failures {failures}")


def test_criterion_6_three_species(lv3):
    region = fit_region(sample_nullclines(lv3, geometry.default_box(lv3), 41))
    upper, lower = brute_force_region(lv_nullcline_points((1, 1, 1), SYM3_C, 6))
    oracle_err = max(np.max(np.abs(np.subtract(region.upper, upper))), np.max(np.abs(np.subtract(region.lower, lower))))
    expected_err = np.max(np.abs(np.subtract(region.upper + region.lower, (1, 1, 1, 0.5, 0.5, 0.5))))

    y = np.linspace(-40, 40, 801)
    X0 = np.zeros((3, y.size))
    X0[0] = y < 0
    X0[1] = y >= 0
    X0[2] = 0.05 * np.exp(-(y**2))
    snap = time_march(lv3, y, X0, 0.05, 200, front_level=0.5)[-1]
    rep = verify.sweep_weights(snap, region, lv3.diffusion, 1, verify.weight_grid(3, (0.5, 1, 2)), 1e-2)
    ok = oracle_err <= 1e-6 and expected_err <= 1e-6 and len(rep.records) == 27 and rep.passed
    report(6, ok, f"fit err vs enumeration {oracle_err:.1e}, snapshot t={snap.t:g}, sweep {rep.overall}")


def test_criterion_7_solver_cross_validation():
    system = lv((1.0, 0.9), BISTABLE_C)
    problem = WaveProblem(system, BoundaryState.at((1, 0)), BoundaryState.at((0, 0.9)), "free", 30.0, 600)
    wave = solve_bvp_free_speed(problem)

    y = np.linspace(-60, 60, 1201)
    X0 = np.zeros((2, y.size))
    X0[0] = y < -20
    X0[1] = 0.9 * (y >= -20)
    snap = time_march(system, y, X0, 0.05, 200, front_level=0.5)[-1]
    ym = solver.align_profile(snap.y, snap.profiles, 0.5)
    xb = solver.align_profile(wave.x, wave.profiles, 0.5)
    sup = max(np.max(np.abs(np.interp(xb, ym, snap.profiles[k]) - wave.profiles[k])) for k in range(2))

    h = 0.05
    grid = h * np.arange(-400, 401)
    base = 0.5 * (1 - np.tanh(h * np.arange(-800, 801)))
    snaps = []
    for step in range(11):
        window = base[400 - step : 1201 - step]
        snaps.append(MarchState(grid, np.stack([window, 1 - window]), 0.1 * step, 0.1, None))
    injected = h / 0.1
    recovered = estimate_speed(snaps)
    ok = sup <= 1e-2 and abs(recovered - injected) <= 1e-12
    report(7, ok, f"BVP vs march sup-norm {sup:.2e} (theta={wave.theta:.5f}), synthetic speed error {abs(recovered - injected):.1e}")


def test_criterion_8_determinism(tmp_path):
    outputs = []
    for run in ("a", "b"):
        out = tmp_path / run
        proc = subprocess.run(
            [sys.executable, "-m", "nbarrier", "verify", "--config", "lv2_bistable.json", "--out", str(out)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stderr
        outputs.append({name: (out / name).read_bytes() for name in ("report.json", "report.csv", "wave.csv", "wave.json")})
    in_process = tmp_path / "c"
    assert cli.main(["verify", "--config", "lv2_bistable.json", "--out", str(in_process)]) == 0
    same = outputs[0] == outputs[1] and (in_process / "report.json").read_bytes() == outputs[0]["report.json"]
    report(8, same, "two subprocess runs and one in-process run give byte-identical reports")
