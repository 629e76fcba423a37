"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run under pytest (``pytest tests/test_acceptance.py -v``) or directly
(``python3 tests/test_acceptance.py``).
"""

import math
import os
import sys
import tempfile
import time

import numpy as np
import pytest

from nls.constructions import rounding
from nls.energies import EnergyParams, attraction, frac_perimeter, repulsion, total_G
from nls.fields import DensityField, Grid, SetMask, dilate
from nls.harness import (SET_SWEEP_OPTIONS, CheckResult, check_fuglede, check_quantitative_isoperimetric,
                         check_sobolev_bound_R, check_stability_suite, emit_report, sweep)
from nls.kernels import exponential, indicator, lipschitz_constant_C1, riesz, truncated_riesz, zero
from nls.optimize import gradient_G, project_box_mass, random_density

_OUT = tempfile.mkdtemp(prefix="nls-acceptance-")
_FIRST_RUN = {}


def _report(number: int, ok: bool, detail: str) -> None:
    line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    sys.__stdout__.write(line + "\n")
    sys.__stdout__.flush()


def _interval(grid, lo, hi):
    x = grid.axis()
    return SetMask(grid, ((x > lo) & (x < hi)).astype(float))


def _write(results, name):
    d = os.path.join(_OUT, name)
    paths = emit_report(results, d, {"criterion": name, "seed": 42, "deterministic": True})
    return {os.path.basename(p): open(p, "rb").read() for p in paths if p.endswith(".csv")}


# ----------------------------------------------------------------- criteria

def criterion_1():
    t = time.perf_counter()
    g = Grid(1, 8.0, 4096)
    P = frac_perimeter(_interval(g, 0.0, 1.0), 0.5)
    dt = time.perf_counter() - t
    ok = abs(P - 8.0) <= 0.01 * 8.0 and dt <= 60
    return ok, f"P_s([0,1]) = {P:.6f} (target 8, 1%), {dt:.1f} s"


def criterion_2():
    g = Grid(1, 8.0, 4096)
    R = repulsion(_interval(g, 0.0, 1.0), kernel=riesz(0.5))
    I = attraction(_interval(g, -0.5, 0.5), alpha=2.0)
    ok = abs(R - 8 / 3) <= 0.01 * 8 / 3 and abs(I - 1 / 6) <= 0.005 / 6
    return ok, f"R = {R:.6f} (8/3, 1%), I = {I:.6f} (1/6, 0.5%)"


def criterion_3():
    g = Grid(1, 8.0, 2048)
    base = DensityField(g, _interval(g, -1.0, 1.0).values)
    worst = 0.0
    parts = []
    for t in (1.25, 2.0):
        scaled = dilate(base, t)
        mask, smask = SetMask(g, base.values), SetMask(g, (scaled.values > 0.5).astype(float))
        meas = {
            "P_s": (math.log(frac_perimeter(smask, 0.5) / frac_perimeter(mask, 0.5)), 1 - 0.5),
            "I_2": (math.log(attraction(scaled) / attraction(base)), 2 + 2.0),
            "R": (math.log(repulsion(scaled, kernel=riesz(0.5)) / repulsion(base, kernel=riesz(0.5))), 2 - 0.5),
        }
        for name, (lr, target) in meas.items():
            e = lr / math.log(t)
            worst = max(worst, abs(e - target) / target)
            parts.append(f"{name}@{t}:{e:.4f}")
    return worst <= 0.02, f"worst relative exponent error {worst:.2e}; " + " ".join(parts)


def criterion_4():
    t = time.perf_counter()
    k = riesz(0.5)
    res = check_stability_suite("lipschitz_R", EnergyParams(kernel=k), trials=100, seed=42)
    dt = time.perf_counter() - t
    _FIRST_RUN[4] = _write([res], "c4")
    bound = 3 * lipschitz_constant_C1(k, 4.0)
    ok = res.passed and res.worst <= bound and len(res.samples) >= 100 and dt <= 120
    return ok, f"worst ratio {res.worst:.4f} <= 3 C1 = {bound:.4f} over {len(res.samples)} pairs, {dt:.1f} s"


def _rounding_batch(seed=42):
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(60):
        g = Grid(2, 2.0, 48) if i % 2 else Grid(1, 4.0, 256)
        m = rng.uniform(0.5, 3.0)
        raw = rng.uniform(0, 1, g.shape) * (g.radius() < rng.uniform(1.0, 1.9))
        h = project_box_mass(raw, m, g)
        theta = float(rng.choice([0.05, 0.25, 0.5, 1.0]))
        r = rounding(h, theta)
        mass_ok = abs(r.h_prime.mass - m) <= 1e-12 * m
        rows.append((i, r, mass_ok))
    return rows


def criterion_5():
    rows = _rounding_batch()
    ok_random = all(r.ok and mass_ok for _, r, mass_ok in rows)
    g = Grid(1, 4.0, 400)
    h1 = DensityField(g, _interval(g, -1.0, 0.0).values + _interval(g, 2.0, 3.0).values)
    r1 = rounding(h1, 0.25)
    ex1 = np.array_equal(r1.h_prime.values, _interval(g, -1.0, 1.0).values) and r1.ok
    h2 = DensityField(g, _interval(g, -1.0, 0.5).values + _interval(g, 1.0, 1.5).values)
    r2 = rounding(h2, 0.5)
    ex2 = np.array_equal(r2.h_prime.values, h2.values) and r2.ok
    samples = [{"sample_id": i, "value": r.residuals["constr1"], "ratio": r.residuals["constr4"],
                "pass": r.ok and mass_ok} for i, r, mass_ok in rows]
    _FIRST_RUN[5] = _write([CheckResult("rounding", samples, 0.0, 0.0, "flags", ok_random)], "c5")
    ok = ok_random and ex1 and ex2
    return ok, f"{len(rows)} random densities all constraints {ok_random}; hand examples {ex1}, {ex2}"


def criterion_6():
    g = Grid(1, 4.0, 256)
    h = random_density(g, 2.0, seed=3)
    delta = np.exp(-((g.axis() - 0.4) ** 2) / 0.1)
    eps = 1e-5
    d = np.where((h.values > eps) & (h.values < 1 - eps), delta, 0.0)
    worst = 0.0
    for k in (zero(), riesz(0.5), indicator(1.0), exponential(2.0), truncated_riesz(0.5, 4.0)):
        p = EnergyParams(alpha=2.0, kernel=k)
        fd = (total_G(DensityField(g, h.values + eps * d), p).total
              - total_G(DensityField(g, h.values - eps * d), p).total) / (2 * eps)
        an = float(np.sum(gradient_G(h, p).values * d)) * g.cell_volume
        worst = max(worst, abs(fd - an) / abs(an))
    return worst <= 1e-4, f"worst relative gradient error {worst:.2e} over 5 kernels"


def criterion_7():
    g = Grid(1, 5.0, 100)
    h = np.full(g.shape, 0.5)
    errs = [np.max(np.abs(project_box_mass(h, m, g).values - v)) for m, v in ((5.0, 0.5), (10.0, 1.0), (7.5, 0.75))]
    rng = np.random.default_rng(42)
    idem = 0.0
    for _ in range(20):
        p = project_box_mass(rng.normal(0.3, 1.0, g.shape), rng.uniform(0.5, 9.5), g)
        idem = max(idem, float(np.max(np.abs(project_box_mass(p, p.mass).values - p.values))))
    ok = max(errs) <= 1e-10 and idem <= 1e-12
    return ok, f"example errors {max(errs):.1e}, idempotence {idem:.1e}"


def criterion_8():
    t = time.perf_counter()
    g = Grid(1, 12.0, 512)
    ladder = [1.0, 2.0, 4.0, 8.0, 16.0]
    rz = sweep("G", "mass", ladder, EnergyParams(alpha=2.0, kernel=riesz(0.5)), grid=g)
    ctrl = sweep("G", "mass", ladder, EnergyParams(alpha=2.0, kernel=zero()), grid=g)
    dt = time.perf_counter() - t
    _FIRST_RUN[8] = _write([rz, ctrl], "c8")
    a = dict(zip(rz.values, rz.metric))
    ok = a[16.0] <= 0.05 and a[16.0] < a[1.0] and all(x <= 0.05 for x in ctrl.metric) and dt <= 600
    return ok, (f"riesz A(m=1) = {a[1.0]:.3g}, A(m=16) = {a[16.0]:.3g}; "
                f"zero-kernel max A = {max(ctrl.metric):.2g}; {dt:.0f} s")


def criterion_9():
    t = time.perf_counter()
    est = sweep("F", "gamma", [0.0, 0.01, 0.1], EnergyParams(s=0.5, kernel=riesz(0.5, 2)),
                SET_SWEEP_OPTIONS, K=8)
    dt = time.perf_counter() - t
    _FIRST_RUN[9] = _write([est], "c9")
    u = est.metric
    ok = u[0] <= 0.02 and all(b >= a for a, b in zip(u, u[1:])) and dt <= 1200
    return ok, "sup|u| over gamma (0, 0.01, 0.1) = " + ", ".join(f"{x:.5g}" for x in u) + f"; {dt:.0f} s"


def _suite():
    return [check_quantitative_isoperimetric(0.5, 2, 50, 42),
            check_fuglede(0.5, 6, 20, 42),
            check_sobolev_bound_R(riesz(0.5, 2), 0.5, 20, 42),
            check_stability_suite("low_bound_RR", trials=20, seed=42),
            check_stability_suite("bound_annulus", trials=20, seed=42),
            check_stability_suite("phi_growth", EnergyParams(alpha=2.0, kernel=riesz(0.5, 1)), seed=42),
            check_stability_suite("diameter", EnergyParams(alpha=2.0, kernel=riesz(0.5, 1)), seed=42)]


def criterion_10():
    results = _suite()
    _FIRST_RUN[10] = _write(results, "c10")
    ok = all(r.passed and r.recompute() for r in results) and "constants.csv" in _FIRST_RUN[10]
    return ok, "; ".join(f"{r.name}={'ok' if r.passed else 'FAIL'} C={r.constant:.4g}" for r in results)


def criterion_11():
    rerun = {}
    res = check_stability_suite("lipschitz_R", EnergyParams(kernel=riesz(0.5)), trials=100, seed=42)
    rerun[4] = _write([res], "c4-rerun")
    rows = _rounding_batch()
    samples = [{"sample_id": i, "value": r.residuals["constr1"], "ratio": r.residuals["constr4"],
                "pass": r.ok and mass_ok} for i, r, mass_ok in rows]
    rerun[5] = _write([CheckResult("rounding", samples, 0.0, 0.0, "flags",
                                   all(s["pass"] for s in samples))], "c5-rerun")
    g = Grid(1, 12.0, 512)
    ladder = [1.0, 2.0, 4.0, 8.0, 16.0]
    rerun[8] = _write([sweep("G", "mass", ladder, EnergyParams(alpha=2.0, kernel=riesz(0.5)), grid=g),
                       sweep("G", "mass", ladder, EnergyParams(alpha=2.0, kernel=zero()), grid=g)], "c8-rerun")
    rerun[10] = _write(_suite(), "c10-rerun")
    compared = [k for k in rerun if k in _FIRST_RUN]
    if not compared:
        return False, "no first-run outputs to compare (run criteria 4, 5, 8, 10 first)"
    same = all(rerun[k] == _FIRST_RUN[k] for k in compared)
    nfiles = sum(len(rerun[k]) for k in compared)
    return same, f"{nfiles} CSV files byte-identical on rerun (criteria {compared})"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11]


@pytest.mark.parametrize("number", range(1, 12))
def test_criterion(number):
    ok, detail = CRITERIA[number - 1]()
    _report(number, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failures = 0
    for i, fn in enumerate(CRITERIA, 1):
        ok, detail = fn()
        _report(i, ok, detail)
        failures += not ok
    sys.exit(1 if failures else 0)
