"""Numerical checks of the stability inequalities, parameter sweeps and reports."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import __version__, contour
from .constructions import annulus_density, discrete_ball
from .energies import (EnergyParams, Phi_m, frac_perimeter, potential, repulsion,
                       sobolev_seminorm_circle)
from .fields import (BoundaryProfile, DensityField, Grid, SetMask, asymmetry, ball_mask,
                     BallSpec, ball_radius, profile_to_mask, unit_ball_volume)
from .kernels import KernelSpec, lipschitz_constant_C1, riesz, zero
from .optimize import (DescentOptions, minimize_density, minimize_set_profile, project_box_mass)

RIGIDITY_TOL = 0.02
STABILITY_FACTOR = 10.0

# Fixed-step, fixed-budget descent for set sweeps: every gamma gets the same
# iteration count and step, so final sup norms are comparable across gamma.
SET_SWEEP_OPTIONS = DescentOptions(max_iters=100, tau=1e-3, grow=1.0, rel_tol=0.0)


@dataclass
class CheckResult:
    name: str
    samples: list
    worst: float
    threshold: float
    rule: str
    passed: bool
    params: dict = field(default_factory=dict)
    skipped: int = 0
    constant: float = float("nan")

    def recompute(self) -> bool:
        """Pass flag from the stored samples alone."""
        return _apply_rule(self.rule, [s["ratio"] for s in self.samples if s.get("used", True)],
                           self.threshold, self.samples)

    def csv_rows(self):
        for s in self.samples:
            yield (self.name, s["sample_id"], s["value"], s["ratio"], int(bool(s["pass"])))


def _apply_rule(rule: str, ratios: Sequence[float], threshold: float, samples=()) -> bool:
    r = np.asarray([x for x in ratios], float)
    if rule == "all_positive":
        return r.size > 0 and bool(np.all(r > threshold))
    if rule == "max_below":
        return r.size > 0 and bool(np.all(np.isfinite(r))) and float(r.max()) <= threshold
    if rule == "stable":
        if r.size == 0 or not np.all(np.isfinite(r)):
            return False
        med = float(np.median(np.abs(r)))
        return float(np.max(np.abs(r))) <= STABILITY_FACTOR * med if med > 0 else float(np.max(np.abs(r))) == 0
    if rule == "spread":
        return r.size > 0 and bool(np.all(np.isfinite(r))) and float(r.max()) <= threshold * float(r.min())
    if rule == "flags":
        used = [s for s in samples if s.get("used", True)]
        return len(used) > 0 and all(bool(s["pass"]) for s in used)
    raise ValueError(f"unknown rule {rule}")


def _result(name, samples, rule, threshold, params, constant=None, worst=None, skipped=0):
    used = [s for s in samples if s.get("used", True)]
    ratios = [s["ratio"] for s in used]
    passed = _apply_rule(rule, ratios, threshold, samples)
    if worst is None:
        worst = float(min(ratios)) if rule == "all_positive" and ratios else (
            float(max(ratios)) if ratios else float("nan"))
    c = worst if constant is None else constant
    return CheckResult(name, samples, worst, threshold, rule, passed, params, skipped, c)


# ------------------------------------------------------------ random shapes

def _random_modes(rng, kmin: int, kmax: int, M: int = 256) -> BoundaryProfile:
    a = np.zeros(kmax + 1)
    b = np.zeros(kmax + 1)
    for k in range(kmin, kmax + 1):
        a[k], b[k] = rng.normal(0, 1, 2) / k ** 1.5
    return BoundaryProfile.from_modes(a, b, M)


def _scaled_profile(base: BoundaryProfile, target: float, norm: Callable) -> BoundaryProfile:
    """Scale u so that norm(standardized profile) is close to `target`."""
    p = BoundaryProfile(base.samples * target / max(norm(base), 1e-300))
    for _ in range(6):
        q = p.standardized()
        val = norm(q)
        if val <= 0:
            return q
        p = BoundaryProfile(p.samples * target / val)
    return p.standardized()


def random_nearly_spherical(rng, w1inf: float, kmax: int = 6, M: int = 256) -> BoundaryProfile:
    base = _random_modes(rng, 1, kmax, M)
    return _scaled_profile(base, w1inf, lambda q: q.w1inf)


def random_bounded_profile(rng, sup: float, kmax: int = 6, M: int = 256) -> BoundaryProfile:
    base = _random_modes(rng, 1, kmax, M)
    return _scaled_profile(base, sup, lambda q: q.sup_norm)


# --------------------------------------------------------------- checks

def check_quantitative_isoperimetric(s: float = 0.5, dim: int = 2, trials: int = 50,
                                     seed: int = 42, n: int = 256) -> CheckResult:
    """Deficit P_s(E) - P_s(B[m]) against m^((N-s)/N) A(E)^2 on perturbed balls and two-bump sets."""
    if trials < 20:
        raise ValueError("need at least 20 trials")
    rng = np.random.default_rng(seed)
    samples = []
    skipped = 0
    if dim == 2:
        m = math.pi
        grid = Grid(2, 3.0, n)
        PB = contour.ball_perimeter(s, m, 2)
        Aq = asymmetry(ball_mask(grid, BallSpec((0.0, 0.0), m))).A
        for t in range(trials):
            if t % 2 == 0:
                p = random_bounded_profile(rng, rng.uniform(0.05, 0.4), kmax=6)
                P = contour.perimeter([contour.profile_curve(p, 512)], s)
                E = profile_to_mask(p, grid, normalize=False)
            else:
                frac = rng.uniform(0.15, 0.85)
                r1, r2 = math.sqrt(frac), math.sqrt(1 - frac)
                gap = rng.uniform(0.05, 0.8)
                ang = rng.uniform(0, math.pi)
                d = r1 + r2 + gap
                e = np.array([math.cos(ang), math.sin(ang)])
                c1, c2 = -e * d * r2 / (r1 + r2), e * d * r1 / (r1 + r2)
                P = contour.perimeter([contour.circle(c1, r1, 256), contour.circle(c2, r2, 256)], s)
                X, Y = grid.coords()
                E = SetMask(grid, (((X - c1[0]) ** 2 + (Y - c1[1]) ** 2 <= r1 * r1)
                                   | ((X - c2[0]) ** 2 + (Y - c2[1]) ** 2 <= r2 * r2)).astype(float))
            samples.append(_iso_sample(t, P, PB, m, dim, s, E, Aq))
    else:
        m = 2.0
        grid = Grid(1, 8.0, 4 * n)
        x = grid.axis()
        PB = contour.ball_perimeter(s, m, 1)
        Aq = asymmetry(SetMask(grid, (np.abs(x) < 1).astype(float))).A
        for t in range(trials):
            frac = rng.uniform(0.1, 0.9) if t % 2 == 0 else rng.uniform(0.02, 0.1)
            gap = rng.uniform(0.05, 2.0)
            a = -(m + gap) / 2
            ivs = [(a, a + frac * m), (a + frac * m + gap, a + m + gap)]
            E = SetMask(grid, np.any([(x > lo) & (x < hi) for lo, hi in ivs], axis=0).astype(float))
            P = frac_perimeter(E, s)
            samples.append(_iso_sample(t, P, contour.ball_perimeter(s, E.volume, 1), E.volume, dim, s, E, Aq))
    skipped = sum(1 for q in samples if not q["used"])
    ok = [q for q in samples if q["used"]]
    return _result("quantitative_isoperimetric", samples, "all_positive", 0.0,
                   {"s": s, "dim": dim, "trials": trials, "seed": seed, "n": n, "A_quant": Aq},
                   constant=min((q["ratio"] for q in ok), default=float("nan")), skipped=skipped)


def _iso_sample(t, P, PB, m, dim, s, E, Aq):
    A = asymmetry(E).A
    deficit = P - PB
    used = A > 2 * Aq
    ratio = deficit / (m ** ((dim - s) / dim) * A * A) if A > 0 else float("nan")
    return {"sample_id": t, "value": deficit, "ratio": ratio, "pass": (ratio > 0) if used else True,
            "used": bool(used), "A": A}


def check_fuglede(s: float = 0.5, modes: int = 6, trials: int = 20, seed: int = 42,
                  M: int = 512) -> CheckResult:
    """Deficit of nearly spherical sets against [u]^2_{(1+s)/2} + s P_s(B) ||u||_2^2."""
    rng = np.random.default_rng(seed)
    PB = contour.disc_perimeter(s)
    samples = []
    for t in range(trials):
        p = random_nearly_spherical(rng, rng.uniform(0.02, 0.09), kmax=modes, M=256)
        norms = sobolev_seminorm_circle(p, (1 + s) / 2)
        denom = norms.seminorm_sq + s * PB * norms.l2_sq
        deficit = contour.perimeter([contour.profile_curve(p, M)], s) - PB
        used = denom > 1e-14
        ratio = deficit / denom if used else float("nan")
        samples.append({"sample_id": t, "value": deficit, "ratio": ratio,
                        "pass": ratio > 0 if used else True, "used": used, "w1inf": p.w1inf})
    ok = [q["ratio"] for q in samples if q["used"]]
    return _result("fuglede", samples, "all_positive", 0.0,
                   {"s": s, "modes": modes, "trials": trials, "seed": seed},
                   constant=min(ok, default=float("nan")),
                   skipped=sum(1 for q in samples if not q["used"]))


def check_sobolev_bound_R(kernel: KernelSpec = None, s: float = 0.5, trials: int = 20,
                          seed: int = 42, M: int = 512) -> CheckResult:
    """(R(B) - R(E(u))) / ||u||^2_{W^{(1+s)/2,2}} over profiles with ||u||_inf <= 1/4."""
    kernel = kernel or riesz(0.5, 2)
    rng = np.random.default_rng(seed)
    RB = contour.repulsion([contour.circle((0.0, 0.0), 1.0, M)], kernel)
    samples = []
    for t in range(trials):
        p = random_bounded_profile(rng, rng.uniform(0.02, 0.25), kmax=6)
        if p.sup_norm > 0.25:
            p = BoundaryProfile(p.samples * 0.25 / p.sup_norm).standardized()
        norms = sobolev_seminorm_circle(p, (1 + s) / 2)
        diff = RB - contour.repulsion([contour.profile_curve(p, M)], kernel)
        used = norms.full_sq > 1e-14
        ratio = diff / norms.full_sq if used else float("nan")
        samples.append({"sample_id": t, "value": diff, "ratio": ratio, "pass": bool(np.isfinite(ratio)),
                        "used": used, "sup": p.sup_norm})
    used = [q["ratio"] for q in samples if q["used"]]
    return _result("sobolev_bound_R", samples, "stable", STABILITY_FACTOR,
                   {"kernel": kernel.to_string(), "s": s, "trials": trials, "seed": seed},
                   constant=max(used, default=float("nan")), worst=max(used, default=float("nan")))


# --------------------------------------------------------- stability suite

STABILITY_CHECKS = ("lipschitz_R", "low_bound_RR", "bound_annulus", "phi_growth", "diameter")


def _random_density_1d(rng, grid: Grid, mass: float) -> DensityField:
    x = grid.axis()
    c = rng.uniform(-1.0, 1.0)
    lo = max(0.6 * mass, 0.5)
    w = rng.uniform(lo, lo + 1.0)
    base = rng.uniform(0.0, 1.0, grid.shape) * (np.abs(x - c) < w)
    return project_box_mass(base, mass, grid)


def _lipschitz_R(params: EnergyParams, trials: int, seed: int) -> CheckResult:
    kernel = params.kernel or riesz(0.5, 1)
    m_tilde = 4.0
    grid = Grid(1, 4.0, 512)
    rng = np.random.default_rng(seed)
    C1 = lipschitz_constant_C1(kernel, m_tilde)
    samples = []
    for t in range(trials):
        h1 = _random_density_1d(rng, grid, rng.uniform(0.1, m_tilde))
        h2 = h1 if t == 0 else _random_density_1d(rng, grid, rng.uniform(0.1, m_tilde))
        dist = (h1 - h2).l1()
        diff = abs(repulsion(h1, kernel=kernel) - repulsion(h2, kernel=kernel))
        ratio = diff / dist if dist > 0 else 0.0
        samples.append({"sample_id": t, "value": diff, "ratio": ratio, "pass": ratio <= 3 * C1})
    return _result("lipschitz_R", samples, "max_below", 3 * C1,
                   {"kernel": kernel.to_string(), "m_tilde": m_tilde, "C1": C1, "n": grid.n},
                   constant=max(q["ratio"] for q in samples))


def sandwiched_density(grid: Grid, m: float, theta: float, rng) -> DensityField:
    """Random h with chi_{(1-theta)B} <= h <= chi_{(1+theta)B} and mass m."""
    chi = discrete_ball(grid, m)
    if theta == 0:
        return chi
    R = ball_radius(m, grid.dim)
    rad = grid.radius()
    inner = (chi.values == 1.0) & (rad < (1 - theta) * R)
    ann = ~inner & (rad <= (1 + theta) * R)
    need = m / grid.cell_volume - inner.sum()
    u = rng.uniform(0.0, 1.0, int(ann.sum()))
    sub = Grid(1, 0.5 * u.size, u.size)  # unit cells, so mass counts cells
    u = np.asarray(project_box_mass(u, need, sub).values)
    vals = inner.astype(float)
    vals[ann] = u
    return DensityField(grid, vals)


def _low_bound_RR(params: EnergyParams, trials: int, seed: int) -> CheckResult:
    kernel = params.kernel or riesz(0.5, 2)
    dim = kernel.dim
    m = unit_ball_volume(dim) if params.m == 1.0 else params.m
    grid = Grid(dim, 2.0 * ball_radius(m, dim), 128 if dim == 2 else 512)
    rng = np.random.default_rng(seed)
    RB = repulsion(discrete_ball(grid, m), kernel=kernel)
    thetas = [0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 1 / 3]
    samples = []
    sid = 0
    for th in thetas:
        for _ in range(1 if th == 0 else max(1, trials // (len(thetas) - 1))):
            h = sandwiched_density(grid, m, th, rng)
            diff = RB - repulsion(h, kernel=kernel)
            if th == 0:
                samples.append({"sample_id": sid, "value": diff, "ratio": 0.0, "pass": diff == 0.0,
                                "used": False, "theta": th})
            else:
                ratio = diff / (m * m * th * th)
                samples.append({"sample_id": sid, "value": diff, "ratio": ratio,
                                "pass": bool(np.isfinite(ratio)), "used": True, "theta": th})
            sid += 1
    res = _result("low_bound_RR", samples, "stable", STABILITY_FACTOR,
                  {"kernel": kernel.to_string(), "m": m, "n": grid.n},
                  constant=max(q["ratio"] for q in samples if q["used"]))
    res.passed = res.passed and samples[0]["pass"]
    return res


def _bound_annulus(params: EnergyParams, trials: int, seed: int) -> CheckResult:
    kernel = params.kernel or riesz(0.5, 2)
    dim = kernel.dim
    samples = []
    sid = 0
    for R in (1.0, 1.5):
        grid = Grid(dim, 2.0 * R, 128 if dim == 2 else 1024)
        for th in np.linspace(0.05, 0.3, max(2, trials // 2)):
            h = annulus_density(R, float(th), grid, 1.0)
            v = float(np.max(potential(h, kernel).values))
            ratio = v / (th * R ** dim)
            samples.append({"sample_id": sid, "value": v, "ratio": ratio, "pass": bool(np.isfinite(ratio)),
                            "theta": float(th), "R": R})
            sid += 1
    return _result("bound_annulus", samples, "stable", STABILITY_FACTOR,
                   {"kernel": kernel.to_string()}, constant=max(q["ratio"] for q in samples))


def _phi_growth(params: EnergyParams, trials: int, seed: int,
                masses: Sequence[float] = (0.25, 0.5, 1, 2, 4, 8, 16)) -> CheckResult:
    kernel = params.kernel or zero(1)
    dim, alpha = kernel.dim, params.alpha
    ts = np.concatenate([np.linspace(0.0, 0.95, 10), np.linspace(1.05, 3.0, 10)])
    per_m = []
    samples = []
    sid = 0
    for m in masses:
        R = ball_radius(m, dim)
        PR = Phi_m(R, m, alpha, kernel, dim)
        ok = True
        lows = []
        for t in ts:
            val = Phi_m(t * R, m, alpha, kernel, dim) - PR
            side_ok = val <= 1e-12 * abs(PR) if t < 1 else val >= -1e-12 * abs(PR)
            ratio = abs(val) / (R ** (dim + alpha - 1) * min(abs(t * R - R), R))
            ok &= side_ok
            lows.append(ratio)
            samples.append({"sample_id": sid, "value": val, "ratio": ratio, "pass": side_ok,
                            "m": m, "t": float(t), "used": True})
            sid += 1
        per_m.append((m, ok, min(lows)))
    m0 = None
    for i in range(len(per_m)):
        if all(ok and low > 0 for _, ok, low in per_m[i:]):
            m0 = per_m[i][0]
            break
    for q in samples:
        q["used"] = m0 is not None and q["m"] >= m0
    passed = m0 is not None
    used = [q["ratio"] for q in samples if q["used"]]
    return CheckResult("phi_growth", samples, min(used) if used else float("nan"), 0.0, "flags",
                       passed, {"kernel": kernel.to_string(), "alpha": alpha, "m0": m0,
                                "masses": list(masses)},
                       constant=float("nan") if m0 is None else float(m0))


def support_diameter(h: DensityField, threshold: float = 1e-6) -> float:
    g = h.grid
    on = np.asarray(h.values) > threshold
    if not on.any():
        return 0.0
    pts = np.stack([c[on] for c in g.coords()], axis=1)
    if g.dim == 1:
        return float(pts.max() - pts.min()) + g.h
    from scipy.spatial import ConvexHull
    from scipy.spatial.distance import pdist
    hull = pts[ConvexHull(pts).vertices] if len(pts) > 3 else pts
    return float(pdist(hull).max()) + g.h * math.sqrt(2)


def _diameter(params: EnergyParams, trials: int, seed: int,
              masses: Sequence[float] = (1, 2, 4, 8, 16), opts: DescentOptions = None) -> CheckResult:
    kernel = params.kernel or riesz(0.5, 1)
    opts = opts or DescentOptions(seed=seed)
    grid = Grid(kernel.dim, 12.0, 512)
    samples = []
    for i, m in enumerate(masses):
        res = minimize_density(None, EnergyParams(alpha=params.alpha, m=m, kernel=kernel), opts, grid)
        d = support_diameter(res.final)
        samples.append({"sample_id": i, "value": d, "ratio": d / m ** (1 / grid.dim), "pass": True, "m": m})
    r = np.array([q["ratio"] for q in samples])
    passed = _apply_rule("spread", r, STABILITY_FACTOR)
    return CheckResult("diameter", samples, float(r.max()), STABILITY_FACTOR, "spread", passed,
                       {"kernel": kernel.to_string(), "alpha": params.alpha, "n": grid.n, "L": grid.L},
                       constant=float(r.max()))


def check_stability_suite(name: str, params: Optional[EnergyParams] = None, trials: int = 20,
                          seed: int = 42) -> CheckResult:
    params = params or EnergyParams()
    table = {"lipschitz_R": _lipschitz_R, "low_bound_RR": _low_bound_RR,
             "bound_annulus": _bound_annulus, "phi_growth": _phi_growth, "diameter": _diameter}
    if name not in table:
        raise ValueError(f"unknown stability check {name!r}; choose from {STABILITY_CHECKS}")
    return table[name](params, trials, seed)


# ------------------------------------------------------------------ sweeps

@dataclass
class ThresholdEstimate:
    parameter: str
    values: list
    metric: list
    energies: list
    iterations: list
    converged: list
    threshold: Optional[float]
    bracketed: bool
    metric_name: str = "asymmetry"
    errors: list = field(default_factory=list)

    def csv_rows(self):
        for v, e, a, i, c in zip(self.values, self.energies, self.metric, self.iterations, self.converged):
            yield (v, e, a, i, int(bool(c)))


def _strictly_monotone(values) -> bool:
    d = np.diff(np.asarray(values, float))
    return bool(np.all(d > 0) or np.all(d < 0))


def sweep(problem: str, parameter: str, values: Sequence[float], params: EnergyParams,
          opts: Optional[DescentOptions] = None, grid: Optional[Grid] = None, K: int = 8,
          tol: float = RIGIDITY_TOL) -> ThresholdEstimate:
    """Run the matching optimizer at each value and locate the rigidity threshold.

    G is swept in the mass m (threshold: smallest sampled m with A <= tol);
    F in gamma (threshold: largest sampled gamma with ||u||_inf <= tol).
    """
    problem = problem.upper()
    if (problem, parameter) not in (("G", "mass"), ("G", "m"), ("F", "gamma")):
        raise ValueError("pair F with gamma and G with mass")
    values = [float(v) for v in values]
    if len(values) > 1 and not _strictly_monotone(values):
        raise ValueError("sweep values must be strictly monotone")
    metric, energies, iters, conv, errors = [], [], [], [], []
    for v in values:
        try:
            if problem == "G":
                p = EnergyParams(s=params.s, alpha=params.alpha, gamma=params.gamma, m=v, kernel=params.kernel)
                g = grid or Grid(1, 12.0, 512)
                res = minimize_density(None, p, opts or DescentOptions(), g)
                metric.append(res.asymmetry)
            else:
                p = EnergyParams(s=params.s, alpha=params.alpha, gamma=v, m=params.m, kernel=params.kernel)
                res = minimize_set_profile(None, p, opts or SET_SWEEP_OPTIONS, K=K)
                metric.append(res.sup_norm)
            energies.append(res.energy)
            iters.append(res.iterations)
            conv.append(res.converged)
            errors.append("")
        except Exception as exc:  # recorded per point, the sweep goes on
            metric.append(float("nan"))
            energies.append(float("nan"))
            iters.append(0)
            conv.append(False)
            errors.append(f"{type(exc).__name__}: {exc}")
    ok = [v for v, a in zip(values, metric) if np.isfinite(a) and a <= tol]
    bad = [v for v, a in zip(values, metric) if not (np.isfinite(a) and a <= tol)]
    if problem == "G":
        thr = min(ok) if ok else None
    else:
        thr = max(ok) if ok else None
    return ThresholdEstimate("mass" if problem == "G" else "gamma", values, metric, energies, iters,
                             conv, thr, bool(ok and bad),
                             "asymmetry" if problem == "G" else "sup_norm", errors)


# ------------------------------------------------------ competitor sampling

def competitor_diagnostic(E: BoundaryProfile, params: EnergyParams, trials: int = 20,
                          seed: int = 42, C_grid: Optional[Sequence[float]] = None,
                          amplitude: float = 0.03, M: int = 512) -> CheckResult:
    """Smallest sampled C with P_s(F) - P_s(E) + C |E sym-diff F| >= 0 over nearby competitors.

    Competitors dilate E by a random factor in [0.95, 1.05] and add a random
    boundary perturbation; their volume is left free.
    """
    rng = np.random.default_rng(seed)
    C_grid = list(C_grid) if C_grid is not None else [0.0] + list(np.geomspace(0.01, 1e4, 25))
    PE = contour.perimeter([contour.profile_curve(E, M)], params.s)
    samples = []
    need = 0.0
    for t in range(trials):
        if t == 0:
            F = E
        else:
            dil = rng.uniform(0.95, 1.05)
            du = random_bounded_profile(rng, amplitude * rng.uniform(0.2, 1.0), kmax=6).samples
            F = BoundaryProfile(dil * (1 + E.samples) * (1 + du) - 1)
        dP = contour.perimeter([contour.profile_curve(F, M)], params.s) - PE
        vol = contour.symmetric_difference(E, F)
        req = max(0.0, -dP / vol) if vol > 0 else 0.0
        need = max(need, req)
        samples.append({"sample_id": t, "value": dP, "ratio": req, "pass": True, "sym_diff": vol})
    C = next((c for c in C_grid if c >= need), float("inf"))
    for q in samples:
        q["pass"] = q["value"] + C * q["sym_diff"] >= 0
    return CheckResult("competitor_diagnostic", samples, need, C, "max_below", bool(np.isfinite(C)),
                       {"s": params.s, "gamma": params.gamma, "trials": trials, "seed": seed},
                       constant=C)


# ------------------------------------------------------------------ report

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "" if math.isnan(x) else format(float(x), ".17g")
    return str(x)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def sweep_svg(est: ThresholdEstimate, width: int = 480, height: int = 320) -> str:
    """Self-contained line plot of the swept parameter against the metric."""
    xs = np.asarray(est.values, float)
    ys = np.asarray(est.metric, float)
    good = np.isfinite(ys)
    pad = 50
    xlo, xhi = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    ymax = float(np.nanmax(ys)) if good.any() else 1.0
    ymax = max(ymax, RIGIDITY_TOL) * 1.1
    if xhi == xlo:
        xhi = xlo + 1.0

    def px(x):
        return pad + (x - xlo) / (xhi - xlo) * (width - 2 * pad)

    def py(y):
        return height - pad - y / ymax * (height - 2 * pad)

    pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs[good], ys[good]))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{py(RIGIDITY_TOL):.2f}" x2="{width - pad}" y2="{py(RIGIDITY_TOL):.2f}" '
           'stroke="gray" stroke-dasharray="4 3"/>',
           f'<polyline points="{pts}" fill="none" stroke="steelblue" stroke-width="2"/>']
    for x, y in zip(xs[good], ys[good]):
        out.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" fill="steelblue"/>')
        out.append(f'<text x="{px(x):.2f}" y="{height - pad + 16}" font-size="10" '
                   f'text-anchor="middle">{x:g}</text>')
    out.append(f'<text x="{pad - 6}" y="{py(0):.2f}" font-size="10" text-anchor="end">0</text>')
    out.append(f'<text x="{pad - 6}" y="{py(ymax / 1.1):.2f}" font-size="10" text-anchor="end">'
               f'{ymax / 1.1:.3g}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 10}" font-size="12" text-anchor="middle">'
               f'{est.parameter}</text>')
    out.append(f'<text x="14" y="{height / 2}" font-size="12" text-anchor="middle" '
               f'transform="rotate(-90 14 {height / 2})">{est.metric_name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(results: Sequence, out_dir, config: Optional[dict] = None) -> list:
    """Write one CSV per check, CSV plus SVG per sweep, a constants table and a JSON manifest."""
    os.makedirs(out_dir, exist_ok=True)
    if not os.access(out_dir, os.W_OK):
        raise PermissionError(f"cannot write to {out_dir}")
    paths = []
    flags = {}
    constants = []
    seen = {}
    for r in results:
        if isinstance(r, CheckResult):
            key = r.name
            seen[key] = seen.get(key, 0) + 1
            stem = key if seen[key] == 1 else f"{key}_{seen[key]}"
            path = os.path.join(out_dir, f"{stem}.csv")
            _write_csv(path, ["check", "sample_id", "value", "ratio", "pass"], r.csv_rows())
            paths.append(path)
            flags[stem] = bool(r.passed)
            constants.append((stem, r.constant, r.worst, int(r.passed)))
        elif isinstance(r, ThresholdEstimate):
            key = f"sweep_{r.parameter}"
            seen[key] = seen.get(key, 0) + 1
            stem = key if seen[key] == 1 else f"{key}_{seen[key]}"
            path = os.path.join(out_dir, f"{stem}.csv")
            _write_csv(path, ["param_value", "energy", "asymmetry", "iters", "converged"], r.csv_rows())
            svg = os.path.join(out_dir, f"{stem}.svg")
            with open(svg, "w") as fh:
                fh.write(sweep_svg(r))
            paths += [path, svg]
            flags[stem] = {"threshold": r.threshold, "bracketed": r.bracketed}
        else:
            raise TypeError(f"cannot report {type(r).__name__}")
    if constants:
        path = os.path.join(out_dir, "constants.csv")
        _write_csv(path, ["check", "constant", "worst", "pass"], constants)
        paths.append(path)
    cfg = dict(config or {})
    manifest = {"tool": "nls", "version": __version__, "config": cfg,
                "kernel": cfg.get("kernel"), "grid": cfg.get("grid"), "seed": cfg.get("seed"),
                "results": flags}
    mpath = os.path.join(out_dir, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    paths.append(mpath)
    return paths
