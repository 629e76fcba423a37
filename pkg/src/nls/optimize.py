"""Projected gradient descent for densities and Fourier-profile descent for sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import optimize as sopt

from . import _lattice, contour
from .energies import EnergyParams, attractive_potential, potential, total_G
from .fields import (BoundaryProfile, DensityField, Field, Grid, asymmetry, profile_to_mask,
                     recenter_cells)


@dataclass(frozen=True)
class DescentOptions:
    max_iters: int = 2000
    tau: Optional[float] = None
    backtrack: bool = True
    shrink: float = 0.5
    grow: float = 2.0
    max_halvings: int = 30
    rel_tol: float = 1e-8
    step_tol: float = 1e-12
    patience: int = 3
    seed: int = 42
    deterministic: bool = True
    recenter_every: int = 50
    fd_eps: float = 1e-3

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.tau is not None and not self.tau > 0:
            raise ValueError("tau must be positive")


@dataclass
class MinimizeResult:
    final: Union[DensityField, BoundaryProfile]
    trace: list
    asymmetry: float
    iterations: int
    converged: bool
    status: str = ""
    sup_norm: float = float("nan")
    energy: float = float("nan")
    extra: dict = field(default_factory=dict)

    def trace_rows(self):
        return [(i, e, s, a) for i, e, s, a in self.trace]


# ------------------------------------------------------------- projection

def project_box_mass(h, m: float, grid: Optional[Grid] = None) -> DensityField:
    """Euclidean projection onto {0 <= h <= 1, mass = m}: clamp(h + mu, 0, 1)."""
    if isinstance(h, Field):
        grid = h.grid
        v = np.asarray(h.values, float)
    else:
        if grid is None:
            raise ValueError("grid required for raw arrays")
        v = np.asarray(h, float).reshape(grid.shape)
    dv = grid.cell_volume
    if m > grid.box_volume * (1 + 1e-12):
        raise ValueError(f"mass {m} exceeds the box volume {grid.box_volume}")
    if m < 0:
        raise ValueError("mass must be nonnegative")
    target = m / dv

    def excess(mu):
        return math.fsum(np.clip(v + mu, 0.0, 1.0).ravel()) - target

    lo, hi = -float(v.max()), 1.0 - float(v.min())
    if excess(0.0) == 0.0:
        mu = 0.0
    elif excess(lo) >= 0:
        mu = lo
    elif excess(hi) <= 0:
        mu = hi
    else:
        mu = sopt.brentq(excess, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return DensityField(grid, np.clip(v + mu, 0.0, 1.0))


# ----------------------------------------------------------- density problem

def gradient_G(h: Field, params: EnergyParams, deterministic: bool = True) -> Field:
    """2 (|x|^alpha + g) * h: the L^2 gradient of the discrete G."""
    out = attractive_potential(h, params.alpha, deterministic).values
    if params.kernel is not None and not params.kernel.is_zero:
        out = out + potential(h, params.kernel, deterministic=deterministic).values
    return Field(h.grid, 2.0 * out)


def _lipschitz_step(grid: Grid, params: EnergyParams) -> float:
    conv = _lattice.power_conv(float(params.alpha), grid.dim, grid.n, grid.h)
    total = float(np.abs(conv.W).sum())
    if params.kernel is not None and not params.kernel.is_zero:
        total += float(np.abs(_lattice.kernel_conv(params.kernel, grid.n, grid.h).W).sum())
    return 1.0 / (2.0 * grid.cell_volume * total)


def random_density(grid: Grid, m: float, seed: int = 42) -> DensityField:
    rng = np.random.default_rng(seed)
    return project_box_mass(rng.uniform(0.0, 1.0, grid.shape), m, grid)


def minimize_density(init: Union[DensityField, int, None], params: EnergyParams,
                     opts: DescentOptions = DescentOptions(), grid: Optional[Grid] = None) -> MinimizeResult:
    """Projected gradient descent on G over {0 <= h <= 1, mass = m}."""
    if isinstance(init, DensityField):
        grid = init.grid
        h = project_box_mass(init, params.m)
    else:
        if grid is None:
            raise ValueError("grid required for a random start")
        h = random_density(grid, params.m, opts.seed if init is None else int(init))
    dv = grid.cell_volume
    det = opts.deterministic
    G = total_G(h, params, det).total
    tau = opts.tau if opts.tau is not None else _lipschitz_step(grid, params)
    trace = [(0, G, 0.0, float("nan"))]
    calm = 0
    status = "max_iters"
    it = 0
    for it in range(1, opts.max_iters + 1):
        grad = gradient_G(h, params, det).values
        hv = np.asarray(h.values)
        accepted = False
        for _ in range(opts.max_halvings + 1):
            cand = project_box_mass(hv - tau * grad, params.m, grid)
            d = cand.values - hv
            Gc = total_G(cand, params, det).total
            model = G + math.fsum((grad * d).ravel()) * dv + math.fsum((d * d).ravel()) * dv / (2 * tau)
            if not opts.backtrack or (Gc <= G and Gc <= model + 1e-13 * abs(G)):
                accepted = True
                break
            tau *= opts.shrink
        if not accepted:
            if Gc <= G + 1e-12 * max(abs(G), 1.0):
                status = "stalled"
            else:
                status = "diverged"
            break
        step = float(np.max(np.abs(d)))
        dec = G - Gc
        h, G = cand, Gc
        if opts.recenter_every and it % opts.recenter_every == 0:
            h, _ = recenter_cells(h)
        trace.append((it, G, step, float("nan")))
        if step < opts.step_tol:
            status = "step_tol"
            break
        calm = calm + 1 if dec <= opts.rel_tol * abs(G) else 0
        if calm >= opts.patience:
            status = "rel_tol"
            break
        tau = tau * opts.grow
    A = asymmetry(h).A
    i, e, s, _ = trace[-1]
    trace[-1] = (i, e, s, A)
    return MinimizeResult(h, trace, A, it, status in ("rel_tol", "step_tol", "stalled"), status,
                          energy=G)


# --------------------------------------------------------------- set problem

def _profile_from_coeffs(x: np.ndarray, K: int, M: int) -> BoundaryProfile:
    a = np.concatenate([[0.0, 0.0], x[:K]])
    b = np.concatenate([[0.0, 0.0], x[K:]])
    return BoundaryProfile.from_modes(a, b, M)


def random_profile(K: int, seed: int = 42, sup: float = 0.1, M: int = 256) -> np.ndarray:
    """Coefficients of modes 2..K+1, uniform in [-0.05, 0.05] and rescaled to sup norm `sup`."""
    rng = np.random.default_rng(seed)
    x = rng.uniform(-0.05, 0.05, 2 * K)
    p = _profile_from_coeffs(x, K, M)
    x = x * (sup / p.sup_norm)
    while _profile_from_coeffs(x, K, M).w1inf > 0.9:
        x *= 0.9
    return x


def _profile_coeffs(p: BoundaryProfile, K: int) -> np.ndarray:
    c = np.fft.rfft(p.samples) / p.M
    k = np.arange(2, K + 2)
    return np.concatenate([2 * c.real[k], -2 * c.imag[k]])


def set_energy(x: np.ndarray, K: int, params: EnergyParams, M: int = 256) -> float:
    return contour.profile_energy(_profile_from_coeffs(x, K, M), params, M).total


def minimize_set_profile(init: Union[BoundaryProfile, np.ndarray, int, None], params: EnergyParams,
                         opts: DescentOptions = DescentOptions(), K: int = 8, M: int = 256,
                         sup: float = 0.1, grid: Optional[Grid] = None) -> MinimizeResult:
    """Gradient descent on F_gamma over the Fourier modes 2..K+1 of a star-shaped profile.

    Gradients are central differences of the contour energy; the area is
    renormalized inside the energy, and mode 1 (a translation) is left out.
    """
    if K > 12:
        raise ValueError("at most 12 Fourier modes")
    if isinstance(init, BoundaryProfile):
        x = _profile_coeffs(init, K)
    elif isinstance(init, np.ndarray):
        x = np.asarray(init, float).copy()
    else:
        x = random_profile(K, opts.seed if init is None else int(init), sup, M)
    eps = opts.fd_eps

    def energy(y):
        return set_energy(y, K, params, M)

    def admissible(y):
        return _profile_from_coeffs(y, K, M).w1inf <= 1.0

    E = energy(x)
    tau = opts.tau if opts.tau is not None else 1e-3
    trace = [(0, E, 0.0, float("nan"))]
    status = "max_iters"
    calm = 0
    it = 0
    for it in range(1, opts.max_iters + 1):
        g = np.empty_like(x)
        for j in range(x.size):
            e = np.zeros_like(x)
            e[j] = eps
            g[j] = (energy(x + e) - energy(x - e)) / (2 * eps)
        gn2 = float(g @ g)
        if gn2 == 0.0:
            status = "stationary"
            break
        accepted = False
        for _ in range(opts.max_halvings + 1):
            y = x - tau * g
            if admissible(y):
                Ey = energy(y)
                if not opts.backtrack or Ey <= E - 1e-4 * tau * gn2:
                    accepted = True
                    break
            tau *= opts.shrink
        if not accepted:
            status = "stalled"
            break
        step = float(np.max(np.abs(y - x)))
        dec = E - Ey
        x, E = y, Ey
        trace.append((it, E, step, float("nan")))
        if step < opts.step_tol:
            status = "step_tol"
            break
        calm = calm + 1 if dec <= opts.rel_tol * abs(E) else 0
        if calm >= opts.patience:
            status = "rel_tol"
            break
        tau = tau * opts.grow
    prof = _profile_from_coeffs(x, K, M).standardized()
    grid = grid or Grid(2, 2.0, 256)
    A = asymmetry(profile_to_mask(prof, grid), antialias=False).A
    i, e, s, _ = trace[-1]
    trace[-1] = (i, e, s, A)
    return MinimizeResult(prof, trace, A, it, status in ("rel_tol", "step_tol", "stalled", "stationary"),
                          status, sup_norm=prof.sup_norm, energy=E, extra={"coeffs": x.tolist()})
