"""Energies and potentials on grids, plus mesh-free radial quadratures."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import integrate, special

from . import _lattice
from .fields import BoundaryProfile, Field, FieldLike, SetMask, ball_radius
from .kernels import KernelSpec, KernelValidationError, kernel_cell_average


@dataclass(frozen=True)
class EnergyParams:
    s: float = 0.5
    alpha: float = 2.0
    gamma: float = 0.0
    m: float = 1.0
    kernel: Optional[KernelSpec] = None

    def __post_init__(self):
        if not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.gamma >= 0:
            raise ValueError("gamma must be nonnegative")
        if not self.m > 0:
            raise ValueError("m must be positive")


@dataclass
class EnergyReport:
    perimeter_term: float = 0.0
    repulsion_term: float = 0.0
    attraction_term: float = 0.0
    total: float = 0.0
    meta: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        return {"perimeter": self.perimeter_term, "repulsion": self.repulsion_term,
                "attraction": self.attraction_term, "total": self.total}


def _check_grids(a: FieldLike, b: Optional[FieldLike]):
    if b is not None and a.grid != b.grid:
        raise ValueError("fields live on different grids")


# ---------------------------------------------------------------- grid sums

def frac_perimeter(E: SetMask, s: float, deterministic: bool = True) -> float:
    """P_s(E) for a union of grid cells, exterior of the box included exactly.

    Uses P_s(E) = h^(N-s) [ #E * S - sum_{i != j in E} W(i - j) ] where W are
    the unit-cell pair weights of |x|^-(N+s) and S their full lattice sum.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    g = E.grid
    chi = (np.asarray(E.values) > 0.5).astype(float)
    count = int(chi.sum())
    if count == 0:
        warnings.warn("fractional perimeter of an empty set", RuntimeWarning, stacklevel=2)
        return 0.0
    conv, S = _lattice.perimeter_conv(float(s), g.dim, g.n)
    inner = conv.bilinear(chi, chi, deterministic)
    return g.h ** (g.dim - s) * (count * S - inner)


def _repulsion_conv(spec: KernelSpec, grid, diagonal: str):
    if not spec.locally_integrable:
        raise KernelValidationError(f"{spec.to_string()} is not locally integrable in dimension {spec.dim}")
    if spec.dim != grid.dim:
        raise ValueError("kernel and grid dimensions differ")
    conv = _lattice.kernel_conv(spec, grid.n, grid.h)
    if diagonal == "cell_average" and not spec.is_zero:
        W = conv.W.copy()
        W[(grid.n - 1,) * grid.dim] = kernel_cell_average(spec, grid.h / 2)
        conv = _lattice.ConvKernel(W, grid.n, grid.dim)
    elif diagonal not in ("exact", "cell_average"):
        raise ValueError("diagonal must be 'exact' or 'cell_average'")
    return conv


def repulsion(h1: FieldLike, h2: Optional[FieldLike] = None, kernel: KernelSpec = None,
              diagonal: str = "exact", deterministic: bool = True) -> float:
    """R(h1) or the cross term R(h1, h2) = int int g(x - y) h1(x) h2(y).

    Signed fields are accepted.  `diagonal="exact"` uses the exact
    self-interaction of a cell, "cell_average" the mean of g over one cell.
    """
    if kernel is None:
        raise ValueError("kernel required")
    _check_grids(h1, h2)
    g = h1.grid
    if kernel.is_zero:
        return 0.0
    conv = _repulsion_conv(kernel, g, diagonal)
    a = np.asarray(h1.values, float)
    b = a if h2 is None else np.asarray(h2.values, float)
    return conv.bilinear(a, b, deterministic) * g.cell_volume ** 2


def attraction(h1: FieldLike, h2: Optional[FieldLike] = None, alpha: float = 2.0,
               deterministic: bool = True) -> float:
    """I_alpha(h1) or I_alpha(h1, h2) with the midpoint rule on |x - y|^alpha."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    _check_grids(h1, h2)
    g = h1.grid
    conv = _lattice.power_conv(float(alpha), g.dim, g.n, g.h)
    a = np.asarray(h1.values, float)
    b = a if h2 is None else np.asarray(h2.values, float)
    return conv.bilinear(a, b, deterministic) * g.cell_volume ** 2


def total_F(E: SetMask, params: EnergyParams, deterministic: bool = True) -> EnergyReport:
    P = frac_perimeter(E, params.s, deterministic)
    Rv = 0.0 if params.kernel is None else repulsion(E, kernel=params.kernel, deterministic=deterministic)
    return EnergyReport(P, Rv, 0.0, P + params.gamma * Rv,
                        {"h": E.grid.h, "n": E.grid.n, "L": E.grid.L, "diagonal": "exact",
                         "exterior": "lattice-sum", "deterministic": deterministic})


def total_G(h: FieldLike, params: EnergyParams, deterministic: bool = True,
            diagonal: str = "exact") -> EnergyReport:
    I = attraction(h, alpha=params.alpha, deterministic=deterministic)
    Rv = 0.0 if params.kernel is None else repulsion(h, kernel=params.kernel, diagonal=diagonal,
                                                     deterministic=deterministic)
    return EnergyReport(0.0, Rv, I, I + Rv,
                        {"h": h.grid.h, "n": h.grid.n, "L": h.grid.L, "diagonal": diagonal,
                         "deterministic": deterministic})


def potential(h: FieldLike, kernel: KernelSpec, diagonal: str = "exact",
              deterministic: bool = True) -> Field:
    """v_h = g * h, averaged over each target cell."""
    g = h.grid
    if kernel.is_zero:
        return Field(g, np.zeros(g.shape))
    conv = _repulsion_conv(kernel, g, diagonal)
    return Field(g, conv.apply(np.asarray(h.values, float), deterministic) * g.cell_volume)


def attractive_potential(h: FieldLike, alpha: float, deterministic: bool = True) -> Field:
    g = h.grid
    conv = _lattice.power_conv(float(alpha), g.dim, g.n, g.h)
    return Field(g, conv.apply(np.asarray(h.values, float), deterministic) * g.cell_volume)


# ------------------------------------------------------- radial quadratures

def _quad_pieces(f, a, b, breaks, rel=1e-10):
    pts = sorted({a, b, *[x for x in breaks if a < x < b]})
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for lo, hi in zip(pts[:-1], pts[1:]):
            if hi > lo:
                total += integrate.quad(f, lo, hi, limit=400, epsabs=0.0, epsrel=rel)[0]
    return total


def _arc_cos(R, r, rho):
    """Cosine bound c: the circle |y - r e1| = rho lies in B(0,R) where cos(angle) <= -c."""
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.divide(r * r + rho * rho - R * R, np.float64(2 * rho * r))
    return np.clip(c, -1.0, 1.0)


def _ball_shell(R, r, rho, dim):
    """Measure of the sphere of radius rho about r e1 that lies in B(0, R)."""
    if dim == 1:
        return float(abs(r + rho) <= R) + float(abs(r - rho) <= R)
    if r == 0:
        return 2 * math.pi * rho if rho <= R else 0.0
    return rho * 2 * math.acos(float(_arc_cos(R, r, rho)))


def _radial_ball_integral(fr, R, r, dim, extra_breaks=()):
    lo = max(0.0, r - R)
    hi = r + R
    breaks = [abs(R - r), *extra_breaks]
    return _quad_pieces(lambda rho: fr(rho) * _ball_shell(R, r, rho, dim), lo, hi, breaks)


def psi(R: float, r: float, kernel: KernelSpec, dim: Optional[int] = None) -> float:
    """int_{B(0,R)} g(r e1 - y) dy by radial quadrature about r e1."""
    dim = kernel.dim if dim is None else dim
    if not R > 0 or r < 0:
        raise ValueError("need R > 0 and r >= 0")
    if kernel.is_zero:
        return 0.0
    if not kernel.locally_integrable:
        raise KernelValidationError("kernel not locally integrable")
    return _radial_ball_integral(lambda rho: float(kernel.radial(rho)), R, r, dim,
                                 kernel.breakpoints())


def phi(r: float, alpha: float, dim: int = 1) -> float:
    """int_B |r e1 - y|^alpha dy over the unit ball."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return _radial_ball_integral(lambda rho: rho ** alpha, 1.0, float(r), dim)


def phi_prime(r: float, alpha: float, dim: int = 1) -> float:
    """alpha int_B (r - y1) |r e1 - y|^(alpha - 2) dy."""
    r = float(r)
    if dim == 1:
        def f(rho):
            return rho ** (alpha - 1) * (float(abs(r - rho) <= 1) - float(abs(r + rho) <= 1))
    else:
        if r == 0:
            return 0.0

        def f(rho):
            c = float(_arc_cos(1.0, r, rho))
            return rho ** alpha * 2 * math.sqrt(max(0.0, 1 - c * c))
    return alpha * _quad_pieces(f, max(0.0, r - 1), r + 1, [abs(1 - r)])


def Phi_m(r: float, m: float, alpha: float, kernel: KernelSpec, dim: Optional[int] = None) -> float:
    """Potential of B[m] at distance r: R^(N+alpha) phi(r/R) + psi(R, r)."""
    dim = kernel.dim if dim is None else dim
    R = ball_radius(m, dim)
    return R ** (dim + alpha) * phi(r / R, alpha, dim) + psi(R, r, kernel, dim)


# ------------------------------------------------ Sobolev seminorm on circle

@dataclass(frozen=True)
class SobolevNorms:
    seminorm_sq: float
    l2_sq: float

    @property
    def full_sq(self) -> float:
        return self.seminorm_sq + self.l2_sq


def chord_power_coeffs(p: float, K: int) -> np.ndarray:
    """c_k = (1/2pi) int |2 sin(t/2)|^p cos(k t) dt for k = 0..K (analytic continuation)."""
    c0 = special.gamma(p + 1) / special.gamma(p / 2 + 1) ** 2
    out = np.empty(K + 1)
    out[0] = c0
    for k in range(K):
        out[k + 1] = out[k] * (k - p / 2) / (k + 1 + p / 2)
    return out


def _seminorm_gaps(order: float, K: int) -> np.ndarray:
    """4 pi^2 (c_0 - c_k) with p = -1 - 2 order, k = 0..K."""
    sig = order
    if abs(sig - 0.5) < 1e-9:
        sig = 0.5 + 1e-7
    p = -1.0 - 2.0 * sig
    ratio = np.empty(K + 1)
    ratio[0] = 1.0
    for k in range(K):
        ratio[k + 1] = ratio[k] * (k - p / 2) / (k + 1 + p / 2)
    c0 = special.gamma(p + 1) / special.gamma(p / 2 + 1) ** 2
    return 4 * math.pi ** 2 * c0 * (1.0 - ratio)


def sobolev_seminorm_circle(p: BoundaryProfile, order: float) -> SobolevNorms:
    """[u]^2 = int int |u(x) - u(y)|^2 / |x - y|^(1 + 2 order) on the unit circle.

    Evaluated exactly for the trigonometric interpolant of the samples via
    its Fourier coefficients.  Also returns ||u||^2 in L^2 of the circle.
    """
    if not 0 < order < 1:
        raise ValueError("order must lie in (0, 1)")
    if p.M < 32:
        raise ValueError("need at least 32 samples")
    u = p.samples
    M = u.size
    c = np.fft.rfft(u) / M
    amp2 = 4 * np.abs(c) ** 2  # a_k^2 + b_k^2 for 0 < k < M/2
    if M % 2 == 0:
        amp2[-1] = np.abs(c[-1]) ** 2
    gaps = _seminorm_gaps(order, c.size - 1)
    semi = math.fsum((amp2[1:] * gaps[1:]).tolist())
    l2 = math.fsum((u * u).tolist()) * (2 * math.pi / M)
    return SobolevNorms(max(semi, 0.0), l2)


def sobolev_seminorm_direct(u_fn, order: float, M: int = 4096) -> float:
    """Brute-force double sum of the same integral on M midpoints.

    The skipped diagonal strip |t| < d/2 is added from the local expansion
    |u(x) - u(y)|^2 ~ |u'|^2 t^2.
    """
    th = 2 * np.pi * (np.arange(M) + 0.5) / M
    u = u_fn(th)
    d = 2 * np.pi / M
    total = 0.0
    for shift in range(1, M):
        chord = abs(2 * math.sin(shift * d / 2))
        diff = u - np.roll(u, -shift)
        total += math.fsum(diff * diff) * chord ** (-1 - 2 * order)
    du = (np.roll(u, -1) - np.roll(u, 1)) / (2 * d)
    strip = 2 * (d / 2) ** (2 - 2 * order) / (2 - 2 * order)
    return total * d * d + math.fsum(du * du) * d * strip


def interval_union_perimeter(intervals, s: float) -> float:
    """Closed-form P_s of a finite union of disjoint intervals on the line.

    P_s(E) = sum over endpoint pairs x != y of nu(x) nu(y) |x - y|^(1-s) / (s (s - 1)),
    with nu = -1 at left and +1 at right endpoints.
    """
    pts = []
    for a, b in intervals:
        if not b > a:
            raise ValueError("intervals need a < b")
        pts += [(float(a), -1.0), (float(b), 1.0)]
    total = []
    for i, (x, nx) in enumerate(pts):
        for y, ny in pts[i + 1:]:
            total.append(2 * nx * ny * abs(x - y) ** (1 - s))
    return math.fsum(total) / (s * (s - 1))
