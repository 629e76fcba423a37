"""Cell-pair weights and convolutions on uniform cell-centred grids.

For piecewise-constant fields a, b on cells of side h, a radial kernel f gives

    int int f(|x - y|) a(x) b(y) dx dy = h^(2N) sum_ij a_i b_j W(i - j)

with W(k) the mean of f over pairs of cells at integer offset k,

    W(k) = int_{[-1,1]^N} f(h |k + z|) prod_i (1 - |z_i|) dz.

Near offsets (Chebyshev distance <= NEAR) get W by adaptive radial
quadrature of that integral; farther offsets use the midpoint value f(h|k|),
plus the Laplacian term f + (h^2/12) Lap f for power kernels.
"""

from __future__ import annotations

import math
import os
import warnings
from functools import lru_cache

import numpy as np
from scipy import fft as sfft
from scipy import integrate, special

NEAR = 2
_NPHI = 2048


def fft_workers(deterministic: bool = True) -> int:
    if deterministic:
        return 1
    try:
        return max(1, int(os.environ.get("NLS_THREADS", "1")))
    except ValueError:
        return 1


def _tent(x):
    return np.maximum(0.0, 1.0 - np.abs(x))


def _shell_weight(k, rho):
    """Tent mass on the sphere |k + z| = rho (times the surface element)."""
    if len(k) == 1:
        (k1,) = k
        return _tent(rho - k1) + _tent(-rho - k1)
    phi = (np.arange(_NPHI) + 0.5) * (2 * np.pi / _NPHI)
    z1 = rho * np.cos(phi) - k[0]
    z2 = rho * np.sin(phi) - k[1]
    return rho * (2 * np.pi / _NPHI) * float(np.sum(_tent(z1) * _tent(z2)))


def _radial_breaks(k):
    """Radii where the shell weight is not smooth."""
    c = [-float(v) for v in k]
    pts = set()
    vals = (-1.0, 0.0, 1.0)
    if len(k) == 1:
        for v in vals:
            pts.add(abs(c[0] - v))
    else:
        for v in vals:
            pts.add(abs(c[0] - v))
            pts.add(abs(c[1] - v))
            for w in vals:
                pts.add(math.hypot(c[0] - v, c[1] - w))
    return sorted(pts)


def cell_pair_weight(f, k, extra_breaks=()):
    """int_{[-1,1]^N} f(|k + z|) prod(1 - |z_i|) dz for a radial f of the radius."""
    k = tuple(int(v) for v in k)
    breaks = _radial_breaks(k) + [b for b in extra_breaks if b > 0]
    lo = math.sqrt(sum(max(abs(v) - 1, 0) ** 2 for v in k))
    hi = math.sqrt(sum((abs(v) + 1) ** 2 for v in k))
    edges = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for a, b in zip(edges[:-1], edges[1:]):
            if b - a < 1e-15:
                continue
            val, _ = integrate.quad(lambda r: f(r) * _shell_weight(k, r), a, b,
                                    limit=200, epsabs=0.0, epsrel=1e-10)
            total += val
    return total


def _near_offsets(N, near=NEAR):
    rng = range(-near, near + 1)
    if N == 1:
        return [(i,) for i in rng]
    return [(i, j) for i in rng for j in rng]


def _canonical(k):
    return tuple(sorted(abs(v) for v in k))


@lru_cache(maxsize=64)
def near_power_weights(p: float, N: int, near: int = NEAR, skip_zero: bool = False):
    """Near weights for f(r) = r^-p on unit cells, keyed by canonical offset."""
    out = {}
    for k in _near_offsets(N, near):
        key = _canonical(k)
        if key in out or (skip_zero and not any(k)):
            continue
        out[key] = cell_pair_weight(lambda r: r ** (-p), key)
    return out


@lru_cache(maxsize=64)
def _near_kernel_weights(spec, h: float, near: int = NEAR):
    out = {}
    breaks = spec.breakpoints(scale=h)
    for k in _near_offsets(spec.dim, near):
        key = _canonical(k)
        if key in out:
            continue
        out[key] = cell_pair_weight(lambda r: float(spec.radial(h * r)), key, breaks)
    return out


def _offset_radii(N, n):
    ax = np.arange(-(n - 1), n)
    if N == 1:
        return np.abs(ax).astype(float), (ax,)
    I, J = np.meshgrid(ax, ax, indexing="ij")
    return np.hypot(I, J), (I, J)


def _far_power(r, p, N):
    """Tent-averaged r^-p to second order: r^-p + p(p+2-N)/12 r^-(p+2)."""
    with np.errstate(divide="ignore"):
        return r ** (-p) + p * (p + 2 - N) / 12.0 * r ** (-p - 2)


def _fill_near(W, N, n, weights, near=NEAR):
    c = n - 1
    for k in _near_offsets(N, near):
        key = _canonical(k)
        if key not in weights or any(abs(v) > n - 1 for v in k):
            continue
        W[tuple(c + v for v in k)] = weights[key]


class ConvKernel:
    """Translation-invariant pair weights on an n^N grid, applied by FFT."""

    def __init__(self, W: np.ndarray, n: int, N: int):
        self.W = W
        self.n = n
        self.N = N
        self.shape = tuple(sfft.next_fast_len(3 * n - 2, real=True) for _ in range(N))
        self._Wf = sfft.rfftn(W, self.shape, workers=1)

    def apply(self, a: np.ndarray, deterministic: bool = True) -> np.ndarray:
        """(W * a)_i = sum_j W(i - j) a_j on the grid."""
        n = self.n
        af = sfft.rfftn(a, self.shape, workers=fft_workers(deterministic))
        full = sfft.irfftn(af * self._Wf, self.shape, workers=fft_workers(deterministic))
        sl = tuple(slice(n - 1, 2 * n - 1) for _ in range(self.N))
        return full[sl]

    def bilinear(self, a, b, deterministic: bool = True) -> float:
        """sum_ij a_i W(i - j) b_j, symmetric in (a, b) bit for bit."""
        x = math.fsum((a * self.apply(b, deterministic)).ravel())
        if b is a:
            return x
        y = math.fsum((b * self.apply(a, deterministic)).ravel())
        return 0.5 * x + 0.5 * y


@lru_cache(maxsize=32)
def kernel_conv(spec, n: int, h: float) -> ConvKernel:
    """Pair weights of an interaction kernel (zero offset included)."""
    N = spec.dim
    r, _ = _offset_radii(N, n)
    if spec.is_zero:
        return ConvKernel(np.zeros_like(r), n, N)
    if spec.kind == "riesz":
        W = _far_power(r, spec.lam, N) * h ** (-spec.lam)
        weights = {k: v * h ** (-spec.lam) for k, v in near_power_weights(spec.lam, N).items()}
    else:
        with np.errstate(divide="ignore"):
            W = spec.radial(h * r)
        weights = _near_kernel_weights(spec, h)
    _fill_near(W, N, n, weights)
    return ConvKernel(W, n, N)


@lru_cache(maxsize=32)
def power_conv(alpha: float, N: int, n: int, h: float) -> ConvKernel:
    """Midpoint weights |h k|^alpha of the attractive kernel."""
    r, _ = _offset_radii(N, n)
    return ConvKernel((h * r) ** alpha, n, N)


@lru_cache(maxsize=32)
def perimeter_conv(s: float, N: int, n: int):
    """Unit-cell pair weights of |x|^-(N+s) (zero offset dropped) and their lattice sum."""
    p = N + s
    r, _ = _offset_radii(N, n)
    W = np.where(r > 0, _far_power(np.where(r > 0, r, 1.0), p, N), 0.0)
    near = near_power_weights(p, N, skip_zero=True)
    _fill_near(W, N, n, near)
    return ConvKernel(W, n, N), lattice_sum(s, N)


def _lattice_zeta(p: float, N: int, near: int = NEAR) -> float:
    """sum of |k|^-p over the lattice outside the near block."""
    if N == 1:
        total = 2 * special.zeta(p, 1)
    else:
        z = p / 2
        beta = 4.0 ** (-z) * (special.zeta(z, 0.25) - special.zeta(z, 0.75))
        total = 4 * special.zeta(z, 1) * beta
    inner = 0.0
    for k in _near_offsets(N, near):
        if any(k):
            inner += math.hypot(*k) ** (-p) if N == 2 else abs(k[0]) ** (-p)
    return total - inner


def _far_midpoint_sum(s: float, N: int, near: int = NEAR) -> float:
    p = N + s
    return _lattice_zeta(p, N, near) + p * (p + 2 - N) / 12.0 * _lattice_zeta(p + 2, N, near)


@lru_cache(maxsize=32)
def lattice_sum(s: float, N: int) -> float:
    """sum over k != 0 of the unit-cell pair weights of |x|^-(N+s).

    The near part uses the quadrature weights, the far part the lattice
    zeta sums minus the near midpoint values.
    """
    near = near_power_weights(N + s, N, skip_zero=True)
    acc = 0.0
    for k in _near_offsets(N):
        if any(k):
            acc += near[_canonical(k)]
    return acc + _far_midpoint_sum(s, N)
