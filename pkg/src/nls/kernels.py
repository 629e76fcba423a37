"""Radial interaction kernels and their hypothesis checks.

A kernel is a nonnegative radial function g(|x|) on R^N minus the origin.
Built-in kinds: ``riesz`` (|x|^-lam), ``indicator`` (1 on |x| < a),
``exponential`` (exp(-rate |x|)), ``truncated_riesz`` (min(|x|^-lam, cap))
and ``zero``.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy import integrate

KINDS = ("riesz", "indicator", "exponential", "truncated_riesz", "zero")


class KernelValidationError(ValueError):
    """Raised when an operation needs a property the kernel does not have."""


@dataclass(frozen=True)
class KernelSpec:
    kind: str
    dim: int = 1
    lam: float = 0.0
    a: float = 0.0
    rate: float = 0.0
    cap: float = 0.0
    cutoff_Rg: float = 1.0
    satisfies_I: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.dim not in (1, 2):
            raise ValueError("only dim 1 and 2 are supported")
        if self.kind in ("riesz", "truncated_riesz") and not self.lam > 0:
            raise ValueError("riesz exponent must be positive")
        if self.kind == "truncated_riesz" and not self.cap > 0:
            raise ValueError("truncation cap must be positive")
        if self.kind == "indicator" and not self.a > 0:
            raise ValueError("indicator radius must be positive")
        if self.kind == "exponential" and not self.rate > 0:
            raise ValueError("exponential rate must be positive")
        if not self.cutoff_Rg > 0:
            raise ValueError("cutoff_Rg must be positive")

    @property
    def homogeneity(self) -> Optional[float]:
        return -self.lam if self.kind == "riesz" else None

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    @property
    def locally_integrable(self) -> bool:
        return not (self.kind == "riesz" and self.lam >= self.dim)

    @property
    def is_bounded(self) -> bool:
        return self.kind != "riesz"

    def radial(self, r):
        """Kernel value as a function of the radius (vectorized, r > 0)."""
        r = np.asarray(r, dtype=float)
        if self.kind == "riesz":
            with np.errstate(divide="ignore"):
                return r ** (-self.lam)
        if self.kind == "indicator":
            return np.where(r < self.a, 1.0, 0.0)
        if self.kind == "exponential":
            return np.exp(-self.rate * r)
        if self.kind == "truncated_riesz":
            with np.errstate(divide="ignore"):
                return np.minimum(r ** (-self.lam), self.cap)
        return np.zeros_like(r)

    def breakpoints(self, scale: float = 1.0) -> list[float]:
        """Radii (divided by ``scale``) where the radial profile is not smooth."""
        if self.kind == "indicator":
            return [self.a / scale]
        if self.kind == "truncated_riesz":
            return [self.cap ** (-1.0 / self.lam) / scale]
        return []

    def to_string(self) -> str:
        if self.kind == "riesz":
            return f"riesz:{self.lam!r}"
        if self.kind == "indicator":
            return f"indicator:{self.a!r}"
        if self.kind == "exponential":
            return f"exp:{self.rate!r}"
        if self.kind == "truncated_riesz":
            return f"trunc-riesz:{self.lam!r}:{self.cap!r}"
        return "zero"

    def laplace_potential(self, r):
        """Radial W with Laplacian W = g in the plane, W(0) = 0.

        Used by the contour representation of the repulsive energy of
        planar sets. Only defined for ``dim == 2``.
        """
        if self.dim != 2:
            raise ValueError("laplace_potential is only defined in the plane")
        r = np.asarray(r, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(r)
        if self.kind == "riesz":
            if self.lam >= 2:
                raise KernelValidationError("riesz kernel not integrable in 2D")
            return r ** (2 - self.lam) / (2 - self.lam) ** 2
        if self.kind == "indicator":
            a = self.a
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.where(r <= a, r * r / 4,
                               a * a / 4 + a * a / 2 * np.log(np.maximum(r, a) / a))
            return out
        if self.kind == "exponential":
            from scipy.special import exp1
            k = self.rate
            x = k * r
            with np.errstate(divide="ignore", invalid="ignore"):
                # Ein(x) = gamma + ln x + E1(x); series near 0 avoids cancellation
                ein_big = np.euler_gamma + np.log(np.maximum(x, 1e-300)) + exp1(np.maximum(x, 1e-300))
                ein_small = x - x**2 / 4 + x**3 / 18 - x**4 / 96 + x**5 / 600
                ein = np.where(x < 1e-2, ein_small, ein_big)
                em1 = -np.expm1(-x)
                out = (ein - em1) / k**2
            return np.where(r > 0, out, 0.0)
        # truncated riesz
        lam, M = self.lam, self.cap
        r0 = M ** (-1.0 / lam)
        p = 2 - lam
        with np.errstate(divide="ignore", invalid="ignore"):
            outer = (M * r0**2 / 4
                     + (M * r0**2 / 2 - r0**p / p) * np.log(np.maximum(r, r0) / r0)
                     + (np.maximum(r, r0) ** p - r0**p) / p**2)
        return np.where(r <= r0, M * r * r / 4, outer)


def parse_kernel(text: str, dim: int = 1, cutoff_Rg: float = 1.0) -> KernelSpec:
    """Parse ``riesz:L``, ``indicator:A``, ``exp:RATE``, ``trunc-riesz:L:CAP``, ``zero``."""
    parts = text.strip().split(":")
    name, args = parts[0].lower(), [float(p) for p in parts[1:]]
    try:
        if name == "riesz" and len(args) == 1:
            return KernelSpec("riesz", dim, lam=args[0], cutoff_Rg=cutoff_Rg)
        if name == "indicator" and len(args) == 1:
            return KernelSpec("indicator", dim, a=args[0], cutoff_Rg=cutoff_Rg)
        if name in ("exp", "exponential") and len(args) == 1:
            return KernelSpec("exponential", dim, rate=args[0], cutoff_Rg=cutoff_Rg)
        if name in ("trunc-riesz", "truncated_riesz") and len(args) == 2:
            return KernelSpec("truncated_riesz", dim, lam=args[0], cap=args[1],
                              cutoff_Rg=cutoff_Rg)
        if name == "zero" and not args:
            return KernelSpec("zero", dim, cutoff_Rg=cutoff_Rg)
    except ValueError as exc:
        raise ValueError(f"bad kernel spec {text!r}: {exc}") from None
    raise ValueError(f"bad kernel spec {text!r}")


def riesz(lam: float, dim: int = 1) -> KernelSpec:
    return KernelSpec("riesz", dim, lam=lam)


def indicator(a: float, dim: int = 1) -> KernelSpec:
    return KernelSpec("indicator", dim, a=a)


def exponential(rate: float, dim: int = 1) -> KernelSpec:
    return KernelSpec("exponential", dim, rate=rate)


def truncated_riesz(lam: float, cap: float, dim: int = 1) -> KernelSpec:
    return KernelSpec("truncated_riesz", dim, lam=lam, cap=cap)


def zero(dim: int = 1) -> KernelSpec:
    return KernelSpec("zero", dim)


def kernel_eval(spec: KernelSpec, offset) -> float:
    """g(offset) for a nonzero offset vector (or scalar in 1D)."""
    r = float(np.linalg.norm(np.atleast_1d(np.asarray(offset, dtype=float))))
    if r == 0.0:
        raise ValueError("kernel evaluated at zero offset")
    return float(spec.radial(r))


def _quad(f, a, b, points=None, **kw):
    pts = [p for p in (points or []) if a < p < b]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, points=pts or None, limit=400,
                                  epsabs=0.0, epsrel=kw.get("epsrel", 1e-11))
    return val, err


def kernel_cell_average(spec: KernelSpec, half_width: float) -> float:
    """Mean of g over the cube of the given half-width centred at 0."""
    if not spec.locally_integrable:
        raise KernelValidationError(f"{spec.to_string()} is not locally integrable")
    if spec.is_zero:
        return 0.0
    hw = float(half_width)
    bp = spec.breakpoints()
    if spec.dim == 1:
        val, _ = _quad(lambda r: float(spec.radial(r)), 0.0, hw, bp)
        return val / hw
    # eight congruent triangles of the square, polar coordinates in each

    def ring(phi):
        rmax = hw / math.cos(phi)
        v, _ = _quad(lambda r: float(spec.radial(r)) * r, 0.0, rmax, bp)
        return v

    val, _ = _quad(ring, 0.0, math.pi / 4)
    return 8.0 * val / (4.0 * hw * hw)


# ---------------------------------------------------------------- validation

@dataclass
class ValidationReport:
    kernel: str
    dim: int
    checks: list = field(default_factory=list)  # (name, status, value)

    def add(self, name, ok, value):
        status = ok if isinstance(ok, str) else ("pass" if ok else "fail")
        self.checks.append((name, status, float(value)))

    def status(self, name):
        for n, s, _ in self.checks:
            if n == name:
                return s
        raise KeyError(name)

    @property
    def satisfies_H(self) -> bool:
        return all(self.status(n) == "pass" for n in
                   ("monotone", "locally_integrable", "bounded_beyond_Rg"))

    @property
    def satisfies_I(self) -> bool:
        names = ["radial_moment_integrable"]
        if self.dim == 2:
            names.append("slice_integrable")
        return self.satisfies_H and all(self.status(n) == "pass" for n in names)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["check", "status", "value"])
        for name, status, value in self.checks:
            w.writerow([name, status, repr(value)])
        w.writerow(["H", "pass" if self.satisfies_H else "fail", 1.0 if self.satisfies_H else 0.0])
        w.writerow(["I", "pass" if self.satisfies_I else "fail", 1.0 if self.satisfies_I else 0.0])
        return buf.getvalue()


@dataclass(frozen=True)
class ProbePlan:
    n_radii: int = 64
    r_min: float = 1e-6
    r_max: float = 1e3
    n_directions: int = 16


def _near_zero_integral(spec: KernelSpec, power: float):
    """Decide whether int_0^1 g(r) r^power dr is finite.

    Partial integrals over [eps, 1] for eps = 1e-2 ... 1e-10; the integral is
    declared finite when successive decade increments shrink by at least half.
    Returns (finite, estimate).
    """
    bp = spec.breakpoints()

    def f(r):
        return float(spec.radial(r)) * r**power

    eps = [10.0 ** (-k) for k in (2, 4, 6, 8, 10)]
    parts = []
    prev = 1.0
    for e in eps:
        v, _ = _quad(f, e, prev, bp + [1e-3])
        parts.append(v)
        prev = e
    total = float(sum(parts))
    inc = parts[1:]
    finite = np.isfinite(total) and all(
        b <= 0.5 * a + 1e-14 * max(abs(total), 1.0) for a, b in zip(inc[:-1], inc[1:]))
    return bool(finite), total


def validate_hypotheses(spec: KernelSpec, probes: ProbePlan = ProbePlan()) -> ValidationReport:
    """Numerically check hypotheses (H) and (I) on a sample plan.

    Failures are recorded in the report; nothing is raised.
    """
    N = spec.dim
    rep = ValidationReport(spec.to_string(), N)
    radii = np.geomspace(probes.r_min, probes.r_max, probes.n_radii)
    if N == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        ang = 2 * np.pi * np.arange(probes.n_directions) / probes.n_directions
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    vals = np.array([[kernel_eval(spec, r * d) for r in radii] for d in dirs])
    nonneg = bool(np.all(vals >= 0))
    # monotone along rays: g(t x) <= g(x) for t >= 1
    worst = float(np.max(np.diff(vals, axis=1))) if vals.shape[1] > 1 else 0.0
    rep.add("nonnegative", nonneg, float(vals.min()))
    rep.add("monotone", worst <= 1e-12 * max(1.0, float(np.max(vals[np.isfinite(vals)]))), worst)
    rep.add("radial", bool(np.allclose(vals, vals[0], rtol=1e-12, atol=0)),
            float(np.max(np.abs(vals - vals[0]))))

    finite, est = _near_zero_integral(spec, N - 1)
    rep.add("locally_integrable", finite, est if finite else math.inf)

    beyond = vals[:, radii > spec.cutoff_Rg]
    bound = float(beyond.max()) if beyond.size else 0.0
    rep.add("bounded_beyond_Rg", bool(np.isfinite(bound)), bound)

    finite_I, est_I = _near_zero_integral(spec, N)
    rep.add("radial_moment_integrable", finite_I, est_I if finite_I else math.inf)
    if N == 2:
        finite_s, est_s = _near_zero_integral(spec, N - 2)
        ok = "pass" if finite_s else ("boundary" if spec.kind == "riesz" else "fail")
        rep.add("slice_integrable", ok, est_s if finite_s else math.inf)
    else:
        near = vals[:, radii < 1e-3]
        bounded = bool(np.all(np.isfinite(near)) and near.max() < 1e12)
        rep.add("bounded_near_zero", "pass" if bounded else "recorded", float(near.max()))

    # growth envelope: max_{r <= rho} g(r) r^N should shrink as rho -> 0
    small = radii[radii <= 1.0]
    env_vals = vals[0, : len(small)] * small**N
    envelope = np.maximum.accumulate(env_vals)
    shrinking = bool(np.isfinite(envelope).all()) and (
        envelope[-1] == 0.0 or envelope[0] < 1e-2 * envelope[-1])
    rep.add("growth_envelope", shrinking, float(envelope[0]))
    return rep


def validated(spec: KernelSpec, probes: ProbePlan = ProbePlan()) -> KernelSpec:
    """Copy of ``spec`` with ``satisfies_I`` set from :func:`validate_hypotheses`."""
    return replace(spec, satisfies_I=validate_hypotheses(spec, probes).satisfies_I)


def sup_beyond(spec: KernelSpec, radius: float) -> float:
    """sup of g over |x| > radius (radial monotone kernels: the limit at radius+)."""
    return float(spec.radial(np.nextafter(radius, np.inf)))


def ball_integral(spec: KernelSpec, radius: float) -> float:
    """Integral of g over the ball of the given radius centred at 0."""
    if not spec.locally_integrable:
        raise KernelValidationError(f"{spec.to_string()} is not locally integrable")
    if spec.is_zero:
        return 0.0
    N = spec.dim
    surf = 2.0 if N == 1 else 2 * math.pi
    v, _ = _quad(lambda r: float(spec.radial(r)) * r ** (N - 1), 0.0, radius, spec.breakpoints())
    return surf * v


def lipschitz_constant_C1(spec: KernelSpec, mass_bound: float) -> float:
    """C_1(g, m) = int_{B(0,R_g)} g + m sup_{|x| > R_g} g."""
    Rg = spec.cutoff_Rg
    return ball_integral(spec, Rg) + mass_bound * sup_beyond(spec, Rg)
