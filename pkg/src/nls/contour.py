"""Energies of planar sets bounded by smooth closed curves.

Both double integrals reduce to boundary integrals through the divergence
theorem (Delta |x|^-s = s^2 |x|^-(2+s) and Delta W = g in the plane):

    P_s(E) = s^-2 sum_{a,b} oint oint  t_a . t_b |x_a - x_b|^-s
    R(E)   = - sum_{a,b} oint oint  t_a . t_b W(|x_a - x_b|)

with t the (unnormalized) tangents of counter-clockwise boundary curves.
Self-pairs use product integration against |2 sin((u - v)/2)|^p, which is
spectrally accurate for smooth curves; distinct curves use the trapezoid rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .energies import EnergyParams, EnergyReport, chord_power_coeffs
from .fields import BoundaryProfile, _trig_eval
from .kernels import KernelSpec


@dataclass(frozen=True, eq=False)
class Curve:
    """Closed curve sampled at M uniform parameter values on [0, 2 pi)."""

    points: np.ndarray
    tangents: np.ndarray

    @property
    def M(self) -> int:
        return self.points.shape[0]

    def area(self) -> float:
        x, y = self.points.T
        dx, dy = self.tangents.T
        return 0.5 * math.fsum(x * dy - y * dx) * (2 * math.pi / self.M)


def circle(center: Sequence[float], radius: float, M: int = 256) -> Curve:
    th = 2 * np.pi * np.arange(M) / M
    e = np.stack([np.cos(th), np.sin(th)], axis=1)
    return Curve(np.asarray(center, float) + radius * e, radius * e[:, ::-1] * np.array([-1.0, 1.0]))


def profile_curve(p: BoundaryProfile, M: int = 512) -> Curve:
    """Boundary (1 + u) e_theta of a star-shaped profile, resampled to M points."""
    th = 2 * np.pi * np.arange(M) / M
    u = _trig_eval(p.samples, th) if M != p.M else p.samples
    du = _trig_eval(p.derivative(), th) if M != p.M else p.derivative()
    r = 1.0 + u
    c, s = np.cos(th), np.sin(th)
    pts = np.stack([r * c, r * s], axis=1)
    tan = np.stack([du * c - r * s, du * s + r * c], axis=1)
    return Curve(pts, tan)


@lru_cache(maxsize=64)
def _product_weights(p: float, M: int) -> np.ndarray:
    """w_d with sum_j F(v_j) w_{j-i} ~ int F(v) |2 sin((v - v_i)/2)|^p dv."""
    K = M // 2
    c = chord_power_coeffs(p, K)
    A = np.empty(M)
    A[: K + 1] = c
    A[K + 1:] = c[1: M - K][::-1]
    return (2 * np.pi / M) * np.real(np.fft.fft(A))


def _self_pair(curve: Curve, p: float, scale_fn=None) -> float:
    """oint oint t_i . t_j |x_i - x_j|^p with the chord singularity integrated exactly."""
    M = curve.M
    th = 2 * np.pi * np.arange(M) / M
    w = _product_weights(float(p), M)
    X, T = curve.points, curve.tangents
    dif = X[:, None, :] - X[None, :, :]
    dist = np.sqrt(np.sum(dif * dif, axis=-1))
    chord = np.abs(2 * np.sin((th[:, None] - th[None, :]) / 2))
    np.fill_diagonal(chord, 1.0)
    ratio = dist / chord
    speed = np.sqrt(np.sum(T * T, axis=1))
    np.fill_diagonal(ratio, speed)
    F = (T @ T.T) * ratio ** p
    idx = (np.arange(M)[None, :] - np.arange(M)[:, None]) % M
    return math.fsum((F * w[idx]).ravel()) * (2 * np.pi / M)


def _cross_pair(a: Curve, b: Curve, fn) -> float:
    dif = a.points[:, None, :] - b.points[None, :, :]
    dist = np.sqrt(np.sum(dif * dif, axis=-1))
    F = (a.tangents @ b.tangents.T) * fn(dist)
    return math.fsum(F.ravel()) * (2 * np.pi / a.M) * (2 * np.pi / b.M)


def perimeter(curves: Sequence[Curve], s: float) -> float:
    """P_s of the region enclosed by disjoint counter-clockwise curves."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    total = 0.0
    for i, a in enumerate(curves):
        total += _self_pair(a, -s)
        for b in curves[i + 1:]:
            total += 2 * _cross_pair(a, b, lambda r: r ** (-s))
    return total / (s * s)


def repulsion(curves: Sequence[Curve], kernel: KernelSpec) -> float:
    """R(E) = int_E int_E g(x - y) for a planar kernel."""
    if kernel.dim != 2:
        raise ValueError("contour repulsion needs a planar kernel")
    if kernel.is_zero:
        return 0.0
    total = 0.0
    if kernel.kind == "riesz":
        p = 2.0 - kernel.lam
        for i, a in enumerate(curves):
            total += _self_pair(a, p)
            for b in curves[i + 1:]:
                total += 2 * _cross_pair(a, b, lambda r: r ** p)
        return -total / (p * p)
    W = kernel.laplace_potential
    for i, a in enumerate(curves):
        total += _cross_pair(a, a, W)
        for b in curves[i + 1:]:
            total += 2 * _cross_pair(a, b, W)
    return -total


def disc_perimeter(s: float, radius: float = 1.0) -> float:
    """Closed form P_s of a planar disc."""
    c1 = chord_power_coeffs(-s, 1)[1]
    return 4 * math.pi ** 2 * c1 / (s * s) * radius ** (2 - s)


def ball_perimeter(s: float, m: float, dim: int) -> float:
    """P_s(B[m]) in dimension 1 (interval) or 2 (disc)."""
    if dim == 1:
        return 2 * m ** (1 - s) / (s * (1 - s))
    return disc_perimeter(s, math.sqrt(m / math.pi))


def profile_energy(p: BoundaryProfile, params: EnergyParams, M: int = 512,
                   normalize: bool = True) -> EnergyReport:
    """F_gamma of the star-shaped set {r <= 1 + u} (area rescaled to pi)."""
    q = p.normalized() if normalize else p
    cur = [profile_curve(q, M)]
    P = perimeter(cur, params.s)
    Rv = 0.0 if params.kernel is None else repulsion(cur, params.kernel)
    return EnergyReport(P, Rv, 0.0, P + params.gamma * Rv,
                        {"M": M, "method": "contour", "normalized": normalize})


def symmetric_difference(p: BoundaryProfile, q: BoundaryProfile, M: int = 1024) -> float:
    """|E_p symmetric-difference E_q| for star-shaped sets about the same origin."""
    th = 2 * np.pi * np.arange(M) / M
    r1 = p.radius(th)
    r2 = q.radius(th)
    return 0.5 * math.fsum(np.abs(r1 * r1 - r2 * r2)) * (2 * math.pi / M)
