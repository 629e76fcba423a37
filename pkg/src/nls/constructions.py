"""Mass cuts, cutting radii, rescaling and the rounding construction for densities."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .energies import EnergyParams, frac_perimeter, total_G
from .fields import (DensityField, FieldLike, GeometryError, Grid, SetMask, ball_radius,
                     barycenter, dilate)


def hyperplane_cut(f: FieldLike, target_mass: float, axis: int = 0) -> FieldLike:
    """Keep the part of f below a hyperplane {x_axis < t} carrying `target_mass`.

    Densities are cut exactly by scaling the straddling slab; masks keep whole
    cells of that slab in row-major order, so the mass is within one cell.
    """
    m = f.mass
    if not 0 < target_mass:
        raise ValueError("target mass must be positive")
    if target_mass > m * (1 + 1e-12):
        raise ValueError(f"target mass {target_mass} exceeds the available mass {m}")
    g = f.grid
    v = np.moveaxis(np.array(f.values, float), axis, 0)
    if target_mass >= m:
        return f
    dv = g.cell_volume
    slab = np.array([math.fsum(row.ravel()) for row in v]) * dv
    before = np.concatenate([[0.0], np.cumsum(slab)])
    k = int(np.searchsorted(before, target_mass, side="right")) - 1
    out = np.zeros_like(v)
    out[:k] = v[:k]
    rest = target_mass - before[k]
    if isinstance(f, SetMask):
        row = v[k].ravel()
        keep = np.zeros_like(row)
        need = int(round(rest / dv))
        on = np.flatnonzero(row > 0.5)[:need]
        keep[on] = 1.0
        out[k] = keep.reshape(v[k].shape)
    elif slab[k] > 0:
        out[k] = v[k] * min(1.0, rest / slab[k])
    return type(f)(g, np.moveaxis(out, 0, axis))


@dataclass
class CutResult:
    r: float
    E_cut: SetMask
    certificate: float
    radii: np.ndarray
    D: np.ndarray
    removed: float

    def __iter__(self):
        return iter((self.r, self.E_cut, self.certificate))


def _outside_volume(E: SetMask, center, r: float) -> float:
    rad = E.grid.radius(center)
    return int(np.count_nonzero(E.cells & (rad > r * (1 + 1e-12)))) * E.grid.cell_volume


def cutting_radius(E: SetMask, s: float, eta: float, c_search: float = 3.0,
                   n_radii: int = 32, center=None) -> CutResult:
    """Search r in [1, 1 + c eta^(1/N)] maximizing P_s(E) - P_s(E cap B_r) - |E minus B_r| / eta^(s/N)."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    g = E.grid
    N = g.dim
    if center is None:
        center = barycenter(E)
    excess = _outside_volume(E, center, 1.0)
    if excess > eta + 1e-12:
        raise ValueError(f"|E minus B| = {excess:.4g} exceeds eta = {eta:.4g}")
    radii = np.linspace(1.0, 1.0 + c_search * eta ** (1.0 / N), n_radii)
    if excess == 0:
        return CutResult(1.0, E, math.inf, radii, np.zeros(n_radii), 0.0)
    P = frac_perimeter(E, s)
    rad = g.radius(center)
    D = np.empty(n_radii)
    outs = np.empty(n_radii)
    for i, r in enumerate(radii):
        cut = SetMask(g, (E.cells & (rad <= r * (1 + 1e-12))).astype(float))
        outs[i] = _outside_volume(E, center, r)
        D[i] = P - frac_perimeter(cut, s) - outs[i] / eta ** (s / N)
    i = int(np.argmax(D))
    r = float(radii[i])
    E_cut = SetMask(g, (E.cells & (rad <= r * (1 + 1e-12))).astype(float))
    cert = D[i] / max(outs[i], g.cell_volume)
    return CutResult(r, E_cut, float(cert), radii, D, float(outs[i]))


def rescale_to_mass(f: FieldLike, m: float) -> FieldLike:
    mass = f.mass
    if not mass > 0:
        raise ValueError("cannot rescale a field with zero mass")
    t = (m / mass) ** (1.0 / f.grid.dim)
    if t == 1.0:
        return f
    return dilate(f, t)


def discrete_ball(grid: Grid, m: float, center=None) -> DensityField:
    """Cells filled in order of centre radius (row-major among ties) to mass exactly m.

    All cells are 0 or 1 except the last one, which takes the remainder.
    """
    cap = m / grid.cell_volume
    if cap > grid.n ** grid.dim:
        raise GeometryError("mass exceeds the box volume")
    rad = grid.radius(center).ravel()
    order = np.lexsort((np.arange(rad.size), rad))
    full = int(math.floor(cap))
    vals = np.zeros(rad.size)
    vals[order[:full]] = 1.0
    if full < rad.size:
        vals[order[full]] = cap - full
    if ball_radius(m, grid.dim) > grid.L - grid.h:
        raise GeometryError("ball does not fit in the box")
    return DensityField(grid, vals.reshape(grid.shape))


@dataclass
class RoundingResult:
    h_prime: DensityField
    theta: float
    filled_mass: float
    cut_mass: float
    annulus_adjustment: float
    flags: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(self.flags.values())


def rounding(h: DensityField, theta: float, m: Optional[float] = None) -> RoundingResult:
    """Push h toward the ball of equal mass about the origin.

    Cells of the discrete ball inside radius (1 - theta) R become 1, cells
    outside it beyond (1 + theta) R become 0, and the mass imbalance is
    absorbed in the annulus, moving cells toward the ball indicator (outermost
    first when removing, innermost first when adding).
    """
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    g = h.grid
    dv = g.cell_volume
    mass = h.mass
    if m is None:
        m = mass
    elif not math.isclose(m, mass, rel_tol=1e-9):
        raise ValueError(f"mass of h ({mass}) differs from the ball mass {m}")
    R = ball_radius(m, g.dim)
    chi = discrete_ball(g, m).values.ravel()
    hv = np.asarray(h.values, float).ravel()
    rad = g.radius().ravel()
    inner = (chi == 1.0) & (rad < (1 - theta) * R)
    outer = (chi == 0.0) & (rad > (1 + theta) * R)
    ann = ~(inner | outer)
    hp = hv.copy()
    hp[inner] = 1.0
    hp[outer] = 0.0
    fill = math.fsum(1.0 - hv[inner]) * dv
    cut = math.fsum(hv[outer]) * dv
    need = (fill - cut) / dv
    idx = np.flatnonzero(ann)
    if need > 0:
        cand = idx[hp[idx] > chi[idx]]
        order = cand[np.lexsort((cand, -rad[cand]))]
        for c in order:
            if need <= 0:
                break
            take = min(hp[c] - chi[c], need)
            hp[c] -= take
            need -= take
    elif need < 0:
        need = -need
        cand = idx[hp[idx] < chi[idx]]
        order = cand[np.lexsort((cand, rad[cand]))]
        for c in order:
            if need <= 0:
                break
            give = min(chi[c] - hp[c], need)
            hp[c] += give
            need -= give
    hp = np.clip(hp, 0.0, 1.0)
    adjust = math.fsum(np.abs(hp[ann] - hv[ann])) * dv
    res = RoundingResult(DensityField(g, hp.reshape(g.shape)), theta, fill, cut, adjust)
    _check_rounding(res, hv, hp, chi, inner, outer, m, dv)
    return res


def _check_rounding(res, hv, hp, chi, inner, outer, m, dv):
    tol = dv * (1 + 1e-9)
    mass_err = abs(math.fsum(hp) * dv - m) / m
    d_new = math.fsum(np.abs(hp - chi)) * dv
    d_old = math.fsum(np.abs(hv - chi)) * dv
    moved = math.fsum(np.abs(hv - hp)) * dv
    moved_E = math.fsum(np.abs(hv - hp)[inner | outer]) * dv
    toward = np.all((hp - hv) * (chi - hv) >= -1e-15) and np.all(np.abs(hp - chi) <= np.abs(hv - chi) + 1e-15)
    res.residuals = {"constr1": mass_err, "constr2": float(max(np.max(1 - hp[inner], initial=0.0),
                                                              np.max(hp[outer], initial=0.0))),
                     "constr3": float(np.max(np.maximum(0.0, (hv - hp) * (chi - hv)), initial=0.0)),
                     "constr4": d_new - d_old, "constr5": moved - 2 * moved_E}
    res.flags = {"constr1": mass_err <= 1e-12,
                 "constr2": bool(np.all(hp[inner] == 1.0) and np.all(hp[outer] == 0.0)),
                 "constr3": bool(toward),
                 "constr4": d_new <= d_old + tol,
                 "constr5": moved <= 2 * moved_E + tol}


@dataclass
class RoundingSequence:
    steps: list
    reason: str
    improved: bool

    def rows(self):
        return [(k, th, a, e) for k, th, a, e, _ in self.steps]


def rounding_sequence(h0: DensityField, params: EnergyParams, k_max: int = 8,
                      rel_tol: float = 1e-6) -> RoundingSequence:
    """h_{k+1} = rounding(h_k, 2^-k), recording a_k = 2^k R^-N ||h_k - chi_B||_1 and G(h_k)."""
    g = h0.grid
    m = h0.mass
    R = ball_radius(m, g.dim)
    chi = discrete_ball(g, m)
    steps = []
    h = h0
    reason = "k_max reached"

    def record(k, hk):
        a = 2.0 ** k * R ** (-g.dim) * (hk - chi).l1()
        steps.append((k, 2.0 ** (-k), a, total_G(hk, params).total, hk))

    record(0, h)
    for k in range(k_max):
        nxt = rounding(h, 2.0 ** (-k), m).h_prime
        record(k + 1, nxt)
        if np.array_equal(nxt.values, h.values):
            reason = "fixed point"
            break
        h = nxt
    G0 = steps[0][3]
    improved = any(e < G0 - rel_tol * abs(G0) for _, _, _, e, _ in steps[1:])
    return RoundingSequence(steps, reason, improved)


def annulus_density(R: float, theta: float, grid: Grid, fill: float = 1.0, center=None) -> DensityField:
    """Constant `fill` on (1 - theta) R < |x| < (1 + theta) R."""
    if not 0 <= fill <= 1:
        raise ValueError("fill must lie in [0, 1]")
    if (1 + theta) * R > grid.L - grid.h:
        raise GeometryError("annulus does not fit in the box")
    rad = grid.radius(center)
    on = (rad > (1 - theta) * R) & (rad < (1 + theta) * R)
    return DensityField(grid, np.where(on, fill, 0.0))
