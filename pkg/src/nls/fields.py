"""Grids, densities, masks, balls, nearly-spherical profiles and asymmetry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy import ndimage, optimize, signal


class GeometryError(ValueError):
    """A shape or ball does not fit in the computational box."""


def unit_ball_volume(dim: int) -> float:
    return {1: 2.0, 2: math.pi}[dim]


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on the box [-L, L]^N."""

    dim: int
    L: float
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.n < 8:
            raise ValueError("need at least 8 cells per axis")
        if not self.L > 0:
            raise ValueError("half extent must be positive")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.dim

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.dim

    @property
    def box_volume(self) -> float:
        return (2.0 * self.L) ** self.dim

    def axis(self) -> np.ndarray:
        return -self.L + (np.arange(self.n) + 0.5) * self.h

    def coords(self) -> tuple:
        ax = self.axis()
        if self.dim == 1:
            return (ax,)
        return tuple(np.meshgrid(ax, ax, indexing="ij"))

    def radius(self, center: Sequence[float] = None) -> np.ndarray:
        c = np.zeros(self.dim) if center is None else np.asarray(center, float)
        return np.sqrt(sum((x - ci) ** 2 for x, ci in zip(self.coords(), c)))

    def nearest_index(self, point: Sequence[float]) -> tuple:
        return tuple(int(np.clip(np.floor((p + self.L) / self.h), 0, self.n - 1)) for p in point)

    def center_of(self, index: Sequence[int]) -> np.ndarray:
        return np.array([-self.L + (i + 0.5) * self.h for i in index])


def _same_grid(a: "Field", b: "Field"):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


@dataclass(frozen=True, eq=False)
class Field:
    """Real cell values on a grid; base for densities and signed differences."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def mass(self) -> float:
        return math.fsum(self.values.ravel()) * self.grid.cell_volume

    def l1(self) -> float:
        return math.fsum(np.abs(self.values).ravel()) * self.grid.cell_volume

    def __sub__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __add__(self, other: "Field") -> "Field":
        _same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def scaled(self, c: float) -> "Field":
        return Field(self.grid, c * self.values)


@dataclass(frozen=True, eq=False)
class DensityField(Field):
    """Cell values in [0, 1]."""

    def __post_init__(self):
        super().__post_init__()
        v = self.values
        if v.size and (v.min() < -1e-12 or v.max() > 1 + 1e-12):
            raise ValueError("density values must lie in [0, 1]")
        if v.min() < 0 or v.max() > 1:
            c = np.clip(v, 0.0, 1.0)
            c.setflags(write=False)
            object.__setattr__(self, "values", c)

    def with_values(self, values) -> "DensityField":
        return DensityField(self.grid, values)


@dataclass(frozen=True, eq=False)
class SetMask(Field):
    """Binary field; values stored as 0.0/1.0 floats, `cells` gives booleans."""

    def __post_init__(self):
        b = np.asarray(self.values)
        if b.dtype != bool:
            if not np.all((b == 0) | (b == 1)):
                raise ValueError("mask values must be 0 or 1")
        super().__post_init__()

    @property
    def cells(self) -> np.ndarray:
        return self.values > 0.5

    @property
    def volume(self) -> float:
        return int(self.cells.sum()) * self.grid.cell_volume

    def to_density(self) -> DensityField:
        return DensityField(self.grid, self.values)


FieldLike = Union[Field, DensityField, SetMask]


@dataclass(frozen=True)
class BallSpec:
    """Ball of volume `mass` about `center`."""

    center: tuple
    mass: float

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError("ball mass must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def radius(self) -> float:
        return (self.mass / unit_ball_volume(self.dim)) ** (1.0 / self.dim)


def ball_radius(mass: float, dim: int) -> float:
    return (mass / unit_ball_volume(dim)) ** (1.0 / dim)


_SUB = 4


def _coverage(rel: Sequence[np.ndarray], R: float, h: float, antialias: bool) -> np.ndarray:
    """Ball indicator on cells whose centres sit at offsets `rel` from the ball centre."""
    if not antialias:
        return (sum(x * x for x in rel) <= R * R).astype(float)
    if len(rel) == 1:
        x = rel[0]
        lo = np.maximum(x - h / 2, -R)
        hi = np.minimum(x + h / 2, R)
        return np.clip(hi - lo, 0.0, h) / h
    offs = (np.arange(_SUB) + 0.5) / _SUB - 0.5
    acc = np.zeros(rel[0].shape)
    r2 = R * R
    for ox in offs:
        for oy in offs:
            acc += ((rel[0] + ox * h) ** 2 + (rel[1] + oy * h) ** 2 <= r2)
    return acc / _SUB ** 2


def ball_field(grid: Grid, ball: BallSpec, antialias: bool = True) -> DensityField:
    """Rasterized indicator of a ball; fractional coverage when `antialias`."""
    if ball.dim != grid.dim:
        raise ValueError("ball and grid dimensions differ")
    R = ball.radius
    if any(abs(c) + R > grid.L - grid.h for c in ball.center):
        raise GeometryError(f"ball of radius {R:.4g} does not fit in the box [-{grid.L}, {grid.L}]")
    rel = [x - c for x, c in zip(grid.coords(), ball.center)]
    return DensityField(grid, _coverage(rel, R, grid.h, antialias))


def ball_mask(grid: Grid, ball: BallSpec) -> SetMask:
    return SetMask(grid, ball_field(grid, ball, antialias=False).values)


def dilate(f: FieldLike, t: float) -> FieldLike:
    """f[t](x) = f(x / t) by linear interpolation; masks are re-thresholded at 1/2."""
    if not t > 0:
        raise ValueError("dilation factor must be positive")
    g = f.grid
    nz = np.nonzero(np.abs(f.values) > 0)
    if nz[0].size:
        ext = max(float(np.max(np.abs(g.axis()[idx]))) for idx in nz) + g.h / 2
        if ext * t > g.L:
            raise GeometryError(f"dilated support {ext * t:.4g} exceeds the box half-extent {g.L}")
    pts = [(x / t + g.L) / g.h - 0.5 for x in g.coords()]
    out = ndimage.map_coordinates(np.asarray(f.values, float), pts, order=1, mode="constant", cval=0.0)
    if isinstance(f, SetMask):
        return SetMask(g, (out >= 0.5).astype(float))
    if isinstance(f, DensityField):
        return DensityField(g, np.clip(out, 0.0, 1.0))
    return Field(g, out)


def barycenter(f: FieldLike) -> np.ndarray:
    m = f.mass
    if m <= 0:
        raise ValueError("barycenter of a field with zero mass")
    dv = f.grid.cell_volume
    return np.array([math.fsum((x * f.values).ravel()) * dv / m for x in f.grid.coords()])


def shift_cells(f: FieldLike, shift: Sequence[int]) -> FieldLike:
    """Translate by whole cells, filling with zeros; error if mass would leave the box."""
    v = np.asarray(f.values)
    out = np.zeros_like(v)
    src, dst = [], []
    for k, n in zip(shift, v.shape):
        k = int(k)
        if abs(k) >= n:
            raise GeometryError("shift larger than the grid")
        src.append(slice(max(0, -k), n - max(0, k)))
        dst.append(slice(max(0, k), n - max(0, -k)))
    out[tuple(dst)] = v[tuple(src)]
    if not math.isclose(math.fsum(np.abs(out).ravel()), math.fsum(np.abs(v).ravel()), rel_tol=1e-12, abs_tol=1e-300):
        raise GeometryError("shift pushes mass out of the box")
    return type(f)(f.grid, out)


def recenter_cells(f: FieldLike) -> tuple:
    """Shift by whole cells so the barycenter is as close to the origin as possible."""
    b = barycenter(f)
    shift = [-int(round(c / f.grid.h)) for c in b]
    if not any(shift):
        return f, tuple(shift)
    return shift_cells(f, shift), tuple(shift)


# ---------------------------------------------------------------- asymmetry

@dataclass(frozen=True)
class AsymmetryResult:
    A: float
    center: tuple
    distance: float

    def __iter__(self):
        return iter((self.A, self.center))


def _asym_score(fpad, mass_f, index, delta, R, h, w, antialias):
    """||f - chi_{x+B}||_1 / h^N for the ball at cell `index` (padded coords) plus `delta`."""
    sl = tuple(slice(i - w, i + w + 1) for i in index)
    loc = np.arange(-w, w + 1) * h
    if len(index) == 1:
        rel = [loc - delta[0]]
    else:
        X, Y = np.meshgrid(loc - delta[0], loc - delta[1], indexing="ij")
        rel = [X, Y]
    chi = _coverage(rel, R, h, antialias)
    fw = fpad[sl]
    return math.fsum(np.abs(fw - chi).ravel()) + (mass_f - math.fsum(fw.ravel()))


def asymmetry(f: FieldLike, antialias: bool = True, refine: bool = True) -> AsymmetryResult:
    """Fraenkel-type asymmetry min_x ||f - chi_{x+B[m]}||_1 / m with m = mass(f).

    Exhaustive search over cell-centred ball positions (FFT cross-correlation),
    exact re-evaluation of the neighbours of the best one, then a golden-section
    refinement per axis within one cell.  Returns (A, center).
    """
    g = f.grid
    N, h = g.dim, g.h
    vals = np.asarray(f.values, float)
    m = f.mass
    if not m > 0:
        raise ValueError("asymmetry needs positive mass")
    R = ball_radius(m, N)
    w = int(math.ceil(R / h)) + 2
    fpad = np.pad(vals, w)
    mass_f = math.fsum(vals.ravel())
    loc = np.arange(-w, w + 1) * h
    rel = [loc] if N == 1 else list(np.meshgrid(loc, loc, indexing="ij"))
    tpl = _coverage(rel, R, h, antialias)
    # upper bound f + chi - 2 f chi of |f - chi| for values in [0, 1]
    corr = signal.correlate(fpad, tpl, mode="same", method="fft")
    inner = tuple(slice(w, w + g.n) for _ in range(N))
    bound = mass_f + tpl.sum() - 2 * corr[inner]
    bound = np.round(bound / max(mass_f, 1e-300), 9)
    best = np.unravel_index(int(np.argmin(bound)), bound.shape)
    cands = []
    for d in np.ndindex(*(3,) * N):
        idx = tuple(b + k - 1 for b, k in zip(best, d))
        if all(0 <= i < g.n for i in idx):
            pidx = tuple(i + w for i in idx)
            cands.append((_asym_score(fpad, mass_f, pidx, (0.0,) * N, R, h, w, antialias), idx))
    score, idx = min(cands)
    pidx = tuple(i + w for i in idx)
    delta = [0.0] * N
    if refine:
        for ax in range(N):
            def obj(d, ax=ax):
                dd = list(delta)
                dd[ax] = d
                return _asym_score(fpad, mass_f, pidx, dd, R, h, w, antialias)
            res = optimize.minimize_scalar(obj, bounds=(-h, h), method="bounded",
                                           options={"xatol": 1e-6 * h})
            if res.fun < score:
                score, delta[ax] = float(res.fun), float(res.x)
    center = tuple(float(c + d) for c, d in zip(g.center_of(idx), delta))
    dist = score * g.cell_volume
    A = min(max(dist / m, 0.0), 2.0)
    return AsymmetryResult(A, center, dist)


# --------------------------------------------------------- boundary profiles

def _trig_eval(samples: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Trigonometric interpolant of uniform samples evaluated at arbitrary angles."""
    M = samples.size
    c = np.fft.rfft(samples) / M
    k = np.arange(c.size)
    wts = np.full(c.size, 2.0)
    wts[0] = 1.0
    if M % 2 == 0:
        wts[-1] = 1.0
    th = np.asarray(theta, float)[..., None]
    return np.sum(wts * (c.real * np.cos(k * th) - c.imag * np.sin(k * th)), axis=-1)


def _trig_derivative(samples: np.ndarray) -> np.ndarray:
    M = samples.size
    c = np.fft.rfft(samples)
    k = np.arange(c.size)
    d = 1j * k * c
    if M % 2 == 0:
        d[-1] = 0.0
    return np.fft.irfft(d, M)


@dataclass(frozen=True, eq=False)
class BoundaryProfile:
    """Radial graph r = 1 + u(theta) over the unit circle at M uniform angles."""

    samples: np.ndarray
    cos_coeffs: Optional[np.ndarray] = None
    sin_coeffs: Optional[np.ndarray] = None

    def __post_init__(self):
        u = np.array(self.samples, dtype=float, copy=True).ravel()
        if u.size < 8:
            raise ValueError("profile needs at least 8 samples")
        u.setflags(write=False)
        object.__setattr__(self, "samples", u)

    @classmethod
    def from_modes(cls, cos_coeffs: Sequence[float], sin_coeffs: Sequence[float] = (), M: int = 256):
        """u = sum_k a_k cos(k theta) + b_k sin(k theta), k counted from 0."""
        a = np.asarray(cos_coeffs, float)
        b = np.zeros_like(a) if len(sin_coeffs) == 0 else np.asarray(sin_coeffs, float)
        th = 2 * np.pi * np.arange(M) / M
        u = np.zeros(M)
        for k in range(max(a.size, b.size)):
            if k < a.size:
                u += a[k] * np.cos(k * th)
            if k < b.size:
                u += b[k] * np.sin(k * th)
        return cls(u, a, b)

    @classmethod
    def from_function(cls, fn, M: int = 256):
        th = 2 * np.pi * np.arange(M) / M
        return cls(np.asarray(fn(th), float) * np.ones(M))

    @property
    def M(self) -> int:
        return self.samples.size

    @property
    def theta(self) -> np.ndarray:
        return 2 * np.pi * np.arange(self.M) / self.M

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.samples)))

    @property
    def lipschitz(self) -> float:
        """max |u'| by periodic central differences."""
        u = self.samples
        d = (np.roll(u, -1) - np.roll(u, 1)) / (2 * (2 * np.pi / self.M))
        return float(np.max(np.abs(d)))

    @property
    def w1inf(self) -> float:
        return self.sup_norm + self.lipschitz

    @property
    def nearly_spherical(self) -> bool:
        return self.w1inf <= 1.0

    def radius(self, theta) -> np.ndarray:
        return 1.0 + _trig_eval(self.samples, theta)

    def derivative(self) -> np.ndarray:
        return _trig_derivative(self.samples)

    def area(self) -> float:
        r = 1.0 + self.samples
        return math.fsum(0.5 * r * r) * (2 * np.pi / self.M)

    def barycenter(self) -> np.ndarray:
        r = 1.0 + self.samples
        th = self.theta
        c = (2 * np.pi / self.M) / 3.0
        return np.array([math.fsum(r ** 3 * np.cos(th)) * c, math.fsum(r ** 3 * np.sin(th)) * c]) / self.area()

    def normalized(self) -> "BoundaryProfile":
        """Radially rescaled so the enclosed area is pi."""
        c = math.sqrt(math.pi / self.area())
        return BoundaryProfile(c * (1.0 + self.samples) - 1.0)

    def recentered(self, iters: int = 3) -> "BoundaryProfile":
        """Same set described about its barycenter (Newton ray intersection)."""
        p = self
        for _ in range(iters):
            b = p.barycenter()
            if np.hypot(*b) < 1e-14:
                break
            th = p.theta
            phi = th.copy()
            for _ in range(30):
                r = p.radius(phi)
                dr = _trig_eval(p.derivative(), phi)
                px, py = r * np.cos(phi) - b[0], r * np.sin(phi) - b[1]
                cr = np.cos(th) * py - np.sin(th) * px
                dx = dr * np.cos(phi) - r * np.sin(phi)
                dy = dr * np.sin(phi) + r * np.cos(phi)
                dcr = np.cos(th) * dy - np.sin(th) * dx
                step = cr / dcr
                phi = phi - step
                if np.max(np.abs(step)) < 1e-15:
                    break
            r = p.radius(phi)
            rho = np.hypot(r * np.cos(phi) - b[0], r * np.sin(phi) - b[1])
            p = BoundaryProfile(rho - 1.0)
        return p

    def standardized(self) -> "BoundaryProfile":
        """Barycentred and area-normalized: the nearly-spherical normal form."""
        return self.recentered().normalized()

    def points(self, M: Optional[int] = None) -> np.ndarray:
        th = self.theta if M is None else 2 * np.pi * np.arange(M) / M
        r = self.radius(th) if M is not None else 1.0 + self.samples
        return np.stack([r * np.cos(th), r * np.sin(th)], axis=-1)


def profile_to_mask(p: BoundaryProfile, grid: Grid, normalize: bool = True) -> SetMask:
    """Rasterize {r <= 1 + u(theta)} after rescaling the area to pi."""
    if grid.dim != 2:
        raise ValueError("profiles live in two dimensions")
    if p.sup_norm >= 1.0:
        raise GeometryError("profile sup norm must stay below 1")
    q = p.normalized() if normalize else p
    rmax = 1.0 + q.sup_norm
    if rmax > grid.L - grid.h:
        raise GeometryError("profile does not fit in the box")
    X, Y = grid.coords()
    r = np.hypot(X, Y)
    if not np.any(q.samples):
        return SetMask(grid, (X * X + Y * Y <= 1.0).astype(float))
    inside = np.zeros(grid.shape, bool)
    cand = r <= rmax + 1e-12
    th = np.arctan2(Y[cand], X[cand])
    inside[cand] = r[cand] <= q.radius(th)
    return SetMask(grid, inside.astype(float))


# ------------------------------------------------------------------ file I/O

def write_field(path, f: FieldLike) -> None:
    g = f.grid
    kind = "mask" if isinstance(f, SetMask) else "density"
    fmt = "%d" if kind == "mask" else "%.17g"
    with open(path, "w") as fh:
        fh.write(f"NLSF1 dim={g.dim} n={g.n} L={g.L!r} kind={kind}\n")
        np.savetxt(fh, np.asarray(f.values).reshape(-1, g.n) if g.dim == 2 else np.asarray(f.values)[None, :], fmt=fmt)


def _header(line: str, magic: str) -> dict:
    parts = line.split()
    if not parts or parts[0] != magic:
        raise ValueError(f"not an {magic} file")
    return dict(p.split("=", 1) for p in parts[1:])


def read_field(path) -> FieldLike:
    with open(path) as fh:
        hdr = _header(fh.readline(), "NLSF1")
        data = np.array(fh.read().split(), dtype=float)
    g = Grid(int(hdr["dim"]), float(hdr["L"]), int(hdr["n"]))
    data = data.reshape(g.shape)
    if hdr.get("kind", "density") == "mask":
        return SetMask(g, data)
    return DensityField(g, data)


def write_profile(path, p: BoundaryProfile) -> None:
    K = 0 if p.cos_coeffs is None else p.cos_coeffs.size
    with open(path, "w") as fh:
        fh.write(f"NLSP1 M={p.M} K={K}\n")
        fh.write(" ".join(format(x, ".17g") for x in p.samples) + "\n")
        if K:
            fh.write(" ".join(format(x, ".17g") for x in p.cos_coeffs) + "\n")
            fh.write(" ".join(format(x, ".17g") for x in p.sin_coeffs) + "\n")


def read_profile(path) -> BoundaryProfile:
    with open(path) as fh:
        hdr = _header(fh.readline(), "NLSP1")
        rows = [np.array(line.split(), float) for line in fh if line.strip()]
    if int(hdr.get("K", 0)) and len(rows) >= 3:
        return BoundaryProfile(rows[0], rows[1], rows[2])
    return BoundaryProfile(rows[0])
