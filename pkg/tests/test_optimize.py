import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nls.constructions import discrete_ball
from nls.energies import EnergyParams, total_G
from nls.fields import BoundaryProfile, DensityField, Grid, shift_cells
from nls.kernels import exponential, indicator, riesz, truncated_riesz, zero
from nls.optimize import (DescentOptions, gradient_G, minimize_density, minimize_set_profile,
                          project_box_mass, random_density, set_energy)

BOX = Grid(1, 5.0, 100)  # box volume 10


def test_projection_examples():
    h = np.full(BOX.shape, 0.5)
    np.testing.assert_allclose(project_box_mass(h, 5.0, BOX).values, 0.5, atol=1e-10)
    np.testing.assert_allclose(project_box_mass(h, 10.0, BOX).values, 1.0, atol=1e-10)
    np.testing.assert_allclose(project_box_mass(h, 7.5, BOX).values, 0.75, atol=1e-10)
    with pytest.raises(ValueError):
        project_box_mass(h, 11.0, BOX)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 100_000), st.floats(0.1, 9.9))
def test_projection_feasible_and_idempotent(seed, m):
    rng = np.random.default_rng(seed)
    raw = rng.normal(0.3, 1.0, BOX.shape)
    p = project_box_mass(raw, m, BOX)
    assert p.values.min() >= 0 and p.values.max() <= 1
    assert abs(p.mass - m) <= 1e-10 * m
    q = project_box_mass(p, m)
    assert np.max(np.abs(q.values - p.values)) <= 1e-12


def test_projection_optimality(rng):
    raw = rng.normal(0.4, 0.8, BOX.shape)
    p = project_box_mass(raw, 4.0, BOX).values
    base = np.sum((p - raw) ** 2)
    for _ in range(100):
        d = rng.normal(0, 1, BOX.shape)
        d -= d.mean()
        # largest step keeping the perturbation inside the box
        room = np.where(d > 0, (1 - p) / np.where(d > 0, d, 1), np.where(d < 0, -p / np.where(d < 0, d, 1), np.inf))
        t = min(1e-2, float(room.min()))
        q = p + t * d
        assert np.sum((q - raw) ** 2) >= base - 1e-12


KERNELS = [zero(), riesz(0.5), indicator(1.0), exponential(2.0), truncated_riesz(0.5, 4.0)]


@pytest.mark.parametrize("kernel", KERNELS, ids=lambda k: k.to_string())
def test_gradient_matches_central_differences(kernel, rng):
    g = Grid(1, 4.0, 256)
    params = EnergyParams(alpha=2.0, kernel=kernel)
    h = random_density(g, 2.0, seed=3)
    x = g.axis()
    delta = np.exp(-((x - 0.4) ** 2) / 0.1)
    eps = 1e-5
    plus = total_G(DensityField(g, np.clip(h.values + eps * delta, 0, 1)), params).total
    minus = total_G(DensityField(g, np.clip(h.values - eps * delta, 0, 1)), params).total
    inner = (h.values > eps) & (h.values < 1 - eps)
    d = np.where(inner, delta, 0.0)
    plus = total_G(DensityField(g, h.values + eps * d), params).total
    minus = total_G(DensityField(g, h.values - eps * d), params).total
    fd = (plus - minus) / (2 * eps)
    an = float(np.sum(gradient_G(h, params).values * d)) * g.cell_volume
    assert fd == pytest.approx(an, rel=1e-4)


def test_gradient_of_zero_density():
    g = Grid(1, 2.0, 64)
    grad = gradient_G(DensityField(g, np.zeros(64)), EnergyParams(kernel=riesz(0.5)))
    assert not grad.values.any()


def test_gradient_at_ball_centre():
    # 2 int_B |y|^2 dy over (-1/2, 1/2) = 2 * R^(N + alpha) phi(0) with R = 1/2
    g = Grid(1, 2.0, 1000)
    h = discrete_ball(g, 1.0)
    grad = gradient_G(h, EnergyParams(alpha=2.0, kernel=zero()))
    i = g.nearest_index((0.0,))
    assert grad.values[i] == pytest.approx(2 * 0.5 ** 3 * (2 / 3), rel=1e-3)


def test_density_descent_finds_interval():
    g = Grid(1, 12.0, 512)
    res = minimize_density(None, EnergyParams(alpha=2.0, m=1.0, kernel=zero()), grid=g)
    assert res.asymmetry <= 0.05
    best = discrete_ball(g, 1.0, (np.sum(g.axis() * res.final.values) / np.sum(res.final.values),))
    assert (res.final - best).l1() / 1.0 <= 0.05
    energies = [e for _, e, _, _ in res.trace]
    assert all(b <= a for a, b in zip(energies, energies[1:]))


def test_descent_from_ball_is_flat():
    g = Grid(1, 12.0, 512)
    params = EnergyParams(alpha=2.0, m=1.0, kernel=zero())
    res = minimize_density(discrete_ball(g, 1.0), params, grid=g)
    e = [x[1] for x in res.trace]
    assert max(e) - min(e) <= 1e-8 * abs(e[0])


def test_density_descent_translation_covariant():
    g = Grid(1, 12.0, 512)
    opts = DescentOptions(max_iters=120)
    rng = np.random.default_rng(5)
    v = np.zeros(g.n)
    v[200:260] = rng.uniform(0, 1, 60)
    v = DensityField(g, v)
    params = EnergyParams(alpha=2.0, m=v.mass, kernel=riesz(0.5))
    a = minimize_density(v, params, opts)
    b = minimize_density(shift_cells(v, (17,)), params, opts)
    assert np.allclose(shift_cells(a.final, (17,)).values, b.final.values, atol=1e-12)


def test_set_descent_stationary_at_disc():
    params = EnergyParams(s=0.5, gamma=0.0)
    K, eps = 8, 1e-3
    x0 = np.zeros(2 * K)
    E0 = set_energy(x0, K, params)
    grads = []
    for j in range(2 * K):
        e = np.zeros(2 * K)
        e[j] = eps
        grads.append((set_energy(x0 + e, K, params) - set_energy(x0 - e, K, params)) / (2 * eps))
    noise = abs(E0) * np.finfo(float).eps / eps
    assert np.linalg.norm(grads) <= 10 * max(noise, 1e-12) * math.sqrt(2 * K)


def test_set_descent_short_run_decreases_energy():
    params = EnergyParams(s=0.5, gamma=0.0)
    res = minimize_set_profile(None, params, DescentOptions(max_iters=5), K=4)
    e = [x[1] for x in res.trace]
    assert e[-1] < e[0]
    assert isinstance(res.final, BoundaryProfile) and res.final.w1inf <= 1.0
    with pytest.raises(ValueError):
        minimize_set_profile(None, params, K=13)
