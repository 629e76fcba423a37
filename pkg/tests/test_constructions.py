import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nls.constructions import (annulus_density, cutting_radius, discrete_ball, hyperplane_cut,
                               rescale_to_mass, rounding, rounding_sequence)
from nls.energies import EnergyParams, frac_perimeter, repulsion, total_F
from nls.fields import BallSpec, DensityField, GeometryError, Grid, SetMask, ball_mask
from nls.kernels import exponential, indicator, riesz, truncated_riesz, zero
from nls.optimize import minimize_density, project_box_mass

from conftest import interval_mask

G1 = Grid(1, 4.0, 400)  # h = 0.02


def dens(mask):
    return DensityField(mask.grid, mask.values)


def test_hyperplane_cut():
    f = interval_mask(G1, 0.0, 2.0)
    assert hyperplane_cut(f, f.mass) is f
    cut = hyperplane_cut(f, 1.0)
    ref = interval_mask(G1, 0.0, 1.0)
    assert np.abs(cut.values - ref.values).sum() <= 1
    assert cut.mass == pytest.approx(1.0, abs=G1.h)
    with pytest.raises(ValueError):
        hyperplane_cut(f, 3.0)


def test_hyperplane_cut_density_is_exact(rng):
    h = project_box_mass(rng.uniform(0, 1, G1.shape), 3.0, G1)
    cut = hyperplane_cut(h, 1.3)
    assert cut.mass == pytest.approx(1.3, rel=1e-12)
    for k in (riesz(0.5), indicator(1.0), exponential(2.0), truncated_riesz(0.5, 4.0), zero()):
        assert repulsion(cut, kernel=k) <= repulsion(h, kernel=k) + 1e-14


def test_cutting_radius_cases():
    g = Grid(2, 2.0, 128)
    B = ball_mask(g, BallSpec((0.0, 0.0), math.pi))
    r, E_cut, cert = cutting_radius(B, 0.5, 0.1)
    assert math.isinf(cert) and np.array_equal(E_cut.values, B.values)
    v = B.values.copy()
    v[g.nearest_index((1.6, 0.0))] = 1.0
    E = SetMask(g, v)
    res = cutting_radius(E, 0.5, g.cell_volume * 1.01, center=(0.0, 0.0))
    assert res.removed == pytest.approx(g.cell_volume)
    assert 1.0 <= res.r <= 1.0 + 3.0 * (g.cell_volume * 1.01) ** 0.5
    assert frac_perimeter(res.E_cut, 0.5) < frac_perimeter(E, 0.5)
    with pytest.raises(ValueError):
        cutting_radius(E, 0.5, 1.0)


def test_cutting_radius_spike_certificate():
    g = Grid(2, 2.0, 128)
    X, Y = g.coords()
    spike = (np.abs(Y) < 0.04) & (X > 0.9) & (X < 0.9 + 0.05 / 0.08)
    E = SetMask(g, ((X * X + Y * Y <= 1) | spike).astype(float))
    res = cutting_radius(E, 0.5, 0.06, center=(0.0, 0.0))
    assert res.certificate > 0


def test_rescale():
    g = Grid(2, 3.0, 256)
    disc = dens(ball_mask(g, BallSpec((0.0, 0.0), math.pi)))
    assert rescale_to_mass(disc, disc.mass) is disc
    big = rescale_to_mass(disc, 4 * disc.mass)
    assert big.mass == pytest.approx(4 * disc.mass, rel=5e-3)
    p = EnergyParams(gamma=0.5, kernel=riesz(0.5, 2))
    E = ball_mask(g, BallSpec((0.0, 0.0), math.pi))
    Et = SetMask(g, (big.values > 0.5).astype(float))
    assert total_F(Et, p).total <= 2 ** 4 * total_F(E, p).total


def test_rounding_of_ball_is_identity():
    chi = discrete_ball(G1, 2.0)
    for th in (0.0, 0.25, 1.0):
        res = rounding(chi, th)
        assert np.array_equal(res.h_prime.values, chi.values) and res.ok


def test_rounding_hand_example_one():
    h = dens(interval_mask(G1, -1.0, 0.0)) + interval_mask(G1, 2.0, 3.0)
    h = DensityField(G1, h.values)
    res = rounding(h, 0.25)
    assert np.array_equal(res.h_prime.values, interval_mask(G1, -1.0, 1.0).values)
    assert res.ok


def test_rounding_hand_example_two():
    h = DensityField(G1, interval_mask(G1, -1.0, 0.5).values + interval_mask(G1, 1.0, 1.5).values)
    res = rounding(h, 0.5)
    assert np.array_equal(res.h_prime.values, h.values)
    assert res.ok


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.sampled_from([0.05, 0.25, 0.5, 1.0]), st.booleans())
def test_rounding_postconditions(seed, theta, planar):
    rng = np.random.default_rng(seed)
    g = Grid(2, 2.0, 48) if planar else Grid(1, 4.0, 256)
    m = rng.uniform(0.5, 3.0)
    raw = rng.uniform(0, 1, g.shape) * (g.radius() < rng.uniform(1.0, 1.9))
    h = project_box_mass(raw, m, g)
    res = rounding(h, theta)
    assert res.ok, res.residuals
    assert abs(res.h_prime.mass - m) <= 1e-12 * m


def test_rounding_sequence():
    chi = discrete_ball(G1, 2.0)
    seq = rounding_sequence(chi, EnergyParams(kernel=zero()))
    assert seq.reason == "fixed point" and len(seq.steps) == 2
    g = Grid(1, 6.0, 256)
    params = EnergyParams(alpha=2.0, m=1.0, kernel=zero())
    opt = minimize_density(None, params, grid=g).final
    seq = rounding_sequence(opt, params)
    G0 = seq.steps[0][3]
    assert all(e >= G0 - 1e-6 * abs(G0) for _, _, _, e, _ in seq.steps)
    bumped = DensityField(g, 0.5 * discrete_ball(g, 1.0, (-1.0,)).values + 0.5 * discrete_ball(g, 1.0, (1.0,)).values)
    assert rounding_sequence(bumped, params).improved


def test_annulus():
    g = Grid(2, 2.0, 256)
    assert annulus_density(1.0, 0.0, g).mass == 0.0
    assert annulus_density(1.0, 0.5, g).mass == pytest.approx(2 * math.pi, rel=1e-2)
    assert annulus_density(1.0, 0.5, g, fill=0.0).mass == 0.0
    with pytest.raises(GeometryError):
        annulus_density(1.5, 0.5, g)
