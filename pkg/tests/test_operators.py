import math

import numpy as np
import pytest
from scipy.integrate import quad

from hfgalerkin.geometry import make_config, make_curve
from hfgalerkin.operators import (DensityGrid, SolverError, cfie_kernel_split,
                                  circle_reference, circle_series_density, dense_solve,
                                  incident_rhs, kernel_matrix, kress_log_weights, nodes_for_ppw,
                                  nystrom_solve)
from hfgalerkin.specfun import hankel1

from conftest import ELLIPSE_ALPHA, rel


def test_rhs_poles(circle_config):
    k = circle_config.k
    assert abs(incident_rhs(circle_config, np.array([0.0]))[0]) < 1e-12
    val = incident_rhs(circle_config, np.array([math.pi]))[0]
    assert abs(val - (-2j * k * np.exp(-1j * k))) < 1e-10 * k


def test_rhs_at_shadow_boundary(ellipse_config):
    cfg = ellipse_config
    val = incident_rhs(cfg, np.array([cfg.t1, cfg.t2]))
    assert np.allclose(np.abs(val), cfg.k, rtol=1e-10)


def test_kernel_explicit_formula():
    cfg = make_config(make_curve("circle", radius=1.0), 1.0, (1.0, 0.0))
    full, _ = kernel_matrix(cfg, np.array([0.0]), np.array([math.pi]))
    # x = (1, 0), y = (-1, 0): nu(x).(y - x)/r = -1, r = 2.  H0' = -H1 gives an independent path.
    h0 = hankel1(0, 2.0)
    dh0 = complex(-hankel1(1, 2.0))
    expected = 0.25j * (-dh0) * (-1.0) + 0.25 * h0
    assert abs(full[0, 0] - expected) < 1e-13


def test_double_layer_diagonal_limit():
    cfg = make_config(make_curve("circle", radius=1.0), 3.0, (1.0, 0.0))
    # the D' part of the kernel tends to -kappa/(4 pi) with the outward normal;
    # its remainder is c + a h^2 log h + b h^2, so extrapolate with that model
    hs = np.array([1e-2, 5e-3, 2.5e-3])
    vals = []
    for h in hs:
        full, _ = kernel_matrix(cfg, np.array([0.0]), np.array([h]))
        single = 0.25 * cfg.k * hankel1(0, 2 * math.sin(h / 2) * cfg.k)
        vals.append((full[0, 0] - single).real)
    model = np.column_stack([np.ones(3), hs**2 * np.log(hs), hs**2])
    limit = np.linalg.solve(model, vals)[0]
    assert abs(limit - (-1 / (4 * math.pi))) < 1e-8
    assert abs(cfie_kernel_split(cfg, 0.0, 0.0).smooth.real - (-1 / (4 * math.pi) + 0.75)) < 1e-14


def test_single_layer_symmetric(kite_config):
    cfg = kite_config
    s = np.linspace(0.1, cfg.length - 0.1, 9)
    t = s + 0.05

    def single(a, b):
        full, _ = kernel_matrix(cfg, a, b)
        pa, na, _ = cfg.curve.frame(a)
        pb = cfg.curve.point(b)
        diff = pb[None, :, :] - pa[:, None, :]
        r = np.linalg.norm(diff, axis=-1)
        nr = np.einsum("ik,ijk->ij", na, diff) / r
        return full - 0.25j * cfg.k * hankel1(1, cfg.k * r) * nr

    assert np.max(np.abs(single(s, t) - single(t, s).T)) < 1e-12


def test_log_weights_constant_and_symmetry():
    for n in (8, 16, 64):
        r = kress_log_weights(n)
        assert abs(r.sum()) < 1e-12
        assert np.allclose(r[1:], r[1:][::-1], atol=1e-14)
    with pytest.raises(ValueError):
        kress_log_weights(7)


def test_log_weights_cosine():
    n = 8
    tau = 2 * math.pi * np.arange(n) / n
    r = kress_log_weights(n)
    for i, t in enumerate(tau):
        approx = np.sum(r[(i - np.arange(n)) % n] * np.cos(tau))
        assert abs(approx + 2 * math.pi * math.cos(t)) < 1e-12
    # cross-check against direct adaptive quadrature of the log singularity
    direct, _ = quad(lambda u: math.log(4 * math.sin(u / 2) ** 2) * math.cos(u), 0, 2 * math.pi,
                     points=[0.0], limit=200)
    assert abs(direct + 2 * math.pi) < 1e-8


def test_nystrom_matches_series_k5():
    cfg = make_config(make_curve("circle", radius=1.0), 5.0, (1.0, 0.0))
    grid = nystrom_solve(cfg, 64)
    ref = circle_reference(cfg)(grid.s)
    assert rel(grid.values, ref) < 1e-10
    node = np.argmin(np.abs(grid.s - math.pi))
    assert abs(grid.values[node] - ref[node]) < 1e-9


def test_nystrom_self_convergence(kite_config):
    # on the circle 6 points per wavelength is already at roundoff, so use the kite
    fine = nystrom_solve(kite_config, nodes_for_ppw(kite_config, 30))
    errs = []
    for ppw in (6, 12):
        g = nystrom_solve(kite_config, nodes_for_ppw(kite_config, ppw, minimum=4))
        errs.append(rel(g.values, fine(g.s)))
    assert errs[0] / errs[1] >= 100


def test_nystrom_k50_against_series():
    cfg = make_config(make_curve("circle", radius=1.0), 50.0, (1.0, 0.0))
    grid = nystrom_solve(cfg, 600)
    assert rel(grid.values, circle_reference(cfg)(grid.s)) < 1e-6


def test_nystrom_min_ppw_guard(circle_config):
    with pytest.raises(ValueError):
        nystrom_solve(circle_config, 64, min_ppw=10)


def test_series_symmetry_and_truncation():
    theta = np.linspace(0.1, 3.0, 13)
    a = circle_series_density(20.0, 1.0, (1.0, 0.0), theta)
    b = circle_series_density(20.0, 1.0, (1.0, 0.0), -theta)
    assert np.allclose(a, b, rtol=1e-13, atol=0)
    default = circle_series_density(20.0, 1.0, (1.0, 0.0), theta)
    longer = circle_series_density(20.0, 1.0, (1.0, 0.0), theta, n_terms=200)
    assert rel(default, longer) < 1e-12
    with pytest.raises(ValueError):
        circle_series_density(20.0, 1.0, (1.0, 0.0), theta, n_terms=30)


@pytest.mark.parametrize("ka", [100.0, 400.0, 2000.0])
def test_series_default_truncation_converged(ka):
    theta = np.linspace(0.1, 3.0, 13)
    default = circle_series_density(ka, 1.0, (1.0, 0.0), theta)
    longer = circle_series_density(ka, 1.0, (1.0, 0.0), theta, n_terms=int(2 * ka) + 100)
    assert rel(default, longer) < 1e-13


def test_series_small_argument_stops_at_saturation():
    val = circle_series_density(1e-3, 1.0, (1.0, 0.0), np.array([0.0, 1.0]), n_terms=400)
    assert np.all(np.isfinite(val))


def test_density_grid_csv_roundtrip(tmp_path):
    cfg = make_config(make_curve("circle", radius=1.0), 5.0, (1.0, 0.0))
    grid = nystrom_solve(cfg, 32)
    path = tmp_path / "eta.csv"
    grid.to_csv(path)
    back = DensityGrid.from_csv(path, cfg.k, cfg.length)
    assert np.array_equal(back.values, grid.values)
    s = np.linspace(0, cfg.length, 7)
    assert np.allclose(back(s), grid(s))


def test_dense_solve_singular():
    with pytest.warns(Warning),  pytest.raises(SolverError):
        dense_solve(np.zeros((3, 3)), np.ones(3))
    x, cond = dense_solve(np.eye(3), np.array([1.0, 0, 0]))
    assert np.allclose(x, [1, 0, 0]) and abs(cond - 1) < 1e-12


def test_ellipse_nystrom_converges():
    cfg = make_config(make_curve("ellipse", a=2.0, b=1.0), 10.0, ELLIPSE_ALPHA)
    fine = nystrom_solve(cfg, nodes_for_ppw(cfg, 24))
    coarse = nystrom_solve(cfg, nodes_for_ppw(cfg, 12))
    assert rel(coarse(fine.s), fine.values) < 1e-6
