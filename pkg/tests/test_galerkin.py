import csv
import math

import numpy as np
import pytest

from hfgalerkin.galerkin import (GalerkinSystem, DegenerateReference, IllConditionedWarning,
                                 ResolutionError, assemble, gram_matrix, sigmoid_grading,
                                 interval_errors, panel_rule, relative_l2_error, solve,
                                 solve_system)
from hfgalerkin.geometry import make_config, make_curve
from hfgalerkin.hfspaces import SpaceSettings
from hfgalerkin.operators import circle_reference, nodes_for_ppw, nystrom_solve


@pytest.fixture(scope="module")
def small_space():
    cfg = make_config(make_curve("circle", radius=1.0), 5.0, (1.0, 0.0))
    return SpaceSettings(family="alg-cov", degrees=2).build_space(cfg)


def test_grading_properties():
    tau = np.linspace(0, 2 * np.pi, 101)[1:-1]
    w, dw, wc = sigmoid_grading(tau, complement=True)
    assert w[0] < 1e-20 and wc[-1] < 1e-20
    assert np.allclose(w + wc, 2 * np.pi, rtol=0, atol=1e-14)
    assert np.all(np.diff(w) >= 0) and np.all(np.diff(w[:49]) > 0)
    assert abs(w[49] - np.pi) < 1e-14
    h = 1e-6
    fd = (sigmoid_grading(tau + h)[0] - sigmoid_grading(tau - h)[0]) / (2 * h)
    assert np.allclose(fd, dw, rtol=1e-6, atol=1e-9)


def test_grading_converges_fast():
    # a smooth non-periodic integrand on [0, 2 pi]; error falls faster than any power
    exact = 3 * (math.exp(2 * math.pi / 3) - 1) / 37
    errs = []
    for n in (24, 48, 96):
        tau = 2 * np.pi * np.arange(1, n) / n
        w, dw = sigmoid_grading(tau)
        errs.append(abs(2 * np.pi / n * np.sum(np.exp(w / 3) * np.cos(2 * w) * dw) - exact))
    assert errs[2] < 1e-11 and errs[1] / errs[2] > 2 ** 12


def test_rule_integrates_length(circle_config):
    space = SpaceSettings(family="alg-cov", degrees=4).build_space(circle_config)
    # the short panels near the poles carry the 48-node floor, where the
    # graded rule is good to about 1e-9
    for clustered in (True, False):
        rule = panel_rule(space, clustered=clustered)
        assert abs(rule.weights.sum() - circle_config.length) < 1e-9 * circle_config.length


def test_identity_gram_entries(small_space):
    rule = panel_rule(small_space)
    gram = gram_matrix(small_space, rule)
    for j, iv in enumerate(small_space.partition.intervals):
        i0 = small_space.indices(j)[0]
        # half-identity entry for r = 0 is w/2: the phases cancel
        assert abs(0.5 * gram[i0, i0] - 0.5 * iv.width) < 1e-9 * iv.width
    a, b = small_space.indices(0), small_space.indices(2)
    assert np.all(gram[np.ix_(a, b)] == 0)


def test_refined_quadrature_oracle(small_space):
    coarse = assemble(small_space, ppw=10)
    fine_n = 10 * max(coarse.rule.sizes)
    fine = assemble(small_space, ppw=10, n_min=fine_n)
    assert np.max(np.abs(coarse.matrix - fine.matrix)) / np.max(np.abs(fine.matrix)) < 1e-8
    assert np.max(np.abs(coarse.rhs - fine.rhs)) / np.max(np.abs(fine.rhs)) < 1e-8


def test_resolution_guard(small_space):
    with pytest.raises(ResolutionError):
        assemble(small_space, ppw=5)


def test_identity_system(small_space):
    n = small_space.dimension
    rhs = np.zeros(n, dtype=complex)
    rhs[0] = 1
    sol = solve_system(GalerkinSystem(small_space, np.eye(n, dtype=complex), rhs, None, 10))
    assert np.array_equal(sol.coeffs, rhs)


def test_scaling_invariance(small_space):
    system = assemble(small_space)
    a = solve_system(system).coeffs
    scaled = GalerkinSystem(system.space, 10 * system.matrix, 10 * system.rhs, system.rule, 10)
    b = solve_system(scaled).coeffs
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-9


@pytest.mark.parametrize("name", ["circle", "ellipse", "kite"])
def test_residual_on_each_geometry(name, circle_config, ellipse_config, kite_config):
    cfg = {"circle": circle_config, "ellipse": ellipse_config, "kite": kite_config}[name]
    sol = solve(SpaceSettings(family="alg-cov", degrees=6).build_space(cfg))
    assert sol.residual <= 1e-10


def test_relative_error_trivial_cases(circle_config):
    ref = circle_reference(circle_config)
    assert relative_l2_error(ref, ref, circle_config) == 0
    assert abs(relative_l2_error(lambda s: 2 * ref(s), ref, circle_config) - 1) < 1e-14
    assert relative_l2_error(lambda s: 0 * ref(s), ref, circle_config, region="shadow") == 1
    with pytest.raises(DegenerateReference):
        relative_l2_error(ref, lambda s: np.zeros(np.shape(s)), circle_config)
    with pytest.raises(ValueError):
        relative_l2_error(ref, ref, circle_config, region="lit")


def test_circle_convergence_and_ppw(circle_config):
    ref = circle_reference(circle_config)
    errs = []
    for d in (2, 6):
        sol = solve(SpaceSettings(family="alg-cov", degrees=d).build_space(circle_config))
        errs.append(relative_l2_error(sol, ref, circle_config))
    assert errs[1] < errs[0] / 5
    # the quadrature is converged: raising ppw leaves the error unchanged
    sol = solve(SpaceSettings(family="alg-cov", degrees=6).build_space(circle_config), ppw=16)
    assert abs(relative_l2_error(sol, ref, circle_config) / errs[1] - 1) < 0.02


def test_degree_zero_is_admissible(circle_config):
    sol = solve(SpaceSettings(family="alg-cov", degrees=0).build_space(circle_config))
    err = relative_l2_error(sol, circle_reference(circle_config), circle_config)
    assert np.isfinite(err) and err <= 1 + 1e-12


def test_trig_and_freq_families(circle_config):
    ref = circle_reference(circle_config)
    for family in ("trig-cov", "alg-freq", "trig-freq"):
        sol = solve(SpaceSettings(family=family, degrees=6).build_space(circle_config))
        assert relative_l2_error(sol, ref, circle_config) < 0.05


def test_unclustered_rule_agrees(circle_config):
    space = SpaceSettings(family="alg-cov", degrees=4).build_space(circle_config)
    a = solve(space).coeffs
    b = solve_system(assemble(space, clustered=False, n_min=80)).coeffs
    assert np.linalg.norm(a - b) / np.linalg.norm(a) < 1e-6


def test_against_nystrom_reference(kite_config):
    ref = nystrom_solve(kite_config, nodes_for_ppw(kite_config, 20))
    sol = solve(SpaceSettings(family="alg-cov", degrees=10).build_space(kite_config), ppw=12)
    assert relative_l2_error(sol, ref, kite_config) < 0.05


def test_interval_errors_sum(circle_config):
    ref = circle_reference(circle_config)
    sol = solve(SpaceSettings(family="alg-cov", degrees=4).build_space(circle_config))
    parts = interval_errors(sol, ref)
    total = math.sqrt(sum(v for key, v in parts.items() if key != "_norm") / parts["_norm"])
    assert abs(total - relative_l2_error(sol, ref, circle_config)) < 1e-12


def test_csv_dumps(tmp_path, small_space):
    system = assemble(small_space)
    system.to_csv(tmp_path / "sys.csv")
    rows = list(csv.reader(open(tmp_path / "sys.csv")))
    n = system.dimension
    assert rows[0] == ["i", "j", "re", "im"] and len(rows) == 1 + n * n + n
    sol = solve_system(system)
    sol.to_csv(tmp_path / "eta.csv", n=64)
    rows = list(csv.reader(open(tmp_path / "eta.csv")))
    assert rows[0] == ["s", "re_eta", "im_eta"] and len(rows) == 65
    s = float(rows[5][0])
    val = complex(float(rows[5][1]), float(rows[5][2]))
    assert abs(val - sol.evaluate(np.array([s]))[0]) < 1e-12 * abs(val)
    sol.coefficients_to_csv(tmp_path / "c.csv")
    assert len(list(csv.reader(open(tmp_path / "c.csv")))) == n + 1


def test_ill_conditioning_warns(kite_config):
    space = SpaceSettings(family="alg-cov", degrees=20).build_space(kite_config.with_k(5.0))
    with pytest.warns(IllConditionedWarning):
        solve(space)
