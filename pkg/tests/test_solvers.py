import numpy as np
import pytest

from flexbeam.fem import build_mesh
from flexbeam.model import BreakConfig, DirichletDatum, LoadField, Loads, ModelParams
from flexbeam.solvers import (
    solve_E1_fixed,
    solve_F1_fixed,
    solve_fixed,
    solve_G1_fixed,
    stationarity_residual,
)

from conftest import datum, load
from oracles import Conforming, dense_energy_E1, dense_energy_F1, hinge_scan, obstacle_oracle

P = ModelParams(eta=1.0, mu=10.0, gamma=0.5, alpha=0.02, beta=0.015, sigma=0.05)
W = DirichletDatum.polynomial([0.1, 0.3, -0.2, 0.25])
F1_ = LoadField.constant(1.0)
FP = LoadField(lambda x: 0.5 * x - x**3)


CONFIGS = [
    BreakConfig(),
    BreakConfig.of((0.25, "crack")),
    BreakConfig.of((0.0, "crease")),
    BreakConfig.of((-0.5, "crease"), (0.25, "crack")),
    BreakConfig.of((-1.0, "crack"), (1.0, "crease")),
]


@pytest.mark.parametrize("n", [64, 128])
@pytest.mark.parametrize("K", CONFIGS, ids=lambda K: str(K.to_list()))
def test_E1_matches_dense_saddle_point(n, K):
    m = build_mesh(n, K)
    rep = solve_E1_fixed(P, W, F1_, K, m)
    e, x = dense_energy_E1(m.nodes, P, W, F1_, K)
    # the oracle's saddle-point system is conditioned like h^-4; 1e-9 is its noise floor
    assert rep.energy.total == pytest.approx(e, abs=1e-9)
    # right-side traces of the package field against element-left DOFs of the oracle
    got = np.array([rep.u.trace(i, 0, "+") for i in range(m.n_elements)])
    np.testing.assert_allclose(got, x[0:4 * m.n_elements:4], atol=1e-9)
    assert rep.kkt_residual < 1e-12


@pytest.mark.parametrize("n", [64, 128])
@pytest.mark.parametrize("K", CONFIGS[:4], ids=lambda K: str(K.to_list()))
def test_F1_matches_dense_saddle_point(n, K):
    m = build_mesh(n, K)
    rep = solve_F1_fixed(P, W, F1_, FP, K, m)
    e, x = dense_energy_F1(m.nodes, P, W, F1_, FP, K)
    ne = m.n_elements
    assert rep.energy.total == pytest.approx(e, abs=1e-9)
    got_r = np.array([rep.u.trace(i, 0, "+") for i in range(ne)])
    got_p = np.array([rep.u_p.trace(i, 0, "+") for i in range(ne)])
    np.testing.assert_allclose(got_r, x[0:4 * ne:4], atol=1e-9)
    np.testing.assert_allclose(got_p, x[4 * ne::4], atol=1e-9)


def test_zero_data_gives_zero():
    z = DirichletDatum.zero()
    for prob in ("E1", "F1", "G1"):
        K = BreakConfig.of((0.0, "hinge")) if prob == "G1" else BreakConfig()
        rep = solve_fixed(prob, P, z, Loads(), K, 16)
        assert np.all(rep.dofs == 0.0)
        assert rep.energy.total == pytest.approx(P.beta if prob == "G1" else 0.0)


def test_hard_device_follows_affine_datum():
    # w affine, f = 0: u = w is admissible with zero energy
    w = DirichletDatum.polynomial([0.2, -0.4])
    rep = solve_fixed("E1", P, w, Loads(), BreakConfig(), 16)
    x = np.linspace(-1, 1, 41)
    np.testing.assert_allclose(rep.u.evaluate(x), w(x), atol=1e-12)
    assert rep.energy.total == pytest.approx(0.0, abs=1e-14)


def test_glue_stiffness_pulls_towards_datum():
    gaps = []
    for mu in (1.0, 10.0, 100.0, 1000.0):
        rep = solve_fixed("E1", P.replace(mu=mu), W, Loads.single(F1_), BreakConfig(), 32)
        gaps.append(rep.energy.glue / mu)
    assert all(b < a for a, b in zip(gaps, gaps[1:]))


def test_sigma_zero_reduces_to_crease():
    K = BreakConfig.of((0.25, "hinge"))
    Kc = BreakConfig.of((0.25, "crease"))
    p = P.replace(sigma=0.0, alpha=P.beta)
    g = solve_G1_fixed(p, W, F1_, FP, K, 64)
    c = solve_F1_fixed(p, W, F1_, FP, Kc, 64)
    assert g.energy.total == pytest.approx(c.energy.total, abs=1e-9)
    np.testing.assert_allclose(g.dofs, c.dofs, atol=1e-9)


def test_large_sigma_locks_hinges():
    K = BreakConfig.of((-0.5, "hinge"), (0.25, "hinge"))
    rep = solve_G1_fixed(P.replace(sigma=1e3), W, F1_, FP, K, 32)
    np.testing.assert_array_equal(rep.jumps, 0.0)
    smooth = solve_F1_fixed(P, W, F1_, FP, BreakConfig(), 32)
    assert rep.energy.total - 2 * P.beta == pytest.approx(smooth.energy.total, abs=1e-10)


def test_G1_single_hinge_grid_oracle():
    x0 = 0.25
    m = build_mesh(32, BreakConfig.of((x0, "hinge")))
    i = int(np.flatnonzero(m.nodes == x0)[0])
    Kc = BreakConfig.of((x0, "crease"))
    rep = solve_G1_fixed(P, W, F1_, FP, BreakConfig.of((x0, "hinge")), m)
    free_jump = dense_energy_F1(m.nodes, P, W, F1_, FP, Kc)[1]
    j_free = free_jump[4 * i + 1] - free_jump[4 * (i - 1) + 3]
    grid = np.linspace(min(0.0, j_free), max(0.0, j_free), 2001)
    energies = hinge_scan(m.nodes, P, W, F1_, FP, i, grid) + P.sigma * np.abs(grid) + P.beta
    assert rep.energy.total == pytest.approx(min(energies), abs=1e-6)
    assert rep.energy.total <= min(energies) + 1e-9


W_OBS = DirichletDatum.polynomial([0.3, 0.0, -0.6, 0.0, 0.3])
F_OBS = LoadField.constant(-20.0)


@pytest.mark.parametrize("K", [BreakConfig(), BreakConfig.of((-0.75, "crack")), BreakConfig.of((0.5, "crease"))],
                         ids=["none", "crack", "crease"])
def test_E1_obstacle_matches_projected_gradient(K):
    m = build_mesh(32, K)
    rep = solve_fixed("E1", P, W_OBS, Loads.single(F_OBS), K, m, constrained=True)
    c = Conforming(m.nodes, P, W_OBS, F_OBS, K)
    x = obstacle_oracle(c, W_OBS)
    assert rep.energy.total == pytest.approx(c.energy(x), abs=1e-8)
    np.testing.assert_allclose(rep.u.evaluate(m.nodes, 0, "-"), c.nodal_values(x), atol=1e-8)
    assert rep.active_set


def test_F1_obstacle_matches_projected_gradient():
    K = BreakConfig.of((-0.75, "crack"))
    m = build_mesh(32, K)
    fp = LoadField.constant(5.0)
    rep = solve_fixed("F1", P, W_OBS, Loads(F_OBS, fp), K, m, constrained=True)
    c = Conforming(m.nodes, P, W_OBS, F_OBS, K, f_p=fp, two_field=True)
    x = obstacle_oracle(c, W_OBS)
    assert rep.energy.total == pytest.approx(c.energy(x), abs=1e-8)
    np.testing.assert_allclose(rep.u.evaluate(m.nodes, 0, "-"), c.nodal_values(x), atol=1e-8)


def test_inactive_obstacle_is_unconstrained():
    # pushing up, away from the obstacle: constraint never binds
    f = LoadField.constant(5.0)
    w = DirichletDatum.zero()
    K = BreakConfig.of((0.25, "crack"))
    a = solve_fixed("E1", P, w, Loads.single(f), K, 32, constrained=True)
    b = solve_fixed("E1", P, w, Loads.single(f), K, 32)
    np.testing.assert_allclose(a.dofs, b.dofs, atol=1e-12)
    assert not a.active_set


def test_obstacle_complementarity():
    rep = solve_fixed("E1", P, W_OBS, Loads.single(F_OBS), BreakConfig.of((-0.75, "crack")), 32, constrained=True)
    assert np.all(rep.multipliers >= 0) and np.all(rep.gaps >= -1e-12)
    assert np.max(np.abs(rep.multipliers * rep.gaps)) <= 1e-9


@pytest.mark.parametrize("prob,constrained", [("E1", False), ("F1", False), ("G1", False), ("E1", True), ("F1", True)])
def test_stationarity_residual_detects_tampering(prob, constrained):
    K = {"G1": BreakConfig.of((-1.0, "hinge"), (0.25, "hinge"))}.get(prob, BreakConfig.of((0.25, "crack")))
    w, loads = (W_OBS, Loads(F_OBS, LoadField.constant(5.0))) if constrained else (W, Loads(F1_, FP))
    m = build_mesh(32, K)
    rep = solve_fixed(prob, P, w, loads, K, m, constrained)
    x = rep.dofs
    fresh = stationarity_residual(prob, P, w, loads, K, x, m, constrained)
    assert fresh < 1e-11
    bad = x.copy()
    bad[x.size // 3] += 1e-3
    assert stationarity_residual(prob, P, w, loads, K, bad, m, constrained) > 1e3 * max(fresh, 1e-15)


def test_spline_and_expression_data():
    w = DirichletDatum.spline([-2, -1, 0, 1, 2], [0, 0, 0.2, 0, 0])
    rep = solve_fixed("F1", P, w, Loads(load("sin(3*x)"), LoadField.zero()), BreakConfig(), 32)
    assert rep.kkt_residual < 1e-12
    rep = solve_fixed("E1", P, datum("0.1*cos(x)"), Loads.single(load("exp(x)")), BreakConfig(), 32)
    assert np.isfinite(rep.energy.total)
