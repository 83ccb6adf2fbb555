import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import interior_points
from frozenbessel.errors import SingularityError, UsageError
from frozenbessel.flow import evolve_phi, phi_special
from frozenbessel.fluctuation import (FluctuationModel, covariance_closed_form, covariance_numeric,
                                      eigenvalue_a, eigenvalue_b, fluct_matrix, fluct_matrix_ou,
                                      fluct_matrix_power, simulate_W, special_matrix, spectral_matrix)
from frozenbessel.harness.stats import covariance_band
from frozenbessel.model import Kind, RootSystem, frozen_drift, frozen_drift_jacobian
from frozenbessel.numerics import RngStream
from frozenbessel.polyroots import special_start

A1, A2, A3 = (RootSystem(Kind.A, n) for n in (1, 2, 3))


def test_fluct_matrix_example():
    np.testing.assert_allclose(fluct_matrix(A2, None, [1, -1]), [[-0.25, 0.25], [0.25, -0.25]])
    with pytest.raises(SingularityError):
        fluct_matrix(A2, None, [1, 1])


@settings(max_examples=40, deadline=None)
@given(st.sampled_from("ABD").flatmap(lambda k: interior_points(k, n_max=6)), st.floats(0.1, 3.0))
def test_fluct_matrix_is_the_jacobian(case, nu):
    rs, x = case
    nu = nu if rs.kind is Kind.B else None
    m = fluct_matrix(rs, nu, x)
    np.testing.assert_allclose(m, frozen_drift_jacobian(rs, nu, x), rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(m, m.T, atol=1e-14)
    if rs.kind is Kind.A:
        np.testing.assert_allclose(m.sum(axis=0), 0, atol=1e-10 * np.abs(m).max())


@pytest.mark.parametrize("c,t", [(1.0, 0.0), (0.5, 2.0), (2.0, 7.0)])
def test_special_flow_matrix_scales(c, t):
    a5 = RootSystem(Kind.A, 5)
    np.testing.assert_allclose(fluct_matrix(a5, None, phi_special(a5, None, c, t)),
                               special_matrix(a5) / (2 * t + c * c), rtol=1e-10)
    b4 = RootSystem(Kind.B, 4)
    np.testing.assert_allclose(fluct_matrix(b4, 1.5, phi_special(b4, 1.5, c, t)),
                               special_matrix(b4, 1.5) / (t + c * c), rtol=1e-10)


@pytest.mark.parametrize("n", range(2, 11))
def test_spectra(n):
    np.testing.assert_allclose(np.linalg.eigvalsh(spectral_matrix(RootSystem(Kind.A, n))),
                               np.arange(1, n + 1), atol=1e-9)
    for nu in (0.5, 1.0, 2.5):
        np.testing.assert_allclose(np.linalg.eigvalsh(spectral_matrix(RootSystem(Kind.B, n), nu)),
                                   2.0 * np.arange(1, n + 1), atol=1e-9)


@pytest.mark.parametrize("n", range(2, 11))
def test_d_spectrum_is_b_ladder_with_decoupled_n(n):
    """E - 2A at the type-D start splits into the nu = 2 type-B matrix of size N-1 and the entry N."""
    d = RootSystem(Kind.D, n)
    m = spectral_matrix(d)
    np.testing.assert_allclose(m[-1, :-1], 0, atol=1e-12)
    assert m[-1, -1] == pytest.approx(n, rel=1e-12)
    if n > 1:
        np.testing.assert_allclose(m[:-1, :-1], spectral_matrix(RootSystem(Kind.B, n - 1), 2.0), atol=1e-10)
    expected = np.sort(np.concatenate([2.0 * np.arange(1, n), [n]]))
    np.testing.assert_allclose(np.linalg.eigvalsh(m), expected, atol=1e-9)


def _power_reference(p, phi):
    """``V = D W`` with ``D = diag(p phi^{p-1})`` gives drift ``D' D^-1 + D J D^-1``."""
    rs = RootSystem(Kind.A, phi.size)
    h = frozen_drift(rs, None, phi)
    d = p * phi ** (p - 1)
    dprime = p * (p - 1) * phi ** (p - 2) * h
    j = frozen_drift_jacobian(rs, None, phi)
    return np.diag(dprime / d) + d[:, None] * j / d[None, :]


def test_power_reduces_to_plain():
    phi = np.array([2.0, 0.5, -1.0])
    drift, diffusion = fluct_matrix_power(1, phi)
    np.testing.assert_allclose(drift, fluct_matrix(A3, None, phi))
    np.testing.assert_array_equal(diffusion, np.eye(3))


def test_power_two_example():
    drift, diffusion = fluct_matrix_power(2, np.array([1.0, -1.0]))
    np.testing.assert_allclose(diffusion, np.diag([2.0, -2.0]))
    np.testing.assert_allclose(drift, [[0.25, -0.25], [-0.25, 0.25]])


@settings(max_examples=40, deadline=None)
@given(interior_points("A", n_min=2, n_max=5), st.integers(2, 5))
def test_power_matches_linearization(case, p):
    _, x = case
    if np.min(np.abs(x)) < 0.05:
        x = x + 0.3
    drift, _ = fluct_matrix_power(p, x)
    np.testing.assert_allclose(drift, _power_reference(p, x), rtol=1e-9, atol=1e-11)


def test_power_odd_n_middle_coordinate():
    z = special_start(RootSystem(Kind.A, 5)).vector
    for p in (2, 3):
        drift, diffusion = fluct_matrix_power(p, 1.5 * z)
        assert diffusion[2, 2] == 0.0
        assert np.all(drift[2] == 0.0) and np.all(drift[:, 2] == 0.0)
    with pytest.raises(UsageError):
        fluct_matrix_power(0, z)


@pytest.mark.parametrize("p", [2, 3])
def test_power_covariance_is_rescaled_plain(p):
    rs, c = RootSystem(Kind.A, 4), 1.2
    t = np.array([0.5, 2.0])
    plain = covariance_numeric(FluctuationModel.special(rs, None, c), t)
    power = covariance_numeric(FluctuationModel.special(rs, None, c, variant="power", p=p), t)
    for ti, s_plain, s_power in zip(t, plain, power):
        d = np.diag(p * phi_special(rs, None, c, ti) ** (p - 1))
        np.testing.assert_allclose(s_power, d @ s_plain @ d, rtol=1e-8)


def test_fluct_matrix_ou_examples():
    x = np.array([2.0, 0.3, -1.0])
    np.testing.assert_allclose(fluct_matrix_ou(0.0, x, 1.1),
                               fluct_matrix(A3, None, evolve_phi(A3, None, x, [0, 1.1]).values[-1]), rtol=1e-8)
    lam, c, t = 0.4, 0.9, 1.7
    z = special_start(A3).vector
    e = np.exp(2 * lam * t)
    np.testing.assert_allclose(fluct_matrix_ou(lam, c * z, t),
                               lam * e / (e - 1 + lam * c * c) * special_matrix(A3) - lam * np.eye(3),
                               rtol=1e-8)
    np.testing.assert_allclose(fluct_matrix_ou(0.7, [1.0], 2.0), [[-0.7]])


def test_model_variants_are_type_a_only():
    with pytest.raises(UsageError):
        FluctuationModel.special(RootSystem(Kind.B, 2), 1.0, 1.0, variant="power", p=2)
    with pytest.raises(UsageError):
        FluctuationModel(A2, None, lambda t: np.zeros(2), variant="other")


def _batched_increments(seed, paths, t_grid, n):
    gen = np.random.default_rng(seed)
    return gen.standard_normal((paths, t_grid.size - 1, n)) * np.sqrt(np.diff(t_grid))[None, :, None]


def test_simulate_W_trivial_cases():
    grid = np.linspace(0, 1, 11)
    frozen_point = FluctuationModel(A1, None, lambda t: np.zeros(1), variant="power", p=2)
    np.testing.assert_array_equal(simulate_W(frozen_point, grid, RngStream(0)), 0.0)
    bm = FluctuationModel.special(A1, None, 1.0)
    inc = _batched_increments(1, 10000, grid, 1)
    w = simulate_W(bm, grid, RngStream(0), increments=inc)
    np.testing.assert_allclose(w[:, -1, 0], inc.sum(axis=1)[:, 0], atol=1e-12)
    assert w[:, -1, 0].var() == pytest.approx(1.0, rel=0.05)


def test_simulate_W_center_of_gravity():
    grid = np.linspace(0, 1, 21)
    fm = FluctuationModel.special(RootSystem(Kind.A, 4), None, 0.3)
    inc = _batched_increments(2, 50, grid, 4)
    w = simulate_W(fm, grid, RngStream(9), increments=inc)
    np.testing.assert_allclose(w.sum(axis=-1)[:, 1:], np.cumsum(inc.sum(axis=-1), axis=1), atol=1e-11)


def test_simulate_W_rejects_bad_input():
    fm = FluctuationModel.special(A2, None, 1.0)
    with pytest.raises(UsageError):
        simulate_W(fm, [0.1, 1.0], RngStream(0))
    with pytest.raises(UsageError):
        simulate_W(fm, [0.0, 1.0], RngStream(0), increments=np.zeros((2, 2)))


def test_simulate_W_covariance_matches_closed_form():
    rs, c = RootSystem(Kind.B, 3), 0.7
    grid = np.linspace(0, 1, 51)
    fm = FluctuationModel.special(rs, 1.5, c)
    w = simulate_W(fm, grid, RngStream(4), increments=_batched_increments(5, 4000, grid, 3))
    band = covariance_band(w[:, -1], covariance_closed_form(rs, 1.5, c, 1.0).sigma)
    assert band.passed, band.zscores


def test_closed_form_examples():
    np.testing.assert_allclose(covariance_closed_form(A1, None, 1.3, 2.5).sigma, [[2.5]])
    assert np.all(covariance_closed_form(A3, None, 1.0, 0.0).sigma == 0.0)
    np.testing.assert_allclose(covariance_numeric(FluctuationModel.special(A1, None, 1.0), 2.0), [[2.0]])
    with pytest.raises(UsageError):
        covariance_closed_form(RootSystem(Kind.B, 2), 1.0, 1.0, 1.0, lam=0.5)


@pytest.mark.parametrize("rs,nu", [(RootSystem(Kind.A, 4), None), (RootSystem(Kind.B, 3), 1.5),
                                   (RootSystem(Kind.B, 4), 0.5), (RootSystem(Kind.D, 4), None)])
@pytest.mark.parametrize("c", [0.5, 2.0])
def test_closed_form_vs_lyapunov(rs, nu, c):
    t = np.array([0.1, 1.0, 5.0])
    numeric = covariance_numeric(FluctuationModel.special(rs, nu, c), t)
    for ti, s in zip(t, numeric):
        closed = covariance_closed_form(rs, nu, c, ti).sigma
        assert np.abs(closed - s).max() <= 1e-8 * np.abs(closed).max()
        assert np.linalg.eigvalsh(closed).min() > 0


@pytest.mark.parametrize("lam", [-0.5, 0.5])
def test_ou_closed_form_vs_lyapunov(lam):
    rs, c = RootSystem(Kind.A, 3), 0.5
    t = np.array([0.1, 1.0, 5.0])
    numeric = covariance_numeric(FluctuationModel.special(rs, None, c, variant="ou", lam=lam), t)
    for ti, s in zip(t, numeric):
        closed = covariance_closed_form(rs, None, c, ti, lam=lam).sigma
        assert np.abs(closed - s).max() <= 1e-8 * np.abs(closed).max()


def test_ou_general_start_model():
    x = np.array([1.5, 0.2, -0.8])
    lam, t = 0.3, 1.2
    fm = FluctuationModel.ou(lam, x, t, n_grid=801)
    np.testing.assert_allclose(fm.matrix_at(t), fluct_matrix_ou(lam, x, t), rtol=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 8), st.floats(0.01, 20), st.floats(0.2, 3))
def test_eigenvalue_formulas(n, t, c):
    ks = np.arange(1, n + 1)
    a = RootSystem(Kind.A, n)
    np.testing.assert_allclose(covariance_closed_form(a, None, c, t).eigenvalues,
                               np.sort(eigenvalue_a(ks, t, c)), rtol=1e-9)
    assert eigenvalue_a(1, t, c) == pytest.approx(t, rel=1e-12)
    for nu in (0.5, 2.0):
        b = RootSystem(Kind.B, n)
        np.testing.assert_allclose(covariance_closed_form(b, nu, c, t).eigenvalues,
                                   np.sort(eigenvalue_b(ks, t, c)), rtol=1e-9)
    np.testing.assert_allclose(eigenvalue_b(ks, t, c), eigenvalue_a(2 * ks, t, c * np.sqrt(2)), rtol=1e-12)


def test_d_last_component_is_uncorrelated():
    d = RootSystem(Kind.D, 4)
    x = np.array([3.0, 1.6, 0.5, 0.0])
    flow = evolve_phi(d, None, x, np.linspace(0, 2, 201))
    sigma = covariance_numeric(FluctuationModel.from_flow(flow), 2.0)
    np.testing.assert_allclose(sigma[-1, :-1], 0.0, atol=1e-8)


def test_closed_form_serialization(tmp_path):
    cov = covariance_closed_form(RootSystem(Kind.B, 2), 1.5, 1.0, 2.0)
    data = json.loads(cov.to_json())
    assert data["schema_version"] == 1 and data["root_system"] == str(cov.rs)
    np.testing.assert_allclose(data["sigma"], cov.sigma, rtol=1e-16)
    cov.to_csv(tmp_path / "sigma.csv")
    rows = (tmp_path / "sigma.csv").read_text().splitlines()
    assert rows[0] == "col_1,col_2"
    assert float(rows[1].split(",")[0]) == cov.sigma[0, 0]
