import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from finslerprod.curvature import (
    curvature_batch,
    direction_samples,
    einstein_diagnostics,
    ricci_batch,
    ricci_scalar,
    ricci_tensor,
    riemann_batch,
    riemann_curvature,
    spray_batch,
    spray_coefficients,
)
from finslerprod.metrics import sample_points

SPHERE_X = np.array([math.pi / 4, 0.3])


# classical Riemannian oracle -------------------------------------------------------------


def christoffel_oracle(a_text):
    """Christoffel symbols and Ricci tensor of ``a_ij`` via sympy."""
    n = len(a_text)
    xs = sp.symbols(f"x1:{n + 1}")
    loc = {f"x{i + 1}": xs[i] for i in range(n)}
    g = sp.Matrix(n, n, lambda i, j: sp.sympify(a_text[min(i, j)][max(i, j)].replace("^", "**"), locals=loc))
    ginv = g.inv()
    gam = [[[sp.simplify(sum(ginv[i, l] * (sp.diff(g[l, j], xs[k]) + sp.diff(g[l, k], xs[j]) - sp.diff(g[j, k], xs[l])) for l in range(n)) / 2)
             for k in range(n)] for j in range(n)] for i in range(n)]
    ric = sp.zeros(n, n)
    for j in range(n):
        for k in range(n):
            ric[j, k] = sum(
                sp.diff(gam[i][j][k], xs[i]) - sp.diff(gam[i][j][i], xs[k])
                + sum(gam[i][i][p] * gam[p][j][k] - gam[i][k][p] * gam[p][j][i] for p in range(n))
                for i in range(n)
            )
    gam_f = sp.lambdify(xs, gam, "math")
    ric_f = sp.lambdify(xs, ric.tolist(), "math")
    return (lambda x: np.array(gam_f(*x), dtype=float)), (lambda x: np.array(ric_f(*x), dtype=float))


RIEMANNIAN_CASES = {
    "sphere": [["1", "0"], ["0", "sin(x1)^2"]],
    "riem": [["exp(0.3*x2)", "0.1*x1*x2"], ["0.1*x1*x2", "1+0.5*x1^2"]],
}


@pytest.mark.parametrize("name", sorted(RIEMANNIAN_CASES))
def test_riemannian_oracle(demo, name):
    m = demo.metric(name)
    gam, ric = christoffel_oracle(RIEMANNIAN_CASES[name])
    X, Y = sample_points(m.spec, 20, seed=5)
    G = spray_batch(m, X, Y)
    Ric = ricci_batch(m, X, Y)
    T = curvature_batch(m, X, Y, with_tensor=True).ric_tensor
    for k, (x, y) in enumerate(zip(X, Y)):
        np.testing.assert_allclose(G[k], 0.5 * np.einsum("ijk,j,k->i", gam(x), y, y), atol=1e-12)
        R = ric(x)
        assert Ric[k] == pytest.approx(y @ R @ y, abs=1e-10)
        np.testing.assert_allclose(T[k], R, atol=1e-9)


def test_sphere_examples(demo):
    m = demo.metric("sphere")
    x, y = SPHERE_X, np.array([0.0, 1.0])
    np.testing.assert_allclose(spray_coefficients(m, x, y).G, [-0.25, 0.0], atol=1e-15)
    assert ricci_scalar(m, x, y) == pytest.approx(0.5, abs=1e-13)
    g = np.diag([1.0, math.sin(x[0]) ** 2])
    np.testing.assert_allclose(ricci_tensor(m, x, y), g, atol=1e-12)


def test_flat_metrics(demo):
    for name in ("plane", "flat_randers"):
        m = demo.metric(name)
        X, Y = sample_points(m.spec, 10, seed=1)
        assert np.max(np.abs(spray_batch(m, X, Y))) < 1e-14
        assert np.max(np.abs(riemann_batch(m, X, Y))) < 1e-13


@pytest.mark.parametrize("name", ["riem", "randers", "funk", "square", "sphere_euc_ratio", "rr_lin23"])
def test_riemann_annihilates_y(demo, name):
    m = demo.metric(name)
    X, Y = sample_points(m.spec, 10, seed=2)
    R = riemann_batch(m, X, Y)
    scale = max(1.0, np.max(np.abs(R)))
    assert np.max(np.abs(np.einsum("bik,bk->bi", R, Y))) < 1e-10 * scale


@given(seed=st.integers(0, 1000), lam=st.floats(0.3, 3.0))
@settings(max_examples=15, deadline=None)
def test_homogeneity(demo, seed, lam):
    m = demo.metric("randers")
    X, Y = sample_points(m.spec, 1, seed)
    a = curvature_batch(m, X, Y)
    b = curvature_batch(m, X, lam * Y)
    np.testing.assert_allclose(b.G, lam**2 * a.G, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(b.R, lam**2 * a.R, rtol=1e-10, atol=1e-13)
    np.testing.assert_allclose(b.ric, lam**2 * a.ric, rtol=1e-10, atol=1e-13)


def test_sphere_times_plane_ricci(demo):
    m = demo.metric("sphere_euc_lin11")
    x = np.array([SPHERE_X[0], SPHERE_X[1], 0.1, 0.2])
    y = np.array([0.0, 1.0, 0.3, -0.4])
    assert ricci_scalar(m, x, y) == pytest.approx(0.5, abs=1e-12)
    R = riemann_curvature(m, x, y).R
    assert np.max(np.abs(R[:2, 2:])) < 1e-14 and np.max(np.abs(R[2:, :2])) < 1e-14


def test_funk_tensor_jet_vs_fd(demo):
    m = demo.metric("funk")
    X, Y = sample_points(m.spec, 10, seed=4)
    for x, y in zip(X, Y):
        exact = ricci_tensor(m, x, y)
        approx = ricci_tensor(m, x, y, mode="fd")
        assert np.max(np.abs(exact - approx)) <= 1e-5 * max(1.0, np.max(np.abs(exact)))


def test_funk_einstein_constant(demo):
    m = demo.metric("funk")
    x = np.array([0.1, -0.2])
    d = einstein_diagnostics(m, x, direction_samples(m.spec, x, 8, 0))
    assert d.verdict == "einstein"
    assert d.lambda_hat == pytest.approx(-0.25, abs=1e-4)


def test_einstein_verdicts(demo):
    cases = [
        ("plane", [0.1, 0.2], "ricci-flat", None),
        ("sphere", SPHERE_X, "einstein", 1.0),
        ("sphere_sphere_lin11", [0.8, 0.1, 1.2, -0.3], "einstein", 1.0 / 3.0),
        ("sphere_sphere_ratio", [0.8, 0.1, 1.2, -0.3], "not-einstein", None),
        ("flat_flat_ratio", [0.1, 0.1, 0.0, 0.2], "ricci-flat", None),
    ]
    for name, x, verdict, lam in cases:
        m = demo.metric(name)
        d = einstein_diagnostics(m, x, direction_samples(m.spec, x, 12, 3))
        assert d.verdict == verdict, name
        if lam is not None:
            assert d.lambda_hat == pytest.approx(lam, abs=1e-9), name
    d = einstein_diagnostics(demo.metric("sphere_sphere_lin11"), [0.8, 0.1, 1.2, -0.3],
                             direction_samples(demo.metric("sphere_sphere_lin11").spec, [0.8, 0.1, 1.2, -0.3], 8, 0))
    assert d.lambda_hat_unnormalized == pytest.approx(1.0, abs=1e-9)


def test_direction_checks(demo):
    m = demo.metric("sphere")
    with pytest.raises(ValueError):
        einstein_diagnostics(m, SPHERE_X, np.ones((3, 2)))
    Y = direction_samples(m.spec, SPHERE_X, 8, 0)
    Y[3] = -2.0 * Y[0]
    with pytest.raises(ValueError, match="non-parallel"):
        einstein_diagnostics(m, SPHERE_X, Y)
    with pytest.raises(ValueError):
        einstein_diagnostics(m, SPHERE_X, np.empty((0, 2)))


def test_unknown_tensor_mode(demo):
    with pytest.raises(ValueError):
        ricci_tensor(demo.metric("sphere"), SPHERE_X, [0.0, 1.0], mode="spectral")
