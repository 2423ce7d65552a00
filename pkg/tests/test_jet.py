import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finslerprod import _kernels
from finslerprod import jet
from finslerprod.errors import DomainError, OrderExceededError
from finslerprod.finite_diff import fd_partial
from finslerprod.jet import Jet, ScalarField, algebra, lift, n_monomials, partial


def field(fn, arity):
    return ScalarField(arity, fn)


def test_square_coefficients():
    J = lift(field(lambda x: x * x, 1), [3.0], 2)
    assert J.coefficient((0,)) == 9.0
    assert J.coefficient((1,)) == 6.0
    assert J.coefficient((2,)) == 1.0
    assert partial(J, (2,)) == 2.0


def test_bilinear_mixed_partial():
    J = lift(field(lambda x, y: x * y, 2), [1.0, 1.0], 2)
    assert partial(J, (1, 1)) == 1.0


def test_sin_exp_against_fd():
    f = field(lambda x, y: jet.sin(x) * jet.exp(y), 2)
    J = lift(f, [0.3, 0.7], 4)
    for idx in map(tuple, algebra(2, 4).exponents):
        exact = partial(J, idx)
        approx = fd_partial(f, [0.3, 0.7], idx)
        assert abs(exact - approx) <= 1e-6 * max(1.0, abs(exact)), idx


def test_partial_examples():
    assert partial(lift(field(lambda x: x * 0.0 + 5.0, 1), [1.0], 1), (1,)) == 0.0
    assert partial(lift(field(lambda x: x * x * x, 1), [2.0], 3), (3,)) == 6.0
    assert partial(lift(field(jet.sqrt, 1), [4.0], 2), (2,)) == pytest.approx(-1 / 32, rel=1e-15)


def test_order_exceeded():
    J = lift(field(lambda x: x * x, 1), [3.0], 2)
    with pytest.raises(OrderExceededError):
        partial(J, (3,))


def test_domain_errors():
    with pytest.raises(DomainError):
        lift(field(jet.sqrt, 1), [-1.0], 2)
    with pytest.raises(DomainError):
        lift(field(lambda x: 1.0 / x, 1), [0.0], 2)
    with pytest.raises(DomainError):
        lift(field(jet.log, 1), [0.0], 1)


def test_fd_examples():
    assert fd_partial(field(lambda x: x * x, 1), [3.0], (1,), 1e-3) == pytest.approx(6.0, abs=1e-9)
    assert fd_partial(field(jet.sin, 1), [0.0], (1,), 1e-3) == pytest.approx(1.0, abs=1e-10)


def test_graded_layout_is_prefix():
    lo, hi = algebra(3, 2), algebra(3, 4)
    np.testing.assert_array_equal(hi.exponents[: lo.size], lo.exponents)
    assert n_monomials(3, 4) == hi.size == 35


def test_truncate_matches_lower_order_lift():
    f = field(lambda x, y: jet.exp(x * y) + jet.cos(y), 2)
    hi = lift(f, [0.4, -0.2], 5).truncate(3)
    lo = lift(f, [0.4, -0.2], 3)
    np.testing.assert_allclose(hi.coeffs, lo.coeffs, rtol=1e-14, atol=1e-15)


def test_diff_lowers_order():
    f = field(lambda x, y: x * x * y, 2)
    d = lift(f, [2.0, 3.0], 3).diff(0)
    assert d.order == 2
    assert d.value == 12.0
    assert partial(d, (1, 0)) == 6.0


def test_batched_lift_matches_pointwise():
    f = field(lambda x, y: jet.tan(x) / (1.0 + y * y), 2)
    pts = np.array([[0.1, 0.2], [0.3, -0.5], [-0.7, 1.1]])
    batch = lift(f, pts, 3)
    for i, p in enumerate(pts):
        np.testing.assert_allclose(batch.coeffs[i], lift(f, p, 3).coeffs, rtol=1e-14)


def test_power_dispatch():
    # integer exponents work on negative bases, non-integer need a positive one
    J = lift(field(lambda x: jet.power(x, 3.0), 1), [-2.0], 3)
    assert J.value == -8.0
    assert partial(J, (1,)) == 12.0
    with pytest.raises(DomainError):
        lift(field(lambda x: jet.power(x, 0.5), 1), [-2.0], 1)
    K = lift(field(lambda x: jet.power(x, 2.5), 1), [4.0], 2)
    assert partial(K, (2,)) == pytest.approx(2.5 * 1.5 * 4.0**0.5, rel=1e-14)


def test_tan_series():
    # tan'' = 2 tan sec^2
    x = 0.6
    J = lift(field(jet.tan, 1), [x], 3)
    sec2 = 1 / math.cos(x) ** 2
    assert partial(J, (1,)) == pytest.approx(sec2, rel=1e-14)
    assert partial(J, (2,)) == pytest.approx(2 * math.tan(x) * sec2, rel=1e-13)


def test_order_zero_jet_is_bit_exact():
    for fn, v in ((jet.sqrt, 2.0), (jet.exp, 0.3), (jet.log, 1.7), (jet.sin, 0.9), (jet.tan, 0.4)):
        J = lift(field(fn, 1), [v], 0)
        assert J.value == fn(v)


@pytest.mark.parametrize("backend", _kernels.available_backends())
def test_backends_agree(backend):
    f = field(lambda x, y, z: jet.exp(x) * jet.sin(y * z) / (2.0 + x * z), 3)
    old = _kernels.get_backend()
    try:
        _kernels.set_backend("numpy")
        ref = lift(f, [0.2, 0.5, -0.3], 5).coeffs
        _kernels.set_backend(backend)
        got = lift(f, [0.2, 0.5, -0.3], 5).coeffs
    finally:
        _kernels.set_backend(old)
    np.testing.assert_allclose(got, ref, rtol=1e-13, atol=1e-15)


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.set_backend("cuda")


# properties -----------------------------------------------------------------------------

coord = st.floats(-1.5, 1.5, allow_nan=False)


def random_jet(rng, nvars, order):
    alg = algebra(nvars, order)
    return Jet(rng.standard_normal(alg.size), nvars, order)


@given(seed=st.integers(0, 2**32 - 1), order=st.integers(1, 4), nvars=st.integers(1, 3))
@settings(max_examples=60, deadline=None)
def test_leibniz(seed, order, nvars):
    rng = np.random.default_rng(seed)
    a, b = random_jet(rng, nvars, order), random_jet(rng, nvars, order)
    ab = a * b
    for i in range(nvars):
        e = tuple(int(k == i) for k in range(nvars))
        lhs = partial(ab, e)
        rhs = partial(a, e) * b.value + a.value * partial(b, e)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


@given(x=coord, y=coord)
@settings(max_examples=60, deadline=None)
def test_chain_rule_polynomials(x, y):
    # lift(f o g) equals composing the lifted g into f
    g = lambda u, v: u * u - 2.0 * u * v + 3.0
    f = lambda w: w * w * w - w
    direct = lift(field(lambda u, v: f(g(u, v)), 2), [x, y], 4)
    inner = lift(field(g, 2), [x, y], 4)
    composed = f(inner)
    np.testing.assert_allclose(direct.coeffs, composed.coeffs, rtol=1e-12, atol=1e-10)


@given(x=st.floats(-1, 1), y1=st.floats(-2, 2), y2=st.floats(-2, 2))
@settings(max_examples=60, deadline=None)
def test_euler_homogeneity(x, y1, y2):
    h = field(lambda x, a, b: (1.0 + x * x) * a * a + jet.sqrt(a * a * a * a + b * b * b * b) + a * b * jet.cos(x), 3)
    if abs(y1) + abs(y2) < 1e-3:
        return
    J = lift(h, [x, y1, y2], 1)
    lhs = y1 * partial(J, (0, 1, 0)) + y2 * partial(J, (0, 0, 1))
    assert lhs == pytest.approx(2.0 * J.value, rel=1e-12, abs=1e-12)


UNARY = (
    ("sin", jet.sin, lambda v: True),
    ("cos", jet.cos, lambda v: True),
    ("exp", jet.exp, lambda v: abs(v) < 1.5),
    ("log", jet.log, lambda v: v > 0.2),
    ("sqrt", jet.sqrt, lambda v: v > 0.2),
    ("tan", jet.tan, lambda v: abs(v) < 0.9),
)


def random_composition(rng):
    """A random two-level composition of primitives in three variables.

    Arguments stay away from poles and fast exponential growth so the fields
    vary on an O(1) length scale, which is what a fixed FD step assumes.
    """
    while True:
        point = rng.uniform(0.3, 1.2, 3)
        (_, f1, ok1), (_, f2, ok2) = (UNARY[i] for i in rng.integers(0, len(UNARY), 2))
        i, j = rng.integers(0, 3, 2)
        c = rng.uniform(0.5, 1.5)

        def build(x, y, z, f1=f1, f2=f2, i=i, j=j, c=c):
            v = (x, y, z)
            inner = v[i] * c + v[j] * v[(j + 1) % 3]
            return f2(f1(inner)) + v[(i + 2) % 3] * inner

        inner0 = point[i] * c + point[j] * point[(j + 1) % 3]
        if ok1(inner0) and ok2(f1(inner0)):
            return field(build, 3), point


def test_jets_match_fd_on_random_compositions():
    rng = np.random.default_rng(2024)
    # degrees 1..3; degree 4 has its own looser check below
    idxs = [tuple(e) for e in algebra(3, 3).exponents if sum(e) >= 1]
    for _ in range(100):
        f, p = random_composition(rng)
        J = lift(f, p, 3)
        scale = max(1.0, max(abs(partial(J, e)) for e in idxs))
        for e in idxs:
            exact = partial(J, e)
            approx = fd_partial(f, p, e)
            assert abs(exact - approx) <= 1e-5 * scale, (e, exact, approx)


def test_fourth_order_fd_agreement():
    # degree 4 with one Richardson level is only good to ~1e-4 on these fields
    rng = np.random.default_rng(7)
    idxs = [tuple(e) for e in algebra(3, 4).exponents if sum(e) == 4]
    for _ in range(30):
        f, p = random_composition(rng)
        J = lift(f, p, 4)
        scale = max(1.0, max(abs(partial(J, e)) for e in idxs))
        for e in idxs:
            assert abs(partial(J, e) - fd_partial(f, p, e)) <= 1e-3 * scale, e
