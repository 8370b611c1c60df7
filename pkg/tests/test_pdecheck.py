import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import mode_symbol_ratio
from wfstein.errors import ArgumentError, BackendError, DegenerateInputError, PreconditionError
from wfstein.lattice import Domain, GridFunction
from wfstein.mixednorm import MixedNormSpec
from wfstein.pdecheck import (EstimateConfig, ModelOperator, apriori_ratio, constant_coefficient,
                              differentiate, estimate_suite, extend_coefficient,
                              halfspace_extension, manufacture_rhs, oscillation_seminorms,
                              rough_coefficient, smooth_coefficient, symbol_ratio)

RING = Domain("euclidean_torus", 1, [(0, 1)], [64])
L2 = MixedNormSpec((0,), 2, 2)


def spacetime(n=32, m=1):
    return Domain("parabolic_box", 1, [(0, 1), (0, 1)], [n, n], m=m, periodic=True)


def sine():
    return GridFunction.from_callable(RING, lambda x: np.sin(2 * np.pi * x))


def test_constant_has_zero_derivatives():
    for backend in ("spectral", "central2"):
        st_ = differentiate(GridFunction(RING, np.full(64, 3.0)), 1, backend)
        for alpha, g in st_.spatial.items():
            if sum(alpha):
                assert np.allclose(g.values, 0, atol=1e-12)


def test_backend_errors():
    box = Domain("euclidean_box", 1, [(0, 1)], [16])
    with pytest.raises(BackendError):
        differentiate(GridFunction(box, np.ones(16)), 1, "spectral")
    with pytest.raises(BackendError):
        differentiate(GridFunction(RING, np.ones(64)), 1, "magic")


def test_central_second_order():
    errs = []
    for n in (64, 128):
        dom = Domain("euclidean_torus", 1, [(0, 1)], [n])
        u = GridFunction.from_callable(dom, lambda x: np.sin(2 * np.pi * x))
        d2 = differentiate(u, 1, "central2").spatial[(2,)].values
        errs.append(np.abs(d2 + 4 * np.pi ** 2 * u.values).max())
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.2)


def test_rhs_closed_form():
    u = sine()
    op = ModelOperator(1, 1, constant_coefficient(RING, 1.0, 0), 0.5, 1.0)
    f = manufacture_rhs(differentiate(u), op)
    assert np.allclose(f.values, -(4 * np.pi ** 2 + 1) * u.values, atol=1e-9)
    zero = differentiate(u.like(np.zeros(64)))
    assert np.all(manufacture_rhs(zero, op).values == 0)
    assert apriori_ratio(zero, manufacture_rhs(zero, op), op, L2) == 0


def test_closed_form_ratio():
    op = ModelOperator(1, 1, constant_coefficient(RING, 1.0, 0), 0.5, 4 * np.pi ** 2)
    st_ = differentiate(sine())
    assert apriori_ratio(st_, manufacture_rhs(st_, op), op, L2) == pytest.approx(1.5, abs=1e-6)


def test_degenerate_rhs():
    st_ = differentiate(sine())
    op = ModelOperator(1, 1, constant_coefficient(RING, 1.0, 0), 0.5, 4.0)
    with pytest.raises(DegenerateInputError):
        apriori_ratio(st_, st_.u.like(np.zeros(64)), op, L2)


def test_operator_validation():
    c = constant_coefficient(RING, 1.0, 0)
    with pytest.raises(ArgumentError):
        ModelOperator(2, 1, c, 0.5, 4.0, "nondivergence")
    with pytest.raises(ArgumentError):
        ModelOperator(1, 1, constant_coefficient(RING, 3.0, 0), 0.5, 4.0)
    with pytest.raises(ArgumentError):
        ModelOperator(1, 1, c, 0.5, 0.5)


@pytest.mark.parametrize("m", [1, 2])
def test_single_modes_match_symbol(m):
    dom = spacetime(32, m)
    for k, nu in [(1, 0), (2, 3), (3, 1), (5, 4)]:
        kk, nn = 2 * np.pi * k, 2 * np.pi * nu
        u = GridFunction.from_callable(dom, lambda t, x: np.cos(kk * x + nn * t))
        st_ = differentiate(u, m)
        op = ModelOperator(m, 1, constant_coefficient(dom, 1.3, 1), 0.5, 16.0, "time_derivative")
        f = manufacture_rhs(st_, op)
        r = apriori_ratio(st_, f, op, MixedNormSpec((1,), 2, 2))
        assert r == pytest.approx(mode_symbol_ratio(m, 16.0, 1.3, kk, nn), rel=1e-9)
        assert r == pytest.approx(symbol_ratio(m, 16.0, 1.3, [kk], nn), rel=1e-9)
        if m == 2 and nu == 0:
            # f is the symbol value times the mode
            sym = 1.3 * kk ** 4 + 16.0
            assert np.allclose(f.values, sym * u.values, atol=1e-8 * sym)


coef_pairs = st.lists(st.tuples(st.integers(-3, 3), st.integers(-2, 2), st.floats(-1, 1)),
                      min_size=1, max_size=4)


def mode_sum(dom, terms, s=1):
    def fn(t, x):
        out = np.zeros_like(x)
        for k, nu, c in terms:
            out = out + c * np.cos(2 * np.pi * (s * k * x + s * s * nu * t) + 0.3)
        return out
    return GridFunction.from_callable(dom, fn)


@given(coef_pairs, coef_pairs, st.floats(-2, 2))
def test_rhs_linear(a, b, c):
    dom = spacetime(32)
    op = ModelOperator(1, 1, rough_coefficient(3, 0.2, 8, 1, dom), 0.2, 9.0)
    ua, ub = mode_sum(dom, a), mode_sum(dom, b)
    fa = manufacture_rhs(differentiate(ua), op).values
    fb = manufacture_rhs(differentiate(ub), op).values
    fab = manufacture_rhs(differentiate(ua.like(ua.values + c * ub.values)), op).values
    assert np.allclose(fab, fa + c * fb, atol=1e-8 * (1 + np.abs(fa).max() + np.abs(fb).max()))


@given(coef_pairs, st.floats(1, 50))
def test_parabolic_rescaling(terms, lam):
    # u_s(t, x) = u(s^2 t, s x) with s = 3 maps cell centers to cell centers
    s = 3
    dom = spacetime(64)
    coef = constant_coefficient(dom, 1.7, 1)
    u, us = mode_sum(dom, terms), mode_sum(dom, terms, s)
    op = ModelOperator(1, 1, coef, 0.5, lam, "time_derivative")
    ops = ModelOperator(1, 1, coef, 0.5, lam * s * s, "time_derivative")
    f = manufacture_rhs(differentiate(u), op).values
    fs = manufacture_rhs(differentiate(us), ops).values
    i = (np.arange(64) * s * s + (s * s - 1) // 2) % 64
    j = (np.arange(64) * s + (s - 1) // 2) % 64
    scale = 1 + np.abs(fs).max()
    assert np.allclose(fs, s * s * f[np.ix_(i, j)], atol=1e-8 * scale)
    if np.abs(u.values).max() > 1e-6:
        r = apriori_ratio(differentiate(u), u.like(f), op, MixedNormSpec((1,), 2, 2))
        rs = apriori_ratio(differentiate(us), us.like(fs), ops, MixedNormSpec((1,), 2, 2))
        assert rs == pytest.approx(r, rel=1e-7)


def test_coefficient_profiles():
    dom = spacetime(64)
    one = rough_coefficient(1, 0.2, 1, 1, dom)
    assert np.all(one.values == one.values[0])
    rough = rough_coefficient(1, 0.2, 64, 1, dom)
    lo, hi = rough.bounds
    assert lo >= 0.2 and hi <= 5
    sm = smooth_coefficient(0.2, 1, dom)
    assert sm.bounds[0] >= 0.2 - 1e-12 and sm.bounds[1] <= 5 + 1e-12
    osc = oscillation_seminorms(rough.on(dom), dom, R=0.25)
    # a profile in x1 only: no oscillation in t
    assert osc["osc_t_xhat"] < 1e-12 and osc["osc_x"] > 0


def test_extension_examples():
    hs = Domain("half_space_box", 1, [(0, 1)], [32])
    x = hs.coords(0)
    odd = halfspace_extension(GridFunction(hs, x), "odd")
    assert np.allclose(odd.values, odd.domain.coords(0))
    even = halfspace_extension(GridFunction(hs, np.cos(np.pi * x / 2)), "even")
    assert even.values[31] == even.values[32]
    with pytest.raises(PreconditionError):
        halfspace_extension(GridFunction(hs, x + 1), "odd")
    prof = rough_coefficient(2, 0.2, 4, 0, hs)
    ext = extend_coefficient(prof, "a11", even.domain)
    assert np.array_equal(ext.values[:32][::-1], ext.values[32:])
    assert np.array_equal(extend_coefficient(prof, "b1", even.domain).values[:32], -prof.values[::-1])


@pytest.mark.parametrize("parity", ["odd", "even"])
def test_extension_commutes_with_derivative(parity):
    hs = Domain("half_space_box", 1, [(0, 1)], [128])
    x = hs.coords(0)
    g = np.exp(-40 * x ** 2)
    if parity == "odd":
        u, du = x * g, g * (1 - 80 * x ** 2)
    else:
        u, du = g, -80 * x * g
    ext = halfspace_extension(GridFunction(hs, u), parity, tol=1e-3, periodic=True)
    d_ext = differentiate(ext, 1).spatial[(1,)].values
    flipped = "even" if parity == "odd" else "odd"
    expected = halfspace_extension(GridFunction(hs, du), flipped, tol=1e-2).values
    assert np.allclose(d_ext, expected, atol=1e-6 * np.abs(du).max())


def test_suite_driver():
    rep = estimate_suite(EstimateConfig(count=5, weight_exponent=0.5, q=3.0))
    assert rep.passed
    assert len(rep.ratios) == 15
    assert set(rep.extra) == {"lambda", "pieces"}
    with pytest.raises(ArgumentError):
        estimate_suite(EstimateConfig(count=0))
