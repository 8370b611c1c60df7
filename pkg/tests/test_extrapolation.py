import numpy as np
import pytest

from wfstein.balls import BallFamily
from wfstein.errors import ArgumentError, DivergenceError, PreconditionError
from wfstein.extrapolation import (RdFConfig, a1_properties, averaging_constant, averaging_pairs,
                                   build_extrapolation_weight, calibrate_config,
                                   dual_characteristic_crosscheck, lambda0_constant,
                                   maximal_pairs, rubio_r, rubio_r_dual, transfer_check)
from wfstein.lattice import Domain, GridFunction, build_lattice
from wfstein.operators import ball_maximal_array
from wfstein.suites import bump_suite
from wfstein.weights import ap_characteristic, power_weight, unit_weight


@pytest.fixture(scope="module")
def setup():
    dom = Domain("euclidean_torus", 1, [(-1, 1)], [256])
    lat = build_lattice(dom, 0, 8)
    fam = BallFamily.covering(dom, r0=dom.spacing[0] * 0.5 * 1.0001)
    w = power_weight(0, 0.5, dom)
    suite = bump_suite(dom, 10, 5, center=[0.0], radius=0.5)
    return dom, lat, fam, w, suite


def test_lambda0_arithmetic():
    assert lambda0_constant(2, 3, 5) == pytest.approx(60)
    assert lambda0_constant(3, 2, 2) == pytest.approx(64)
    with pytest.raises(ArgumentError):
        lambda0_constant(1, 2, 2)
    with pytest.raises(ArgumentError):
        RdFConfig(2, 2, 0, 2, 2)


def test_zero_input(setup):
    dom, _, fam, w, _ = setup
    cfg = RdFConfig(2, 2, 10, 2.0, 2.0)
    zero = GridFunction(dom, np.zeros(dom.shape))
    assert np.all(rubio_r(zero, cfg, fam, w).values == 0)
    assert np.all(rubio_r_dual(zero, w, cfg, fam).values == 0)
    with pytest.raises(ArgumentError):
        build_extrapolation_weight(zero, zero, w, cfg, fam)


def test_three_properties(setup):
    dom, _, fam, w, suite = setup
    pairs = maximal_pairs(suite, fam)
    cfg = calibrate_config(pairs, w, 2, 2, fam, K=40)
    for f in suite:
        h = f.like(np.abs(f.values))
        s = a1_properties(h, w, cfg, fam)
        assert s["majorant_r"] <= 0 and s["majorant_r_dual"] <= 0
        assert s["norm_r"] <= 1 + 1e-3
        # the A1 slacks hold exactly since every term's image is the next term
        assert s["a1_r"] <= 1 + 1e-3 and s["a1_r_dual"] <= 1 + 1e-3
        rd = rubio_r_dual(h, w, cfg, fam).values
        mprime = ball_maximal_array(rd * w.values, fam) / w.values
        assert np.all(mprime <= 2 * cfg.N2_hat * rd * (1 + 1e-3))


def test_constant_weight_construction():
    dom = Domain("euclidean_torus", 1, [(0, 1)], [64])
    fam = BallFamily.covering(dom)
    one = GridFunction(dom, np.ones(64))
    cfg = RdFConfig(2, 2, 20, 1.0, 1.0)
    wt = build_extrapolation_weight(one, one, unit_weight(dom), cfg, fam)
    assert np.allclose(wt.values, wt.values[0])
    ap = ap_characteristic(wt, 2, fam)
    assert ap == pytest.approx(1, abs=1e-12)
    assert ap <= cfg.lambda0


def test_constructed_weights_below_lambda0(setup):
    dom, _, fam, w, suite = setup
    pairs = maximal_pairs(suite, fam)
    cfg = calibrate_config(pairs, w, 2, 2, fam)
    for f, g in pairs:
        h = f.like(np.abs(f.values))
        wt = build_extrapolation_weight(g, h, w, cfg, fam)
        assert ap_characteristic(wt, 2, fam) <= cfg.lambda0


def test_divergence_detected(setup):
    _, _, fam, w, suite = setup
    # a single hot cell: M spreads it far more than 2 N1 = 2 allows
    spike = suite[0].like(np.where(np.arange(256) == 128, 1.0, 0.0))
    with pytest.raises(DivergenceError):
        rubio_r(spike, RdFConfig(2, 2, 40, 1.0, 1.0), fam, w)


def test_dual_characteristic(setup):
    _, _, fam, w, _ = setup
    direct, via = dual_characteristic_crosscheck(w, 2, fam)
    assert direct == pytest.approx(via, rel=1e-12)
    direct, via = dual_characteristic_crosscheck(w, 3, fam)
    assert direct == pytest.approx(via, rel=1e-12)


def test_transfer(setup):
    dom, lat, fam, w, suite = setup
    ident = [(f, f) for f in suite[:3]]
    cfg = calibrate_config(ident, w, 2, 2, fam)
    rep = transfer_check(ident, w, cfg, fam, "identity")
    assert rep.sup_ratio == pytest.approx(0.25)
    avg = averaging_pairs(suite, lat, 4)
    cfg = calibrate_config(avg, w, 2, 2, fam)
    rep = transfer_check(avg, w, cfg, fam, "average", N0=averaging_constant(lat, fam, cfg.lambda0, 2))
    assert rep.passed
    mx = maximal_pairs(suite, fam)
    cfg = calibrate_config(mx, w, 2, 2, fam)
    rep = transfer_check(mx, w, cfg, fam, "maximal")
    assert rep.passed and rep.meta["max_ap_tilde"] <= cfg.lambda0
    with pytest.raises(PreconditionError):
        transfer_check(mx, w, cfg, fam, "unknown")
    with pytest.raises(PreconditionError):
        transfer_check(avg, w, cfg, fam, "average")
