import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import family_ap, interval_ap_sup
from wfstein.balls import BallFamily, ball_mask
from wfstein.errors import ArgumentError, ConstructionError, CoverageError, InvariantError
from wfstein.lattice import CubeId, Domain, GridFunction, build_lattice
from wfstein.weights import (Weight, ap_characteristic, check_ap_inclusion, holder_ap_bound,
                             measure_comparison_fit, power_weight, product_weight, unit_weight,
                             weight_from_json)


def line(n=64, lo=-1.0, hi=1.0, kind="euclidean_torus"):
    return Domain(kind, 1, [(lo, hi)], [n])


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_unit_weight_is_one(p):
    dom = Domain("euclidean_box", 2, [(0, 1), (0, 1)], [16, 16])
    assert ap_characteristic(unit_weight(dom), p, BallFamily.covering(dom)) == pytest.approx(1, abs=1e-12)


def test_family_matches_enumeration():
    dom = line(32)
    w = power_weight(0, 0.5, dom)
    fam = BallFamily.covering(dom, stride=3)
    assert ap_characteristic(w, 2, fam) == pytest.approx(
        family_ap(w.values, 2, dom, fam.radii, stride=3), rel=1e-12)


def test_box_family_matches_enumeration_2d():
    dom = Domain("euclidean_box", 2, [(-1, 1), (0, 1)], [8, 6])
    w = power_weight(0, -0.5, dom)
    fam = BallFamily.covering(dom)
    assert ap_characteristic(w, 3, fam) == pytest.approx(family_ap(w.values, 3, dom, fam.radii), rel=1e-12)


def test_sqrt_weight_below_interval_oracle_and_stable():
    vals = []
    for n in (256, 1024):
        dom = line(n, kind="euclidean_box")
        w = power_weight(0, 0.5, dom)
        ap = ap_characteristic(w, 2, BallFamily.covering(dom))
        assert 1 <= ap <= interval_ap_sup(w.values, 2) * (1 + 1e-12)
        vals.append(ap)
    assert vals[1] / vals[0] == pytest.approx(1, abs=0.05)
    # the all-interval sup is itself finite and refinement-stable
    o = [interval_ap_sup(power_weight(0, 0.5, line(n, kind="euclidean_box")).values, 2) for n in (256, 1024)]
    assert o[1] / o[0] == pytest.approx(1, abs=0.05)


def test_cubic_weight_grows_as_balls_shrink():
    ests = []
    for n in (64, 256, 1024):
        dom = line(n, kind="euclidean_box")
        ests.append(ap_characteristic(power_weight(0, 3.0, dom), 2, BallFamily.covering(dom)))
    assert ests[0] < ests[1] < ests[2]
    # growth close to the r^-2 law: a factor ~16 per fourfold refinement
    assert ests[2] / ests[1] > 8


def test_ap_errors():
    dom = line(16)
    fam = BallFamily.covering(dom)
    with pytest.raises(ArgumentError):
        ap_characteristic(unit_weight(dom), 1.0, fam)
    with pytest.raises(InvariantError):
        Weight(GridFunction(dom, np.zeros(16)))
    with pytest.raises(ArgumentError):
        ap_characteristic(unit_weight(dom), 2, BallFamily(dom, (), 1))


def test_power_weight_cases():
    dom = line(16)
    assert np.all(power_weight(0, 0.0, dom).values == 1)
    odd = Domain("euclidean_box", 1, [(-1, 1)], [5])
    with pytest.raises(ConstructionError):
        power_weight(0, -2.0, odd)
    # half space: the wall is the lower end of axis 0
    hs = Domain("half_space_box", 2, [(0, 1), (-1, 1)], [8, 8])
    p, d = 2.0, 2
    theta = d - 1 + p / 2
    w = power_weight(0, theta - d, hs)
    assert np.all(w.values == 1)
    root = power_weight(0, 0.5, hs)
    assert np.all(root.values > 0)
    assert np.allclose(root.values[:, 0], np.sqrt(hs.coords(0)))


def test_inclusion():
    dom = line(128)
    fam = BallFamily.covering(dom)
    assert check_ap_inclusion(power_weight(0, 0.5, dom), 2, 3, fam)
    assert check_ap_inclusion(unit_weight(dom), 2, 3, fam)
    with pytest.raises(ArgumentError):
        check_ap_inclusion(unit_weight(dom), 2, 2, fam)


@given(st.floats(-0.9, 0.9), st.floats(1.2, 2.5), st.floats(0.1, 2.0))
def test_inclusion_property(exponent, p, dq):
    dom = line(64)
    w = power_weight(0, exponent, dom)
    assert check_ap_inclusion(w, p, p + dq, BallFamily.covering(dom))


def test_holder_examples():
    dom = line(32)
    fam = BallFamily.covering(dom)
    w = power_weight(0, 0.5, dom)
    lhs, rhs = holder_ap_bound(w, 2, GridFunction(dom, np.ones(32)), ((16,), fam.radii[2]), fam)
    assert lhs == pytest.approx(1)
    assert rhs == pytest.approx(ap_characteristic(w, 2, fam))
    # a clipped ball at the edge of a box holds an even number of cells
    box = line(32, kind="euclidean_box")
    h = box.spacing[0]
    bfam = BallFamily.covering(box, r0=3.5 * h)
    ball = ((0,), 3.5 * h)
    mask = ball_mask(box, (0,), 3.5 * h)
    assert mask.sum() == 4
    f = np.zeros(32)
    f[:2] = 1
    lhs, rhs = holder_ap_bound(unit_weight(box), 2, GridFunction(box, f), ball, bfam)
    assert (lhs, rhs) == (pytest.approx(0.25), pytest.approx(0.5))
    with pytest.raises(ArgumentError):
        holder_ap_bound(w, 2, GridFunction(dom, -np.ones(32)), ((16,), fam.radii[2]), fam)


def test_holder_random_draws():
    dom = line(128)
    fam = BallFamily.covering(dom)
    w = power_weight(0, 0.5, dom)
    rng = np.random.default_rng(7)
    bad = 0
    for _ in range(100):
        f = GridFunction(dom, rng.random(128) ** 3)
        ball = ((int(rng.integers(128)),), float(rng.choice(fam.radii)))
        lhs, rhs = holder_ap_bound(w, 2, f, ball, fam)
        bad += lhs > rhs * (1 + 1e-12)
    assert bad == 0


def test_measure_fit_cases():
    dom = line(64)
    lat = build_lattice(dom, 0, 6)
    rng = np.random.default_rng(3)
    cube = CubeId(2, (1,))
    pairs = []
    for _ in range(30):
        mask = np.zeros(64, dtype=bool)
        s = lat.cube_slices(cube)[0]
        mask[s] = rng.random(16) < 0.4
        mask[s.start] = True
        pairs.append((mask, cube))
    fit = measure_comparison_fit(unit_weight(dom), 2, lat, pairs)
    assert fit.beta == 1.0 and fit.N == pytest.approx(1)
    full = np.zeros(64, dtype=bool)
    full[lat.cube_slices(cube)] = True
    fit = measure_comparison_fit(power_weight(0, 0.5, dom), 2, lat, [(full, cube)] * 3)
    assert fit.beta == 1.0 and fit.N == pytest.approx(1)
    with pytest.raises(ArgumentError):
        measure_comparison_fit(unit_weight(dom), 2, lat, [])


def test_measure_fit_power_weight_holds_everywhere():
    dom = line(256)
    lat = build_lattice(dom, 0, 8)
    w = power_weight(0, 0.5, dom)
    rng = np.random.default_rng(11)
    pairs = []
    for _ in range(200):
        n = int(rng.integers(1, 6))
        cube = CubeId(n, (int(rng.integers(2 ** n)),))
        s = lat.cube_slices(cube)[0]
        mask = np.zeros(256, dtype=bool)
        mask[s] = rng.random(s.stop - s.start) < rng.random()
        mask[s.start + int(rng.integers(s.stop - s.start))] = True
        pairs.append((mask, cube))
    fit = measure_comparison_fit(w, 2, lat, pairs)
    assert 0 < fit.beta < 1
    for mask, cube in pairs:
        q = np.zeros(256, dtype=bool)
        q[lat.cube_slices(cube)] = True
        assert w.measure(mask) / w.measure(q) <= fit.N * (mask.sum() / q.sum()) ** fit.beta


def test_product_weight_and_json():
    dom = Domain("parabolic_box", 1, [(0, 1), (-1, 1)], [8, 16])
    doc = {"structure": "product", "split": [1],
           "w1": {"structure": "power", "axis": 0, "exponent": 0.5},
           "w2": {"structure": "unit"}}
    w = weight_from_json(doc, dom)
    assert w.values.shape == (8, 16)
    assert np.allclose(w.values[3], np.sqrt(np.abs(dom.coords(1))))
    with pytest.raises(InvariantError):
        product_weight(unit_weight(dom.sub([0])), unit_weight(dom.sub([1])), dom, (0,))


def test_empty_family_coverage():
    dom = line(16)
    with pytest.raises(CoverageError):
        BallFamily(dom, (), 1).require_coverage()
