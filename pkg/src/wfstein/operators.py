"""Dyadic and ball maximal / sharp functions and their empirical bounds."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .balls import BallFamily, footprint
from .errors import ArgumentError
from .lattice import DyadicLattice, GridFunction
from .reports import RatioReport, ratio
from .weights import Weight


@dataclass(frozen=True)
class MaximalOutput:
    values: GridFunction
    flavor: str
    source: object

    @property
    def array(self) -> np.ndarray:
        return self.values.values


def _same_domain(f: GridFunction, domain):
    if f.domain != domain:
        raise ArgumentError("function and lattice/family live on different domains")


def dyadic_maximal_array(values: np.ndarray, lat: DyadicLattice) -> np.ndarray:
    a = np.abs(values)
    return np.max([lat.average(a, n) for n in lat.levels], axis=0)


def dyadic_sharp_array(values: np.ndarray, lat: DyadicLattice) -> np.ndarray:
    out = np.zeros(values.shape)
    for n in lat.levels:
        dev = np.abs(values - lat.average(values, n))
        np.maximum(out, lat.average(dev, n), out=out)
    return out


def dyadic_maximal(f: GridFunction, lat: DyadicLattice) -> MaximalOutput:
    """M_dy f = max over levels of |f|_{|n}."""
    _same_domain(f, lat.domain)
    return MaximalOutput(f.like(dyadic_maximal_array(f.values, lat)), "dyadic", lat)


def dyadic_sharp(f: GridFunction, lat: DyadicLattice) -> MaximalOutput:
    """f#_dy = max over levels of the mean oscillation on the containing cube."""
    _same_domain(f, lat.domain)
    return MaximalOutput(f.like(dyadic_sharp_array(f.values, lat)), "dyadic", lat)


def ball_maximal_array(values: np.ndarray, fam: BallFamily, weight: np.ndarray | None = None) -> np.ndarray:
    a = np.abs(values)
    out = np.full(values.shape, -np.inf)
    for r in fam.radii:
        np.maximum(out, fam.sup_over_containing(fam.averages(a, r, weight), r), out=out)
    return out


def ball_maximal(f: GridFunction, fam: BallFamily, w: Weight | None = None) -> MaximalOutput:
    """Mf(x) = max over family balls containing x of the average of |f|.

    With ``w`` the averages are taken against w dmu.
    """
    _same_domain(f, fam.domain)
    fam.require_coverage()
    weight = None if w is None else w.values
    return MaximalOutput(f.like(ball_maximal_array(f.values, fam, weight)), "ball", fam)


def _shifted(values: np.ndarray, offset: tuple, periodic: bool) -> tuple:
    """(values[x + offset], valid mask) on the grid."""
    if periodic:
        return np.roll(values, [-o for o in offset], axis=tuple(range(values.ndim))), None
    out = np.zeros_like(values)
    valid = np.zeros(values.shape, dtype=bool)
    src, dst = [], []
    for o, n in zip(offset, values.shape):
        if o >= 0:
            src.append(slice(o, n))
            dst.append(slice(0, n - o))
        else:
            src.append(slice(0, n + o))
            dst.append(slice(-o, n))
    out[tuple(dst)] = values[tuple(src)]
    valid[tuple(dst)] = True
    return out, valid


def ball_oscillation(values: np.ndarray, fam: BallFamily, radius: float) -> np.ndarray:
    """Mean oscillation of values over B(c, radius), for every center c."""
    dom = fam.domain
    means = fam.averages(values, radius)
    fp, ranges = footprint(dom, radius)
    acc = np.zeros(values.shape)
    for idx in zip(*np.nonzero(fp)):
        offset = tuple(int(i) + lo for i, (lo, _) in zip(idx, ranges))
        shifted, valid = _shifted(values, offset, bool(dom.periodic))
        dev = np.abs(shifted - means)
        if valid is not None:
            dev[~valid] = 0.0
        acc += dev
    return acc / fam.counts(radius)


def ball_sharp_array(values: np.ndarray, fam: BallFamily) -> np.ndarray:
    out = np.full(values.shape, -np.inf)
    for r in fam.radii:
        np.maximum(out, fam.sup_over_containing(ball_oscillation(values, fam, r), r), out=out)
    return out


def ball_sharp(f: GridFunction, fam: BallFamily) -> MaximalOutput:
    _same_domain(f, fam.domain)
    fam.require_coverage()
    return MaximalOutput(f.like(ball_sharp_array(f.values, fam)), "ball", fam)


def comparison_constant(lat: DyadicLattice, fam: BallFamily) -> float:
    """max over lattice cubes Q of min over family balls B containing Q of mu(B)/mu(Q)."""
    dom = lat.domain
    h = dom.spacing
    finest = lat.block(lat.n_max)
    circum = float(dom.distance([b * hh / 2 for b, hh in zip(finest, h)]))
    if fam.radii[0] < circum * (1 - 1e-12):
        raise ArgumentError(
            f"smallest family radius {fam.radii[0]:.6g} below the finest cube's "
            f"circumscribed radius {circum:.6g}"
        )
    centers = fam.centers
    worst = 1.0
    for n in lat.levels:
        block = lat.block(n)
        counts = lat.counts(n)
        cube_cells = int(np.prod(block))
        best = np.full(counts, np.inf)
        grids = np.meshgrid(*[np.arange(c) * b for c, b in zip(counts, block)], indexing="ij")
        lo = [g.ravel() for g in grids]
        # candidate centers: grid points adjacent to the geometric cube center
        cand_axes = []
        for axis, b in enumerate(block):
            mid = lo[axis] + (b - 1) / 2.0
            cand_axes.append([np.floor(mid).astype(int), np.ceil(mid).astype(int)])
        for choice in itertools.product(*[range(2)] * dom.ndim):
            c = [cand_axes[a][choice[a]] for a in range(dom.ndim)]
            is_center = centers[tuple(c)]
            far = []
            for axis, b in enumerate(block):
                cells = lo[axis][:, None] + np.arange(b)[None, :]
                off = np.abs(cells - c[axis][:, None])
                if dom.periodic:
                    off = np.minimum(off, dom.points[axis] - off)
                far.append(off.max(axis=1) * h[axis])
            reach = dom.distance(far)
            for r in fam.radii:
                ok = is_center & (reach < r)
                if not ok.any():
                    continue
                meas = fam.counts(r)[tuple(c)] / cube_cells
                cand = np.where(ok, meas, np.inf).reshape(counts)
                np.minimum(best, cand, out=best)
        if not np.isfinite(best).all():
            raise ArgumentError(f"level {n}: some cube is contained in no family ball")
        worst = max(worst, float(best.max()))
    return worst


def sup_pointwise_ratio(num: np.ndarray, den: np.ndarray, flags: list, label: str,
                        tol: float = 1e-13) -> float:
    """max of num/den over the grid; points where both vanish (to tol) count as 0."""
    scale = max(float(np.abs(num).max()), float(np.abs(den).max()), 1e-300)
    zero = (np.abs(num) <= tol * scale) & (np.abs(den) <= tol * scale)
    if zero.any():
        flags.append(f"0/0 at {label}")
    live = ~zero
    if not live.any():
        return 0.0
    with np.errstate(divide="ignore"):
        return float(np.max(num[live] / den[live]))


def check_comparison(f: GridFunction, lat: DyadicLattice, fam: BallFamily) -> RatioReport:
    """sup M_dy f / M f and sup f#_dy / f# against the recorded geometric constant.

    A cube Q inside a ball B gives avg_Q|f| <= C avg_B|f| and
    avg_Q|f - f_Q| <= 2 avg_Q|f - f_B| <= 2C avg_B|f - f_B|, so the maximal
    ratio is held to C and the sharp ratio to 2C.
    """
    _same_domain(f, lat.domain)
    c_geom = comparison_constant(lat, fam)
    flags = []
    m_dy = dyadic_maximal_array(f.values, lat)
    m_b = ball_maximal_array(f.values, fam)
    s_dy = dyadic_sharp_array(f.values, lat)
    s_b = ball_sharp_array(f.values, fam)
    r_max = sup_pointwise_ratio(m_dy, m_b, flags, "maximal")
    r_sharp = sup_pointwise_ratio(s_dy, s_b, flags, "sharp")
    ok = bool(r_max <= c_geom * (1 + 1e-12) and r_sharp <= 2 * c_geom * (1 + 1e-12))
    flags = sorted(set(flags))
    return RatioReport(
        "comparison", seeds=[0, 0], ratios=[r_max, r_sharp], flags=flags,
        extra={"kind": ["maximal", "sharp"]},
        meta={"c_geom": c_geom, "maximal_ratio": r_max, "sharp_ratio": r_sharp,
              "contract_ok": ok},
    )


def lp_norm(values: np.ndarray, p: float, weight: np.ndarray | None, cell: float) -> float:
    a = np.abs(values) ** p
    if weight is not None:
        a = a * weight
    return float(a.sum() * cell) ** (1.0 / p)


def check_hl_bound(suite, w: Weight | None, p: float, fam: BallFamily, seeds=None) -> RatioReport:
    """sup over the suite of ||Mf||_{L_p(w)} / ||f||_{L_p(w)}."""
    suite = list(suite)
    if not suite:
        raise ArgumentError("empty suite")
    if not 1 < p < np.inf:
        raise ArgumentError("p must lie in (1, inf)")
    fam.require_coverage()
    weight = None if w is None else w.values
    cell = fam.domain.cell_measure
    flags = []
    ratios = []
    for i, f in enumerate(suite):
        mf = ball_maximal_array(f.values, fam)
        ratios.append(ratio(lp_norm(mf, p, weight, cell), lp_norm(f.values, p, weight, cell), flags, i))
    return RatioReport("hardy_littlewood", seeds=list(seeds) if seeds is not None else list(range(len(suite))),
                       ratios=ratios, flags=flags, meta={"p": p})
