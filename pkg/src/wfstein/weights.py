"""Weights, discrete A_p characteristics and the weight lemmas.

The supremum over all balls in the A_p definition is replaced by a maximum
over a finite :class:`~wfstein.balls.BallFamily`, so every characteristic
computed here is a lower bound for the continuum value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.optimize import minimize_scalar

from .balls import BallFamily, _origin, ball_sum, footprint
from .errors import ArgumentError, ConstructionError, InvariantError
from .lattice import CubeId, Domain, DyadicLattice, GridFunction


@dataclass(frozen=True)
class Weight:
    base: GridFunction
    structure: dict = field(default_factory=lambda: {"structure": "plain"})
    w1: "Weight | None" = None
    w2: "Weight | None" = None
    axes1: tuple = ()
    cached_ap: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        v = self.base.values
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise InvariantError("weight values must be positive and finite")
        if self.structure.get("structure") == "product":
            dom = self.base.domain
            axes2 = tuple(a for a in range(dom.ndim) if a not in self.axes1)
            if dom.time_axis is not None and dom.time_axis in self.axes1:
                raise InvariantError("the time axis belongs to the w2 factor")
            if not self.axes1 or not axes2:
                raise InvariantError("product split must be a proper partition of the axes")

    @property
    def domain(self) -> Domain:
        return self.base.domain

    @property
    def values(self) -> np.ndarray:
        return self.base.values

    @property
    def axes2(self) -> tuple:
        return tuple(a for a in range(self.domain.ndim) if a not in self.axes1)

    def power(self, s: float) -> np.ndarray:
        return self.values ** s

    def measure(self, mask=None) -> float:
        """omega(mask) = integral of w over the set."""
        v = self.values if mask is None else self.values[mask]
        return float(v.sum() * self.domain.cell_measure)

    def dual(self, p: float) -> "Weight":
        """w**(1 - p') with 1/p + 1/p' = 1."""
        pp = p / (p - 1)
        return Weight(self.base.like(self.values ** (1 - pp)), {"structure": "dual", "p": p})

    def to_json(self) -> dict:
        if self.structure.get("structure") == "product":
            return {"structure": "product", "split": list(self.axes1),
                    "w1": self.w1.to_json(), "w2": self.w2.to_json()}
        return dict(self.structure)


def unit_weight(domain: Domain) -> Weight:
    return Weight(GridFunction(domain, np.ones(domain.shape)))


def power_weight(axis: int, exponent: float, domain: Domain, offset: float = 0.0) -> Weight:
    """|x_axis - offset|**exponent; on a half space, axis 0 uses the distance to the wall."""
    if not 0 <= axis < domain.ndim:
        raise ArgumentError(f"axis {axis} not in domain")
    coord = domain.coords(axis)
    if domain.kind == "half_space_box" and axis == 0:
        base = coord - domain.extents[0][0]
    else:
        base = np.abs(coord - offset)
    if exponent != 0 and np.any(base == 0):
        raise ConstructionError(f"grid point on the singular hyperplane x_{axis} = {offset}")
    line = base ** exponent
    shape = [1] * domain.ndim
    shape[axis] = domain.points[axis]
    values = np.broadcast_to(line.reshape(shape), domain.shape).copy()
    return Weight(GridFunction(domain, values),
                  {"structure": "power", "axis": axis, "exponent": exponent, "offset": offset})


def product_weight(w1: Weight, w2: Weight, domain: Domain, axes1) -> Weight:
    """w(x) = w1(x') w2(x'') with x' the coordinates on ``axes1``."""
    axes1 = tuple(axes1)
    axes2 = tuple(a for a in range(domain.ndim) if a not in axes1)
    if w1.domain.shape != tuple(domain.points[a] for a in axes1) or \
            w2.domain.shape != tuple(domain.points[a] for a in axes2):
        raise ArgumentError("factor grids do not match the product split")
    s1 = [domain.points[a] if a in axes1 else 1 for a in range(domain.ndim)]
    s2 = [domain.points[a] if a in axes2 else 1 for a in range(domain.ndim)]
    values = w1.values.reshape(s1) * w2.values.reshape(s2)
    return Weight(GridFunction(domain, values), {"structure": "product"}, w1, w2, axes1)


def weight_from_json(doc: dict, domain: Domain) -> Weight:
    kind = doc.get("structure", "plain")
    if kind in ("plain", "unit"):
        return unit_weight(domain)
    if kind == "power":
        unknown = set(doc) - {"structure", "axis", "exponent", "offset"}
        if unknown:
            raise ArgumentError(f"unknown weight fields {sorted(unknown)}")
        return power_weight(int(doc.get("axis", 0)), float(doc["exponent"]), domain,
                            float(doc.get("offset", 0.0)))
    if kind == "product":
        axes1 = tuple(doc["split"])
        axes2 = tuple(a for a in range(domain.ndim) if a not in axes1)
        w1 = weight_from_json(doc["w1"], domain.sub(axes1))
        w2 = weight_from_json(doc["w2"], domain.sub(axes2))
        return product_weight(w1, w2, domain, axes1)
    raise ArgumentError(f"unknown weight structure {kind!r}")


def _ap_per_center(values: np.ndarray, p: float, fam: BallFamily, radius: float) -> np.ndarray:
    dom = fam.domain
    cnt = fam.counts(radius)
    avg_w = ball_sum(values, dom, radius) / cnt
    avg_inv = ball_sum(values ** (-1.0 / (p - 1)), dom, radius) / cnt
    return avg_w * avg_inv ** (p - 1)


def ap_characteristic(w: Weight, p: float, fam: BallFamily) -> float:
    """max over family balls of (avg w)(avg w^{-1/(p-1)})^{p-1}."""
    if p <= 1:
        raise ArgumentError(f"A_p needs p > 1, got {p}")
    if np.any(w.values <= 0):
        raise InvariantError("weight has non-positive values")
    if fam.is_empty():
        raise ArgumentError("empty ball family")
    key = (float(p), fam.radii, fam.stride)
    if key in w.cached_ap:
        return w.cached_ap[key]
    centers = fam.centers
    best = max(float(_ap_per_center(w.values, p, fam, r)[centers].max()) for r in fam.radii)
    w.cached_ap[key] = best
    return best


def ap_characteristic_values(values: np.ndarray, domain: Domain, p: float, fam: BallFamily) -> float:
    """A_p characteristic of a raw positive array (no caching)."""
    return ap_characteristic(Weight(GridFunction(domain, values)), p, fam)


def a1_constant(values: np.ndarray, fam: BallFamily) -> float:
    """Discrete A_1 constant: max over family balls of (avg over B) / (min over B)."""
    best = 0.0
    for r in fam.radii:
        fp, ranges = footprint(fam.domain, r)
        mode = "wrap" if fam.domain.periodic else "constant"
        mins = -ndimage.maximum_filter(-values, footprint=fp, mode=mode, cval=-np.inf,
                                       origin=_origin(ranges))
        best = max(best, float((fam.averages(values, r) / mins)[fam.centers].max()))
    return best


def check_ap_inclusion(w: Weight, p: float, q: float, fam: BallFamily, tol: float = 1e-9) -> bool:
    """1 <= [w]_{A_q} <= [w]_{A_p} on a common family, for 1 < p < q."""
    if not 1 < p < q:
        raise ArgumentError(f"need 1 < p < q, got p={p}, q={q}")
    ap = ap_characteristic(w, p, fam)
    aq = ap_characteristic(w, q, fam)
    return 1 - tol <= aq <= ap + tol * max(1.0, ap)


def holder_ap_bound(w: Weight, p: float, f: GridFunction, ball: tuple, fam: BallFamily) -> tuple:
    """(lhs, rhs) = ((avg_B f)^p, [w]_{A_p} / omega(B) * int_B f^p w) for B = (center, radius)."""
    if np.any(f.values < 0):
        raise ArgumentError("f must be nonnegative")
    center, radius = ball
    mask = fam.ball_mask(tuple(center), radius)
    h = w.domain.cell_measure
    lhs = float(f.values[mask].mean()) ** p
    omega = float(w.values[mask].sum() * h)
    rhs = ap_characteristic(w, p, fam) / omega * float((f.values[mask] ** p * w.values[mask]).sum() * h)
    return lhs, rhs


@dataclass(frozen=True)
class MeasureFit:
    """Fitted (beta, N) with omega(E)/omega(Q) <= N (mu(E)/mu(Q))^beta on every pair."""

    beta: float
    N: float
    p: float
    pairs: int

    def to_json(self) -> dict:
        return {"beta": self.beta, "N": self.N, "p": self.p, "pairs": self.pairs}


def measure_ratios(w: Weight, lat: DyadicLattice, pairs) -> tuple:
    """log measure ratios (x, y) = (log mu(E)/mu(Q), log omega(E)/omega(Q)) per pair."""
    xs, ys = [], []
    for mask, cube in pairs:
        mask = np.asarray(mask, dtype=bool)
        qmask = np.zeros(lat.domain.shape, dtype=bool)
        qmask[lat.cube_slices(cube)] = True
        if np.any(mask & ~qmask):
            raise ArgumentError(f"E is not contained in cube {cube}")
        n_e = int(mask.sum())
        if n_e == 0:
            continue
        xs.append(np.log(n_e / qmask.sum()))
        ys.append(np.log(w.values[mask].sum() / w.values[qmask].sum()))
    return np.array(xs), np.array(ys)


def measure_comparison_fit(w: Weight, p: float, lat: DyadicLattice, pairs) -> MeasureFit:
    """Constrained least-squares fit of log(omega ratio) <= log N + beta log(mu ratio).

    For each beta the smallest admissible log N is max(y - beta x); beta in
    (0, 1] then minimises the squared slack, a convex problem in beta.
    """
    pairs = list(pairs)
    if not pairs:
        raise ArgumentError("empty suite of (E, Q) pairs")
    x, y = measure_ratios(w, lat, pairs)
    return fit_measure_logs(x, y, p, len(pairs))


def fit_measure_logs(x: np.ndarray, y: np.ndarray, p: float, pairs: int) -> MeasureFit:
    """Fit (beta, N) from log measure ratios x = log mu(E)/mu(Q), y = log omega(E)/omega(Q)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) == 0 or np.all(x == 0):
        logn = float(np.max(y)) if len(y) else 0.0
        return MeasureFit(1.0, float(np.exp(max(logn, 0.0))), p, pairs)

    def slack(beta):
        logn = np.max(y - beta * x)
        return float(np.sum((logn + beta * x - y) ** 2))

    res = minimize_scalar(slack, bounds=(1e-3, 1.0), method="bounded",
                          options={"xatol": 1e-10})
    beta = float(res.x)
    if slack(1.0) <= res.fun:
        beta = 1.0
    logn = float(np.max(y - beta * x))
    # round-off guard so the fitted inequality holds on every pair
    return MeasureFit(beta, float(np.exp(logn) * (1 + 1e-12)), p, pairs)


def doubling_constant(w: Weight, fam: BallFamily) -> float:
    """max over centers of omega(B_{r_{k+1}}) / omega(B_{r_k}) for consecutive radii."""
    centers = fam.centers
    sums = [ball_sum(w.values, fam.domain, r) for r in fam.radii]
    ratios = [float((b / a)[centers].max()) for a, b in zip(sums, sums[1:])]
    return max(ratios) if ratios else 1.0


def product_ap_bound(w: Weight, p: float, fam: BallFamily) -> dict:
    """Compare [w1 (x) w2]_{A_p} with [w1][w2] times the recorded covering constant.

    Every ball B(c, r) sits inside the product B1(c', r) x B2(c'', r); with
    C = max mu(B1 x B2)/mu(B) one has [w]_{A_p} <= C^p [w1][w2] on the family.
    """
    if w.structure.get("structure") != "product":
        raise ArgumentError("product weight required")
    dom = w.domain
    d1, d2 = w.w1.domain, w.w2.domain
    fam1 = BallFamily(d1, fam.radii, fam.stride)
    fam2 = BallFamily(d2, fam.radii, fam.stride)
    cover = 1.0
    for r in fam.radii:
        c1 = fam1.counts(r)
        c2 = fam2.counts(r)
        s1 = [dom.points[a] if a in w.axes1 else 1 for a in range(dom.ndim)]
        s2 = [dom.points[a] if a in w.axes2 else 1 for a in range(dom.ndim)]
        box = c1.reshape(s1) * c2.reshape(s2)
        cover = max(cover, float((box / fam.counts(r))[fam.centers].max()))
    a = ap_characteristic(w, p, fam)
    a1 = ap_characteristic(w.w1, p, fam1)
    a2 = ap_characteristic(w.w2, p, fam2)
    c_geom = cover ** p
    return {"ap": a, "ap_w1": a1, "ap_w2": a2, "c_geom": c_geom, "bound": a1 * a2 * c_geom}
