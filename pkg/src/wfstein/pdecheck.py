"""Manufactured right-hand sides and lambda-scaled a priori ratios.

Two model forms are supported on periodic space-time grids (axis 0 is t):

* ``"time_derivative"``: f = u_t + (-1)^m L u + lam u, with
  L u = a11 D_1^{2m} u + sum_{i>=2} D_i^{2m} u.
* ``"nondivergence"`` (m = 1): f = -u_t + a11 u_11 + sum_{i>=2} u_ii - lam u.

A one-axis Euclidean torus gives the stationary versions (u_t absent).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .balls import window_sum
from .errors import ArgumentError, BackendError, DegenerateInputError, PreconditionError
from .lattice import Domain, GridFunction
from .mixednorm import MixedNormSpec, lambda_scaled_sum, mixed_or_plain, multi_indices
from .reports import RatioReport
from .suites import member_rng, trig_member
from .weights import power_weight, unit_weight

FORMS = ("time_derivative", "nondivergence")
BACKENDS = ("spectral", "central2")


@dataclass(frozen=True)
class CoefficientProfile:
    """Coefficient depending on a single grid axis."""

    axis: int
    values: np.ndarray
    label: str = "profile"

    def on(self, domain: Domain) -> np.ndarray:
        if len(self.values) != domain.points[self.axis]:
            raise ArgumentError("profile length does not match the grid")
        shape = [1] * domain.ndim
        shape[self.axis] = -1
        return np.asarray(self.values, dtype=float).reshape(shape)

    @property
    def bounds(self) -> tuple:
        return float(np.min(self.values)), float(np.max(self.values))


def constant_coefficient(domain: Domain, value: float = 1.0, axis: int | None = None) -> CoefficientProfile:
    axis = domain.spatial_axes[0] if axis is None else axis
    return CoefficientProfile(axis, np.full(domain.points[axis], float(value)), "constant")


def rough_coefficient(seed: int, delta: float, pieces: int, axis: int, domain: Domain) -> CoefficientProfile:
    """Piecewise constant in one axis with values uniform in [delta, 1/delta]."""
    if pieces < 1:
        raise ArgumentError("pieces must be at least 1")
    if not 0 < delta < 1:
        raise ArgumentError("delta must lie in (0, 1)")
    rng = np.random.default_rng([int(seed), int(pieces)])
    levels = rng.uniform(delta, 1.0 / delta, size=pieces)
    if pieces == 1:
        levels[:] = levels[0]
    n = domain.points[axis]
    which = np.minimum((np.arange(n) * pieces) // n, pieces - 1)
    return CoefficientProfile(axis, levels[which], "rough")


def smooth_coefficient(delta: float, axis: int, domain: Domain) -> CoefficientProfile:
    """exp(log(1/delta) sin(2 pi s)) over the axis: smooth, spanning [delta, 1/delta]."""
    s = (domain.coords(axis) - domain.extents[axis][0]) / domain.lengths[axis]
    return CoefficientProfile(axis, np.exp(math.log(1.0 / delta) * np.sin(2 * np.pi * s)), "smooth")


@dataclass(frozen=True)
class ModelOperator:
    m: int
    d: int
    a11: CoefficientProfile
    delta: float
    lam: float
    form: str = "nondivergence"

    def __post_init__(self):
        if self.form not in FORMS:
            raise ArgumentError(f"unknown form {self.form!r}")
        if self.m < 1 or self.d not in (1, 2):
            raise ArgumentError("need m >= 1 and d in {1, 2}")
        if self.form == "nondivergence" and self.m != 1:
            raise ArgumentError("the non-divergence form is second order (m = 1)")
        lo, hi = self.a11.bounds
        if lo < self.delta * (1 - 1e-12) or hi > (1 + 1e-12) / self.delta:
            raise ArgumentError(f"a11 range [{lo}, {hi}] leaves [delta, 1/delta]")
        if self.a11.label == "rough" and self.m != 1:
            raise ArgumentError("coefficients rough in one variable need m = 1")
        if self.lam < 1:
            raise ArgumentError("lambda must be >= 1")


@dataclass
class DerivativeStack:
    u: GridFunction
    spatial: dict
    ut: GridFunction | None
    m: int
    backend: str
    axes: tuple = field(default=())

    def indices(self, order: int) -> list:
        return multi_indices(len(self.axes), order, tuple(range(len(self.axes))))

    def pure(self, axis_pos: int, order: int) -> GridFunction:
        alpha = tuple(order if i == axis_pos else 0 for i in range(len(self.axes)))
        return self.spatial[alpha]


def _wavenumbers(domain: Domain, axis: int) -> np.ndarray:
    n = domain.points[axis]
    return 2 * np.pi * np.fft.fftfreq(n, d=domain.spacing[axis])


def _spectral(values: np.ndarray, domain: Domain, orders: dict) -> np.ndarray:
    """Apply prod_a (d/dx_a)^{orders[a]} by FFT."""
    axes = [a for a, k in orders.items() if k]
    if not axes:
        return values.copy()
    spec = np.fft.fftn(values, axes=axes)
    for a in axes:
        k = orders[a]
        kk = _wavenumbers(domain, a)
        mult = (1j * kk) ** k
        n = domain.points[a]
        if n % 2 == 0 and k % 2 == 1:
            mult[n // 2] = 0.0
        shape = [1] * values.ndim
        shape[a] = -1
        spec = spec * mult.reshape(shape)
    return np.real(np.fft.ifftn(spec, axes=axes))


def _central(values: np.ndarray, domain: Domain, axis: int, order: int) -> np.ndarray:
    h = domain.spacing[axis]
    out = values
    if domain.periodic:
        for _ in range(order // 2):
            out = (np.roll(out, -1, axis) - 2 * out + np.roll(out, 1, axis)) / h ** 2
        if order % 2:
            out = (np.roll(out, -1, axis) - np.roll(out, 1, axis)) / (2 * h)
        return out
    for _ in range(order):
        out = np.gradient(out, h, axis=axis, edge_order=2)
    return out


def _derivative(values, domain, orders: dict, backend: str) -> np.ndarray:
    if backend == "spectral":
        return _spectral(values, domain, orders)
    out = values
    for a, k in orders.items():
        if k:
            out = _central(out, domain, a, k)
    return out


def differentiate(u: GridFunction, m: int = 1, backend: str = "spectral") -> DerivativeStack:
    """All D^alpha u with |alpha| <= 2m over the spatial axes, plus u_t."""
    if backend not in BACKENDS:
        raise BackendError(f"unknown backend {backend!r}")
    dom = u.domain
    if backend == "spectral" and not dom.periodic:
        raise BackendError("the spectral backend needs a periodic grid")
    axes = dom.spatial_axes
    spatial = {}
    for order in range(2 * m + 1):
        for alpha in multi_indices(len(axes), order):
            orders = {a: k for a, k in zip(axes, alpha)}
            spatial[alpha] = u.like(_derivative(u.values, dom, orders, backend))
    ut = None
    if dom.time_axis is not None:
        ut = u.like(_derivative(u.values, dom, {dom.time_axis: 1}, backend))
    return DerivativeStack(u, spatial, ut, m, backend, axes)


def manufacture_rhs(stack: DerivativeStack, op: ModelOperator) -> GridFunction:
    if stack.m != op.m:
        raise ArgumentError(f"stack holds order {2 * stack.m}, operator needs {2 * op.m}")
    dom = stack.u.domain
    if len(stack.axes) != op.d:
        raise ArgumentError(f"operator has d={op.d} but the grid has {len(stack.axes)} spatial axes")
    a = op.a11.on(dom)
    u = stack.u.values
    top = a * stack.pure(0, 2 * op.m).values
    for i in range(1, op.d):
        top = top + stack.pure(i, 2 * op.m).values
    ut = 0.0 if stack.ut is None else stack.ut.values
    if op.form == "time_derivative":
        f = ut + (-1) ** op.m * top + op.lam * u
    else:
        f = -ut + top - op.lam * u
    return stack.u.like(f)


def apriori_ratio(stack: DerivativeStack, f: GridFunction, op: ModelOperator,
                  spec: MixedNormSpec | None) -> float:
    num = lambda_scaled_sum(stack, op.lam, op.m, spec)
    den = mixed_or_plain(f, spec)
    if den == 0:
        if num == 0:
            return 0.0
        raise DegenerateInputError("f vanishes while u does not")
    return num / den


def symbol_ratio(op_m: int, lam: float, A: float, kappa, nu: float) -> float:
    """Ratio for the single real mode cos(kappa.x + nu t) with constant coefficients.

    Time-derivative form with L = A D_1^{2m} + sum_{i>=2} D_i^{2m}, unit
    weights, p = q = 2.
    """
    kappa = np.atleast_1d(np.asarray(kappa, dtype=float))
    num = abs(nu)
    for order in range(2 * op_m + 1):
        for alpha in multi_indices(len(kappa), order):
            num += lam ** (1 - order / (2 * op_m)) * abs(float(np.prod(kappa ** np.array(alpha))))
    sym = A * kappa[0] ** (2 * op_m) + float(np.sum(kappa[1:] ** (2 * op_m))) + lam
    return num / math.hypot(sym, nu)


# -- half-space reflection ---------------------------------------------------

EVEN_COEFFICIENTS = ("a11", "aij_tangential")
ODD_COEFFICIENTS = ("a1j", "b1")


def _doubled_domain(dom: Domain, periodic: bool) -> Domain:
    lo, hi = dom.extents[0]
    extents = [(2 * lo - hi, hi)] + list(dom.extents[1:])
    points = [2 * dom.points[0]] + list(dom.points[1:])
    kind = "euclidean_torus" if periodic else "euclidean_box"
    return Domain(kind, dom.d, extents, points)


def reflect(values: np.ndarray, sign: float) -> np.ndarray:
    return np.concatenate([sign * values[::-1], values], axis=0)


def halfspace_extension(u: GridFunction, parity: str, tol: float = 1e-8,
                        periodic: bool = False) -> GridFunction:
    """Reflect across the wall at the lower end of axis 0: u(-x1) = +-u(x1)."""
    dom = u.domain
    if dom.kind != "half_space_box":
        raise ArgumentError("extension needs a half_space_box function")
    if parity not in ("odd", "even"):
        raise ArgumentError("parity is 'odd' or 'even'")
    v = u.values
    if parity == "odd":
        trace = 1.5 * v[0] - 0.5 * v[1]
        scale = max(1.0, float(np.abs(v).max()))
        if np.any(np.abs(trace) > tol * scale):
            raise PreconditionError(
                f"odd extension needs a vanishing wall trace, found {float(np.abs(trace).max()):.3g}")
    return GridFunction(_doubled_domain(dom, periodic), reflect(v, -1.0 if parity == "odd" else 1.0))


def extend_coefficient(profile: CoefficientProfile, name: str, domain: Domain) -> CoefficientProfile:
    """Extend a wall-normal profile with the parity attached to the coefficient's role."""
    if name in EVEN_COEFFICIENTS:
        sign = 1.0
    elif name in ODD_COEFFICIENTS:
        sign = -1.0
    else:
        raise ArgumentError(f"unknown coefficient role {name!r}")
    if profile.axis != 0:
        # tangential profiles are simply copied across the wall
        return CoefficientProfile(profile.axis, profile.values, profile.label)
    return CoefficientProfile(0, reflect(np.asarray(profile.values), sign), profile.label)


# -- oscillation diagnostics -------------------------------------------------

def _box_mean(values, axes, half, periodic):
    out = values
    cnt = np.ones(values.shape)
    for a in axes:
        lo, hi = -half[a], half[a]
        out = window_sum(out, a, lo, hi, periodic)
        cnt = window_sum(cnt, a, lo, hi, periodic)
    return out / cnt, cnt


def _oscillation(values: np.ndarray, dom: Domain, osc_axes: tuple, half: dict) -> float:
    """sup over window positions of the window-average of |g - mean over osc_axes|."""
    periodic = bool(dom.periodic)
    means, _ = _box_mean(values, osc_axes, half, periodic)
    acc = np.zeros(values.shape)
    cnt = np.zeros(values.shape)
    ranges = [range(-half[a], half[a] + 1) for a in osc_axes]
    for offs in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(len(osc_axes), -1).T:
        shifted = values
        valid = np.ones(values.shape)
        for a, o in zip(osc_axes, offs):
            shifted = np.roll(shifted, -int(o), axis=a)
            if not periodic:
                v = np.ones(values.shape[a])
                if o > 0:
                    v[values.shape[a] - o:] = 0
                elif o < 0:
                    v[:-o] = 0
                shape = [1] * values.ndim
                shape[a] = -1
                valid = valid * v.reshape(shape)
        acc += np.abs(shifted - means) * valid
        cnt += valid
    per_slice = acc / cnt
    frozen = tuple(a for a in range(dom.ndim) if a not in osc_axes)
    avg, _ = _box_mean(per_slice, frozen, half, periodic)
    return float(avg.max())


def oscillation_seminorms(coef: np.ndarray, dom: Domain, R: float, m: int = 1) -> dict:
    """Grid versions of the x-, (t, x^)- and x^-oscillation seminorms up to radius R.

    Cylinders are boxes with spatial half-width r and time half-length r^{2m}/2.
    """
    coef = np.broadcast_to(coef, dom.shape).astype(float)
    h = dom.spacing
    sp = dom.spatial_axes
    t = dom.time_axis
    out = {"osc_x": 0.0, "osc_t_xhat": 0.0, "osc_xhat": 0.0}
    r = float(max(h[a] for a in sp))
    radii = []
    while r <= R * (1 + 1e-12):
        radii.append(r)
        r *= 2
    for r in radii:
        half = {a: max(0, int(r / h[a])) for a in sp}
        if t is not None:
            half[t] = max(0, int(r ** (2 * m) / 2 / h[t]))
        xhat = tuple(sp[1:])
        out["osc_x"] = max(out["osc_x"], _oscillation(coef, dom, tuple(sp), half))
        tx = ((t,) if t is not None else ()) + xhat
        if tx:
            out["osc_t_xhat"] = max(out["osc_t_xhat"], _oscillation(coef, dom, tx, half))
        if xhat:
            out["osc_xhat"] = max(out["osc_xhat"], _oscillation(coef, dom, xhat, half))
    return out


# -- suite driver --------------------------------------------------------------

@dataclass(frozen=True)
class EstimateConfig:
    m: int = 1
    d: int = 1
    delta: float = 0.2
    lambdas: tuple = (16.0, 64.0, 256.0)
    p: float = 2.0
    q: float = 2.0
    split: tuple = (1,)
    weight_exponent: float = 0.0
    count: int = 10
    modes: int = 4
    seed: int = 0
    backend: str = "spectral"
    pieces: int = 64
    coefficient: str = "rough"
    coefficient_axis: str = "x1"
    form: str = "nondivergence"
    points: tuple = (64, 64)
    extents: tuple = ((0.0, 1.0), (-1.0, 1.0))
    spread_limit: float = 3.0


def _grid(cfg: EstimateConfig) -> Domain:
    if len(cfg.points) != cfg.d + 1 or len(cfg.extents) != cfg.d + 1:
        raise ArgumentError("points/extents need one entry for t and one per spatial axis")
    return Domain("parabolic_box", cfg.d, cfg.extents, cfg.points, m=cfg.m, periodic=True)


def _coefficient(cfg: EstimateConfig, dom: Domain, seed: int) -> CoefficientProfile:
    axis = 0 if cfg.coefficient_axis == "t" else 1
    if cfg.coefficient == "constant":
        return constant_coefficient(dom, 1.0, axis)
    if cfg.coefficient == "smooth":
        return smooth_coefficient(cfg.delta, axis, dom)
    if cfg.coefficient == "rough":
        return rough_coefficient(seed, cfg.delta, cfg.pieces, axis, dom)
    raise ArgumentError(f"unknown coefficient kind {cfg.coefficient!r}")


def _spec(cfg: EstimateConfig, dom: Domain) -> MixedNormSpec:
    split = tuple(cfg.split)
    w1 = w2 = None
    if cfg.weight_exponent:
        if split != (1,):
            raise ArgumentError("the power weight lives on x1; use split [1]")
        sub1 = dom.sub(split)
        w1 = power_weight(0, cfg.weight_exponent, sub1)
        w2 = unit_weight(dom.sub(tuple(a for a in range(dom.ndim) if a not in split)))
    return MixedNormSpec(split, cfg.p, cfg.q, w1, w2)


def estimate_suite(cfg: EstimateConfig) -> RatioReport:
    """Ratios over a seeded suite of band-limited u for every lambda in the config."""
    if cfg.count < 1:
        raise ArgumentError("empty suite")
    dom = _grid(cfg)
    spec = _spec(cfg, dom)
    coef = _coefficient(cfg, dom, cfg.seed)
    stacks = [differentiate(GridFunction(dom, trig_member(dom, member_rng(cfg.seed, i), cfg.modes)),
                            cfg.m, cfg.backend) for i in range(cfg.count)]
    seeds, lams, ratios = [], [], []
    per_lambda = {}
    for lam in cfg.lambdas:
        op = ModelOperator(cfg.m, cfg.d, coef, cfg.delta, float(lam), cfg.form)
        sup = 0.0
        for i, st in enumerate(stacks):
            r = apriori_ratio(st, manufacture_rhs(st, op), op, spec)
            seeds.append(i)
            lams.append(float(lam))
            ratios.append(r)
            sup = max(sup, r)
        per_lambda[float(lam)] = sup
    sups = list(per_lambda.values())
    spread = max(sups) / min(sups) if min(sups) > 0 else math.inf
    osc = oscillation_seminorms(coef.on(dom), dom, R=0.25, m=cfg.m)
    return RatioReport(
        "apriori", seeds=seeds, ratios=ratios,
        extra={"lambda": lams, "pieces": [cfg.pieces] * len(ratios)},
        stability=spread, stability_limit=cfg.spread_limit,
        meta={"sup_by_lambda": {fmt_key(k): v for k, v in per_lambda.items()},
              "lambda_spread": spread, "coefficient": cfg.coefficient,
              "a11_min": coef.bounds[0], "a11_max": coef.bounds[1], **osc},
    )


def fmt_key(lam: float) -> str:
    return format(lam, "g")
