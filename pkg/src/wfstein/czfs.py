"""Stopping times, level-set estimates and Fefferman-Stein ratio checks.

Regimes:

* ``finite_measure``: the two-term bound with the residual
  ``mu(X)^-1 omega(supp f)^(1/p) ||f||_L1`` is evaluated exactly.
* ``infinite_measure``: a large torus or box stands in for the whole space;
  the floor ``lambda_0`` is 0 and no residual is used.
* ``small_support``: every member must sit in a ball of measure at most
  ``eps * mu(X)``; the plain ratio ``||f|| / ||f#_dy||`` is reported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, DependencyError, PreconditionError
from .lattice import CubeId, DyadicLattice, GridFunction
from .mixednorm import MixedNormSpec, lp_norm, mixed_norm
from .operators import dyadic_maximal_array, dyadic_sharp_array
from .reports import RatioReport, ratio, refinement_stability
from .suites import support_radius
from .weights import MeasureFit, Weight, fit_measure_logs

REGIMES = ("finite_measure", "infinite_measure", "small_support")
NEVER = np.iinfo(np.int64).max


def _regime(regime: str):
    if regime not in REGIMES:
        raise ArgumentError(f"unknown regime {regime!r}; expected one of {REGIMES}")


def lambda_floor(f: GridFunction, lat: DyadicLattice, regime: str = "finite_measure") -> float:
    """2 N1 ||f||_L1 / mu(X) in the finite regime, 0 otherwise."""
    _regime(regime)
    if regime == "infinite_measure":
        return 0.0
    l1 = float(np.abs(f.values).sum() * f.cell_measure)
    return 2.0 * lat.N1 * l1 / f.domain.measure


def default_alpha(lat: DyadicLattice) -> float:
    return 1.0 / (2.0 * lat.N1)


@dataclass
class StoppingTimeMap:
    tau: np.ndarray
    lam: float
    alpha: float
    selected_cubes: dict
    lat: DyadicLattice = field(repr=False)

    @property
    def stopped(self) -> np.ndarray:
        return self.tau != NEVER

    def stopped_average(self, values: np.ndarray) -> np.ndarray:
        """f_{|tau}: the level-tau average where tau is finite, f elsewhere."""
        out = np.array(values, dtype=float)
        for n in self.lat.levels:
            hit = self.tau == n
            if hit.any():
                out[hit] = self.lat.average(values, n)[hit]
        return out


def stopping_time(f: GridFunction, lat: DyadicLattice, lam: float, alpha: float | None = None,
                  regime: str = "finite_measure") -> StoppingTimeMap:
    """tau(x) = min{n : f_{|n}(x) > alpha*lam}, NEVER when no level qualifies."""
    if f.domain != lat.domain:
        raise ArgumentError("function and lattice live on different domains")
    if np.any(f.values < 0):
        raise ArgumentError("stopping times are built for nonnegative f")
    alpha = default_alpha(lat) if alpha is None else float(alpha)
    if not 0 < alpha < 1:
        raise ArgumentError("alpha must lie in (0, 1)")
    floor = lambda_floor(f, lat, regime)
    if not lam > floor:
        raise ArgumentError(f"lambda={lam} must exceed the floor {floor}")
    tau = np.full(f.values.shape, NEVER, dtype=np.int64)
    selected = {}
    threshold = alpha * lam
    for n in lat.levels:
        counts = lat.counts(n)
        avg = lat.cube_sums(f.values, n) / int(np.prod(lat.block(n)))
        open_cubes = lat.cube_sums((tau == NEVER).astype(float), n) > 0
        newly = (avg > threshold) & open_cubes
        if newly.any():
            flat = np.flatnonzero(newly)
            selected[n] = [CubeId(n, tuple(int(i) for i in np.unravel_index(k, counts))) for k in flat]
            tau[lat.expand(newly, n) & (tau == NEVER)] = n
    return StoppingTimeMap(tau, float(lam), alpha, selected, lat)


def _levelset_logs(a: np.ndarray, wv: np.ndarray, lat: DyadicLattice, st: StoppingTimeMap) -> tuple:
    """Log measure ratios of the pairs (E_Q, Q), E_Q = {x in Q : a - a_Q >= lam/2}."""
    xs, ys = [], []
    for n in st.selected_cubes:
        hit = st.tau == n
        e = hit & (a - lat.average(a, n) >= st.lam / 2)
        if not e.any():
            continue
        cells = int(np.prod(lat.block(n)))
        e_cnt = lat.cube_sums(e.astype(float), n)
        q_cnt = lat.cube_sums(hit.astype(float), n)
        e_w = lat.cube_sums(np.where(e, wv, 0.0), n)
        q_w = lat.cube_sums(wv, n)
        live = (e_cnt > 0) & (q_cnt == cells)
        xs.append(np.log(e_cnt[live] / cells))
        ys.append(np.log(e_w[live] / q_w[live]))
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ys)


def collect_levelset_pairs(suite, w: Weight | None, lat: DyadicLattice, lambdas,
                           alpha: float | None = None, regime: str = "finite_measure") -> tuple:
    """Stack the log ratios of every (E_Q, Q) pair met along the suite and lambda grid."""
    wv = np.ones(lat.domain.shape) if w is None else w.values
    xs, ys = [], []
    for f in suite:
        a = np.abs(f.values)
        af = f.like(a)
        floor = lambda_floor(af, lat, regime)
        for lam in lambdas:
            if lam <= floor:
                continue
            x, y = _levelset_logs(a, wv, lat, stopping_time(af, lat, lam, alpha, regime))
            xs.append(x)
            ys.append(y)
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ys)


def fit_levelset(suite, w: Weight | None, p: float, lat: DyadicLattice, lambdas,
                 alpha: float | None = None, regime: str = "finite_measure") -> MeasureFit:
    x, y = collect_levelset_pairs(suite, w, lat, lambdas, alpha, regime)
    return fit_measure_logs(x, y, p, len(x))


@dataclass
class LevelSetReport:
    lambdas: list
    lhs: list
    rhs: list
    beta: float
    N: float
    N_fit: float
    N_needed: float
    passes: list

    @property
    def passed(self) -> bool:
        return all(self.passes)

    def to_json(self) -> dict:
        return {"beta": self.beta, "N": self.N, "N_fit": self.N_fit, "N_needed": self.N_needed,
                "lambdas": len(self.lambdas), "passed": self.passed}


def level_set_check(f: GridFunction, w: Weight | None, p: float, lat: DyadicLattice, lambdas,
                    fit: MeasureFit | None, alpha: float | None = None,
                    regime: str = "finite_measure", tol: float = 1e-12) -> LevelSetReport:
    """omega{|f| >= lam} against N lam^-beta int_{M_dy f > alpha lam} (f#_dy)^beta d omega.

    N = N_fit 2^beta for nonnegative f (Chebyshev then the measure
    comparison), with one more factor 2^beta for signed f since
    |f|#_dy <= 2 f#_dy.
    """
    if fit is None:
        raise DependencyError("level-set check needs a measure-comparison fit (beta, N)")
    alpha = default_alpha(lat) if alpha is None else float(alpha)
    wv = np.ones(lat.domain.shape) if w is None else w.values
    h = lat.domain.cell_measure
    beta = fit.beta
    signed = bool(np.any(f.values < 0))
    n_const = fit.N * 2.0 ** beta * (2.0 ** beta if signed else 1.0)
    a = np.abs(f.values)
    mdy = dyadic_maximal_array(f.values, lat)
    sharp_b = dyadic_sharp_array(f.values, lat) ** beta
    floor = lambda_floor(f.like(a), lat, regime)
    lams, lhs, rhs, passes = [], [], [], []
    needed = 0.0
    for lam in lambdas:
        if lam <= floor:
            raise ArgumentError(f"lambda={lam} not above the floor {floor}")
        left = float(wv[a >= lam].sum() * h)
        unit = lam ** (-beta) * float((sharp_b * wv)[mdy > alpha * lam].sum() * h)
        right = n_const * unit
        lams.append(float(lam))
        lhs.append(left)
        rhs.append(right)
        passes.append(left <= right * (1 + tol) + 1e-300)
        if left > 0:
            needed = max(needed, left / unit if unit > 0 else np.inf)
    return LevelSetReport(lams, lhs, rhs, beta, n_const, fit.N, needed, passes)


def _norm(values: np.ndarray, f: GridFunction, p: float, w: Weight | None,
          spec: MixedNormSpec | None) -> float:
    g = f.like(values)
    if spec is not None:
        return mixed_norm(g, spec)
    return lp_norm(g, p, w)


def _mixed_spec(w: Weight | None, p: float, q: float, split) -> MixedNormSpec:
    if w is not None and w.structure.get("structure") == "product":
        return MixedNormSpec.from_weight(w, p, q)
    if w is not None and not np.allclose(w.values, w.values.flat[0]):
        raise ArgumentError("mixed norms need a product weight (or the unit weight)")
    if split is None:
        raise ArgumentError("mixed norms need a split of the axes")
    return MixedNormSpec(tuple(split), p, q)


def _fs_ratios(suite, w, p, lat, regime, spec, eps, center):
    flags = []
    ratios, plain = [], []
    dom = lat.domain
    h = dom.cell_measure
    wv = np.ones(dom.shape) if w is None else w.values
    for i, f in enumerate(suite):
        if f.domain != dom:
            raise ArgumentError(f"member {i} lives on a different domain")
        if regime == "small_support":
            r = support_radius(f, center)
            offs = [x - c for x, c in zip(dom.mesh(), center)]
            if dom.periodic:
                offs = [(o + L / 2) % L - L / 2 for o, L in zip(offs, dom.lengths)]
            ball = float((dom.distance(offs) <= r).sum() * h)
            if ball > eps * dom.measure * (1 + 1e-12):
                raise PreconditionError(
                    f"member {i}: support ball measure {ball:.6g} exceeds eps*mu(X) = {eps * dom.measure:.6g}")
        num = _norm(f.values, f, p, w, spec)
        sharp = _norm(dyadic_sharp_array(f.values, lat), f, p, w, spec)
        den = sharp
        if regime == "finite_measure":
            l1 = float(np.abs(f.values).sum() * h)
            supp_w = float(wv[f.values != 0].sum() * h)
            den = sharp + supp_w ** (1.0 / p) * l1 / dom.measure
        ratios.append(ratio(num, den, flags, i))
        plain.append(ratio(num, sharp, [], i))
    return ratios, plain, flags


def fefferman_stein_check(suite, w: Weight | None, p: float, lat: DyadicLattice, regime: str,
                          q: float | None = None, split=None, eps: float | None = None,
                          center=None, refined=None, stability_limit: float = 1.25,
                          seeds=None) -> RatioReport:
    """sup over the suite of ||f|| / ||f#_dy|| (weighted, optionally mixed L_{p,q}).

    ``refined`` is an optional ``(suite, w, lat)`` triple on a refined grid;
    the relative change of the sup ratio is recorded as the stability factor.
    """
    _regime(regime)
    suite = list(suite)
    if not suite:
        raise ArgumentError("empty suite")
    spec = None if q is None else _mixed_spec(w, p, q, split)
    if spec is not None and regime == "finite_measure":
        raise ArgumentError("the finite-measure residual form is only defined for p = q")
    if regime == "small_support":
        if eps is None:
            raise ArgumentError("small_support regime needs eps")
        if center is None:
            center = [0.5 * (lo + hi) for lo, hi in lat.domain.extents]
    ratios, plain, flags = _fs_ratios(suite, w, p, lat, regime, spec, eps, center)
    meta = {"p": p, "q": q if q is not None else p,
            "sup_ratio_without_residual": max(plain)}
    if regime == "finite_measure":
        meta["residual_dominated_members"] = int(sum(
            1 for a, b in zip(plain, ratios) if b > 0 and a > 10 * b))
    if eps is not None:
        meta["eps"] = eps
    report = RatioReport("fefferman_stein", seeds=list(seeds) if seeds is not None else list(range(len(suite))),
                         ratios=ratios, regime=regime, flags=flags,
                         extra={"ratio_without_residual": plain}, meta=meta)
    if refined is not None:
        fine_suite, fine_w, fine_lat = refined
        fine_ratios, _, fine_flags = _fs_ratios(list(fine_suite), fine_w, p, fine_lat, regime,
                                                None if q is None else _mixed_spec(fine_w, p, q, split),
                                                eps, center)
        fine = RatioReport("fine", seeds=report.seeds, ratios=fine_ratios)
        report.stability = refinement_stability(report, fine)
        report.stability_limit = stability_limit
        report.meta["sup_ratio_refined"] = fine.sup_ratio
        report.flags.extend(fine_flags)
    return report


def provider_sharp(f: GridFunction):
    """The provider f^Q = |f| on every cube."""
    a = np.abs(f.values)
    return lambda n: a


def _check_provider(f, v, g, provider, lat, tol):
    a = np.abs(f.values)
    if np.any(a > v.values * (1 + tol) + tol):
        raise PreconditionError("|f| <= v fails")
    for n in lat.levels:
        fq = np.asarray(provider(n), dtype=float)
        if fq.shape != a.shape:
            raise ArgumentError(f"provider returned shape {fq.shape} at level {n}")
        bad = (fq < a * (1 - tol) - tol) | (fq > v.values * (1 + tol) + tol)
        if bad.any():
            k = int(lat.labels(n)[tuple(np.argwhere(bad)[0])])
            raise PreconditionError(f"|f| <= f^Q <= v fails on cube {lat.cube_from_flat(n, k)}")
        cells = int(np.prod(lat.block(n)))
        means = lat.average(fq, n)
        osc = lat.cube_sums(np.abs(fq - means), n) / cells
        gmin = _cube_min(g.values, lat, n)
        bad = osc > gmin * (1 + tol) + tol * max(1.0, float(np.abs(osc).max()))
        if bad.any():
            k = int(np.flatnonzero(bad)[0])
            raise PreconditionError(
                f"oscillation of f^Q exceeds g on cube {lat.cube_from_flat(n, k)}")


def _cube_min(values: np.ndarray, lat: DyadicLattice, n: int) -> np.ndarray:
    shape = []
    for size, b in zip(values.shape, lat.block(n)):
        shape.extend([size // b, b])
    return values.reshape(shape).min(axis=tuple(range(1, 2 * values.ndim, 2)))


def generalized_fs_check(f: GridFunction, v: GridFunction, g: GridFunction, provider,
                         w: Weight | None, p: float, lat: DyadicLattice, beta: float,
                         regime: str = "infinite_measure", eps: float | None = None,
                         tol: float = 1e-10) -> RatioReport:
    """||f||^p against ||g||^beta ||v||^(p-beta) plus the regime's residual.

    ``provider(n)`` returns a full-grid array equal to f^Q on every level-n
    cube Q.  The reported ratio is the empirical constant N.
    """
    _regime(regime)
    if not 0 < beta <= 1:
        raise ArgumentError("beta must lie in (0, 1]")
    _check_provider(f, v, g, provider, lat, tol)
    dom = lat.domain
    h = dom.cell_measure
    nf = lp_norm(f, p, w)
    ng = lp_norm(g, p, w)
    nv = lp_norm(v, p, w)
    residual = 0.0
    if regime == "finite_measure":
        wv = np.ones(dom.shape) if w is None else w.values
        supp_w = float(wv[v.values != 0].sum() * h)
        l1 = float(np.abs(v.values).sum() * h)
        residual = dom.measure ** (-p) * supp_w * l1 ** p
    elif regime == "small_support":
        if eps is None:
            raise ArgumentError("small_support regime needs eps")
        residual = eps ** p * nv ** p
    flags = []
    r = ratio(nf ** p, ng ** beta * nv ** (p - beta) + residual, flags, 0)
    return RatioReport("generalized_fefferman_stein", seeds=[0], ratios=[r], regime=regime,
                       flags=flags, meta={"beta": beta, "p": p, "residual": residual})
