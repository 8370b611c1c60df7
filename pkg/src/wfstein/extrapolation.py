"""Rubio de Francia iteration and the extrapolation transfer check.

Given calibrated norms ``N1`` (of M on L_p(w)) and ``N2`` (of M' on
L_{p'}(w), where M'h = M(hw)/w), the truncated series

    R h  = sum_{k<=K} M^k h  / (2 N1)^k,
    R' h = sum_{k<=K} M'^k h / (2 N2)^k

give A_1 majorants, and w~ = (R g)^(1-p0) (R' h) w has A_p0 constant at most
Lambda_0 = 2^p0 N1^(p0-1) N2 on the same ball family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .balls import BallFamily
from .errors import ArgumentError, DivergenceError, PreconditionError
from .lattice import DyadicLattice, GridFunction
from .operators import ball_maximal_array, comparison_constant, dyadic_maximal_array
from .reports import RatioReport, ratio
from .weights import Weight, ap_characteristic, ap_characteristic_values


@dataclass(frozen=True)
class RdFConfig:
    p0: float
    p: float
    K_terms: int
    N1_hat: float
    N2_hat: float

    def __post_init__(self):
        if self.p0 <= 1 or self.p <= 1:
            raise ArgumentError("exponents must exceed 1")
        if self.K_terms < 1:
            raise ArgumentError("K_terms must be at least 1")
        if self.N1_hat < 1 or self.N2_hat < 1:
            raise ArgumentError("maximal-operator norms are at least 1")

    @property
    def p_dual(self) -> float:
        return self.p / (self.p - 1)

    @property
    def lambda0(self) -> float:
        return lambda0_constant(self.p0, self.N1_hat, self.N2_hat)

    def to_json(self) -> dict:
        return {"p0": self.p0, "p": self.p, "K_terms": self.K_terms,
                "N1_hat": self.N1_hat, "N2_hat": self.N2_hat, "lambda0": self.lambda0}


def lambda0_constant(p0: float, N1_hat: float, N2_hat: float) -> float:
    if p0 <= 1:
        raise ArgumentError("p0 must exceed 1")
    if N1_hat < 1 or N2_hat < 1:
        raise ArgumentError("maximal-operator norms are at least 1")
    return 2.0 ** p0 * N1_hat ** (p0 - 1) * N2_hat


def _wnorm(values: np.ndarray, p: float, wv: np.ndarray, cell: float) -> float:
    return float((np.abs(values) ** p * wv).sum() * cell) ** (1.0 / p)


def _m(values, fam):
    return ball_maximal_array(values, fam)


def _m_dual(values, wv, fam):
    return ball_maximal_array(values * wv, fam) / wv


def calibrate_maximal_norm(functions, w: Weight | None, p: float, fam: BallFamily,
                           iterates: int = 40, dual: bool = False) -> float:
    """sup of ||T phi|| / ||phi|| over the functions and their first T-iterates.

    T is M on L_p(w), or M' on L_p(w) when ``dual`` is set.  Including the
    iterates makes ||T^k h|| <= N^k ||h|| hold for every series term used later.
    """
    fam.require_coverage()
    wv = np.ones(fam.domain.shape) if w is None else w.values
    cell = fam.domain.cell_measure
    best = 1.0
    for f in functions:
        phi = np.abs(f.values if isinstance(f, GridFunction) else np.asarray(f))
        for _ in range(iterates):
            den = _wnorm(phi, p, wv, cell)
            if den == 0:
                break
            nxt = _m_dual(phi, wv, fam) if dual else _m(phi, fam)
            best = max(best, _wnorm(nxt, p, wv, cell) / den)
            if np.allclose(nxt, phi, rtol=1e-14, atol=0):
                break
            phi = nxt
    return best


def _series(h: np.ndarray, step, c: float, K: int, p: float, wv, cell) -> np.ndarray:
    term = np.abs(h)
    total = term.copy()
    prev = _wnorm(term, p, wv, cell)
    for k in range(1, K + 1):
        term = step(term) / c
        norm = _wnorm(term, p, wv, cell)
        if prev > 0 and norm > prev * (1 + 1e-12):
            raise DivergenceError(
                f"series term {k} grew ({norm:.3e} > {prev:.3e}); the calibrated maximal "
                "norm underestimates the operator, recalibrate it")
        total += term
        prev = norm
    return total


def rubio_r(h: GridFunction, cfg: RdFConfig, fam: BallFamily, w: Weight | None = None) -> GridFunction:
    """R h; divergence is judged in L_p(w) (w defaults to the unit weight)."""
    fam.require_coverage()
    wv = np.ones(h.domain.shape) if w is None else w.values
    out = _series(h.values, lambda t: _m(t, fam), 2 * cfg.N1_hat, cfg.K_terms, cfg.p, wv,
                  h.cell_measure)
    return h.like(out)


def rubio_r_dual(h: GridFunction, w: Weight, cfg: RdFConfig, fam: BallFamily) -> GridFunction:
    fam.require_coverage()
    wv = w.values
    out = _series(h.values, lambda t: _m_dual(t, wv, fam), 2 * cfg.N2_hat, cfg.K_terms,
                  cfg.p_dual, wv, h.cell_measure)
    return h.like(out)


def build_extrapolation_weight(g: GridFunction, h: GridFunction, w: Weight, cfg: RdFConfig,
                               fam: BallFamily) -> Weight:
    """w~ = (R g)^(1-p0) (R' h) w."""
    if not np.any(g.values) or not np.any(h.values):
        raise ArgumentError("g and h must not vanish identically")
    rg = rubio_r(g, cfg, fam, w).values
    rh = rubio_r_dual(h, w, cfg, fam).values
    vals = rg ** (1 - cfg.p0) * rh * w.values
    return Weight(w.base.like(vals), {"structure": "extrapolation", "p0": cfg.p0})


def a1_properties(h: GridFunction, w: Weight, cfg: RdFConfig, fam: BallFamily) -> dict:
    """Measured slacks of the three properties of R and R' (<= 1 means satisfied)."""
    wv = w.values
    cell = h.cell_measure
    pd = cfg.p_dual
    rh = rubio_r(h, cfg, fam, w).values
    rdh = rubio_r_dual(h, w, cfg, fam).values
    a = np.abs(h.values)
    out = {
        "majorant_r": float(np.max(a - rh)),
        "majorant_r_dual": float(np.max(a - rdh)),
        "norm_r": _wnorm(rh, cfg.p, wv, cell) / (2 * _wnorm(a, cfg.p, wv, cell)),
        "norm_r_dual": _wnorm(rdh, pd, wv, cell) / (2 * _wnorm(a, pd, wv, cell)),
        "a1_r": float(np.max(_m(rh, fam) / (2 * cfg.N1_hat * rh))),
        "a1_r_dual": float(np.max(_m(rdh * wv, fam) / (2 * cfg.N2_hat * rdh * wv))),
    }
    return out


def dual_characteristic_crosscheck(w: Weight, p: float, fam: BallFamily) -> tuple:
    """([w^(1-p')]_{A_p'} directly, [w]_{A_p}^(1/(p-1)))."""
    pd = p / (p - 1)
    direct = ap_characteristic_values(w.values ** (1 - pd), w.domain, pd, fam)
    return direct, ap_characteristic(w, p, fam) ** (1.0 / (p - 1))


CERTIFICATES = ("identity", "average", "maximal")


def averaging_constant(lat: DyadicLattice, fam: BallFamily, lambda0: float, p0: float) -> float:
    """N0 for f = g_{|n}, valid for every weight with [w~]_{A_p0} <= lambda0 on the family.

    A cube inside a family ball with measure ratio C has dyadic A_p0 ratio at
    most C^p0 [w~]_{A_p0}; Hoelder on each cube then bounds the averaging
    operator on L_p0(w~) by C lambda0^(1/p0).
    """
    return comparison_constant(lat, fam) * lambda0 ** (1.0 / p0)


def transfer_check(pairs, w: Weight, cfg: RdFConfig, fam: BallFamily, certificate: str,
                   N0: float | None = None, tol: float = 1e-9, seeds=None) -> RatioReport:
    """Check ||f||_{L_p(w)} <= 4 N0 ||g||_{L_p(w)} on pairs with a certified hypothesis.

    For each pair the weight w~ is built from (g, |f|^(p-1)), the dual
    extremal of f; [w~]_{A_p0} <= Lambda_0 and the hypothesis
    ||f||_{L_p0(w~)} <= N0 ||g||_{L_p0(w~)} are both verified on it.  Only
    these constructed w~ are tested, not the whole class.
    """
    if certificate not in CERTIFICATES:
        raise PreconditionError(f"uncertified pair type {certificate!r}; use one of {CERTIFICATES}")
    pairs = list(pairs)
    if not pairs:
        raise ArgumentError("no pairs")
    if certificate == "identity":
        N0 = 1.0 if N0 is None else N0
    if N0 is None and certificate != "maximal":
        raise PreconditionError(f"certificate {certificate!r} needs N0")
    cell = fam.domain.cell_measure
    lam0 = cfg.lambda0
    built = []
    for i, (f, g) in enumerate(pairs):
        h = f.like(np.abs(f.values) ** (cfg.p - 1))
        wt = build_extrapolation_weight(g, h, w, cfg, fam)
        ap = ap_characteristic(wt, cfg.p0, fam)
        if ap > lam0 * (1 + tol):
            raise PreconditionError(f"pair {i}: [w~]_A_p0 = {ap:.6g} exceeds Lambda_0 = {lam0:.6g}")
        hyp = ratio(_wnorm(f.values, cfg.p0, wt.values, cell),
                    _wnorm(g.values, cfg.p0, wt.values, cell))
        built.append((ap, hyp))
    if N0 is None:
        # maximal pairs: N0 calibrated on the constructed weights
        N0 = max(1.0, max(hyp for _, hyp in built))
    for i, (_, hyp) in enumerate(built):
        if hyp > N0 * (1 + tol):
            raise PreconditionError(f"pair {i}: hypothesis ratio {hyp:.6g} exceeds N0 = {N0:.6g}")
    flags = []
    ratios = [ratio(_wnorm(f.values, cfg.p, w.values, cell),
                    4 * N0 * _wnorm(g.values, cfg.p, w.values, cell), flags, i)
              for i, (f, g) in enumerate(pairs)]
    return RatioReport(
        "extrapolation_transfer", seeds=list(seeds) if seeds is not None else list(range(len(pairs))),
        ratios=ratios, bound=1.0 + 1e-6, flags=flags,
        extra={"ap_tilde": [a for a, _ in built], "hypothesis_ratio": [h for _, h in built]},
        meta={"certificate": certificate, "N0": N0, "lambda0": lam0,
              "max_ap_tilde": max(a for a, _ in built),
              "weights_tested": "constructed extrapolation weights only"},
    )


def maximal_pairs(suite, fam: BallFamily) -> list:
    """(M g, g) with g = |member|."""
    out = []
    for g in suite:
        a = g.like(np.abs(g.values))
        out.append((a.like(ball_maximal_array(a.values, fam)), a))
    return out


def averaging_pairs(suite, lat: DyadicLattice, n: int) -> list:
    return [(g.like(lat.average(g.values, n)), g) for g in suite]


def dyadic_maximal_pairs(suite, lat: DyadicLattice) -> list:
    return [(g.like(dyadic_maximal_array(g.values, lat)), g) for g in suite]


def calibrate_config(pairs, w: Weight, p0: float, p: float, fam: BallFamily, K: int = 40) -> RdFConfig:
    """RdFConfig whose norms cover every g and dual extremal h met by ``pairs``."""
    pd = p / (p - 1)
    gs = [g for _, g in pairs]
    hs = [np.abs(f.values) ** (p - 1) for f, _ in pairs]
    n1 = calibrate_maximal_norm(gs, w, p, fam, iterates=K)
    n2 = calibrate_maximal_norm(hs, w, pd, fam, iterates=K, dual=True)
    return RdFConfig(p0, p, K, n1, n2)
