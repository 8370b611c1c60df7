"""Weighted mixed L_{p,q} norms and the lambda-scaled derivative sums."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError
from .lattice import Domain, GridFunction
from .weights import Weight


@dataclass(frozen=True)
class MixedNormSpec:
    """Inner L_p over the ``split`` axes (x'), outer L_q over the rest (x'').

    ``w1`` lives on the x' sub-domain and ``w2`` on the x'' sub-domain; either
    may be None for the unit weight.
    """

    split: tuple
    p: float
    q: float
    w1: Weight | None = None
    w2: Weight | None = None

    def __post_init__(self):
        object.__setattr__(self, "split", tuple(sorted(int(a) for a in self.split)))
        for name in ("p", "q"):
            v = float(getattr(self, name))
            if not 1 < v < np.inf:
                raise ArgumentError(f"{name} must lie in (1, inf), got {v}")
            object.__setattr__(self, name, v)
        if not self.split:
            raise ArgumentError("split must name at least one axis")

    @classmethod
    def from_weight(cls, w: Weight, p: float, q: float) -> "MixedNormSpec":
        """Spec matching the product structure of ``w``."""
        if w.w1 is None:
            raise ArgumentError("weight has no product structure to split along")
        return cls(tuple(w.axes1), p, q, w.w1, w.w2)

    def to_json(self) -> dict:
        doc = {"split": list(self.split), "p": self.p, "q": self.q}
        if self.w1 is not None:
            doc["w1"] = self.w1.to_json()
        if self.w2 is not None:
            doc["w2"] = self.w2.to_json()
        return doc


def lp_norm(f: GridFunction, p: float, w: Weight | None = None) -> float:
    a = np.abs(f.values) ** p
    if w is not None:
        if w.domain != f.domain:
            raise ArgumentError("weight and function live on different domains")
        a = a * w.values
    return float(a.sum() * f.cell_measure) ** (1.0 / p)


def _factor(w: Weight | None, domain: Domain, axes: tuple, full_ndim: int) -> np.ndarray:
    """Weight factor as an array broadcastable against the full grid."""
    if w is None:
        return np.ones([1] * full_ndim)
    shape = [domain.points[a] for a in axes]
    if tuple(w.values.shape) != tuple(shape):
        raise ArgumentError(f"weight factor has shape {w.values.shape}, expected {tuple(shape)}")
    out_shape = [domain.points[a] if a in axes else 1 for a in range(full_ndim)]
    return w.values.reshape(out_shape)


def mixed_norm(f: GridFunction, spec: MixedNormSpec) -> float:
    dom = f.domain
    inner = spec.split
    if any(a < 0 or a >= dom.ndim for a in inner):
        raise ArgumentError(f"split {inner} does not fit a {dom.ndim}-axis grid")
    outer = tuple(a for a in range(dom.ndim) if a not in inner)
    if not outer:
        raise ArgumentError("split leaves no outer axes")
    h = dom.spacing
    w1 = _factor(spec.w1, dom, inner, dom.ndim)
    w2 = _factor(spec.w2, dom, outer, dom.ndim)
    cell1 = float(np.prod([h[a] for a in inner]))
    cell2 = float(np.prod([h[a] for a in outer]))
    inner_int = (np.abs(f.values) ** spec.p * w1).sum(axis=inner, keepdims=True) * cell1
    outer_int = (inner_int ** (spec.q / spec.p) * w2).sum() * cell2
    return float(outer_int) ** (1.0 / spec.q)


def multi_indices(ndim: int, order: int, axes: tuple | None = None) -> list:
    """All multi-indices of total order ``order`` over ``axes`` (as count tuples)."""
    axes = tuple(range(ndim)) if axes is None else tuple(axes)
    out = []

    def rec(i, left, cur):
        if i == len(axes) - 1:
            out.append(tuple(cur + [left]))
            return
        for k in range(left, -1, -1):
            rec(i + 1, left - k, cur + [k])

    if not axes:
        return [()] if order == 0 else []
    rec(0, order, [])
    return out


def lambda_scaled_sum(stack, lam: float, m: int, spec: MixedNormSpec) -> float:
    """||u_t|| + sum over |alpha| <= 2m of lam**(1 - |alpha|/2m) ||D^alpha u||.

    ``stack`` provides ``ut`` (None for stationary problems), ``spatial``
    (multi-index -> GridFunction) and ``indices(order)``; each multi-index
    is normed separately.
    """
    if lam < 1:
        raise ArgumentError("lambda must be >= 1")
    total = 0.0 if stack.ut is None else mixed_or_plain(stack.ut, spec)
    for order in range(2 * m + 1):
        for alpha in stack.indices(order):
            if alpha not in stack.spatial:
                raise ArgumentError(f"derivative {alpha} missing from stack")
            norm = mixed_or_plain(stack.spatial[alpha], spec)
            total += lam ** (1.0 - order / (2.0 * m)) * norm
    return total


def mixed_or_plain(f: GridFunction, spec: MixedNormSpec | None) -> float:
    """Mixed norm, or the plain L_2 norm when no spec is given."""
    if spec is None:
        return lp_norm(f, 2.0)
    if f.domain.ndim == 1:
        # a single axis has no outer block: only p = q is meaningful
        if spec.p != spec.q:
            raise ArgumentError("a one-axis grid cannot carry a mixed norm with p != q")
        w = None if spec.w1 is None else Weight(GridFunction(f.domain, spec.w1.values))
        return lp_norm(f, spec.p, w)
    return mixed_norm(f, spec)
