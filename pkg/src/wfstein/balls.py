"""Discrete metric balls on a grid and the window sums / maxima over them.

A ball ``B(c, r)`` is the set of grid cells whose centers lie at metric
distance ``< r`` from the cell center ``c``.  On tori distances wrap; on
boxes balls are clipped to the domain and averages use the clipped measure.

Sums are accumulated without prefix-sum differences so that weights with a
large dynamic range (``|x|**3`` near the origin, say) keep full relative
accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from .errors import ArgumentError, CoverageError
from .lattice import Domain


def axis_window(domain: Domain, axis: int, radius: float) -> tuple:
    """Integer offset range [lo, hi] that can reach distance < radius on one axis."""
    n = domain.points[axis]
    h = domain.spacing[axis]
    probe = np.zeros(domain.ndim)
    # distance is monotone in |offset|; find the largest admissible offset
    reach = 0
    step = 1
    while True:
        probe[axis] = (reach + step) * h
        if reach + step <= n and float(domain.distance(list(probe))) < radius:
            reach += step
            step *= 2
        elif step > 1:
            step //= 2
        else:
            break
    if domain.periodic:
        lo, hi = -(n // 2), n - n // 2 - 1
        return max(-reach, lo), min(reach, hi)
    return -min(reach, n - 1), min(reach, n - 1)


def footprint(domain: Domain, radius: float) -> tuple:
    """(boolean footprint, per-axis offset ranges) of a ball of given radius."""
    if radius <= 0:
        raise ArgumentError("ball radius must be positive")
    return _footprint(domain, float(radius))


@lru_cache(maxsize=256)
def _footprint(domain: Domain, radius: float) -> tuple:
    ranges = [axis_window(domain, a, radius) for a in range(domain.ndim)]
    grids = np.meshgrid(*[np.arange(lo, hi + 1) * domain.spacing[a]
                          for a, (lo, hi) in enumerate(ranges)], indexing="ij")
    fp = domain.distance(grids) < radius
    fp.setflags(write=False)
    return fp, tuple(ranges)


def window_sum(values: np.ndarray, axis: int, lo: int, hi: int, periodic: bool) -> np.ndarray:
    """out[x] = sum of values[x + o] for o in [lo, hi] along one axis.

    Built from power-of-two block sums so no large partial sums are ever
    subtracted.
    """
    v = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    n = v.shape[0]
    width = hi - lo + 1
    idx = np.arange(lo, n + hi)
    if periodic:
        padded = v[idx % n]
    else:
        inside = (idx >= 0) & (idx < n)
        padded = v[np.clip(idx, 0, n - 1)]
        padded[~inside] = 0.0
    out = np.zeros_like(v)
    block, size, offset, remaining = padded, 1, 0, width
    while remaining:
        if remaining & 1:
            out += block[offset:offset + n]
            offset += size
        remaining >>= 1
        if remaining:
            block = block[:-size] + block[size:]
            size *= 2
    return np.moveaxis(out, 0, axis)


def _origin(ranges) -> list:
    # ndimage places footprint index i at offset i - size//2 - origin
    return [-((hi - lo + 1) // 2) - lo for lo, hi in ranges]


def ball_sum(values: np.ndarray, domain: Domain, radius: float) -> np.ndarray:
    """S[c] = sum over the ball B(c, radius) of values."""
    fp, ranges = footprint(domain, radius)
    if fp.all():
        out = np.asarray(values, dtype=float)
        for axis, (lo, hi) in enumerate(ranges):
            out = window_sum(out, axis, lo, hi, bool(domain.periodic))
        return out
    origin = _origin(ranges)
    return ndimage.correlate(np.asarray(values, dtype=float), fp.astype(float),
                             mode="wrap" if domain.periodic else "constant", cval=0.0,
                             origin=origin)


def ball_max(values: np.ndarray, domain: Domain, radius: float) -> np.ndarray:
    """out[x] = max of values[c] over centers c whose ball B(c, radius) contains x."""
    fp, ranges = footprint(domain, radius)
    mode = "wrap" if domain.periodic else "constant"
    origin = _origin(ranges)
    # the reflected footprint equals the footprint (metric balls are symmetric)
    if fp.all():
        return ndimage.maximum_filter(values, size=fp.shape, mode=mode, cval=-np.inf,
                                      origin=origin)
    return ndimage.maximum_filter(values, footprint=fp, mode=mode, cval=-np.inf,
                                  origin=origin)


def ball_mask(domain: Domain, center: tuple, radius: float) -> np.ndarray:
    """Boolean mask of the cells in B(center, radius)."""
    offsets = []
    for axis, c in enumerate(center):
        idx = np.arange(domain.points[axis]) - c
        if domain.periodic:
            n = domain.points[axis]
            idx = (idx + n // 2) % n - n // 2
        offsets.append(idx * domain.spacing[axis])
    grids = np.meshgrid(*offsets, indexing="ij")
    return domain.distance(grids) < radius


@dataclass(frozen=True)
class BallFamily:
    """Finite family of balls: every ``stride``-th grid point times radii r0*2**k."""

    domain: Domain
    radii: tuple
    stride: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        radii = tuple(float(r) for r in self.radii)
        object.__setattr__(self, "radii", radii)
        if any(r <= 0 for r in radii):
            raise ArgumentError("radii must be positive")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise ArgumentError("radii must be increasing")
        if self.stride < 1:
            raise ArgumentError("stride must be a positive integer")

    @classmethod
    def geometric(cls, domain: Domain, r0: float, K: int, stride: int = 1) -> "BallFamily":
        return cls(domain, tuple(r0 * 2.0 ** k for k in range(K + 1)), stride)

    @classmethod
    def covering(cls, domain: Domain, r0: float | None = None, stride: int = 1) -> "BallFamily":
        """Geometric family from r0 (default one cell) until a ball covers the domain."""
        if r0 is None:
            r0 = float(domain.distance(list(domain.spacing))) * 1.0000001
        diam = float(domain.distance(list(domain.lengths)))
        K = 0
        while r0 * 2.0 ** K <= diam:
            K += 1
        return cls.geometric(domain, r0, K, stride)

    @property
    def centers(self) -> np.ndarray:
        mask = np.zeros(self.domain.shape, dtype=bool)
        mask[tuple(slice(None, None, self.stride) for _ in self.domain.shape)] = True
        return mask

    def is_empty(self) -> bool:
        return not self.radii or not self.centers.any()

    def counts(self, radius: float) -> np.ndarray:
        key = ("counts", radius)
        if key not in self._cache:
            self._cache[key] = np.rint(ball_sum(np.ones(self.domain.shape), self.domain, radius))
        return self._cache[key]

    def averages(self, values: np.ndarray, radius: float, weight=None) -> np.ndarray:
        """Ball averages at every grid point used as a center (dmu or w dmu)."""
        if weight is None:
            return ball_sum(values, self.domain, radius) / self.counts(radius)
        return ball_sum(values * weight, self.domain, radius) / ball_sum(weight, self.domain, radius)

    def sup_over_containing(self, per_center: np.ndarray, radius: float) -> np.ndarray:
        """max over family centers c with x in B(c, radius) of per_center[c]."""
        masked = np.where(self.centers, per_center, -np.inf)
        return ball_max(masked, self.domain, radius)

    def covered(self) -> np.ndarray:
        if self.is_empty():
            return np.zeros(self.domain.shape, dtype=bool)
        hit = self.sup_over_containing(np.ones(self.domain.shape), self.radii[-1])
        return hit > 0

    def require_coverage(self):
        if self.is_empty():
            raise CoverageError("ball family is empty")
        missing = ~self.covered()
        if missing.any():
            first = tuple(int(i) for i in np.argwhere(missing)[0])
            raise CoverageError(f"{int(missing.sum())} grid points lie in no family ball, e.g. {first}")

    def ball_mask(self, center: tuple, radius: float) -> np.ndarray:
        return ball_mask(self.domain, center, radius)

    def to_json(self) -> dict:
        return {"radii": list(self.radii), "stride": self.stride}
