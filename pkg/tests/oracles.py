"""Slow, loop-based reference implementations used to cross-check the library."""

from __future__ import annotations

import itertools

import numpy as np


def interval_ap_sup(w: np.ndarray, p: float, min_len: int = 1) -> float:
    """sup over all contiguous index intervals of (avg w)(avg w^(-1/(p-1)))^(p-1), 1-D."""
    a = np.concatenate([[0.0], np.cumsum(w)])
    b = np.concatenate([[0.0], np.cumsum(w ** (-1.0 / (p - 1)))])
    n = len(w)
    best = 0.0
    for length in range(min_len, n + 1):
        sw = (a[length:] - a[:-length]) / length
        sv = (b[length:] - b[:-length]) / length
        best = max(best, float((sw * sv ** (p - 1)).max()))
    return best


def ball_cells(shape, spacing, periodic, center, radius, dist):
    """List of index tuples at metric distance < radius from ``center``."""
    out = []
    for idx in itertools.product(*[range(n) for n in shape]):
        off = []
        for a, (i, c) in enumerate(zip(idx, center)):
            k = i - c
            if periodic:
                n = shape[a]
                k = (k + n // 2) % n - n // 2
            off.append(k * spacing[a])
        if dist(off) < radius:
            out.append(idx)
    return out


def family_ap(w: np.ndarray, p: float, domain, radii, stride=1) -> float:
    """max over every (center, radius) of the A_p expression, by explicit enumeration."""
    best = 0.0
    centers = itertools.product(*[range(0, n, stride) for n in w.shape])
    for c in centers:
        for r in radii:
            cells = ball_cells(w.shape, domain.spacing, domain.periodic, c, r,
                               lambda o: float(domain.distance(o)))
            vals = np.array([w[i] for i in cells])
            best = max(best, vals.mean() * np.mean(vals ** (-1 / (p - 1))) ** (p - 1))
    return best


def dyadic_cubes_1d(n_cells: int, levels):
    """(level, lo, hi) index intervals of the dyadic cubes on a 1-D grid."""
    for n in levels:
        size = n_cells >> n
        for k in range(2 ** n):
            yield n, k * size, (k + 1) * size


def dyadic_maximal_1d(f: np.ndarray, levels) -> np.ndarray:
    out = np.zeros(len(f))
    for _, lo, hi in dyadic_cubes_1d(len(f), levels):
        avg = np.abs(f[lo:hi]).mean()
        out[lo:hi] = np.maximum(out[lo:hi], avg)
    return out


def dyadic_sharp_1d(f: np.ndarray, levels) -> np.ndarray:
    out = np.zeros(len(f))
    for _, lo, hi in dyadic_cubes_1d(len(f), levels):
        seg = f[lo:hi]
        osc = np.abs(seg - seg.mean()).mean()
        out[lo:hi] = np.maximum(out[lo:hi], osc)
    return out


def stopping_time_1d(f: np.ndarray, levels, threshold: float) -> list:
    """Smallest level whose containing-cube average exceeds the threshold (None if never)."""
    n_cells = len(f)
    tau = [None] * n_cells
    for x in range(n_cells):
        for n in levels:
            size = n_cells >> n
            lo = (x // size) * size
            if f[lo:lo + size].mean() > threshold:
                tau[x] = n
                break
    return tau


def ball_maximal_1d(f: np.ndarray, h: float, radii, periodic: bool) -> np.ndarray:
    """max over family balls containing x of the average of |f|, by enumeration."""
    n = len(f)
    a = np.abs(f)
    out = np.zeros(n)
    for c in range(n):
        for r in radii:
            cells = []
            for i in range(n):
                k = i - c
                if periodic:
                    k = (k + n // 2) % n - n // 2
                if abs(k) * h < r:
                    cells.append(i)
            avg = a[cells].mean()
            out[cells] = np.maximum(out[cells], avg)
    return out


def mode_symbol_ratio(m: int, lam: float, a: float, k: float, nu: float) -> float:
    """a priori ratio for cos(k x + nu t), 1-D, constant coefficient, unit L2 norms.

    Every derivative of a single real mode has the same L2 norm up to the
    factor |k|^j, and the right-hand side is a mode with amplitude
    |(a k^{2m} + lam) + i nu|.
    """
    num = abs(nu) + sum(lam ** (1 - j / (2 * m)) * abs(k) ** j for j in range(2 * m + 1))
    return num / np.hypot(a * k ** (2 * m) + lam, nu)
