"""Seeded test-function suites.

Member ``i`` of a suite with seed ``s`` draws from ``default_rng([s, i])``,
so a member does not depend on the grid it is sampled on and refinement
studies compare the same function at two resolutions.
"""

from __future__ import annotations

import numpy as np

from .errors import ArgumentError
from .lattice import Domain, GridFunction


def member_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def smooth_bump(domain: Domain, center, radius: float) -> np.ndarray:
    """exp(1 - 1/(1 - r^2/R^2)) inside the Euclidean ball of radius R, 0 outside.

    Distances wrap on periodic domains.
    """
    r2 = np.zeros(domain.shape)
    for axis, x in enumerate(domain.mesh()):
        off = x - center[axis]
        if domain.periodic:
            L = domain.lengths[axis]
            off = (off + L / 2) % L - L / 2
        r2 = r2 + off ** 2
    s = r2 / radius ** 2
    out = np.zeros(domain.shape)
    inside = s < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return out


def bump_member(domain: Domain, rng: np.random.Generator, center, radius: float,
                modes: int = 6, mean_zero: bool = False) -> np.ndarray:
    """Random trigonometric polynomial on the scale of the support, times a bump."""
    mesh = domain.mesh()
    poly = np.full(domain.shape, rng.normal())
    for _ in range(modes):
        k = rng.integers(1, modes + 1, size=domain.ndim) * rng.integers(0, 2, size=domain.ndim)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal() / (1.0 + np.abs(k).sum())
        arg = sum(np.pi * kk * (x - c) / radius for kk, x, c in zip(k, mesh, center))
        poly = poly + amp * np.cos(arg + phase)
    bump = smooth_bump(domain, center, radius)
    f = poly * bump
    if mean_zero:
        f = f - bump * (f.sum() / bump.sum())
    return f


def bump_suite(domain: Domain, count: int, seed: int, center=None, radius: float | None = None,
               modes: int = 6, mean_zero: bool = False) -> list:
    """``count`` compactly supported functions on a common support ball."""
    if count < 1:
        raise ArgumentError("suite size must be positive")
    if center is None:
        center = [0.5 * (lo + hi) for lo, hi in domain.extents]
    if radius is None:
        radius = 0.25 * float(min(domain.lengths))
    return [GridFunction(domain, bump_member(domain, member_rng(seed, i), center, radius,
                                             modes, mean_zero))
            for i in range(count)]


def trig_member(domain: Domain, rng: np.random.Generator, modes: int = 4,
                constant: float = 0.0) -> np.ndarray:
    """Band-limited periodic polynomial with integer wavenumbers up to ``modes``."""
    mesh = domain.mesh()
    out = np.full(domain.shape, float(constant))
    for _ in range(modes):
        k = rng.integers(-modes, modes + 1, size=domain.ndim)
        phase = rng.uniform(0, 2 * np.pi)
        amp = rng.normal() / (1.0 + np.abs(k).sum())
        arg = sum(2 * np.pi * kk * (x - lo) / L
                  for kk, x, (lo, _), L in zip(k, mesh, domain.extents, domain.lengths))
        out = out + amp * np.cos(arg + phase)
    return out


def trig_suite(domain: Domain, count: int, seed: int, modes: int = 4,
               constant: float = 0.0) -> list:
    if count < 1:
        raise ArgumentError("suite size must be positive")
    return [GridFunction(domain, trig_member(domain, member_rng(seed, i), modes, constant))
            for i in range(count)]


def support_radius(f: GridFunction, center) -> float:
    """Smallest metric radius (wrapping on tori) whose ball around ``center`` holds supp f."""
    dom = f.domain
    nz = f.values != 0
    if not nz.any():
        return 0.0
    offs = []
    for axis, x in enumerate(dom.mesh()):
        off = x - center[axis]
        if dom.periodic:
            L = dom.lengths[axis]
            off = (off + L / 2) % L - L / 2
        offs.append(off[nz])
    return float(dom.distance(offs).max())
