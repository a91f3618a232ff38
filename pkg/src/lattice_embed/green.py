"""Free-space lattice Green's function and its far-field asymptotics.

``G(m, n) = (1/2pi) * integral_0^{2pi} exp(i m theta) q(theta)**n / (q - 1/q) dtheta``
with ``s = exp(i theta)`` and ``q`` the root of the dispersion relation with
``|q| < 1``.  The periodic trapezoidal rule on ``M`` nodes is exactly an
inverse FFT of the sampled integrand, so one transform yields a whole row of
``m`` values.  The integrand is analytic in a strip whose width shrinks with
``Im k``, hence convergence is exponential but slow for weak absorption.
"""

from __future__ import annotations

import cmath
import logging
import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, NumericalError
from .lattice_core import Direction, Site, WaveRoots, Wavenumber, as_direction, solve_dispersion

logger = logging.getLogger(__name__)

__all__ = [
    "GreenTable",
    "SaddleData",
    "green",
    "saddle_data",
    "green_asymptotic",
    "far_field_green",
    "ASYMPTOTIC_PHASE",
]

BLOCK = 64
MIN_NODES = 1024
MAX_NODES = 2**20
# The leading saddle-point term carries a sign fixed by the steepest-descent
# orientation; calibrated once against quadrature along beta = 1 at N = 1000.
ASYMPTOTIC_PHASE = 1.0 + 0.0j


def _canonical(m, n):
    a = np.abs(np.asarray(m, dtype=np.int64))
    b = np.abs(np.asarray(n, dtype=np.int64))
    return np.maximum(a, b), np.minimum(a, b)


def _branch_q(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Root of ``q + 1/q = b`` with ``|q| <= 1`` and the value of ``q - 1/q``."""
    r = np.sqrt(b * b - 4.0)
    r = np.where(np.abs(b + r) >= np.abs(b - r), r, -r)
    q = 2.0 / (b + r)
    return q, -r


def _rows(k: Wavenumber, rows: np.ndarray, nodes: int) -> np.ndarray:
    """Trapezoidal values of ``G(., n)`` for every ``n`` in ``rows`` (shape rows x nodes)."""
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    b = k.c - 2.0 * np.cos(theta)
    q, qdiff = _branch_q(b)
    integrand = np.power(q[None, :], rows[:, None]) / qdiff[None, :]
    return np.fft.ifft(integrand, axis=1), np.max(np.abs(integrand), axis=1)


@dataclass
class GreenTable:
    """Memo of ``G`` values for one wavenumber.

    Keys are canonical displacements ``(p, r)`` with ``p >= r >= 0``; the
    lattice symmetries ``G(m,n) = G(-m,n) = G(m,-n) = G(n,m)`` map every
    displacement onto one key.  Every entry is computed from a node count that
    depends on the entry alone, so values do not depend on request order and
    concurrent fills agree bit for bit.
    """

    k: Wavenumber
    tol: float = 1e-13
    max_nodes: int = MAX_NODES
    cache: dict = field(default_factory=dict, repr=False)
    quadrature_nodes: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self.cache)

    def values(self, m, n) -> np.ndarray:
        """``G(m, n)`` for broadcastable integer arrays."""
        p, r = _canonical(m, n)
        shape = p.shape
        keys = list(zip(p.ravel().tolist(), r.ravel().tolist()))
        cache = self.cache
        missing = {key for key in keys if key not in cache}
        if missing:
            computed, nodes = self._compute(sorted(missing))
            with self._lock:
                for key, val in computed.items():
                    cache.setdefault(key, val)
                    self.quadrature_nodes.setdefault(key, nodes[key])
        out = np.fromiter((cache[key] for key in keys), dtype=complex, count=len(keys))
        return out.reshape(shape)

    def value(self, m: int, n: int) -> complex:
        return complex(self.values(m, n))

    def _compute(self, keys: list[tuple[int, int]]):
        by_block: dict[int, set] = {}
        for p, r in keys:
            by_block.setdefault(p // BLOCK, set()).add((p, r))
        result: dict = {}
        nodes_used: dict = {}
        for blk, entries in sorted(by_block.items()):
            nodes = max(MIN_NODES, 1 << math.ceil(math.log2(4 * BLOCK * (blk + 1))))
            pending = sorted(entries)
            prev = None
            while pending:
                if nodes > self.max_nodes:
                    worst = pending[:5]
                    raise NumericalError(
                        f"Green's function quadrature did not converge within {self.max_nodes} "
                        f"nodes at k={self.k.value}; unconverged entries include {worst}"
                    )
                rows = np.array(sorted({r for _, r in pending}), dtype=np.int64)
                row_index = {r: i for i, r in enumerate(rows.tolist())}
                table, scale = _rows(self.k, rows, nodes)
                current = {(p, r): table[row_index[r], p] for p, r in pending}
                if prev is not None:
                    still = []
                    for key in pending:
                        new, old = current[key], prev[key]
                        floor = 64.0 * np.finfo(float).eps * scale[row_index[key[1]]]
                        if abs(new - old) <= self.tol * abs(new) + floor:
                            result[key] = complex(new)
                            nodes_used[key] = nodes
                        else:
                            still.append(key)
                    pending = still
                prev = current
                nodes *= 2
        return result, nodes_used


def green(site: Site, k: Wavenumber, table: GreenTable) -> complex:
    """Free-space Green's function ``G(m, n)`` (unit source at the origin)."""
    if table.k != k:
        raise InputError(f"table built for k={table.k.value}, requested k={k.value}")
    m, n = site
    return table.value(m, n)


@dataclass(frozen=True)
class SaddleData:
    roots: WaveRoots
    phi_second: complex
    phi0: float


def _phi_second(roots: WaveRoots, direction: Direction) -> complex:
    """d^2/ds^2 of ``m~ log s + n~ log q(s)`` along the dispersion curve."""
    s, q = roots.s, roots.q
    norm = math.hypot(direction.m, direction.n)
    mt, nt = direction.m / norm, direction.n / norm
    qd = q - 1 / q
    dq = -q * (s - 1 / s) / (s * qd)
    numer_prime = mt * (1 + q**-2) * dq - nt * (1 + s**-2)
    return numer_prime / (s * qd)


def _canonical_direction(direction: Direction) -> tuple[Direction, bool]:
    a, b = abs(direction.m), abs(direction.n)
    if a > b:
        return Direction(b, a), True
    return Direction(a, b), False


def saddle_data(direction: "Direction | float", k: Wavenumber) -> SaddleData:
    """Saddle point of the Green's integral for rays with ``n >= 0``.

    Rays with ``|m| > |n|`` are mapped to the mirrored octant; the returned
    roots are always those of ``direction`` itself, while ``phi_second`` is
    taken in the frame where ``q - 1/q`` does not vanish.
    """
    d = as_direction(direction)
    roots = solve_dispersion(d, k)
    canon, swapped = _canonical_direction(d)
    croots = solve_dispersion(canon, k)
    phi2 = _phi_second(croots, canon)
    phi0 = (math.pi - cmath.phase(phi2)) / 2.0
    return SaddleData(roots=roots, phi_second=phi2, phi0=phi0)


def green_asymptotic(direction: "Direction | float", N: float, k: Wavenumber) -> complex:
    """Leading saddle-point term ``g`` at distance ``N`` along ``direction``.

    ``g = C * exp(N*phi) / (i * s (q - 1/q) * sqrt(2 pi N (-phi'')))`` evaluated
    in the canonical octant, where ``C`` is :data:`ASYMPTOTIC_PHASE`.
    """
    d = as_direction(direction)
    canon, _ = _canonical_direction(d)
    roots = solve_dispersion(canon, k)
    phi2 = _phi_second(roots, canon)
    norm = math.hypot(canon.m, canon.n)
    mt, nt = canon.m / norm, canon.n / norm
    s, q = roots.s, roots.q
    phase = cmath.exp(N * (mt * cmath.log(s) + nt * cmath.log(q)))
    prefactor = 1.0 / (1j * s * (q - 1 / q) * cmath.sqrt(2.0 * math.pi * N * (-phi2)))
    return ASYMPTOTIC_PHASE * phase * prefactor


def far_field_green(m: int, n: int, k: Wavenumber) -> complex:
    """``g(m, n)`` at an integer site (``N = sqrt(m**2 + n**2)``)."""
    return green_asymptotic(Direction(m, n), math.hypot(m, n), k)
