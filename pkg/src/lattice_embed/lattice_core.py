"""Square-lattice primitives: wavenumbers, directions, plane waves and dispersion roots.

A lattice plane wave ``s**m * q**n`` solves the 5-point discrete Helmholtz
equation iff ``s + 1/s + q + 1/q + k**2 - 4 = 0``.  A propagation direction
``(m, n)`` fixes the incidence parameter ``beta = m / n`` through
``beta = (s - 1/s) / (q - 1/q)``; together the two relations reduce to a
quartic in ``s`` whose four roots split into a propagating pair and an
evanescent pair.  :func:`solve_dispersion` returns the propagating root that
decays along the ray, which is the pair used everywhere else (Green's
function asymptotics, incident waves, directivity test waves).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Literal, NamedTuple

import numpy as np

from .errors import DiagnosticError, DomainError, InputError

__all__ = [
    "Wavenumber",
    "Site",
    "Direction",
    "WaveRoots",
    "as_direction",
    "dispersion_polynomial",
    "candidate_roots",
    "solve_dispersion",
    "plane_wave",
    "helmholtz_residual",
    "apply_embedding_operator",
]

PROPAGATING_BAND = 2.0 * math.sqrt(2.0)
DISPERSION_TOL = 1e-12
BETA_TOL = 1e-10


@dataclass(frozen=True)
class Wavenumber:
    """Dimensionless lattice wavenumber with strictly positive absorption."""

    value: complex

    def __post_init__(self) -> None:
        value = complex(self.value)
        object.__setattr__(self, "value", value)
        if not value.imag > 0.0:
            raise DomainError(f"wavenumber needs Im k > 0, got {value}")
        if not 0.0 < abs(value.real) < PROPAGATING_BAND:
            raise DomainError(
                f"|Re k| must lie in (0, 2*sqrt(2)) for propagating waves, got {value}"
            )

    @property
    def k2(self) -> complex:
        return self.value * self.value

    @property
    def c(self) -> complex:
        """Right-hand side ``4 - k**2`` of the dispersion relation."""
        return 4.0 - self.k2

    def with_imag(self, imag: float) -> "Wavenumber":
        return Wavenumber(complex(self.value.real, imag))


class Site(NamedTuple):
    m: int
    n: int


@dataclass(frozen=True)
class Direction:
    """Lattice ray through ``(m, n)``, reduced so that ``gcd(|m|, |n|) == 1``.

    The quadrant is kept: ``Direction(1, 2)`` and ``Direction(-1, -2)`` share
    ``beta`` but are different rays.
    """

    m: int
    n: int

    def __post_init__(self) -> None:
        m, n = int(self.m), int(self.n)
        if m == 0 and n == 0:
            raise DomainError("direction (0, 0) is undefined")
        g = math.gcd(abs(m), abs(n))
        object.__setattr__(self, "m", m // g)
        object.__setattr__(self, "n", n // g)

    @property
    def beta(self) -> float:
        if self.n == 0:
            return math.copysign(math.inf, self.m)
        return self.m / self.n

    @property
    def angle(self) -> float:
        """Polar angle of the ray measured from the ``m`` axis."""
        return math.atan2(self.n, self.m)

    def __neg__(self) -> "Direction":
        return Direction(-self.m, -self.n)

    def swapped(self) -> "Direction":
        return Direction(self.n, self.m)

    @classmethod
    def from_beta(cls, beta: float, lower: bool = False, max_denominator: int = 10**9) -> "Direction":
        """Ray with ``m/n = beta`` in the upper half plane (``n > 0``).

        ``beta = +-inf`` maps to ``(+-1, 0)``.  ``lower=True`` returns the
        opposite ray.
        """
        beta = float(beta)
        if math.isnan(beta):
            raise DomainError("beta is NaN")
        if math.isinf(beta):
            d = cls(1 if beta > 0 else -1, 0)
        else:
            frac = Fraction(beta).limit_denominator(max_denominator)
            d = cls(frac.numerator, frac.denominator)
        return -d if lower else d

    @classmethod
    def from_angle(cls, theta: float, max_denominator: int = 10**9) -> "Direction":
        """Ray at polar angle ``theta`` (``beta = cot(theta)``)."""
        c, s = math.cos(theta), math.sin(theta)
        if abs(s) < 1e-15:
            return cls(1 if c > 0 else -1, 0)
        if abs(c) < 1e-15:
            return cls(0, 1 if s > 0 else -1)
        return cls.from_beta(c / s, lower=s < 0, max_denominator=max_denominator)


def as_direction(obj: "Direction | float | tuple[int, int]") -> Direction:
    """Coerce a Direction, an ``(m, n)`` pair or a real ``beta`` (upper half plane)."""
    if isinstance(obj, Direction):
        return obj
    if isinstance(obj, tuple):
        return Direction(*obj)
    return Direction.from_beta(obj)


RootKind = Literal["outgoing", "incoming", "evanescent"]


@dataclass(frozen=True)
class WaveRoots:
    s: complex
    q: complex
    kind: RootKind
    beta: float

    def dispersion_residual(self, k: Wavenumber) -> float:
        s, q = self.s, self.q
        return abs(s + 1 / s + q + 1 / q + k.k2 - 4.0)

    def beta_residual(self) -> float:
        s, q, beta = self.s, self.q, self.beta
        if math.isinf(beta):
            return abs(q - 1 / q)
        return abs((s - 1 / s) - beta * (q - 1 / q))

    @property
    def f(self) -> complex:
        """``s + 1/s``, the quantity entering the modified-directivity factor."""
        return self.s + 1 / self.s


def dispersion_polynomial(beta: float, k: Wavenumber) -> np.ndarray:
    """Coefficients (highest first) of the quartic for ``s`` at finite ``beta``.

    ``(s**2 - 1)**2 = beta**2 * ((c*s - s**2 - 1)**2 - 4*s**2)`` with ``c = 4 - k**2``.
    """
    b2 = beta * beta
    c = k.c
    return np.array(
        [1.0 - b2, 2.0 * c * b2, -2.0 - b2 * (c * c - 2.0), 2.0 * c * b2, 1.0 - b2],
        dtype=complex,
    )


def _q_from_s(s: complex, beta: float, c: complex) -> complex:
    # q + 1/q = c - (s + 1/s) and q - 1/q = (s - 1/s) / beta
    return 0.5 * ((c - (s + 1 / s)) + (s - 1 / s) / beta)


def _q_pair(a: complex, c: complex) -> tuple[complex, complex]:
    # both roots of q + 1/q = c - a
    b = c - a
    r = np.sqrt(complex(b * b - 4.0))
    return 0.5 * (b + r), 0.5 * (b - r)


def _newton_polish(s: complex, q: complex, beta: float, c: complex, iters: int = 4) -> tuple[complex, complex]:
    for _ in range(iters):
        f1 = s + 1 / s + q + 1 / q - c
        f2 = (s - 1 / s) - beta * (q - 1 / q)
        j11, j12 = 1 - 1 / s**2, 1 - 1 / q**2
        j21, j22 = 1 + 1 / s**2, -beta * (1 + 1 / q**2)
        det = j11 * j22 - j12 * j21
        if det == 0:
            break
        ds = (f1 * j22 - f2 * j12) / det
        dq = (j11 * f2 - j21 * f1) / det
        s, q = s - ds, q - dq
        if abs(ds) + abs(dq) < 1e-16 * (abs(s) + abs(q)):
            break
    return s, q


def candidate_roots(direction: Direction, k: Wavenumber) -> list[tuple[complex, complex]]:
    """All dispersion pairs ``(s, q)`` compatible with the direction's ``beta``.

    Finite ``beta``: companion-matrix eigenvalues of the quartic, spurious
    ``s = 0`` / ``s = inf`` roots (leading coefficient vanishes at
    ``|beta| = 1``) dropped, then Newton-polished on the coupled system.
    ``beta = 0`` forces ``s = +-1``; ``beta = inf`` swaps the roles of s and q.
    """
    c = k.c
    if direction.n == 0:
        return [(q, s) for s, q in candidate_roots(Direction(0, 1), k)]
    if direction.m == 0:
        pairs = []
        for s in (1.0 + 0j, -1.0 + 0j):
            pairs.extend((s, q) for q in _q_pair(s + 1 / s, c))
        return pairs
    beta = direction.m / direction.n
    coeffs = dispersion_polynomial(beta, k)
    roots = np.roots(coeffs)
    pairs = []
    for s in roots:
        if abs(s) < 1e-8 or abs(s) > 1e8:
            continue
        s = complex(s)
        q = _q_from_s(s, beta, c)
        pairs.append(_newton_polish(s, q, beta, c))
    return pairs


def _distance_from_unit(s: complex, q: complex) -> float:
    return abs(math.log(abs(s))) + abs(math.log(abs(q)))


@lru_cache(maxsize=4096)
def _solve_dispersion_cached(m: int, n: int, k_value: complex) -> WaveRoots:
    direction = Direction(m, n)
    k = Wavenumber(k_value)
    pairs = candidate_roots(direction, k)
    half = candidate_roots(direction, k.with_imag(k.value.imag / 2.0))
    if not pairs or len(half) != len(pairs):
        raise DomainError(f"no propagating dispersion root for {direction} at k={k.value}")
    propagating = []
    for s, q in pairs:
        s2, q2 = min(half, key=lambda p: abs(p[0] - s) + abs(p[1] - q))
        d, d2 = _distance_from_unit(s, q), _distance_from_unit(s2, q2)
        # propagating roots approach the unit torus linearly in Im k
        if d2 < 0.75 * d or d < 1e-15:
            propagating.append((s, q))
    if len(propagating) != 2:
        raise DiagnosticError(
            f"ambiguous root classification for {direction} at k={k.value}: "
            f"{len(propagating)} propagating candidates among {pairs}"
        )
    # outgoing: the wave s**m q**n decays along the ray itself
    decay = [direction.m * math.log(abs(s)) + direction.n * math.log(abs(q)) for s, q in propagating]
    if abs(decay[0] - decay[1]) < 1e-14:
        raise DiagnosticError(f"cannot tell outgoing from incoming root for {direction}")
    s, q = propagating[int(np.argmin(decay))]
    roots = WaveRoots(s=s, q=q, kind="outgoing", beta=direction.beta)
    if roots.dispersion_residual(k) > DISPERSION_TOL or roots.beta_residual() > BETA_TOL:
        raise DiagnosticError(f"dispersion roots failed residual checks: {roots}")
    return roots


def solve_dispersion(direction: "Direction | float", k: Wavenumber) -> WaveRoots:
    """Outgoing propagating dispersion pair for ``direction``.

    Examples
    --------
    >>> k = Wavenumber(0.6 + 0.01j)
    >>> r = solve_dispersion(Direction(1, 1), k)
    >>> abs(r.s - r.q) < 1e-12
    True
    """
    d = as_direction(direction)
    return _solve_dispersion_cached(d.m, d.n, k.value)


def plane_wave(roots: WaveRoots, m, n, exponent_sign: int = -1):
    """``s**(sigma*m) * q**(sigma*n)``; vectorised over integer arrays ``m``, ``n``."""
    if exponent_sign not in (1, -1):
        raise InputError("exponent_sign must be +1 or -1")
    m = np.asarray(m)
    n = np.asarray(n)
    out = np.power(roots.s, exponent_sign * m) * np.power(roots.q, exponent_sign * n)
    return out[()] if out.ndim == 0 else out


Sampler = Callable[[int, int], complex]


def _sample(field: Sampler, m: int, n: int) -> complex:
    try:
        value = field(m, n)
    except (KeyError, IndexError) as exc:
        raise InputError(f"field undefined at site ({m}, {n})") from exc
    if value is None:
        raise InputError(f"field undefined at site ({m}, {n})")
    value = complex(value)
    if not np.isfinite(value):
        raise InputError(f"field undefined at site ({m}, {n})")
    return value


def helmholtz_residual(field: Sampler, site: Site, k: Wavenumber) -> complex:
    """``Delta[u] + k**2 u`` at ``site`` with the 5-point Laplacian."""
    m, n = site
    centre = _sample(field, m, n)
    ring = (
        _sample(field, m + 1, n)
        + _sample(field, m - 1, n)
        + _sample(field, m, n + 1)
        + _sample(field, m, n - 1)
    )
    return ring + (k.k2 - 4.0) * centre


def apply_embedding_operator(field: Sampler, site: Site, s_in: complex, order: str) -> complex:
    """Embedding operators that annihilate the incident wave ``s_in**(-m) ...``.

    ``H1[u] = u(m,n) - u(m-1,n)/s_in``;
    ``H2[u] = u(m+1,n) + u(m-1,n) - (s_in + 1/s_in) u(m,n)``.
    """
    m, n = site
    order = order.upper()
    if order == "H1":
        return _sample(field, m, n) - _sample(field, m - 1, n) / s_in
    if order == "H2":
        return (
            _sample(field, m + 1, n)
            + _sample(field, m - 1, n)
            - (s_in + 1 / s_in) * _sample(field, m, n)
        )
    raise InputError(f"unknown embedding operator {order!r}")
