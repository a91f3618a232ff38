"""Closed-form embedding relations for the canonical lattice scatterers.

Half-plane, finite strip and right-angled wedge formulas express the
directivity for arbitrary incidence through one or two auxiliary
directivities.  The half-plane edge Green's function is described by four
branch points ``eta``; the transforms ``V-`` (analytic outside the unit
circle) and ``V+`` (analytic inside) are tied together by the kernel
``Upsilon``, which on the unit circle equals ``(q - 1/q)/2`` with ``|q| < 1``.

Semi-infinite geometries are never solved directly here; the helpers at the
bottom build truncated versions for near-edge consistency checks.
"""

from __future__ import annotations

import cmath
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DiagnosticError, DomainError, NumericalError
from .geometry import segment
from .green import GreenTable
from .lattice_core import Direction, Wavenumber, as_direction, solve_dispersion

logger = logging.getLogger(__name__)

__all__ = [
    "PoleError",
    "HalfPlaneConstants",
    "halfplane_constants",
    "kernel_and_transforms",
    "inverse_transform_minus",
    "hat_directivity",
    "halfplane_embedding",
    "strip_embedding",
    "wedge_embedding",
    "edge_strong_embedding",
    "edge_green_truncated",
    "edge_directivity_truncated",
]

IDENTITY_TOL = 1e-14
POLE_TOL = 1e-12
BRANCH_TOL = 1e-12

DirectivityFn = Callable[["Direction | float"], complex]


class PoleError(DomainError):
    """The evaluation direction sits on a geometrical-optics pole."""


@dataclass(frozen=True)
class HalfPlaneConstants:
    """Branch points of the half-plane kernel.

    ``sqrt_eta_o`` is the value of ``sqrt(eta_o1 * eta_o2)`` on the branch for
    which the kernel matches ``(q - 1/q)/2`` on the unit circle.
    """

    d1: complex
    d2: complex
    eta_o1: complex
    eta_i1: complex
    eta_o2: complex
    eta_i2: complex
    sqrt_eta_o: complex

    def identity_errors(self) -> dict:
        return {
            "product1": abs(self.eta_o1 * self.eta_i1 - 1.0),
            "product2": abs(self.eta_o2 * self.eta_i2 - 1.0),
            "sum1": abs(self.eta_o1 + self.eta_i1 + self.d1),
            "sum2": abs(self.eta_o2 + self.eta_i2 + self.d2),
        }


def _label(outer: complex, inner: complex) -> tuple[complex, complex]:
    # "o" roots lie outside the unit circle; the nominal labels flip for Re k**2 > 4
    if abs(outer) < 1.0:
        return inner, outer
    return outer, inner


def _kernel_on_circle(s: complex, k: Wavenumber) -> complex:
    b = k.c - (s + 1.0 / s)
    r = cmath.sqrt(b * b - 4.0)
    if abs(b + r) < abs(b - r):
        r = -r
    return -r / 2.0  # (q - 1/q)/2 with |q| <= 1


def halfplane_constants(k: Wavenumber) -> HalfPlaneConstants:
    """Branch points ``eta`` for the half-plane edge problem.

    The closed-form radicals use principal square roots.  Labels are swapped when
    the "outer" root lands inside the unit circle (this happens for
    ``Re k**2 > 4``), and the sign of ``sqrt(eta_o1 eta_o2)`` is fixed by the
    kernel value at ``s = 1``.
    """
    d1 = k.k2 - 2.0
    d2 = k.k2 - 6.0
    r1 = cmath.sqrt(4.0 - d1 * d1)
    r2 = cmath.sqrt(d2 * d2 - 4.0)
    eta_o1, eta_i1 = _label(-d1 / 2.0 - 0.5j * r1, -d1 / 2.0 + 0.5j * r1)
    eta_o2, eta_i2 = _label(-d2 / 2.0 + 0.5 * r2, -d2 / 2.0 - 0.5 * r2)
    root = cmath.sqrt(eta_o1 * eta_o2)
    trial = HalfPlaneConstants(d1, d2, eta_o1, eta_i1, eta_o2, eta_i2, root)
    if abs(_upsilon(1.0, trial) - _kernel_on_circle(1.0, k)) > BRANCH_TOL * (1 + abs(_kernel_on_circle(1.0, k))):
        root = -root
    const = HalfPlaneConstants(d1, d2, eta_o1, eta_i1, eta_o2, eta_i2, root)
    errors = const.identity_errors()
    worst = max(errors.values())
    if worst > IDENTITY_TOL * (1.0 + abs(d2)):
        raise DiagnosticError(f"eta identities violated at k={k.value}: {errors}")
    if abs(_upsilon(1.0, const) - _kernel_on_circle(1.0, k)) > BRANCH_TOL * (1 + abs(_kernel_on_circle(1.0, k))):
        raise DiagnosticError(f"no branch of sqrt(eta_o1 eta_o2) reproduces the kernel at k={k.value}")
    return const


def _r_inner(s, c: HalfPlaneConstants):
    # s * sqrt((1 - eta_i1/s)(1 - eta_i2/s)): analytic for |s| > max|eta_i|
    return s * np.sqrt(1.0 - c.eta_i1 / s) * np.sqrt(1.0 - c.eta_i2 / s)


def _r_outer(s, c: HalfPlaneConstants):
    # sqrt((s - eta_o1)(s - eta_o2)): analytic for |s| < min|eta_o|
    return c.sqrt_eta_o * np.sqrt(1.0 - s / c.eta_o1) * np.sqrt(1.0 - s / c.eta_o2)


def _upsilon(s, c: HalfPlaneConstants):
    return _r_outer(s, c) * _r_inner(s, c) / (2.0 * s)


def kernel_and_transforms(s, C1: complex, k: Wavenumber, constants: HalfPlaneConstants | None = None):
    """``(Upsilon(s), V-(s), V+(s), C2)`` for the edge Green's function.

    ``s`` may be an array.  ``C1 = v(0, 0)`` fixes the amplitude
    ``A = C1/2``; ``C2 = sqrt(eta_o1 eta_o2) C1``.
    """
    c = constants if constants is not None else halfplane_constants(k)
    s_arr = np.asarray(s, dtype=complex)
    for eta in (c.eta_o1, c.eta_o2, c.eta_i1, c.eta_i2):
        if np.any(np.abs(s_arr - eta) < BRANCH_TOL * max(1.0, abs(eta))):
            raise DomainError(f"s coincides with branch point {eta}")
    if np.any(s_arr == 0):
        raise DomainError("s = 0 is a pole of the kernel")
    A = C1 / 2.0
    r_in = _r_inner(s_arr, c)
    r_out = _r_outer(s_arr, c)
    upsilon = r_out * r_in / (2.0 * s_arr)
    v_minus = 2.0 * s_arr * A / r_in
    v_plus = A * r_out
    C2 = c.sqrt_eta_o * C1
    if np.ndim(s) == 0:
        return complex(upsilon), complex(v_minus), complex(v_plus), C2
    return upsilon, v_minus, v_plus, C2


def inverse_transform_minus(m: int, C1: complex, k: Wavenumber, tol: float = 1e-13, max_nodes: int = 2**20) -> complex:
    """``v(-m, 0)`` for ``m >= 0`` (the free side of the edge) from ``V-``.

    Trapezoidal quadrature on ``|s| = 1`` extracts the ``s**-m`` coefficient;
    nodes are doubled until successive values agree to ``tol``; the branch
    points approach the circle as ``Im k`` shrinks.
    """
    const = halfplane_constants(k)
    nodes = 256
    prev = None
    while nodes <= max_nodes:
        s = np.exp(2j * np.pi * np.arange(nodes) / nodes)
        _, v_minus, _, _ = kernel_and_transforms(s, C1, k, const)
        value = complex(np.mean(v_minus * s**m))
        if prev is not None and abs(value - prev) <= tol * max(abs(value), abs(C1)):
            return value
        prev = value
        nodes *= 2
    raise NumericalError(f"inverse transform of V- did not converge within {max_nodes} nodes at k={k.value}")


def _s(direction, k: Wavenumber) -> complex:
    return solve_dispersion(as_direction(direction), k).s


def _pole_factor(beta, beta_in, k: Wavenumber) -> complex:
    den = 1.0 - 1.0 / (_s(beta, k) * _s(beta_in, k))
    if abs(den) < POLE_TOL:
        raise PoleError(f"geometrical-optics pole at beta={beta}, beta_in={beta_in}")
    return den


def hat_directivity(S_value: complex, beta, beta_prime, k: Wavenumber) -> complex:
    """``S^(beta, beta') = (1 - (s_beta s_beta')**-1) S(beta, beta')``."""
    return (1.0 - 1.0 / (_s(beta, k) * _s(beta_prime, k))) * S_value


def halfplane_embedding(S_aux: DirectivityFn, beta, beta_in, beta1, k: Wavenumber) -> complex:
    """Half-plane directivity for incidence ``beta_in`` from one auxiliary incidence ``beta1``.

    ``S_aux(b)`` returns ``S(b, beta1)``.
    """
    num = hat_directivity(S_aux(beta), beta, beta1, k) * hat_directivity(S_aux(beta_in), beta_in, beta1, k)
    norm = hat_directivity(S_aux(beta1), beta1, beta1, k)
    if norm == 0:
        raise ConfigurationError(f"auxiliary directivity vanishes at beta1={beta1}")
    return num / (_pole_factor(beta, beta_in, k) * norm)


def _mirror(direction) -> Direction:
    d = as_direction(direction)
    return Direction(-d.m, d.n)


def _diagonal(direction) -> Direction:
    # reflection across m = -n, the symmetry line of the wedge; maps beta to 1/beta
    d = as_direction(direction)
    return Direction(-d.n, -d.m)


def strip_embedding(
    S_aux1: DirectivityFn,
    S_aux2: DirectivityFn | None,
    beta,
    beta_in,
    beta1,
    k: Wavenumber,
    beta2=None,
) -> complex:
    """Finite-strip directivity from auxiliary incidences ``beta1`` and ``beta2 = -beta1``.

    ``S_aux2`` may be ``None``, in which case the mirror relation
    ``S(b, beta2) = S(-b, beta1)`` supplies it from ``S_aux1``.
    """
    b1 = as_direction(beta1)
    b2 = _mirror(b1)
    if beta2 is not None and as_direction(beta2) != b2:
        raise ConfigurationError(f"strip formula needs beta2 = -beta1; got {beta2} for beta1 = {beta1}")
    if S_aux2 is None:
        S_aux2 = lambda b: S_aux1(_mirror(b))  # noqa: E731
    total = 0j
    for fn, bl in ((S_aux1, b1), (S_aux2, b2)):
        norm = hat_directivity(fn(bl), bl, bl, k)
        if norm == 0:
            raise ConfigurationError(f"auxiliary directivity vanishes at beta={bl.beta}")
        total += hat_directivity(fn(beta_in), beta_in, bl, k) / norm * hat_directivity(fn(beta), beta, bl, k)
    return total / _pole_factor(beta, beta_in, k)


def _factor(beta, beta_in, k: Wavenumber) -> complex:
    # shared with embedding.modified_directivity
    return solve_dispersion(as_direction(beta), k).f - solve_dispersion(as_direction(beta_in), k).f


def wedge_embedding(
    S_aux1: DirectivityFn,
    S_aux2: DirectivityFn,
    beta,
    beta_in,
    beta1,
    k: Wavenumber,
    beta2=None,
    reference_sign: bool = True,
) -> complex:
    """Right-angled wedge directivity from auxiliary incidences ``beta1`` and ``beta2 = 1/beta1``.

    The wedge occupies ``m >= 0, n = 0`` and ``m = 0, n <= 0``; ``beta2`` is
    the reflection of ``beta1`` across ``m = -n``.

    With ``reference_sign=True`` the relation is evaluated in its reference
    form; truncated-wedge solves show that this returns ``-S``, and
    ``reference_sign=False`` applies the corrected overall sign.
    """
    b1 = as_direction(beta1)
    b2 = _diagonal(b1)
    if beta2 is not None and as_direction(beta2) != b2:
        raise ConfigurationError(f"wedge formula needs beta2 = 1/beta1; got {beta2} for beta1 = {beta1}")

    def smod(fn, b, bl):
        return _factor(b, bl, k) * fn(b)

    base = smod(S_aux2, b1, b2)
    if base == 0:
        raise ConfigurationError(f"degenerate wedge basis: modified directivity vanishes at beta1={beta1}")
    num = smod(S_aux2, beta, b2) * smod(S_aux1, beta_in, b1) - smod(S_aux1, beta, b1) * smod(S_aux2, beta_in, b2)
    den = _factor(beta, beta_in, k) * base
    if abs(den) < POLE_TOL * abs(base):
        raise PoleError(f"factor vanishes at beta={beta}, beta_in={beta_in}")
    value = num / den
    return value if reference_sign else -value


def edge_strong_embedding(
    S_edge: DirectivityFn,
    beta,
    beta_in,
    k: Wavenumber,
    reference_prefactor: bool = True,
) -> complex:
    """Half-plane directivity from the edge Green's function directivity ``S_edge``.

    ``S_edge(b)`` is the far-field coefficient of the total field of a unit
    source at the edge.  The reference prefactor is ``-2 sqrt(eta_o1 eta_o2)``;
    truncated solves with this normalisation of ``S_edge`` match
    ``-sqrt(eta_o1 eta_o2)`` instead, selected by ``reference_prefactor=False``.
    """
    const = halfplane_constants(k)
    pref = -2.0 * const.sqrt_eta_o if reference_prefactor else -const.sqrt_eta_o
    return pref * S_edge(beta_in) * S_edge(beta) / _pole_factor(beta, beta_in, k)


def edge_green_truncated(k: Wavenumber, length: int = 401, table: GreenTable | None = None):
    """Edge Green's function of a truncated half-line.

    Dirichlet nodes ``(1..length, 0)`` with a unit source at ``(0, 0)``.
    Returns the BAE solution of the scattered part; the total field is the
    source's free Green's function plus the reconstruction.
    """
    from .bae import BaeSystem, point_source

    table = table if table is not None else GreenTable(k)
    system = BaeSystem(segment(length, (1, 0)), k, table)
    return system.solve(point_source((0, 0), table))


def edge_directivity_truncated(solution, direction) -> complex:
    """Far-field coefficient of the total edge field (free part contributes 1)."""
    from .bae import directivity

    return 1.0 + directivity(solution, direction)
