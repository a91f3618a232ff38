"""Boundary algebraic equations for Dirichlet obstacles on the lattice.

Green's identity in the exterior domain with the scattered field and the
free Green's function ``G^mu`` (source on the boundary) gives a dense system
for the boundary normal derivatives ``rho_nu = d_nu[u^sc]``::

    sum_nu G(nu - mu) rho_nu = -sum_nu d_nu[G^mu] u^in_nu,   mu on the boundary

and, for exterior ``mu``, the representation

    u^sc_mu = sum_nu (rho_nu G(nu - mu) + d_nu[G^mu] u^in_nu).

Replacing ``G`` by its far-field form gives the directivity
``S = sum_nu (rho_nu t_nu + d_nu[t] u^in_nu)`` with the outgoing test wave
``t = s**-m q**-n``.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field
from typing import Callable, Iterable, Union

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .errors import ConfigurationError, DomainError, NumericalError
from .geometry import Obstacle, classify_boundary
from .green import GreenTable
from .lattice_core import Direction, Site, WaveRoots, Wavenumber, as_direction, plane_wave, solve_dispersion

logger = logging.getLogger(__name__)

__all__ = [
    "BaeSystem",
    "ScatteringSolution",
    "GridField",
    "assemble_and_solve",
    "reconstruct_field",
    "directivity",
    "oracle_grid_solve",
    "point_source",
]

MAX_CONDITION = 1e12
RESIDUAL_TOL = 1e-10
# numpy and scipy each bundle OpenBLAS; concurrent calls from worker threads
# can exhaust its buffer pool and abort, so dense solves are serialised
_BLAS_LOCK = threading.Lock()

Incidence = Union[WaveRoots, Callable]


def _incident_sampler(incidence: Incidence, amplitude: complex = 1.0):
    if isinstance(incidence, WaveRoots):
        return lambda m, n: amplitude * plane_wave(incidence, m, n, -1)
    return lambda m, n: amplitude * np.asarray(incidence(m, n), dtype=complex)


def point_source(site: tuple, table: GreenTable) -> Callable:
    """Field ``G(. - site)`` of a unit point source, usable as an incidence."""
    m0, n0 = site
    return lambda m, n: table.values(np.asarray(m) - m0, np.asarray(n) - n0)


class BaeSystem:
    """Assembled and factorised boundary system for one obstacle and wavenumber.

    The matrix ``K`` depends only on the geometry, so one LU factorisation
    serves every incidence.
    """

    def __init__(self, obstacle: Obstacle, k: Wavenumber, table: GreenTable | None = None):
        self.obstacle = obstacle
        self.k = k
        self.table = table if table is not None else GreenTable(k)
        if self.table.k != k:
            raise ConfigurationError("Green table built for a different wavenumber")
        self.nodes = classify_boundary(obstacle, k)
        if not self.nodes:
            raise DomainError("obstacle has no boundary nodes")
        self.ordering = [node.site for node in self.nodes]
        self.sites = np.array(self.ordering, dtype=np.int64)
        stencil = sorted({s for node in self.nodes for s in node.weights})
        self.stencil_sites = np.array(stencil, dtype=np.int64)
        index = {s: j for j, s in enumerate(stencil)}
        W = np.zeros((len(self.nodes), len(stencil)), dtype=complex)
        for i, node in enumerate(self.nodes):
            for s, w in node.weights.items():
                W[i, index[s]] = w
        self.W = W
        self.K = self._green_matrix(self.sites, self.sites)
        # D[nu, mu] = d_nu[G^mu]
        self.D = W @ self._green_matrix(self.stencil_sites, self.sites)
        self._lu = scipy.linalg.lu_factor(self.K, check_finite=False)
        self.rcond = self._rcond()
        self.condition_estimate = np.inf if self.rcond == 0 else 1.0 / self.rcond
        if self.condition_estimate > MAX_CONDITION:
            raise NumericalError(
                f"boundary system for obstacle with bbox {obstacle.bbox} "
                f"({len(obstacle)} nodes) is ill-conditioned: cond ~ {self.condition_estimate:.3e}"
            )

    def _green_matrix(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        dm = rows[:, 0][:, None] - cols[:, 0][None, :]
        dn = rows[:, 1][:, None] - cols[:, 1][None, :]
        return self.table.values(dm, dn)

    def _rcond(self) -> float:
        gecon = scipy.linalg.get_lapack_funcs("gecon", (self.K,))
        anorm = np.linalg.norm(self.K, 1)
        rcond, info = gecon(self._lu[0], anorm, norm="1")
        if info != 0:
            raise NumericalError(f"condition estimate failed (info={info})")
        return float(rcond)

    def __len__(self) -> int:
        return len(self.nodes)

    def rhs(self, incident_boundary: np.ndarray) -> np.ndarray:
        return -(self.D.T @ incident_boundary)

    def solve(self, incidence: Incidence, amplitude: complex = 1.0) -> "ScatteringSolution":
        sampler = _incident_sampler(incidence, amplitude)
        u_b = np.asarray(sampler(self.sites[:, 0], self.sites[:, 1]), dtype=complex)
        F = self.rhs(u_b)
        with _BLAS_LOCK:
            rho = scipy.linalg.lu_solve(self._lu, F, check_finite=False)
            misfit = self.K @ rho - F
        scale = np.linalg.norm(F)
        if scale > 0:
            residual = np.linalg.norm(misfit) / scale
            if residual > RESIDUAL_TOL:
                raise NumericalError(f"boundary solve residual {residual:.3e} exceeds {RESIDUAL_TOL}")
        return ScatteringSolution(
            densities=rho,
            obstacle=self.obstacle,
            incidence=incidence,
            condition_estimate=self.condition_estimate,
            system=self,
            amplitude=amplitude,
            incident_boundary=u_b,
        )


@dataclass(frozen=True)
class ScatteringSolution:
    densities: np.ndarray
    obstacle: Obstacle
    incidence: Incidence
    condition_estimate: float
    system: BaeSystem = field(repr=False)
    amplitude: complex = 1.0
    incident_boundary: np.ndarray = field(default=None, repr=False)

    @property
    def k(self) -> Wavenumber:
        return self.system.k

    def incident(self, m, n):
        return _incident_sampler(self.incidence, self.amplitude)(m, n)


def assemble_and_solve(
    obstacle: Obstacle, incidence: Incidence, k: Wavenumber, table: GreenTable | None = None
) -> ScatteringSolution:
    """One-shot assembly, factorisation and solve."""
    return BaeSystem(obstacle, k, table).solve(incidence)


def reconstruct_field(solution: ScatteringSolution, sites) -> np.ndarray:
    """Scattered field at exterior sites; obstacle boundary nodes return ``-u^in``.

    ``sites`` is a single ``(m, n)`` pair or an ``(N, 2)`` array.
    """
    system = solution.system
    arr = np.atleast_2d(np.asarray(sites, dtype=np.int64))
    single = np.ndim(sites) == 1
    nodes = solution.obstacle.nodes
    boundary = set(system.ordering)
    on_obstacle = np.array([Site(int(m), int(n)) in nodes for m, n in arr], dtype=bool)
    for m, n in arr[on_obstacle]:
        if Site(int(m), int(n)) not in boundary:
            raise DomainError(f"site ({m}, {n}) lies inside the obstacle")
    out = np.empty(len(arr), dtype=complex)
    if on_obstacle.any():
        pts = arr[on_obstacle]
        out[on_obstacle] = -solution.incident(pts[:, 0], pts[:, 1])
    ext = arr[~on_obstacle]
    if len(ext):
        Gb = system._green_matrix(system.sites, ext)
        Gs = system._green_matrix(system.stencil_sites, ext)
        out[~on_obstacle] = solution.densities @ Gb + (solution.incident_boundary @ system.W) @ Gs
    return out[0] if single else out


def directivity(solution: ScatteringSolution, direction: "Direction | float") -> complex:
    """Far-field coefficient ``S`` with ``u^sc ~ g(m, n) S`` along ``direction``."""
    system = solution.system
    roots = solve_dispersion(as_direction(direction), system.k)
    t_b = plane_wave(roots, system.sites[:, 0], system.sites[:, 1], -1)
    t_s = plane_wave(roots, system.stencil_sites[:, 0], system.stencil_sites[:, 1], -1)
    return complex(solution.densities @ t_b + solution.incident_boundary @ (system.W @ t_s))


def directivities(solution: ScatteringSolution, directions: Iterable) -> np.ndarray:
    return np.array([directivity(solution, d) for d in directions], dtype=complex)


@dataclass(frozen=True)
class GridField:
    """Field on the box ``[m0, m0 + shape[0]) x [n0, n0 + shape[1])``."""

    m0: int
    n0: int
    values: np.ndarray

    def __call__(self, m, n):
        i = np.asarray(m) - self.m0
        j = np.asarray(n) - self.n0
        if np.any(i < 0) or np.any(j < 0) or np.any(i >= self.values.shape[0]) or np.any(j >= self.values.shape[1]):
            raise KeyError((m, n))
        return self.values[i, j]


def oracle_grid_solve(
    obstacle: "Obstacle | Iterable",
    incidence: Incidence,
    k: Wavenumber,
    box_radius: int,
    source: tuple | None = None,
) -> GridField:
    """Brute-force sparse solve of the scattering problem on a truncated box.

    The box is the obstacle's bounding box padded by ``box_radius`` sites on
    every side; the scattered field vanishes on the rim, which costs an error
    of order ``exp(-Im k * box_radius)``.  With ``source`` set, the incident
    field is ignored and the total field of a unit point source at ``source``
    is returned instead (the edge Green's function setting).
    """
    if box_radius < 5.0 / k.value.imag:
        raise ConfigurationError(
            f"box margin {box_radius} below 5/Im k = {5.0 / k.value.imag:.1f} lattice spacings"
        )
    nodes = set(obstacle.nodes) if isinstance(obstacle, Obstacle) else {Site(*s) for s in obstacle}
    if nodes:
        ms = [s.m for s in nodes]
        ns = [s.n for s in nodes]
        lo_m, lo_n, hi_m, hi_n = min(ms), min(ns), max(ms), max(ns)
    else:
        lo_m = lo_n = hi_m = hi_n = 0
    m0, n0 = lo_m - box_radius, lo_n - box_radius
    shape = (hi_m - lo_m + 2 * box_radius + 1, hi_n - lo_n + 2 * box_radius + 1)
    if not nodes and source is None:
        return GridField(m0, n0, np.zeros(shape, dtype=complex))
    mm, nn = np.meshgrid(np.arange(shape[0]) + m0, np.arange(shape[1]) + n0, indexing="ij")
    fixed = np.zeros(shape, dtype=bool)
    fixed[0, :] = fixed[-1, :] = fixed[:, 0] = fixed[:, -1] = True
    dirichlet = np.zeros(shape, dtype=complex)
    for s in nodes:
        fixed[s.m - m0, s.n - n0] = True
        if source is None:
            dirichlet[s.m - m0, s.n - n0] = -complex(_incident_sampler(incidence)(s.m, s.n))
    free = ~fixed
    index = -np.ones(shape, dtype=np.int64)
    index[free] = np.arange(free.sum())
    rows, cols, vals = [], [], []
    rhs = np.zeros(free.sum(), dtype=complex)
    fi, fj = np.nonzero(free)
    centre = index[fi, fj]
    rows.append(centre)
    cols.append(centre)
    vals.append(np.full(len(centre), k.k2 - 4.0, dtype=complex))
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = fi + di, fj + dj
        nb = index[ni, nj]
        inner = nb >= 0
        rows.append(centre[inner])
        cols.append(nb[inner])
        vals.append(np.ones(inner.sum(), dtype=complex))
        np.subtract.at(rhs, centre[~inner], dirichlet[ni[~inner], nj[~inner]])
    if source is not None:
        si, sj = source[0] - m0, source[1] - n0
        if not free[si, sj]:
            raise ConfigurationError(f"point source {source} sits on a Dirichlet node or the rim")
        rhs[index[si, sj]] += 1.0
    A = scipy.sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(len(rhs), len(rhs))
    )
    sol = scipy.sparse.linalg.spsolve(A, rhs)
    values = dirichlet.copy()
    values[free] = sol
    return GridField(m0, n0, values)
