"""Modified directivities, the general embedding formula and rank probing.

The modified directivity ``S~(b, b_in) = (f(s_b) - f(s_in)) S(b, b_in)`` with
``f(s) = s + 1/s`` is antisymmetric for reciprocal data.  For an obstacle
with ``N`` defect sites the map ``b_in -> S~(., b_in)`` spans an
``N``-dimensional space, so ``N`` auxiliary incidences determine every other
one::

    S~(b, b_in) = sum_l A_l(b_in) S~(b, b_l),
    -S~(b_in, b_p) = sum_l A_l S~(b_p, b_l),   p = 1..N.
"""

from __future__ import annotations

import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg

from .bae import BaeSystem, ScatteringSolution, directivity, reconstruct_field
from .errors import ConfigurationError, DiagnosticError, InputError, NumericalError
from .geometry import Obstacle, enumerate_features
from .green import GreenTable
from .lattice_core import Direction, Site, Wavenumber, as_direction, solve_dispersion

logger = logging.getLogger(__name__)

__all__ = [
    "FACTOR_ZERO_TOL",
    "RANK_THRESHOLD",
    "embedding_factor",
    "modified_directivity",
    "DirectivityTable",
    "directivity_table",
    "EmbeddingBasis",
    "build_basis",
    "solve_coefficients",
    "embed_directivity",
    "singular_values",
    "rank_probe",
    "probe_directions",
    "probe_matrix",
    "default_betas",
    "weak_embedding_field_check",
    "angle_grid",
]

FACTOR_ZERO_TOL = 1e-6
RANK_THRESHOLD = 5e-5
ANTISYMMETRY_TOL = 1e-6
# offset keeps probe angles off the lattice symmetry lines
PROBE_OFFSET = 0.0123


def embedding_factor(beta, beta_in, k: Wavenumber) -> complex:
    """``s_b + 1/s_b - s_in - 1/s_in``."""
    return solve_dispersion(as_direction(beta), k).f - solve_dispersion(as_direction(beta_in), k).f


def modified_directivity(S: complex, beta, beta_in, k: Wavenumber) -> complex:
    if as_direction(beta) == as_direction(beta_in):
        return 0j
    return embedding_factor(beta, beta_in, k) * S


def angle_grid(count: int, start: float = 0.0, stop: float = 2 * math.pi) -> list:
    """Observation directions at angles ``start + (stop - start) j / count``."""
    if count < 1:
        raise InputError("observation count must be at least 1")
    return [Direction.from_angle(start + (stop - start) * j / count) for j in range(count)]


def _map(fn, items, threads: int):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class DirectivityTable:
    """``values[i, j] = S(observations[i], incidences[j])``.

    Tables produced by :func:`embed_directivity` also carry the modified
    directivities and a per-entry flag for factor-zero points whose ``S`` was
    filled in from neighbouring observations.
    """

    incidences: tuple
    observations: tuple
    values: np.ndarray
    k: Wavenumber
    obstacle: Obstacle | None = None
    modified: np.ndarray | None = None
    flags: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.values.shape != (len(self.observations), len(self.incidences)):
            raise InputError("directivity table shape does not match its axes")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("directivity table contains non-finite entries")
        angles = [d.angle for d in self.observations]
        if len(set(self.observations)) != len(self.observations) or angles != sorted(angles):
            raise InputError("observation grid must be sorted by angle and free of duplicates")

    def column(self, incidence) -> np.ndarray:
        d = as_direction(incidence)
        try:
            j = self.incidences.index(d)
        except ValueError:
            raise InputError(f"no data for incidence {d}") from None
        return self.values[:, j]


def _sorted_observations(observations: Iterable) -> tuple:
    unique = {as_direction(o) for o in observations}
    return tuple(sorted(unique, key=lambda d: d.angle))


def directivity_table(
    system: BaeSystem, incidences: Iterable, observations: Iterable, threads: int = 1
) -> DirectivityTable:
    """Solve every incidence on an assembled system and sample ``S`` on a grid."""
    incs = tuple(as_direction(b) for b in incidences)
    obs = _sorted_observations(observations)
    k = system.k

    def column(inc):
        sol = system.solve(solve_dispersion(inc, k))
        return [directivity(sol, o) for o in obs]

    cols = _map(column, incs, threads)
    values = np.array(cols, dtype=complex).T.reshape(len(obs), len(incs))
    return DirectivityTable(incs, obs, values, k, system.obstacle)


@dataclass(frozen=True)
class EmbeddingBasis:
    betas: tuple
    s_roots: np.ndarray
    Smod: np.ndarray
    count_N: int
    k: Wavenumber
    solutions: tuple = field(default=(), repr=False)
    system: BaeSystem | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return len(self.betas)

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.Smod))

    def antisymmetry_error(self) -> float:
        scale = max(np.max(np.abs(self.Smod)), 1e-300)
        return float(np.max(np.abs(self.Smod + self.Smod.T)) / scale)


def build_basis(
    obstacle: Obstacle,
    betas: Sequence,
    k: Wavenumber,
    override: bool = False,
    table: GreenTable | None = None,
    system: BaeSystem | None = None,
    threads: int = 1,
) -> EmbeddingBasis:
    """Solve the auxiliary problems and fill ``Smod[p, l] = S~(b_p, b_l)``."""
    dirs = tuple(as_direction(b) for b in betas)
    if len(set(dirs)) != len(dirs):
        raise ConfigurationError(f"auxiliary incidences must be distinct; got {[d.beta for d in dirs]}")
    count_N = enumerate_features(obstacle, k).count_N
    if len(dirs) != count_N:
        if not override:
            raise ConfigurationError(f"obstacle needs {count_N} auxiliary incidences, {len(dirs)} given")
        warnings.warn(f"basis size {len(dirs)} differs from feature count {count_N}", stacklevel=2)
    system = system if system is not None else BaeSystem(obstacle, k, table)
    solutions = tuple(_map(lambda d: system.solve(solve_dispersion(d, k)), dirs, threads))
    n = len(dirs)
    Smod = np.zeros((n, n), dtype=complex)
    for p in range(n):
        for l in range(n):
            if p != l:
                Smod[p, l] = modified_directivity(directivity(solutions[l], dirs[p]), dirs[p], dirs[l], k)
    basis = EmbeddingBasis(
        betas=dirs,
        s_roots=np.array([solve_dispersion(d, k).s for d in dirs]),
        Smod=Smod,
        count_N=count_N,
        k=k,
        solutions=solutions,
        system=system,
    )
    err = basis.antisymmetry_error()
    if err > ANTISYMMETRY_TOL:
        raise DiagnosticError(f"modified directivity matrix is not antisymmetric (relative error {err:.3e})")
    logger.info("basis of %d incidences, cond(Smod) = %.3e", n, basis.condition)
    return basis


def solve_coefficients(basis: EmbeddingBasis, beta_in, smod_in: np.ndarray | None = None) -> np.ndarray:
    """Coefficients ``A`` of the embedding formula for incidence ``beta_in``.

    ``smod_in[p] = S~(beta_in, b_p)``; by default it is computed from the
    stored auxiliary solutions.
    """
    b_in = as_direction(beta_in)
    if smod_in is None:
        if not basis.solutions:
            raise InputError("basis carries no auxiliary solutions; pass smod_in")
        smod_in = np.array(
            [
                modified_directivity(directivity(sol, b_in), b_in, bp, basis.k)
                for sol, bp in zip(basis.solutions, basis.betas)
            ]
        )
    smod_in = np.asarray(smod_in, dtype=complex)
    if smod_in.shape != (basis.N,):
        raise InputError(f"expected {basis.N} modified directivities, got shape {smod_in.shape}")
    try:
        lu = scipy.linalg.lu_factor(basis.Smod, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise NumericalError(f"cannot factorise basis {[d.beta for d in basis.betas]}: {exc}") from exc
    if np.any(np.diag(lu[0]) == 0):
        raise NumericalError(f"singular embedding system for basis {[d.beta for d in basis.betas]}")
    return scipy.linalg.lu_solve(lu, -smod_in)


def _fill_flagged(values: np.ndarray, flags: np.ndarray, angles: np.ndarray) -> np.ndarray:
    out = values.copy()
    good = np.flatnonzero(~flags)
    if len(good) == 0:
        raise NumericalError("every observation point sits on a factor zero")
    for i in np.flatnonzero(flags):
        left = good[good < i]
        right = good[good > i]
        if len(left) and len(right):
            a, b = left[-1], right[0]
            w = (angles[i] - angles[a]) / (angles[b] - angles[a])
            out[i] = (1 - w) * values[a] + w * values[b]
        else:
            out[i] = values[left[-1] if len(left) else right[0]]
    return out


def embed_directivity(
    basis: EmbeddingBasis,
    A: np.ndarray,
    observations: Iterable,
    auxiliary: DirectivityTable,
    beta_in,
) -> DirectivityTable:
    """Embedded ``S~`` and recovered ``S`` on an observation grid.

    Points where ``|factor| < 1e-6`` are flagged and ``S`` there is
    interpolated (or extended one-sidedly) from neighbouring grid points.
    """
    k = basis.k
    b_in = as_direction(beta_in)
    obs = _sorted_observations(observations)
    cols = []
    for bl in basis.betas:
        if bl not in auxiliary.incidences:
            raise InputError(f"auxiliary table lacks incidence {bl}")
        col = auxiliary.column(bl)
        lookup = dict(zip(auxiliary.observations, col))
        missing = [o for o in obs if o not in lookup]
        if missing:
            raise InputError(f"auxiliary table lacks observations {missing[:3]}")
        cols.append([modified_directivity(lookup[o], o, bl, k) for o in obs])
    aux_mod = np.array(cols, dtype=complex).T.reshape(len(obs), basis.N)
    smod = aux_mod @ np.asarray(A, dtype=complex)
    factor = np.array([embedding_factor(o, b_in, k) for o in obs])
    flags = np.abs(factor) < FACTOR_ZERO_TOL
    raw = np.where(flags, 0j, smod / np.where(flags, 1.0, factor))
    S = _fill_flagged(raw, flags, np.array([o.angle for o in obs])) if flags.any() else raw
    return DirectivityTable(
        incidences=(b_in,),
        observations=obs,
        values=S[:, None],
        k=k,
        obstacle=auxiliary.obstacle,
        modified=smod[:, None],
        flags=flags[:, None],
    )


def singular_values(matrix: np.ndarray) -> np.ndarray:
    try:
        return scipy.linalg.svd(np.asarray(matrix, dtype=complex), compute_uv=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"SVD failed: {exc}") from exc


def rank_probe(matrix: np.ndarray, threshold: float = RANK_THRESHOLD) -> int:
    """Number of singular values above an absolute ``threshold``."""
    if threshold <= 0:
        raise ConfigurationError("rank threshold must be positive")
    matrix = np.atleast_2d(matrix)
    if matrix.size == 0:
        raise InputError("rank probe needs a non-empty matrix")
    return int(np.sum(singular_values(matrix) > threshold))


def probe_directions(M: int, offset: float = PROBE_OFFSET) -> list:
    """``M`` directions at angles ``(i + 1/2) pi / (2M) + offset``."""
    return [Direction.from_angle((i + 0.5) / M * math.pi / 2 + offset) for i in range(M)]


def default_betas(N: int, offset: float = PROBE_OFFSET) -> list:
    """Default auxiliary incidences: cotangents of offset equispaced angles in (0, pi/2).

    The offset breaks the pairing ``theta <-> pi/2 - theta`` that would make
    ``b`` and ``1/b`` both appear for symmetric grids.
    """
    return [d.beta for d in probe_directions(N, offset)]


def probe_matrix(system: BaeSystem, directions: Sequence, threads: int = 1) -> np.ndarray:
    """``M x M`` matrix of ``S~(d_p, d_l)`` over probe directions."""
    dirs = [as_direction(d) for d in directions]
    k = system.k
    sols = _map(lambda d: system.solve(solve_dispersion(d, k)), dirs, threads)
    M = len(dirs)
    out = np.zeros((M, M), dtype=complex)
    for l, sol in enumerate(sols):
        for p, d in enumerate(dirs):
            if p != l:
                out[p, l] = modified_directivity(directivity(sol, d), d, dirs[l], k)
    return out


def _total_field(solution: ScatteringSolution):
    nodes = solution.obstacle.nodes

    def sample(m: int, n: int) -> complex:
        if Site(m, n) in nodes:
            return 0j
        return complex(solution.incident(m, n) + reconstruct_field(solution, (m, n)))

    return sample


def _h2(sample, site, s_in: complex) -> complex:
    m, n = site
    return sample(m + 1, n) + sample(m - 1, n) - (s_in + 1.0 / s_in) * sample(m, n)


def weak_embedding_field_check(
    basis: EmbeddingBasis,
    A: np.ndarray,
    solution_in: ScatteringSolution,
    beta_in,
    sites: Iterable,
) -> float:
    """Max of ``|H2[u] - sum_l A_l H2_l[u_l]|`` over exterior ``sites`` (total fields).

    Each operator uses the root of its own field's incidence, so that it
    annihilates that incident wave; ``H2_l[u_l]`` then radiates with
    far-field coefficient ``S~(., b_l)``.
    """
    k = basis.k
    s_in = solve_dispersion(as_direction(beta_in), k).s
    main = _total_field(solution_in)
    aux = [(_total_field(sol), s) for sol, s in zip(basis.solutions, basis.s_roots)]
    worst = 0.0
    for site in sites:
        site = Site(*site)
        if site in solution_in.obstacle.nodes:
            raise InputError(f"sample site {tuple(site)} lies on the obstacle")
        value = _h2(main, site, s_in) - sum(a * _h2(f, site, s) for a, (f, s) in zip(A, aux))
        worst = max(worst, abs(value))
    return worst
