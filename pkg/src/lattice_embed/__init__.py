"""Plane-wave diffraction by Dirichlet obstacles on the square lattice.

The package solves the discrete Helmholtz scattering problem with boundary
algebraic equations, evaluates far-field directivities and checks the
embedding relations that rebuild every incidence from a few auxiliary ones.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigurationError,
    DiagnosticError,
    DomainError,
    InputError,
    LatticeError,
    NumericalError,
)
from .lattice_core import (  # noqa: E402
    Direction,
    Site,
    WaveRoots,
    Wavenumber,
    apply_embedding_operator,
    helmholtz_residual,
    plane_wave,
    solve_dispersion,
)
from .green import GreenTable, green, green_asymptotic, saddle_data  # noqa: E402
from .geometry import Obstacle, classify_boundary, enumerate_features, normal_derivative, read_obstacle  # noqa: E402
from .bae import (  # noqa: E402
    BaeSystem,
    ScatteringSolution,
    assemble_and_solve,
    directivity,
    oracle_grid_solve,
    reconstruct_field,
)
from .embedding import (  # noqa: E402
    DirectivityTable,
    EmbeddingBasis,
    build_basis,
    embed_directivity,
    modified_directivity,
    rank_probe,
    solve_coefficients,
    weak_embedding_field_check,
)
from .canonical import (  # noqa: E402
    edge_strong_embedding,
    halfplane_constants,
    halfplane_embedding,
    kernel_and_transforms,
    strip_embedding,
    wedge_embedding,
)

__all__ = [name for name in dir() if not name.startswith("_")]
